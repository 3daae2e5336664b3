//! End-to-end runs of the `netalign` binary.

use std::path::Path;
use std::process::{Command, Output};

use netalign::align::AlignmentResult;
use netalign::graph::{watts_strogatz, write_edge_list};
use netalign::synthetic::rotation_fixture;

fn netalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netalign")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(netalign(&[]).status.code(), Some(1));
    assert_eq!(netalign(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(netalign(&["perturb", "g.txt", "--noise", "lots", "-o", "a,b"]).status.code(), Some(1));
    assert_eq!(netalign(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_values_exit_1_and_io_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g.txt");
    write_edge_list(&watts_strogatz(20, 4, 0.1, 1).unwrap(), &g).unwrap();
    let out = tmp.path().join("o");
    let pair = format!("{},{}", s(&out.with_extension("g")), s(&out.with_extension("t")));

    let r = netalign(&["perturb", s(&g), "--noise", "1.5", "-o", &pair]);
    assert_eq!(r.status.code(), Some(1), "{}", String::from_utf8_lossy(&r.stderr));
    let r = netalign(&["perturb", s(&tmp.path().join("missing.txt")), "--noise", "0.1", "-o", &pair]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!r.stderr.is_empty());

    std::fs::write(tmp.path().join("bad.txt"), "a b c d\n").unwrap();
    let r = netalign(&["stats", s(&tmp.path().join("bad.txt"))]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn divergent_training_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let (x1, x2, _) = rotation_fixture(40, 4, 1);
    let (p1, p2) = (tmp.path().join("x1.txt"), tmp.path().join("x2.txt"));
    x1.write(&p1).unwrap();
    x2.write(&p2).unwrap();
    let pair = format!("{},{}", s(&tmp.path().join("c.json")), s(&tmp.path().join("t.log")));
    let r = netalign(&["train", s(&p1), s(&p2), "-o", &pair, "--epochs", "50", "--lr", "1e200"]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn train_align_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (x1, x2, truth) = rotation_fixture(60, 4, 9);
    let p = |n: &str| tmp.path().join(n);
    x1.write(p("x1.txt")).unwrap();
    // aligning a matrix with itself needs no training
    x1.write(p("x1b.txt")).unwrap();
    x2.write(p("x2.txt")).unwrap();
    truth.write(p("truth.tsv")).unwrap();

    let pair = format!("{},{}", s(&p("c.json")), s(&p("t.log")));
    let r = netalign(&["train", s(&p("x1.txt")), s(&p("x1b.txt")), "-o", &pair, "--epochs", "0"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));

    for dir in ["best", "1to2", "2to1"] {
        let out = p(&format!("a_{dir}.tsv"));
        let r = netalign(&["align", s(&p("c.json")), s(&p("x1.txt")), s(&p("x1b.txt")), "-o", s(&out), "--direction", dir]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let a = AlignmentResult::read(&out).unwrap();
        assert_eq!(a.len(), 60);
        let want = if dir == "2to1" { "2to1" } else { "1to2" };
        assert_eq!(a.direction.to_string(), want);
    }
    // identity init maps noise-free copies exactly
    let r = netalign(&["eval", s(&p("a_best.tsv")), s(&p("truth.tsv"))]);
    assert!(r.status.success());
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("accuracy\t1"), "{text}");

    let r = netalign(&["pca", s(&p("x2.txt")), "-k", "3", "-o", s(&p("pca.tsv"))]);
    assert!(r.status.success());
    let pca = std::fs::read_to_string(p("pca.tsv")).unwrap();
    assert_eq!(pca.lines().count(), 61);
    let r = netalign(&["pca", s(&p("x2.txt")), "-k", "9", "-o", s(&p("pca.tsv"))]);
    assert_eq!(r.status.code(), Some(1));
}
