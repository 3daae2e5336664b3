//! Recover a random rotation between two gaussian clouds without correspondences.
//!
//! `cargo run --release --example rotation_recovery -- [epochs] [learning_rate] [batch_size]`

use netalign::adversarial::{model_select, TrainConfig};
use netalign::align::align_bidirectional;
use netalign::eval::{accuracy, heuristic_report, heuristic_tsv};
use netalign::nn::MapperVariant;
use netalign::synthetic::rotation_fixture;

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_owned());

    let (x1, x2, truth) = rotation_fixture(300, 8, 42);
    let mut cfg = TrainConfig {
        lambda: 10.0,
        eta: 1,
        epochs: arg(0, "200").parse()?,
        batch_size: arg(2, "32").parse()?,
        mapper_variant: MapperVariant::Linear,
        ..Default::default()
    };
    cfg.optimizer.learning_rate = arg(1, "1e-4").parse()?;

    let start = std::time::Instant::now();
    let sel = model_select(&x1, &x2, &[cfg])?;
    let run = &sel.aligner;
    let p = &run.params;
    let result = align_bidirectional(&p.g12, &p.g21, &x1, &x2)?;
    let first = run.history.records.first().map(|r| r.mean_nn_distance());
    println!("trained in {:.1}s", start.elapsed().as_secs_f64());
    println!("initial mean NN distance: {:?}", first);
    println!("selected mean NN distance: {:.4} (direction {})", result.mean_nn_distance, result.direction);
    println!("accuracy: {:.3}", accuracy(&result, &truth)?);

    let rows = heuristic_report(&run.history, &truth, &run.snapshots, &x1, &x2)?;
    print!("{}", heuristic_tsv(&rows));
    Ok(())
}
