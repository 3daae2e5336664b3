//! Run the aligner on a pair of real networks with a known correspondence.
//!
//! `cargo run --release --example reproduce -- <g1> <g2> <truth> [config.kv] [out_dir]`
//!
//! Edges with a negative weight column are skipped unless the `SIGNED`
//! environment variable is set, in which case they count as ordinary edges. The
//! default grid is the full 18-run sweep, so expect long runtimes on graphs
//! with thousands of nodes.

use netalign::config::KeyValues;
use netalign::eval::accuracy_counts;
use netalign::experiment::{run_pipeline, PipelineConfig};
use netalign::graph::{graph_stats, read_edge_list, Correspondence};

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 3 {
        anyhow::bail!("usage: reproduce <g1> <g2> <truth> [config.kv] [out_dir]");
    }
    let signed = std::env::var_os("SIGNED").is_some();
    let g1 = read_edge_list(&args[0], signed)?;
    let g2 = read_edge_list(&args[1], signed)?;
    let truth = Correspondence::read(&args[2])?;
    let stats = graph_stats(&g1, Some(&g2), Some(&truth))?;
    println!("{stats:?}");

    let mut cfg = match args.get(3) {
        Some(path) => PipelineConfig::from_key_values(&KeyValues::read(path)?)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = args.get(4) {
        cfg.output_dir = Some(dir.into());
    }
    let out = run_pipeline(&g1, &g2, &cfg)?;
    let counts = accuracy_counts(&out.result, &truth)?;
    println!(
        "accuracy {:.4} ({} of {}), direction {}, selected config #{}",
        counts.accuracy(),
        counts.correct,
        counts.evaluated,
        out.result.direction,
        out.selection.index
    );
    Ok(())
}
