//! The full pipeline on a benchmark pair: perturb a graph, embed both copies,
//! train and select an aligner, align, and score.
//!
//! `cargo run --release --example pipeline -- [output_dir]`

use netalign::adversarial::TrainConfig;
use netalign::eval::accuracy_counts;
use netalign::experiment::{perturb, run_pipeline, PipelineConfig};
use netalign::graph::watts_strogatz;

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let g = watts_strogatz(300, 8, 0.1, 2)?;
    let (g1, truth) = perturb(&g, 0.05, 0)?;

    let mut cfg = PipelineConfig {
        grid: vec![TrainConfig { epochs: 50, ..Default::default() }],
        output_dir: std::env::args().nth(1).map(Into::into),
        ..Default::default()
    };
    for e in [&mut cfg.embed1, &mut cfg.embed2] {
        e.skipgram.dim = 32;
    }

    let start = std::time::Instant::now();
    let out = run_pipeline(&g1, &g, &cfg)?;
    let counts = accuracy_counts(&out.result, &truth)?;
    println!(
        "direction {} (1to2 {:.4}, 2to1 {:.4}), accuracy {:.3} ({} of {}), {:.1}s",
        out.result.direction,
        out.one_to_two.mean_nn_distance,
        out.two_to_one.mean_nn_distance,
        counts.accuracy(),
        counts.correct,
        counts.evaluated,
        start.elapsed().as_secs_f64()
    );
    if let Some(dir) = &cfg.output_dir {
        println!("artifacts in {}", dir.display());
    }
    Ok(())
}
