//! Permute a small-world graph, drop a growing share of its edges, and measure
//! how alignment accuracy degrades.
//!
//! `cargo run --release --example noise_sweep -- [config.kv] [report.json]`
//!
//! The optional config file holds `key=value` pipeline settings; without one the
//! defaults apply (64-d embeddings, the 18-run grid, 200 epochs per run).

use netalign::config::KeyValues;
use netalign::experiment::{run_noise_experiment, PipelineConfig};
use netalign::graph::watts_strogatz;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = match args.first() {
        Some(path) => PipelineConfig::from_key_values(&KeyValues::read(path)?)?,
        None => PipelineConfig::default(),
    };
    let g = watts_strogatz(500, 10, 0.1, 7)?;
    let start = std::time::Instant::now();
    let report = run_noise_experiment(&g, &cfg.noise_levels, &cfg)?;
    print!("{}", report.to_tsv());
    println!("total {:.1}s", start.elapsed().as_secs_f64());
    if let Some(out) = args.get(1) {
        std::fs::write(out, report.to_json()?)?;
    }
    Ok(())
}
