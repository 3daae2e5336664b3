//! Embed a graph with biased random walks and skip-gram.
//!
//! `cargo run --release --example embed_graph -- [edge_list] [output]`
//! Without an edge list a 200-node small-world graph is generated.

use netalign::embedding::{embed_graph, EmbedConfig};
use netalign::graph::{read_edge_list, watts_strogatz};

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let g = match args.first() {
        Some(path) => read_edge_list(path, false)?,
        None => watts_strogatz(200, 8, 0.1, 1)?,
    };
    let mut cfg = EmbedConfig::default();
    cfg.skipgram.dim = 32;

    let start = std::time::Instant::now();
    let emb = embed_graph(&g, &cfg)?;
    println!(
        "{} nodes, {} edges -> {}x{} embedding in {:.1}s",
        g.num_nodes(),
        g.num_edges(),
        emb.len(),
        emb.dim(),
        start.elapsed().as_secs_f64()
    );

    // neighbors should sit closer than random pairs
    let v = emb.vectors();
    let dist = |a: usize, b: usize| (&v.row(a) - &v.row(b)).mapv(|x| x * x).sum().sqrt();
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let adjacent = edges.iter().map(|&(a, b)| dist(a, b)).sum::<f64>() / edges.len() as f64;
    let n = g.num_nodes();
    let spread = (0..n).map(|i| dist(i, (i + n / 2) % n)).sum::<f64>() / n as f64;
    println!("mean distance: adjacent {adjacent:.3}, far apart on the ring {spread:.3}");

    if let Some(out) = args.get(1) {
        emb.write(out)?;
        println!("wrote {out}");
    }
    Ok(())
}
