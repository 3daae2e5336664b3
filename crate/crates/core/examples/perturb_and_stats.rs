//! Build an alignment benchmark: permute a graph, drop a fraction of its edges,
//! and report sizes and overlap.
//!
//! `cargo run --release --example perturb_and_stats -- [noise] [seed]`

use netalign::experiment::perturb;
use netalign::graph::{graph_stats, watts_strogatz};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let noise: f64 = args.first().map_or(Ok(0.1), |s| s.parse())?;
    let seed: u64 = args.get(1).map_or(Ok(0), |s| s.parse())?;

    let g = watts_strogatz(500, 10, 0.1, 7)?;
    let (g1, truth) = perturb(&g, noise, seed)?;
    let stats = graph_stats(&g1, Some(&g), Some(&truth))?;
    println!("original:  {} nodes, {} edges", g.num_nodes(), g.num_edges());
    println!("perturbed: {} nodes, {} edges", g1.num_nodes(), g1.num_edges());
    println!(
        "ground truth covers {} nodes; {} of the perturbed edges survive under it",
        stats.overlap_nodes.unwrap_or(0),
        stats.overlap_edges.unwrap_or(0)
    );
    // labels travel with their nodes; only the row order is shuffled
    for (a, b) in truth.pairs().iter().take(5) {
        let (i, j) = (g1.index_of(a).unwrap(), g.index_of(b).unwrap());
        println!("  node {a}: row {i} in the perturbed graph, row {j} in the original");
    }
    Ok(())
}
