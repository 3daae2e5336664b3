//! Unsupervised model selection over a hyperparameter grid.
//!
//! Each configuration is trained, every snapshot is scored by the mean
//! nearest-neighbor distance after mapping, and the lowest score wins. Because
//! the first graph is a noisy copy of the second, the scores can be compared
//! with the accuracy they would have produced.

use netalign::adversarial::{model_select, TrainConfig};
use netalign::align::align_bidirectional;
use netalign::embedding::EmbeddingMatrix;
use netalign::eval::{accuracy, heuristic_report, heuristic_tsv};
use netalign::graph::Correspondence;
use netalign::nn::MapperVariant;
use netalign::synthetic::gaussian_matrix;

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let (n, d) = (300, 8);
    let base = gaussian_matrix(n, d, 11);
    let x1 = EmbeddingMatrix::from_rows(&base + &(gaussian_matrix(n, d, 12) * 0.05));
    let x2 = EmbeddingMatrix::from_rows(base);
    let truth = Correspondence::new((0..n).map(|i| (i.to_string(), i.to_string())).collect())?;

    let mut grid = Vec::new();
    for lambda in [1.0, 10.0] {
        for variant in [MapperVariant::Linear, MapperVariant::Nonlinear] {
            grid.push(TrainConfig { lambda, mapper_variant: variant, epochs: 40, critic_hidden: 64, ..Default::default() });
        }
    }
    let sel = model_select(&x1, &x2, &grid)?;
    for (c, s) in grid.iter().zip(&sel.scores) {
        println!("lambda {:>4} {:>9}: score {s:.4}", c.lambda, c.mapper_variant);
    }
    let p = &sel.aligner.params;
    let result = align_bidirectional(&p.g12, &p.g21, &x1, &x2)?;
    println!("selected #{} -> accuracy {:.3}", sel.index, accuracy(&result, &truth)?);

    let run = &sel.aligner;
    print!("{}", heuristic_tsv(&heuristic_report(&run.history, &truth, &run.snapshots, &x1, &x2)?));
    Ok(())
}
