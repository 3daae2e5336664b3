//! Seeded synthetic embeddings with a known correspondence.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use crate::embedding::EmbeddingMatrix;
use crate::graph::Correspondence;
use crate::rng::seeded;

/// `n x d` matrix of independent standard normal entries.
pub fn gaussian_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed, 30);
    Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
}

/// Haar-distributed `d x d` orthogonal matrix: Gram-Schmidt on a gaussian matrix.
pub fn random_orthogonal(d: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed, 31);
    let mut q = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        loop {
            let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            // two passes keep the columns orthogonal to rounding error
            for _ in 0..2 {
                for k in 0..j {
                    let dot: f64 = (0..d).map(|i| q[[i, k]] * v[i]).sum();
                    for (i, vi) in v.iter_mut().enumerate() {
                        *vi -= dot * q[[i, k]];
                    }
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for (i, vi) in v.iter().enumerate() {
                    q[[i, j]] = vi / norm;
                }
                break;
            }
        }
    }
    q
}

/// A gaussian cloud `x1` and its rotation `x2 = x1 Q`; row `i` of both carries
/// label `i`, so the truth is the identity on labels.
pub fn rotation_fixture(n: usize, d: usize, seed: u64) -> (EmbeddingMatrix, EmbeddingMatrix, Correspondence) {
    let x1 = gaussian_matrix(n, d, seed);
    let q = random_orthogonal(d, seed);
    let x2 = x1.dot(&q);
    let truth = Correspondence::new((0..n).map(|i| (i.to_string(), i.to_string())).collect())
        .expect("distinct labels");
    (EmbeddingMatrix::from_rows(x1), EmbeddingMatrix::from_rows(x2), truth)
}
