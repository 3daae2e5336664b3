//! Alignment accuracy, PCA coordinates, and the distance-versus-accuracy table.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adversarial::TrainHistory;
use crate::align::{align_bidirectional, AlignmentResult, Direction};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::Correspondence;
use crate::loss::AlignerParams;
use crate::rng::seeded;

/// Counts behind an accuracy figure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyCounts {
    pub correct: usize,
    /// Ground-truth pairs whose source node was aligned.
    pub evaluated: usize,
    /// Ground-truth pairs supplied.
    pub truth_pairs: usize,
}

impl AccuracyCounts {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.evaluated as f64
    }
}

/// Scores `result` against `truth`, whose pairs read `(first-graph label,
/// second-graph label)`. The truth is flipped when the result runs 2 -> 1.
/// Pairs whose source node is not among the aligned sources are left out of the
/// denominator.
pub fn accuracy_counts(result: &AlignmentResult, truth: &Correspondence) -> Result<AccuracyCounts> {
    if truth.is_empty() {
        return Err(Error::Empty("ground-truth correspondence".into()));
    }
    let matched: HashMap<&str, &str> = result.pairs.iter().map(|(s, t)| (s.as_str(), t.as_str())).collect();
    let mut correct = 0;
    let mut evaluated = 0;
    for (a, b) in truth.pairs() {
        let (src, dst) = match result.direction {
            Direction::OneToTwo => (a.as_str(), b.as_str()),
            Direction::TwoToOne => (b.as_str(), a.as_str()),
        };
        if let Some(&got) = matched.get(src) {
            evaluated += 1;
            if got == dst {
                correct += 1;
            }
        }
    }
    if evaluated == 0 {
        return Err(Error::UnknownLabel(
            "no ground-truth pair refers to an aligned source node".into(),
        ));
    }
    Ok(AccuracyCounts {
        correct,
        evaluated,
        truth_pairs: truth.len(),
    })
}

pub fn accuracy(result: &AlignmentResult, truth: &Correspondence) -> Result<f64> {
    accuracy_counts(result, truth).map(|c| c.accuracy())
}

/// Principal axes of an embedding and the projected coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    /// `k x d`, one unit-length axis per row; zero rows for missing rank.
    pub components: Array2<f64>,
    /// Sample variance (`n - 1` denominator) along each axis, non-increasing.
    pub explained_variance: Vec<f64>,
    /// `n x k` coordinates of the centered rows.
    pub projections: Array2<f64>,
}

impl Pca {
    /// Tab-separated `label pc1 .. pck`, with a header line.
    pub fn to_tsv(&self, labels: &[String]) -> String {
        let k = self.projections.ncols();
        let mut out = String::from("label");
        for c in 1..=k {
            let _ = write!(out, "\tpc{c}");
        }
        out.push('\n');
        for (label, row) in labels.iter().zip(self.projections.rows()) {
            out.push_str(label);
            for v in row {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }
}

const POWER_MAX_ITERS: usize = 100_000;
const POWER_TOL: f64 = 1e-14;

/// Top-`k` principal components by power iteration with deflation.
///
/// Each axis is signed so that its largest-magnitude loading is positive.
pub fn pca_project(x: &EmbeddingMatrix, k: usize) -> Result<Pca> {
    let (n, d) = x.vectors().dim();
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least two rows".into()));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("k must lie in 1..={d}, got {k}")));
    }
    let mean = x.vectors().mean_axis(Axis(0)).expect("n >= 2");
    let centered = x.vectors() - &mean;
    let mut cov = centered.t().dot(&centered) / (n - 1) as f64;
    let scale = cov.diag().iter().copied().fold(0.0, f64::max);
    let floor = scale * 1e-12;

    let mut rng = seeded(0, 20);
    let mut components = Array2::zeros((k, d));
    let mut explained_variance = Vec::with_capacity(k);
    for c in 0..k {
        let start = Array1::from_shape_fn(d, |_| StandardNormal.sample(&mut rng));
        let (v, lambda) = dominant_eigenpair(&cov, start);
        if lambda <= floor {
            log::warn!("PCA component {} has no variance left; filled with zeros", c + 1);
            explained_variance.push(0.0);
            continue;
        }
        let pivot = v.iter().copied().fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
        let v = if pivot < 0.0 { -v } else { v };
        for i in 0..d {
            for j in 0..d {
                cov[[i, j]] -= lambda * v[i] * v[j];
            }
        }
        components.row_mut(c).assign(&v);
        explained_variance.push(lambda);
    }
    let projections = centered.dot(&components.t());
    Ok(Pca {
        components,
        explained_variance,
        projections,
    })
}

fn normalize(v: &mut Array1<f64>) -> f64 {
    let norm = v.dot(v).sqrt();
    if norm > 0.0 {
        *v /= norm;
    }
    norm
}

fn dominant_eigenpair(a: &Array2<f64>, mut v: Array1<f64>) -> (Array1<f64>, f64) {
    normalize(&mut v);
    for _ in 0..POWER_MAX_ITERS {
        let mut next = a.dot(&v);
        if normalize(&mut next) == 0.0 {
            return (v, 0.0);
        }
        // compare up to sign so a negative eigenvalue does not stall convergence
        let delta = (&next - &v).mapv(f64::abs).sum().min((&next + &v).mapv(f64::abs).sum());
        v = next;
        if delta < POWER_TOL * v.len() as f64 {
            break;
        }
    }
    let lambda = v.dot(&a.dot(&v));
    (v, lambda)
}

/// One row of the heuristic diagnostic: the selection score of a snapshot
/// next to the accuracy it would have achieved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicRow {
    pub epoch: usize,
    pub mean_nn_distance: f64,
    pub accuracy: f64,
    pub direction: Direction,
}

pub fn heuristic_report(
    history: &TrainHistory,
    truth: &Correspondence,
    snapshots: &[AlignerParams],
    x1: &EmbeddingMatrix,
    x2: &EmbeddingMatrix,
) -> Result<Vec<HeuristicRow>> {
    if snapshots.len() != history.records.len() {
        return Err(Error::DimensionMismatch {
            expected: history.records.len(),
            found: snapshots.len(),
        });
    }
    history
        .records
        .iter()
        .zip(snapshots)
        .map(|(r, p)| {
            let a = align_bidirectional(&p.g12, &p.g21, x1, x2)?;
            Ok(HeuristicRow {
                epoch: r.epoch,
                mean_nn_distance: r.mean_nn_distance(),
                accuracy: accuracy(&a, truth)?,
                direction: a.direction,
            })
        })
        .collect()
}

pub fn heuristic_tsv(rows: &[HeuristicRow]) -> String {
    let mut out = String::from("# epoch\tmean_nn_distance\taccuracy\tdirection\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.epoch, r.mean_nn_distance, r.accuracy, r.direction);
    }
    out
}
