//! Skip-gram with negative sampling over a walk corpus.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    /// Initial step size, decayed linearly towards `1e-4` of itself.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            window: 10,
            negatives_per_positive: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives_per_positive == 0 {
            return Err(Error::InvalidArgument(
                "dim, window and negatives_per_positive must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

const UNIGRAM_POWER: f64 = 0.75;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn train_skipgram(walks: &[Vec<usize>], vocab_size: usize, cfg: &SkipGramConfig) -> Result<EmbeddingMatrix> {
    train_skipgram_traced(walks, vocab_size, cfg).map(|(m, _)| m)
}

/// Like [`train_skipgram`], also returning the mean per-pair negative-sampling loss
/// of every epoch.
pub fn train_skipgram_traced(
    walks: &[Vec<usize>],
    vocab_size: usize,
    cfg: &SkipGramConfig,
) -> Result<(EmbeddingMatrix, Vec<f64>)> {
    cfg.validate()?;
    if walks.iter().all(Vec::is_empty) {
        return Err(Error::Empty("walk corpus".into()));
    }
    let mut counts = vec![0u64; vocab_size];
    for &w in walks.iter().flatten() {
        if w >= vocab_size {
            return Err(Error::InvalidArgument(format!(
                "walk entry {w} outside vocabulary of {vocab_size}"
            )));
        }
        counts[w] += 1;
    }
    let noise = WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(UNIGRAM_POWER)))
        .map_err(|e| Error::InvalidArgument(format!("negative sampling table: {e}")))?;

    let d = cfg.dim;
    let mut rng = seeded(cfg.seed, 3);
    let scale = 0.5 / d as f64;
    let mut input: Vec<f64> = (0..vocab_size * d).map(|_| rng.random_range(-scale..scale)).collect();
    let mut output = vec![0.0; vocab_size * d];
    let mut grad = vec![0.0; d];

    let total_tokens = walks.iter().map(Vec::len).sum::<usize>() * cfg.epochs;
    let mut seen = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        for walk in walks {
            for (pos, &center) in walk.iter().enumerate() {
                let progress = seen as f64 / total_tokens as f64;
                let lr = cfg.learning_rate * (1.0 - progress).max(1e-4);
                seen += 1;
                let reach = rng.random_range(1..=cfg.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(walk.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = walk[ctx_pos];
                    grad.fill(0.0);
                    let u = &input[center * d..(center + 1) * d];
                    for k in 0..=cfg.negatives_per_positive {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let v = &mut output[target * d..(target + 1) * d];
                        let s = sigmoid(dot(u, v));
                        loss_sum -= if label == 1.0 { s.max(1e-12).ln() } else { (1.0 - s).max(1e-12).ln() };
                        let g = lr * (label - s);
                        for ((gk, vk), uk) in grad.iter_mut().zip(v.iter_mut()).zip(u) {
                            *gk += g * *vk;
                            *vk += g * uk;
                        }
                    }
                    for (uk, gk) in input[center * d..(center + 1) * d].iter_mut().zip(&grad) {
                        *uk += gk;
                    }
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs > 0 { loss_sum / pairs as f64 } else { 0.0 });
    }

    let vectors = Array2::from_shape_vec((vocab_size, d), input).expect("sized buffer");
    Ok((EmbeddingMatrix::from_rows(vectors), epoch_losses))
}
