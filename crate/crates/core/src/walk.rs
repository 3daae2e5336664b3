//! Second-order biased random walks (return parameter `p`, in-out parameter `q`).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::seeded;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub return_param_p: f64,
    pub inout_param_q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_node: 10,
            walk_length: 80,
            return_param_p: 1.0,
            inout_param_q: 1.0,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 2 {
            return Err(Error::InvalidArgument("walk_length must be at least 2".into()));
        }
        if !(self.return_param_p > 0.0 && self.inout_param_q > 0.0) {
            return Err(Error::InvalidArgument("p and q must be positive".into()));
        }
        Ok(())
    }

    fn unbiased(&self) -> bool {
        self.return_param_p == 1.0 && self.inout_param_q == 1.0
    }
}

/// Walk corpus plus the number of isolated start nodes that produced no walks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Walks {
    pub walks: Vec<Vec<usize>>,
    pub skipped: usize,
}

/// Transition probabilities from `cur` over `g.neighbors(cur)`, in neighbor order.
///
/// Without a previous node the distribution is uniform. Otherwise the unnormalized
/// weight is `1/p` for stepping back to `prev`, `1` for neighbors shared with `prev`
/// and `1/q` for everything else.
pub fn step_distribution(g: &Graph, prev: Option<usize>, cur: usize, p: f64, q: f64) -> Result<Vec<f64>> {
    let nbrs = g.neighbors(cur);
    if nbrs.is_empty() {
        return Err(Error::IsolatedNode(cur));
    }
    let Some(prev) = prev else {
        return Ok(vec![1.0 / nbrs.len() as f64; nbrs.len()]);
    };
    let mut w: Vec<f64> = nbrs
        .iter()
        .map(|&x| {
            if x == prev {
                1.0 / p
            } else if g.has_edge(prev, x) {
                1.0
            } else {
                1.0 / q
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

fn draw(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn next_step(g: &Graph, cfg: &WalkConfig, prev: Option<usize>, cur: usize, rng: &mut ChaCha8Rng) -> usize {
    let nbrs = g.neighbors(cur);
    if cfg.unbiased() || prev.is_none() {
        return nbrs[rng.random_range(0..nbrs.len())];
    }
    let probs = step_distribution(g, prev, cur, cfg.return_param_p, cfg.inout_param_q)
        .expect("cur has neighbors");
    nbrs[draw(&probs, rng)]
}

/// `walks_per_node` rounds; each round walks once from every non-isolated node in
/// index order. Every start node owns a random stream derived from `(seed, node)`.
pub fn generate_walks(g: &Graph, cfg: &WalkConfig) -> Result<Walks> {
    cfg.validate()?;
    let n = g.num_nodes();
    let mut streams: Vec<ChaCha8Rng> = (0..n).map(|i| seeded(cfg.seed, 1_000 + i as u64)).collect();
    let skipped = (0..n).filter(|&i| g.degree(i) == 0).count();
    let mut walks = Vec::with_capacity(cfg.walks_per_node * (n - skipped));
    for _ in 0..cfg.walks_per_node {
        for (start, rng) in streams.iter_mut().enumerate() {
            if g.degree(start) == 0 {
                continue;
            }
            let mut walk = Vec::with_capacity(cfg.walk_length);
            walk.push(start);
            let mut prev = None;
            let mut cur = start;
            while walk.len() < cfg.walk_length {
                let next = next_step(g, cfg, prev, cur, rng);
                walk.push(next);
                prev = Some(cur);
                cur = next;
            }
            walks.push(walk);
        }
    }
    Ok(Walks { walks, skipped })
}
