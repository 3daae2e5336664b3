//! Training of the two mappers against their critics, and model selection by
//! mean nearest-neighbor distance.
//!
//! Critics ascend their adversarial objectives; mappers descend the adversarial
//! terms plus `lambda` times the cycle loss. The mappers take `eta` steps for
//! every critic step. Snapshots of all four networks are kept so the one whose
//! mapped points sit closest to the other cloud can be restored afterwards.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::align::mean_nn_distance_in;
use crate::config::{self, KeyValues};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::loss::{accumulate, adversarial, cycle_with_grads, AlignerParams, GeneratorLoss, LossParts};
use crate::nn::{
    AdamConfig, AdamState, CriticParams, CriticRecord, MapperParams, MapperRecord, MapperVariant, ParamSet,
    DEFAULT_HIDDEN, DEFAULT_SLOPE,
};
use crate::rng::seeded;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the cycle loss.
    pub lambda: f64,
    /// Mapper updates per critic update.
    pub eta: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mapper_variant: MapperVariant,
    /// Epochs between snapshots; the final epoch is always recorded.
    pub snapshot_every: usize,
    pub generator_loss: GeneratorLoss,
    pub optimizer: AdamConfig,
    pub critic_hidden: usize,
    pub slope: f64,
    pub mapper_init_noise: f64,
    pub critic_init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            eta: 1,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            mapper_variant: MapperVariant::Linear,
            snapshot_every: 10,
            generator_loss: GeneratorLoss::Nonsaturating,
            optimizer: AdamConfig::default(),
            critic_hidden: DEFAULT_HIDDEN,
            slope: DEFAULT_SLOPE,
            mapper_init_noise: 0.01,
            critic_init_std: 0.02,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite non-negative number");
        }
        if self.eta == 0 || self.batch_size == 0 || self.snapshot_every == 0 || self.critic_hidden == 0 {
            return bad("eta, batch_size, snapshot_every and critic_hidden must be at least 1");
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return bad("slope must lie in (0, 1)");
        }
        if !(self.optimizer.learning_rate > 0.0 && self.optimizer.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.optimizer.beta1) || !(0.0..1.0).contains(&self.optimizer.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.mapper_init_noise >= 0.0 && self.critic_init_std >= 0.0) {
            return bad("initialization scales must be non-negative");
        }
        Ok(())
    }

    /// Applies one `key=value` setting. Returns `false` for keys this type does not own.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<bool> {
        match key {
            "lambda" => self.lambda = config::value(key, raw)?,
            "eta" => self.eta = config::value(key, raw)?,
            "epochs" => self.epochs = config::value(key, raw)?,
            "batch_size" | "batch" => self.batch_size = config::value(key, raw)?,
            "seed" | "train_seed" => self.seed = config::value(key, raw)?,
            "mapper_variant" | "variant" => self.mapper_variant = config::value(key, raw)?,
            "snapshot_every" => self.snapshot_every = config::value(key, raw)?,
            "generator_loss" => self.generator_loss = config::value(key, raw)?,
            "learning_rate" | "lr" => self.optimizer.learning_rate = config::value(key, raw)?,
            "beta1" => self.optimizer.beta1 = config::value(key, raw)?,
            "beta2" => self.optimizer.beta2 = config::value(key, raw)?,
            "adam_eps" => self.optimizer.eps = config::value(key, raw)?,
            "critic_hidden" => self.critic_hidden = config::value(key, raw)?,
            "slope" => self.slope = config::value(key, raw)?,
            "mapper_init_noise" => self.mapper_init_noise = config::value(key, raw)?,
            "critic_init_std" => self.critic_init_std = config::value(key, raw)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lambda={}", self.lambda);
        let _ = writeln!(s, "eta={}", self.eta);
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "batch_size={}", self.batch_size);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "mapper_variant={}", self.mapper_variant);
        let _ = writeln!(s, "snapshot_every={}", self.snapshot_every);
        let _ = writeln!(s, "generator_loss={}", self.generator_loss);
        let _ = writeln!(s, "learning_rate={}", self.optimizer.learning_rate);
        let _ = writeln!(s, "beta1={}", self.optimizer.beta1);
        let _ = writeln!(s, "beta2={}", self.optimizer.beta2);
        let _ = writeln!(s, "adam_eps={}", self.optimizer.eps);
        let _ = writeln!(s, "critic_hidden={}", self.critic_hidden);
        let _ = writeln!(s, "slope={}", self.slope);
        let _ = writeln!(s, "mapper_init_noise={}", self.mapper_init_noise);
        let _ = writeln!(s, "critic_init_std={}", self.critic_init_std);
        s
    }
}

pub const GRID_LAMBDAS: [f64; 3] = [1.0, 10.0, 100.0];
pub const GRID_ETAS: [usize; 3] = [1, 5, 25];
const GRID_VARIANTS: [MapperVariant; 2] = [MapperVariant::Linear, MapperVariant::Nonlinear];

fn product(base: &TrainConfig, lambdas: &[f64], etas: &[usize], variants: &[MapperVariant]) -> Vec<TrainConfig> {
    let mut grid = Vec::with_capacity(lambdas.len() * etas.len() * variants.len());
    for &lambda in lambdas {
        for &eta in etas {
            for &mapper_variant in variants {
                grid.push(TrainConfig {
                    lambda,
                    eta,
                    mapper_variant,
                    ..base.clone()
                });
            }
        }
    }
    grid
}

/// `lambda x eta x variant` over the standard values, 18 configurations.
pub fn default_grid(base: &TrainConfig) -> Vec<TrainConfig> {
    product(base, &GRID_LAMBDAS, &GRID_ETAS, &GRID_VARIANTS)
}

/// Builds a grid from settings where `lambda`, `eta` and `mapper_variant` may be
/// comma lists; every other training key is applied to all configurations.
/// Keys not owned by [`TrainConfig`] are ignored.
pub fn grid_from_key_values(kv: &KeyValues, base: &TrainConfig) -> Result<Vec<TrainConfig>> {
    let mut base = base.clone();
    let mut lambdas = vec![base.lambda];
    let mut etas = vec![base.eta];
    let mut variants = vec![base.mapper_variant];
    for (k, v) in kv.iter() {
        match k {
            "lambda" => lambdas = config::list(k, v)?,
            "eta" => etas = config::list(k, v)?,
            "mapper_variant" | "variant" => variants = config::list(k, v)?,
            _ => {
                base.set(k, v)?;
            }
        }
    }
    let grid = product(&base, &lambdas, &etas, &variants);
    for c in &grid {
        c.validate()?;
    }
    Ok(grid)
}

/// Full-data losses and heuristic distances at one snapshot epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub adv12: f64,
    pub adv21: f64,
    pub cycle: f64,
    pub total: f64,
    /// Mean distance from `g12(x1)` rows to their nearest `x2` row.
    pub nn12: f64,
    /// Mean distance from `g21(x2)` rows to their nearest `x1` row.
    pub nn21: f64,
}

impl TrainRecord {
    /// The model-selection score: both directions averaged.
    pub fn mean_nn_distance(&self) -> f64 {
        0.5 * (self.nn12 + self.nn21)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<TrainRecord>,
    /// Record with the smallest [`TrainRecord::mean_nn_distance`], earliest on ties.
    pub best_snapshot: Option<usize>,
}

const LOG_HEADER: &str = "# epoch\tadv12\tadv21\tcyc\ttotal\tnn12\tnn21";

impl TrainHistory {
    pub fn push(&mut self, record: TrainRecord) {
        let better = match self.best_snapshot {
            Some(i) => record.mean_nn_distance() < self.records[i].mean_nn_distance(),
            None => true,
        };
        self.records.push(record);
        if better {
            self.best_snapshot = Some(self.records.len() - 1);
        }
    }

    pub fn best(&self) -> Option<&TrainRecord> {
        self.best_snapshot.map(|i| &self.records[i])
    }

    /// Tab-separated training log, one line per snapshot.
    pub fn to_log(&self) -> String {
        let mut out = format!("{LOG_HEADER}\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.epoch, r.adv12, r.adv21, r.cycle, r.total, r.nn12, r.nn21
            );
        }
        out
    }

    pub fn parse_log(text: &str) -> Result<Self> {
        let mut h = TrainHistory::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| Error::Parse { line: i + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 7 {
                return Err(bad(format!("expected 7 columns, found {}", cols.len())));
            }
            let f = |k: usize| cols[k].parse::<f64>().map_err(|_| bad(format!("`{}` is not a number", cols[k])));
            h.push(TrainRecord {
                epoch: cols[0].parse().map_err(|_| bad(format!("`{}` is not an epoch", cols[0])))?,
                adv12: f(1)?,
                adv21: f(2)?,
                cycle: f(3)?,
                total: f(4)?,
                nn12: f(5)?,
                nn21: f(6)?,
            });
        }
        Ok(h)
    }
}

/// Outcome of [`train`]: final parameters, the snapshot history, and a copy of
/// the parameters at every snapshot (parallel to `history.records`).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedAligner {
    pub params: AlignerParams,
    pub history: TrainHistory,
    pub snapshots: Vec<AlignerParams>,
    pub config: TrainConfig,
}

impl TrainedAligner {
    /// Replaces the current parameters with the best snapshot, if there is one.
    pub fn restore_best(&mut self) -> bool {
        match self.history.best_snapshot {
            Some(i) => {
                self.params = self.snapshots[i].clone();
                true
            }
            None => false,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.params, &self.config)
    }
}

/// Serialized form of all four networks plus the configuration that trained them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub g12: MapperRecord,
    pub g21: MapperRecord,
    pub d1: CriticRecord,
    pub d2: CriticRecord,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;

    pub fn new(params: &AlignerParams, config: &TrainConfig) -> Self {
        Self {
            version: Self::VERSION,
            config: config.clone(),
            g12: (&params.g12).into(),
            g21: (&params.g21).into(),
            d1: (&params.d1).into(),
            d2: (&params.d2).into(),
        }
    }

    pub fn params(&self) -> Result<AlignerParams> {
        let p = AlignerParams {
            g12: (&self.g12).try_into()?,
            g21: (&self.g21).try_into()?,
            d1: (&self.d1).try_into()?,
            d2: (&self.d2).try_into()?,
        };
        let d = p.g12.dim();
        if p.g21.dim() != d || p.d1.dim() != d || p.d2.dim() != d {
            return Err(Error::Format("checkpoint networks disagree on dimension".into()));
        }
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        if c.version != Self::VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", c.version)));
        }
        Ok(c)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Freshly initialized networks for embeddings of dimension `dim`.
pub fn init_params(dim: usize, cfg: &TrainConfig) -> AlignerParams {
    let mut rng = seeded(cfg.seed, 10);
    let mapper = |rng: &mut _| {
        let mut m = MapperParams::init(cfg.mapper_variant, dim, cfg.mapper_init_noise, rng);
        m.slope = cfg.slope;
        m
    };
    let g12 = mapper(&mut rng);
    let g21 = mapper(&mut rng);
    let critic = |rng: &mut _| {
        let mut c = CriticParams::init(dim, cfg.critic_hidden, cfg.critic_init_std, rng);
        c.slope = cfg.slope;
        c
    };
    let d1 = critic(&mut rng);
    let d2 = critic(&mut rng);
    AlignerParams { g12, g21, d1, d2 }
}

/// Parameters plus one ADAM state per network.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub params: AlignerParams,
    lambda: f64,
    generator_loss: GeneratorLoss,
    adam_g12: AdamState,
    adam_g21: AdamState,
    adam_d1: AdamState,
    adam_d2: AdamState,
}

fn negated<P: ParamSet + Clone>(grad: &P) -> P {
    let mut out = grad.clone();
    out.slices_mut().into_iter().flatten().for_each(|v| *v = -*v);
    out
}

impl Trainer {
    pub fn new(params: AlignerParams, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let o = cfg.optimizer;
        Ok(Self {
            adam_g12: AdamState::new(o, &params.g12),
            adam_g21: AdamState::new(o, &params.g21),
            adam_d1: AdamState::new(o, &params.d1),
            adam_d2: AdamState::new(o, &params.d2),
            lambda: cfg.lambda,
            generator_loss: cfg.generator_loss,
            params,
        })
    }

    /// One ascent step of both critics on their adversarial objectives.
    pub fn discriminator_step(&mut self, batch1: &Array2<f64>, batch2: &Array2<f64>) -> Result<()> {
        let p = &self.params;
        let e12 = adversarial(&p.g12, &p.d2, batch1, batch2, None, true)?;
        let e21 = adversarial(&p.g21, &p.d1, batch2, batch1, None, true)?;
        let g2 = negated(&e12.critic_grad.expect("requested"));
        let g1 = negated(&e21.critic_grad.expect("requested"));
        self.adam_d2.step(&mut self.params.d2, &g2)?;
        self.adam_d1.step(&mut self.params.d1, &g1)?;
        Ok(())
    }

    /// One descent step of both mappers on the adversarial terms plus
    /// `lambda` times the cycle loss.
    pub fn generator_step(&mut self, batch1: &Array2<f64>, batch2: &Array2<f64>) -> Result<()> {
        let p = &self.params;
        let mode = Some(self.generator_loss);
        let e12 = adversarial(&p.g12, &p.d2, batch1, batch2, mode, false)?;
        let e21 = adversarial(&p.g21, &p.d1, batch2, batch1, mode, false)?;
        let (_, c12, c21) = cycle_with_grads(&p.g12, &p.g21, batch1, batch2)?;
        let mut g12 = e12.mapper_grad.expect("requested");
        let mut g21 = e21.mapper_grad.expect("requested");
        accumulate(&mut g12, &c12, self.lambda);
        accumulate(&mut g21, &c21, self.lambda);
        self.adam_g12.step(&mut self.params.g12, &g12)?;
        self.adam_g21.step(&mut self.params.g21, &g21)?;
        Ok(())
    }
}

/// Row order for one epoch: a shuffle of `0..m`, topped up with draws with
/// replacement (then reshuffled) when the other graph has more rows.
fn epoch_order(rng: &mut impl Rng, m: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    if m < n {
        order.extend((m..n).map(|_| rng.random_range(0..m)));
        order.shuffle(rng);
    }
    order
}

fn snapshot_record(
    params: &AlignerParams,
    x1: &Array2<f64>,
    x2: &Array2<f64>,
    tree1: &KdTree,
    tree2: &KdTree,
    lambda: f64,
    epoch: usize,
) -> Result<TrainRecord> {
    let parts = LossParts::evaluate(params, x1, x2)?;
    let nn12 = mean_nn_distance_in(tree2, &params.g12.forward_batch(x1)?)?;
    let nn21 = mean_nn_distance_in(tree1, &params.g21.forward_batch(x2)?)?;
    let r = TrainRecord {
        epoch,
        adv12: parts.adv12,
        adv21: parts.adv21,
        cycle: parts.cycle,
        total: parts.total(lambda),
        nn12,
        nn21,
    };
    let values = [r.adv12, r.adv21, r.cycle, r.total, r.nn12, r.nn21];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            epoch,
            detail: format!("snapshot losses {values:?}"),
        });
    }
    Ok(r)
}

fn check_inputs(x1: &EmbeddingMatrix, x2: &EmbeddingMatrix) -> Result<()> {
    if x1.is_empty() || x2.is_empty() {
        return Err(Error::Empty("training embeddings".into()));
    }
    if x1.dim() != x2.dim() {
        return Err(Error::DimensionMismatch {
            expected: x1.dim(),
            found: x2.dim(),
        });
    }
    Ok(())
}

/// Trains from the standard initialization for `cfg`.
pub fn train(x1: &EmbeddingMatrix, x2: &EmbeddingMatrix, cfg: &TrainConfig) -> Result<TrainedAligner> {
    check_inputs(x1, x2)?;
    train_from(x1, x2, cfg, init_params(x1.dim(), cfg))
}

/// Trains starting from the given parameters.
pub fn train_from(
    x1: &EmbeddingMatrix,
    x2: &EmbeddingMatrix,
    cfg: &TrainConfig,
    init: AlignerParams,
) -> Result<TrainedAligner> {
    check_inputs(x1, x2)?;
    if init.dim() != x1.dim() {
        return Err(Error::DimensionMismatch {
            expected: x1.dim(),
            found: init.dim(),
        });
    }
    let mut trainer = Trainer::new(init, cfg)?;
    let mut history = TrainHistory::default();
    let mut snapshots = Vec::new();
    if cfg.epochs == 0 {
        return Ok(TrainedAligner {
            params: trainer.params,
            history,
            snapshots,
            config: cfg.clone(),
        });
    }

    let (a1, a2) = (x1.vectors(), x2.vectors());
    let tree1 = KdTree::build(a1)?;
    let tree2 = KdTree::build(a2)?;
    let record = |params: &AlignerParams, epoch| snapshot_record(params, a1, a2, &tree1, &tree2, cfg.lambda, epoch);

    history.push(record(&trainer.params, 0)?);
    snapshots.push(trainer.params.clone());

    let mut rng = seeded(cfg.seed, 11);
    let n = a1.nrows().max(a2.nrows());
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        let order1 = epoch_order(&mut rng, a1.nrows(), n);
        let order2 = epoch_order(&mut rng, a2.nrows(), n);
        for start in (0..n).step_by(cfg.batch_size) {
            let end = (start + cfg.batch_size).min(n);
            let b1 = a1.select(Axis(0), &order1[start..end]);
            let b2 = a2.select(Axis(0), &order2[start..end]);
            if step % cfg.eta == 0 {
                trainer.discriminator_step(&b1, &b2)?;
            }
            trainer.generator_step(&b1, &b2)?;
            step += 1;
            if !trainer.params.all_finite() {
                let last = history.records.last().map_or(0, |r| r.epoch);
                return Err(Error::NonFinite {
                    epoch,
                    detail: format!("parameters diverged at step {step}; last finite snapshot is epoch {last}"),
                });
            }
        }
        if epoch % cfg.snapshot_every == 0 || epoch == cfg.epochs {
            let r = record(&trainer.params, epoch)?;
            log::debug!(
                "epoch {epoch}: total {:.4} cycle {:.4} nn12 {:.4} nn21 {:.4}",
                r.total,
                r.cycle,
                r.nn12,
                r.nn21
            );
            history.push(r);
            snapshots.push(trainer.params.clone());
        }
    }
    Ok(TrainedAligner {
        params: trainer.params,
        history,
        snapshots,
        config: cfg.clone(),
    })
}

/// Direction-averaged mean nearest-neighbor distance of the current parameters.
pub fn heuristic_distance(params: &AlignerParams, x1: &EmbeddingMatrix, x2: &EmbeddingMatrix) -> Result<f64> {
    let tree1 = KdTree::build(x1.vectors())?;
    let tree2 = KdTree::build(x2.vectors())?;
    let nn12 = mean_nn_distance_in(&tree2, &params.g12.forward_batch(x1.vectors())?)?;
    let nn21 = mean_nn_distance_in(&tree1, &params.g21.forward_batch(x2.vectors())?)?;
    Ok(0.5 * (nn12 + nn21))
}

#[derive(Clone, Debug)]
pub struct Selection {
    /// The winning run, with its best snapshot restored.
    pub aligner: TrainedAligner,
    /// Position of the winner in the grid.
    pub index: usize,
    /// Heuristic score of every grid entry, in grid order.
    pub scores: Vec<f64>,
}

impl Selection {
    pub fn config(&self) -> &TrainConfig {
        &self.aligner.config
    }
}

/// Trains every configuration and keeps the one whose best snapshot has the
/// smallest direction-averaged mean nearest-neighbor distance (earliest on ties).
/// Runs without snapshots are scored on their final parameters.
pub fn model_select(x1: &EmbeddingMatrix, x2: &EmbeddingMatrix, grid: &[TrainConfig]) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("model selection grid is empty".into()));
    }
    let mut best: Option<(usize, TrainedAligner)> = None;
    let mut scores = Vec::with_capacity(grid.len());
    for (i, cfg) in grid.iter().enumerate() {
        let run = train(x1, x2, cfg)?;
        let score = match run.history.best() {
            Some(r) => r.mean_nn_distance(),
            None => heuristic_distance(&run.params, x1, x2)?,
        };
        log::info!(
            "grid {}/{}: lambda={} eta={} variant={} score={score:.6}",
            i + 1,
            grid.len(),
            cfg.lambda,
            cfg.eta,
            cfg.mapper_variant
        );
        let improves = best.is_none() || scores.iter().all(|&s| score < s);
        scores.push(score);
        if improves {
            best = Some((i, run));
        }
    }
    let (index, mut aligner) = best.expect("grid is non-empty");
    aligner.restore_best();
    Ok(Selection { aligner, index, scores })
}
