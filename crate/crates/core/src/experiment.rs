//! End-to-end runs: embed both graphs, select a trained aligner, match nodes,
//! and the permute-and-perturb noise sweep.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adversarial::{default_grid, grid_from_key_values, model_select, Selection, TrainConfig};
use crate::align::{align_both, AlignmentResult, Direction};
use crate::config::{self, KeyValues};
use crate::embedding::{embed_graph, EmbedConfig, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::eval::accuracy_counts;
use crate::graph::{permute_nodes, remove_edges, Correspondence, Graph};

pub const DEFAULT_NOISE_LEVELS: [f64; 3] = [0.05, 0.10, 0.20];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub embed1: EmbedConfig,
    pub embed2: EmbedConfig,
    pub grid: Vec<TrainConfig>,
    /// Standardize embedding columns before training and alignment.
    pub standardize: bool,
    /// Align with the final parameters instead of the best-heuristic snapshot.
    pub use_final: bool,
    /// Seed for node permutation and edge removal in the noise sweep.
    pub perturb_seed: u64,
    pub noise_levels: Vec<f64>,
    /// Test hook: in the noise sweep, use the second graph's embedding, permuted,
    /// as the first graph's instead of embedding the perturbed copy.
    pub reuse_embedding: bool,
    /// Where stage artifacts are written; nothing is written when absent.
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            embed1: EmbedConfig::default(),
            embed2: EmbedConfig::default(),
            grid: default_grid(&TrainConfig::default()),
            standardize: false,
            use_final: false,
            perturb_seed: 0,
            noise_levels: DEFAULT_NOISE_LEVELS.to_vec(),
            reuse_embedding: false,
            output_dir: None,
        }
    }
}

fn set_embed(cfg: &mut EmbedConfig, key: &str, raw: &str) -> Result<bool> {
    match key {
        "walks_per_node" => cfg.walk.walks_per_node = config::value(key, raw)?,
        "walk_length" => cfg.walk.walk_length = config::value(key, raw)?,
        "p" | "return_param" => cfg.walk.return_param_p = config::value(key, raw)?,
        "q" | "inout_param" => cfg.walk.inout_param_q = config::value(key, raw)?,
        "dim" => cfg.skipgram.dim = config::value(key, raw)?,
        "window" => cfg.skipgram.window = config::value(key, raw)?,
        "negatives" => cfg.skipgram.negatives_per_positive = config::value(key, raw)?,
        "embed_epochs" => cfg.skipgram.epochs = config::value(key, raw)?,
        "embed_learning_rate" => cfg.skipgram.learning_rate = config::value(key, raw)?,
        "embed_seed" => {
            let s = config::value(key, raw)?;
            cfg.walk.seed = s;
            cfg.skipgram.seed = s;
        }
        _ => return Ok(false),
    }
    Ok(true)
}

fn flag(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidArgument(format!("`{raw}` is not a boolean for `{key}`"))),
    }
}

impl PipelineConfig {
    /// Applies settings on top of `self`.
    ///
    /// Embedding keys apply to both graphs unless prefixed `g1.` or `g2.`.
    /// `grid=default` selects the standard 18-run grid; otherwise training keys
    /// build the grid, with `lambda`, `eta` and `mapper_variant` accepting lists.
    /// Unknown keys are an error.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        let mut train_kv = KeyValues::default();
        let mut default_grid_requested = false;
        let mut probe = TrainConfig::default();
        for (k, v) in kv.iter() {
            let known = match k {
                "standardize" => {
                    self.standardize = flag(k, v)?;
                    true
                }
                "use_final" => {
                    self.use_final = flag(k, v)?;
                    true
                }
                "reuse_embedding" => {
                    self.reuse_embedding = flag(k, v)?;
                    true
                }
                "perturb_seed" => {
                    self.perturb_seed = config::value(k, v)?;
                    true
                }
                "noise_levels" => {
                    self.noise_levels = config::list(k, v)?;
                    true
                }
                "output_dir" => {
                    self.output_dir = Some(PathBuf::from(v));
                    true
                }
                "grid" => match v {
                    "default" => {
                        default_grid_requested = true;
                        true
                    }
                    _ => return Err(Error::InvalidArgument(format!("grid must be `default`, got `{v}`"))),
                },
                "lambda" | "eta" | "mapper_variant" | "variant" => {
                    train_kv.push(k, v);
                    true
                }
                _ => {
                    if let Some(rest) = k.strip_prefix("g1.") {
                        set_embed(&mut self.embed1, rest, v)?
                    } else if let Some(rest) = k.strip_prefix("g2.") {
                        set_embed(&mut self.embed2, rest, v)?
                    } else if set_embed(&mut self.embed1, k, v)? {
                        set_embed(&mut self.embed2, k, v)?
                    } else if probe.set(k, v)? {
                        train_kv.push(k, v);
                        true
                    } else {
                        false
                    }
                }
            };
            if !known {
                return Err(Error::InvalidArgument(format!("unknown configuration key `{k}`")));
            }
        }
        if default_grid_requested || !train_kv.entries.is_empty() {
            let mut base = TrainConfig::default();
            for (k, v) in train_kv.iter() {
                if !matches!(k, "lambda" | "eta" | "mapper_variant" | "variant") {
                    base.set(k, v)?;
                }
            }
            self.grid = if default_grid_requested {
                default_grid(&base)
            } else {
                grid_from_key_values(&train_kv, &base)?
            };
        }
        self.validate()
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let mut c = Self::default();
        c.apply(kv)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for e in [&self.embed1, &self.embed2] {
            e.walk.validate()?;
            e.skipgram.validate()?;
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("training grid is empty".into()));
        }
        for c in &self.grid {
            c.validate()?;
        }
        check_noise_levels(&self.noise_levels)
    }
}

fn check_noise_levels(levels: &[f64]) -> Result<()> {
    if levels.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidArgument("noise levels must lie in [0, 1]".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("noise levels must be strictly increasing".into()));
    }
    Ok(())
}

/// Everything a pipeline run produced.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// The chosen directional alignment.
    pub result: AlignmentResult,
    pub one_to_two: AlignmentResult,
    pub two_to_one: AlignmentResult,
    pub selection: Selection,
    /// Embeddings as trained on (standardized when configured).
    pub x1: EmbeddingMatrix,
    pub x2: EmbeddingMatrix,
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

fn selection_tsv(grid: &[TrainConfig], sel: &Selection) -> String {
    let mut out = String::from("# index\tlambda\teta\tvariant\tscore\tselected\n");
    for (i, (c, s)) in grid.iter().zip(&sel.scores).enumerate() {
        out.push_str(&format!(
            "{i}\t{}\t{}\t{}\t{s}\t{}\n",
            c.lambda,
            c.eta,
            c.mapper_variant,
            u8::from(i == sel.index)
        ));
    }
    out
}

/// Training, selection and alignment on given embeddings.
pub fn align_embeddings(x1: &EmbeddingMatrix, x2: &EmbeddingMatrix, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (x1, x2) = if cfg.standardize {
        (x1.standardized(), x2.standardized())
    } else {
        (x1.clone(), x2.clone())
    };
    let mut selection = model_select(&x1, &x2, &cfg.grid).map_err(|e| e.in_stage("train"))?;
    if cfg.use_final {
        if let Some(last) = selection.aligner.snapshots.last() {
            selection.aligner.params = last.clone();
        }
    }
    let p = &selection.aligner.params;
    let (a1, a2) = align_both(&p.g12, &p.g21, &x1, &x2).map_err(|e| e.in_stage("align"))?;
    let result = if a2.mean_nn_distance < a1.mean_nn_distance { a2.clone() } else { a1.clone() };

    if let Some(dir) = &cfg.output_dir {
        let persist = || -> Result<()> {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            selection.aligner.checkpoint().write(dir.join("checkpoint.json"))?;
            write_text(dir, "train.log", &selection.aligner.history.to_log())?;
            write_text(dir, "selection.tsv", &selection_tsv(&cfg.grid, &selection))?;
            result.write(dir.join("alignment.tsv"))?;
            a1.write(dir.join("alignment_1to2.tsv"))?;
            a2.write(dir.join("alignment_2to1.tsv"))
        };
        persist().map_err(|e| e.in_stage("persist"))?;
    }
    Ok(PipelineOutput {
        result,
        one_to_two: a1,
        two_to_one: a2,
        selection,
        x1,
        x2,
    })
}

/// Embeds both graphs, then [`align_embeddings`]. Raw embeddings are written to
/// the output directory before training starts.
pub fn run_pipeline(g1: &Graph, g2: &Graph, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let x1 = embed_graph(g1, &cfg.embed1).map_err(|e| e.in_stage("embed graph 1"))?;
    let x2 = embed_graph(g2, &cfg.embed2).map_err(|e| e.in_stage("embed graph 2"))?;
    if let Some(dir) = &cfg.output_dir {
        let persist = || -> Result<()> {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            x1.write(dir.join("embedding_1.txt"))?;
            x2.write(dir.join("embedding_2.txt"))
        };
        persist().map_err(|e| e.in_stage("persist"))?;
    }
    align_embeddings(&x1, &x2, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub noise: f64,
    pub accuracy: f64,
    pub correct: usize,
    /// Ground-truth pairs counted in the denominator.
    pub evaluated: usize,
    pub mean_nn_distance: f64,
    pub direction: Direction,
    /// Position of the selected configuration in the grid.
    pub selected: usize,
    pub runtime_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub records: Vec<NoiseRecord>,
    pub config: PipelineConfig,
    pub seed: u64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# noise\taccuracy\tmean_nn_distance\tdirection\truntime_seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.3}\n",
                r.noise, r.accuracy, r.mean_nn_distance, r.direction, r.runtime_seconds
            ));
        }
        out
    }
}

/// The permuted, edge-thinned copy of `g` used as the first graph, with its truth.
pub fn perturb(g: &Graph, noise: f64, seed: u64) -> Result<(Graph, Correspondence)> {
    let (permuted, perm) = permute_nodes(g, seed);
    let truth = Correspondence::from_permutation(g, &permuted, &perm);
    let thinned = remove_edges(&permuted, noise, seed)?;
    Ok((thinned, truth))
}

/// For each noise level: perturb `g` into a first graph, embed it, select an
/// aligner against `g`'s embedding, align, and score against the permutation.
/// `g`'s embedding is computed once and shared by all levels.
pub fn run_noise_experiment(g: &Graph, noise_levels: &[f64], cfg: &PipelineConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    check_noise_levels(noise_levels)?;
    let x2 = embed_graph(g, &cfg.embed2).map_err(|e| e.in_stage("embed graph 2"))?;
    let mut records = Vec::with_capacity(noise_levels.len());
    for &noise in noise_levels {
        let start = Instant::now();
        let (n1, truth) = perturb(g, noise, cfg.perturb_seed).map_err(|e| e.in_stage("perturb"))?;
        let x1 = if cfg.reuse_embedding {
            let (_, perm) = permute_nodes(g, cfg.perturb_seed);
            x2.permuted(&perm)?
        } else {
            embed_graph(&n1, &cfg.embed1).map_err(|e| e.in_stage("embed graph 1"))?
        };
        let mut level_cfg = cfg.clone();
        level_cfg.output_dir = cfg.output_dir.as_ref().map(|d| d.join(format!("noise_{noise}")));
        let out = align_embeddings(&x1, &x2, &level_cfg)?;
        let counts = accuracy_counts(&out.result, &truth).map_err(|e| e.in_stage("evaluate"))?;
        let record = NoiseRecord {
            noise,
            accuracy: counts.accuracy(),
            correct: counts.correct,
            evaluated: counts.evaluated,
            mean_nn_distance: out.result.mean_nn_distance,
            direction: out.result.direction,
            selected: out.selection.index,
            runtime_seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "noise {noise}: accuracy {:.4} ({} of {}), mean NN distance {:.4}, {:.1}s",
            record.accuracy,
            record.correct,
            record.evaluated,
            record.mean_nn_distance,
            record.runtime_seconds
        );
        records.push(record);
    }
    Ok(ExperimentReport {
        records,
        config: cfg.clone(),
        seed: cfg.perturb_seed,
    })
}
