use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netalign::adversarial::{grid_from_key_values, model_select, train, Checkpoint, TrainConfig};
use netalign::align::{align_both, align_bidirectional, Direction};
use netalign::config::KeyValues;
use netalign::embedding::{embed_graph, EmbeddingMatrix};
use netalign::eval::{accuracy_counts, pca_project};
use netalign::experiment::{perturb, run_pipeline, PipelineConfig};
use netalign::graph::{graph_stats, read_edge_list, write_edge_list, Correspondence};
use netalign::{AlignmentResult, Error, Result};

#[derive(Parser)]
#[command(name = "netalign", version, about = "Unsupervised network alignment through adversarially aligned node embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct EmbedFlags {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    walks_per_node: Option<usize>,
    #[arg(long)]
    walk_length: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    embed_epochs: Option<usize>,
    #[arg(long)]
    embed_seed: Option<u64>,
}

#[derive(Args, Default)]
struct TrainFlags {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long)]
    generator_loss: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a graph with biased random walks and skip-gram.
    Embed {
        graph: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Keep edges whose weight column is negative (dropped otherwise).
        #[arg(long)]
        signed: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: EmbedFlags,
    },
    /// Permute a graph and remove a fraction of its edges; writes the graph and the truth.
    Perturb {
        graph: PathBuf,
        #[arg(long)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `<graph>,<truth>`
        #[arg(short, long)]
        output: String,
        #[arg(long)]
        signed: bool,
    },
    /// Train one aligner; writes the best-snapshot checkpoint and the training log.
    Train {
        emb1: PathBuf,
        emb2: PathBuf,
        /// `<checkpoint>,<log>`
        #[arg(short, long)]
        output: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Keep the final parameters instead of the best snapshot.
        #[arg(long)]
        use_final: bool,
        #[arg(long)]
        standardize: bool,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Train every configuration of a grid and keep the best by mean nearest-neighbor distance.
    Select {
        emb1: PathBuf,
        emb2: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// `<checkpoint>,<log>`
        #[arg(short, long)]
        output: Option<String>,
        #[arg(long)]
        standardize: bool,
    },
    /// Match nodes with a trained checkpoint.
    Align {
        checkpoint: PathBuf,
        emb1: PathBuf,
        emb2: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// `best` picks the direction with the smaller mean distance.
        #[arg(long, default_value = "best")]
        direction: String,
        #[arg(long)]
        standardize: bool,
    },
    /// Score an alignment file against a ground-truth correspondence.
    Eval { alignment: PathBuf, truth: PathBuf },
    /// Embed, select, train and align two graphs end to end.
    Pipeline {
        g1: PathBuf,
        g2: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        signed: bool,
        /// Ground truth to score the result against.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        embed: EmbedFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Project an embedding onto its top principal components.
    Pca {
        embedding: PathBuf,
        #[arg(short, default_value_t = 2)]
        k: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Node, edge and overlap counts.
    Stats {
        g1: PathBuf,
        g2: Option<PathBuf>,
        truth: Option<PathBuf>,
        #[arg(long)]
        signed: bool,
    },
}

fn push<T: ToString>(kv: &mut KeyValues, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        kv.push(key, v.to_string());
    }
}

impl EmbedFlags {
    fn push_into(&self, kv: &mut KeyValues) {
        push(kv, "dim", &self.dim);
        push(kv, "walks_per_node", &self.walks_per_node);
        push(kv, "walk_length", &self.walk_length);
        push(kv, "p", &self.p);
        push(kv, "q", &self.q);
        push(kv, "window", &self.window);
        push(kv, "negatives", &self.negatives);
        push(kv, "embed_epochs", &self.embed_epochs);
        push(kv, "embed_seed", &self.embed_seed);
    }
}

impl TrainFlags {
    fn push_into(&self, kv: &mut KeyValues) {
        push(kv, "lambda", &self.lambda);
        push(kv, "eta", &self.eta);
        push(kv, "epochs", &self.epochs);
        push(kv, "batch_size", &self.batch);
        push(kv, "mapper_variant", &self.variant);
        push(kv, "seed", &self.seed);
        push(kv, "learning_rate", &self.lr);
        push(kv, "snapshot_every", &self.snapshot_every);
        push(kv, "generator_loss", &self.generator_loss);
    }
}

/// Settings from an optional file, followed by the flags that override them.
fn settings(file: &Option<PathBuf>, add: impl FnOnce(&mut KeyValues)) -> Result<KeyValues> {
    let mut kv = match file {
        Some(p) => KeyValues::read(p)?,
        None => KeyValues::default(),
    };
    add(&mut kv);
    Ok(kv)
}

fn two_paths(spec: &str) -> Result<(PathBuf, PathBuf)> {
    match spec.split_once(',') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.into(), b.into())),
        _ => Err(Error::InvalidArgument(format!("expected `<path>,<path>`, got `{spec}`"))),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn load_pair(emb1: &Path, emb2: &Path, standardize: bool) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    let x1 = EmbeddingMatrix::read(emb1)?;
    let x2 = EmbeddingMatrix::read(emb2)?;
    Ok(if standardize {
        (x1.standardized(), x2.standardized())
    } else {
        (x1, x2)
    })
}

fn report(result: &AlignmentResult, truth: &Correspondence) -> Result<()> {
    let c = accuracy_counts(result, truth)?;
    println!("accuracy\t{}", c.accuracy());
    println!("correct\t{}", c.correct);
    println!("evaluated\t{}", c.evaluated);
    if c.evaluated < c.truth_pairs {
        println!("# {} truth pairs have no aligned source node and are not counted", c.truth_pairs - c.evaluated);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Embed { graph, output, signed, config, flags } => {
            let kv = settings(&config, |kv| flags.push_into(kv))?;
            let cfg = PipelineConfig::from_key_values(&kv)?;
            let g = read_edge_list(&graph, signed)?;
            embed_graph(&g, &cfg.embed1)?.write(&output)?;
        }
        Command::Perturb { graph, noise, seed, output, signed } => {
            let (graph_out, truth_out) = two_paths(&output)?;
            let g = read_edge_list(&graph, signed)?;
            let (n1, truth) = perturb(&g, noise, seed)?;
            write_edge_list(&n1, &graph_out)?;
            truth.write(&truth_out)?;
        }
        Command::Train { emb1, emb2, output, config, use_final, standardize, flags } => {
            let (ckpt, log) = two_paths(&output)?;
            let kv = settings(&config, |kv| flags.push_into(kv))?;
            let mut cfg = TrainConfig::default();
            for (k, v) in kv.iter() {
                if !cfg.set(k, v)? {
                    return Err(Error::InvalidArgument(format!("unknown training key `{k}`")));
                }
            }
            cfg.validate()?;
            let (x1, x2) = load_pair(&emb1, &emb2, standardize)?;
            let mut run = train(&x1, &x2, &cfg)?;
            if !use_final {
                run.restore_best();
            }
            run.checkpoint().write(&ckpt)?;
            write(&log, &run.history.to_log())?;
            if let Some(best) = run.history.best() {
                println!("best epoch {} mean_nn_distance {}", best.epoch, best.mean_nn_distance());
            }
        }
        Command::Select { emb1, emb2, grid, output, standardize } => {
            let kv = KeyValues::read(&grid)?;
            let configs = grid_from_key_values(&kv, &TrainConfig::default())?;
            let (x1, x2) = load_pair(&emb1, &emb2, standardize)?;
            let sel = model_select(&x1, &x2, &configs)?;
            println!("# index\tlambda\teta\tvariant\tscore");
            for (i, (c, s)) in configs.iter().zip(&sel.scores).enumerate() {
                let mark = if i == sel.index { "\t*" } else { "" };
                println!("{i}\t{}\t{}\t{}\t{s}{mark}", c.lambda, c.eta, c.mapper_variant);
            }
            if let Some(spec) = output {
                let (ckpt, log) = two_paths(&spec)?;
                sel.aligner.checkpoint().write(&ckpt)?;
                write(&log, &sel.aligner.history.to_log())?;
            }
        }
        Command::Align { checkpoint, emb1, emb2, output, direction, standardize } => {
            let params = Checkpoint::read(&checkpoint)?.params()?;
            let (x1, x2) = load_pair(&emb1, &emb2, standardize)?;
            let result = match direction.as_str() {
                "best" => align_bidirectional(&params.g12, &params.g21, &x1, &x2)?,
                other => {
                    let (a1, a2) = align_both(&params.g12, &params.g21, &x1, &x2)?;
                    match other.parse::<Direction>()? {
                        Direction::OneToTwo => a1,
                        Direction::TwoToOne => a2,
                    }
                }
            };
            result.write(&output)?;
            println!("direction {} mean_nn_distance {}", result.direction, result.mean_nn_distance);
        }
        Command::Eval { alignment, truth } => {
            report(&AlignmentResult::read(&alignment)?, &Correspondence::read(&truth)?)?;
        }
        Command::Pipeline { g1, g2, config, output_dir, signed, truth, embed, train } => {
            let kv = settings(&config, |kv| {
                embed.push_into(kv);
                train.push_into(kv);
                if let Some(d) = &output_dir {
                    kv.push("output_dir", d.display().to_string());
                }
            })?;
            let cfg = PipelineConfig::from_key_values(&kv)?;
            let a = read_edge_list(&g1, signed)?;
            let b = read_edge_list(&g2, signed)?;
            let out = run_pipeline(&a, &b, &cfg)?;
            println!(
                "direction {} mean_nn_distance {} selected {}",
                out.result.direction, out.result.mean_nn_distance, out.selection.index
            );
            if let Some(t) = truth {
                report(&out.result, &Correspondence::read(&t)?)?;
            }
        }
        Command::Pca { embedding, k, output } => {
            let x = EmbeddingMatrix::read(&embedding)?;
            let pca = pca_project(&x, k)?;
            write(&output, &pca.to_tsv(x.labels()))?;
            for (i, v) in pca.explained_variance.iter().enumerate() {
                println!("pc{}\t{v}", i + 1);
            }
        }
        Command::Stats { g1, g2, truth, signed } => {
            let a = read_edge_list(&g1, signed)?;
            let b = g2.map(|p| read_edge_list(p, signed)).transpose()?;
            let t = truth.map(Correspondence::read).transpose()?;
            let s = graph_stats(&a, b.as_ref(), t.as_ref())?;
            println!("graph1\tnodes\t{}\tedges\t{}", s.first.num_nodes, s.first.num_edges);
            if let Some(second) = s.second {
                println!("graph2\tnodes\t{}\tedges\t{}", second.num_nodes, second.num_edges);
            }
            if let (Some(n), Some(e)) = (s.overlap_nodes, s.overlap_edges) {
                println!("overlap\tnodes\t{n}\tedges\t{e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
