//! Unsupervised alignment of two networks through their node embeddings.
//!
//! Both graphs are embedded with biased random walks and skip-gram, a pair of
//! cycle-consistent adversarial mappers learns to carry one embedding cloud onto
//! the other, and nodes are matched by exact nearest-neighbor search in the
//! shared space. Model selection needs no ground truth: the configuration whose
//! mapped points sit closest to their nearest neighbors wins.

pub mod config;
pub mod error;
pub mod rng;

pub mod graph;
pub mod walk;
pub mod skipgram;
pub mod embedding;

pub mod nn;
pub mod loss;
pub mod kdtree;
pub mod align;
pub mod adversarial;
pub mod eval;
pub mod experiment;
pub mod synthetic;

pub use error::{Error, Result};
pub use graph::{Correspondence, Graph};
pub use embedding::{embed_graph, EmbedConfig, EmbeddingMatrix};
pub use kdtree::KdTree;
pub use align::{align_bidirectional, AlignmentResult, Direction};
pub use adversarial::{model_select, train, TrainConfig, TrainedAligner};
pub use experiment::{run_noise_experiment, run_pipeline, PipelineConfig};
