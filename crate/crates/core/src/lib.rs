//! Diverse and distinct image tagging.
//!
//! Tags live in a synonym-merged hierarchy whose leaf-to-root chains are
//! semantic paths. A generator maps image features plus noise to per-tag
//! posteriors, which become the quality term of a DPP kernel; subsets are
//! drawn sequentially with at most one tag per path. The generator is
//! trained against a set-level discriminator with a policy-gradient
//! surrogate, and outputs are scored by weighted path-level P/R/F1.

pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod dpp;
pub mod error;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod subset;
pub mod train;

pub use cli::run_cli;
pub use dataset::{
    generate_synthetic_dataset, load_dataset, load_dir, Dataset, DatasetHeader, SynthSpec,
};
pub use dpp::{
    sample_best_of, sample_distinct_subset, DppKernel, Draw, EmbeddingTable, SimilarityMatrix,
    StopReason,
};
pub use error::{Error, Result};
pub use graph::{GroundTruthFamily, SemanticGraph, SemanticPath, TagNode, TagSpec};
pub use metrics::{semantic_prf, EvalReport, PrfTriple, Protocol};
pub use model::{DiscriminatorParams, GeneratorParams, ImageRecord, TagSpace};
pub use subset::{PathId, TagId, TagSubset};
pub use train::{TrainConfig, TrainState};
