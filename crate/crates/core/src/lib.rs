//! Out-of-distribution detection by averaging confidence over an input and
//! its corrupted variants.
//!
//! The pipeline: [`corruption`] expands an image into a dimension set,
//! a model (external, or the built-in [`ingestion::PrototypeModel`]) turns
//! every view into logits, [`scoring`] averages a confidence score across
//! views, and [`metrics`] evaluates the resulting ID/OOD split. [`gmm`]
//! holds the closed-form Gaussian model of why averaging lowers FPR,
//! [`mutation`] the per-sample confidence-drop diagnostics, and
//! [`synthetic`] a self-contained benchmark exhibiting the effect.

pub mod corruption;
pub mod gmm;
pub mod image;
pub mod ingestion;
pub mod metrics;
pub mod mutation;
pub mod rng;
pub mod scoring;
pub mod synthetic;

pub use corruption::{
    apply_corruption, expand_dimensions, list_corruptions, Corruption, CorruptionError, CorruptionKind, CorruptionSpec,
    DimensionSet, DimensionTag, SeverityTable,
};
pub use gmm::{analytic_fpr_highscore, analytic_fpr_paper, verify_lemma, GmmError, GmmParams, LemmaCheck, ParamDelta};
pub use image::{Image, ImageError};
pub use ingestion::{
    read_logits, score_table, select_corruptions, write_logits, IngestionError, LogitRecord, LogitTable,
    PrototypeModel, SelectionResult,
};
pub use metrics::{auroc, evaluate, fpr_at_tpr, EvalResult, MetricsError, ScoredSplit, Split};
pub use mutation::{frequency_split, FrequencySplit, MutationError, MutationRecord};
pub use rng::CounterRng;
pub use scoring::{cover_score, DimensionalLogits, LogitVector, ScoreConfig, ScoreKind, ScoringError};
pub use synthetic::{gen_synthetic_benchmark, run_cover_experiment, SyntheticBenchmark, SyntheticError};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corruption(#[from] CorruptionError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Ingestion(#[from] IngestionError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
}
