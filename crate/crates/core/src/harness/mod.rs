//! Configuration, training, checkpoints, seed replicates, gradient checks
//! and loss curves.

pub mod checkpoint;
mod config;
mod curves;
mod gradcheck;
mod seeds;
mod train;

pub use config::{Profile, RunConfig};
pub use curves::{emit_curves, write_curve, write_trace, CurveSummary, ThresholdRow, CURVE_HEADER};
pub use gradcheck::{case_label, check_scheme, default_cases, grad_check, random_batch, GradCheckConfig, GradCheckEntry, GradCheckReport};
pub use seeds::{aggregate, persist, run_replicate, run_seeds, traces, write_json, Replicate, SeedFailure, SeedResult, SeedsReport};
pub use train::{
    build_model, evaluate_model, initial_embeddings, load_dataset, load_dataset_with, train, Corpus, EarlyStopping, EpochRecord,
    StopDecision, TrainOutcome, TrainTrace,
};
