//! End-to-end orchestration: run configuration, training loops, evaluation,
//! and the label-budget sweep.

pub mod config;
pub mod eval;
pub mod sweep;
pub mod train;

pub use config::RunConfig;
pub use eval::{
    aggregate_rows, cluster_score, embeddings_to_csv, evaluate, metrics_to_csv,
    permutation_null, test_dataset, write_embeddings, write_metrics, MetricsRow, Policy,
    METRICS_HEADER,
};
pub use sweep::{run_cell, sweep, DEFAULT_M_LABELED_GRID};
pub use train::{finetune, pretrain, train_supervised_only, TrainOutcome};
