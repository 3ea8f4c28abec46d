//! AdaDelta optimization, non-inverted embedding dropout, the epoch loop
//! with dev-based early stopping, and multi-seed runs.

mod adadelta;
mod config;
mod dropout;
mod train;

pub use adadelta::{adadelta_update, AdaDelta};
pub use config::RunConfig;
pub use dropout::{apply_dropout, dropout_node, Mode};
pub use train::{
    evaluate_model, predict_corpus, run_seeds, train, EpochRecord, SeedReport, SeedRun, StopReason, TrainHistory,
    TrainOutcome, Trainer,
};
