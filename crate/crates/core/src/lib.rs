//! Multi-behavior graph meta network recommender.
//!
//! The crate is organized bottom-up:
//!
//! - [`autodiff`]: tape-based reverse-mode differentiation with sparse products.
//! - [`data`]: interaction tensors, normalized behavior graphs, leave-one-out
//!   splits and training-pair sampling.
//! - [`model`]: meta-context contextualization, meta graph propagation and
//!   meta-knowledge transfer scoring.
//! - [`train`]: the multi-task hinge objective, Adam, checkpoints.
//! - [`eval`]: HR@N / NDCG@N evaluation, baselines and reports.
//! - [`config`] and [`pipeline`]: run configuration and the end-to-end run.

pub mod autodiff;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod train;

pub use autodiff::{SparseMatrix, Tape, Tensor, Var};
pub use config::RunConfig;
pub use data::{InteractionTensor, LoadedData, SplitDataset};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use model::{Ablation, Model, ModelConfig, ParamStore};
pub use train::{TrainConfig, TrainState};
