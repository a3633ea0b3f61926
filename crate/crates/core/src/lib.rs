//! Class-level machine unlearning for small softmax audio classifiers.
//!
//! The crate bundles a dense ReLU classifier with its training loop, a
//! log-mel front end with a synthetic tone-complex corpus, the four-phase
//! forgetting pipeline in [`qp`], four comparison unlearners in [`baselines`],
//! the evaluation metrics in [`metrics`], and the experiment driver in
//! [`experiment`] that the `erasure` binary wraps.
//!
//! Data-parallel loops go through [`exec`], which folds fixed-size chunks in
//! index order so parallel and sequential runs give bit-identical results.
//! Building without the default `parallel` feature drops the rayon dependency.

pub mod audio;
pub mod baselines;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod loss;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod qp;
pub mod rng;
pub mod train;

pub use dataset::{ForgetSet, LabeledDataset, Sample};
pub use error::{Error, Result};
pub use exec::Exec;
pub use metrics::{evaluate, EvaluationReport};
pub use model::Classifier;
pub use qp::{run_qp_audio_eraser, UnlearnConfig};
