//! Regularized all-together multiclass SVMs trained by a two-block ADMM.
//!
//! Supports elastic-net, group-lasso and supnorm penalties on top of an
//! `l1` term, with a Woodbury-reduced linear solve for the `(W, b)` block
//! when there are fewer samples than features.

pub mod admm;
pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod linsolve;
pub mod model;
pub mod prox;

pub use admm::{default_hyperparams, fit, fit_with, FitOptions, FitReport, SolverState};
pub use error::{Error, Result};
pub use model::{Classifier, Dataset, Hyperparams, RegularizerKind};
