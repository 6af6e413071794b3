//! Core library for learning field-to-field surrogate operators on desk-scale
//! fire/smoke data.
//!
//! The pipeline has three stages:
//!
//! 1. [`synthfire`] generates snapshot pairs (time-since-ignition fields and
//!    cumulative smoke fields) from a level-set fire front coupled to a
//!    convection-diffusion smoke transport solve.
//! 2. [`reduction`] builds truncated POD/PCA bases from snapshot matrices, and
//!    [`mlop`] fits polynomial coefficient-to-coefficient operators (linear or
//!    quadratic in the input coefficients, always linear in the unknowns) on
//!    top of those bases. [`baselines`] provides a Gaussian-process regressor
//!    for comparison.
//! 3. [`evalqoi`] scores predictions: ROC/AUC and IoU against thresholded
//!    observations, relative errors, and Monte Carlo estimators for a
//!    log-transformed exposure quantity of interest.
//!
//! [`tensorio`] defines the on-disk matrix format and dataset manifests shared
//! by all stages. Everything is deterministic for a fixed seed: snapshot
//! generation, train/validation/test splitting, and subsampling all derive
//! from explicit [`rand_chacha::ChaCha8Rng`] streams, and parallel code paths
//! (enabled by the `parallel` feature, on by default) only use index-ordered
//! maps so results are bitwise identical to the sequential fallback.

pub mod baselines;
pub mod error;
pub mod evalqoi;
pub mod mlop;
pub mod par;
pub mod reduction;
pub mod synthfire;
pub mod tensorio;

pub use error::{Error, Result};
