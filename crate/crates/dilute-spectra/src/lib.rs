//! Laboratory for the extreme singular values of dilute sparse rectangular
//! random matrices.
//!
//! The crate samples N x n matrices with entries `xi_jk X_jk` (independent
//! Bernoulli(p) masks times i.i.d. standardized values), computes their
//! singular values with an exact dense oracle and an iterative solver, and
//! runs Monte Carlo campaigns that probe the tail behavior of `s_1 / sqrt(Np)`
//! and `s_n / sqrt(Np)` along `Np ~ log^alpha N` schedules, together with the
//! supporting machinery: the truncation pipeline, the sparsity-ladder
//! recursion, compressible/incompressible sphere geometry, and Levy
//! concentration estimates.

pub mod concentration;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod ladder;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
