//! Simulation and verification toolkit for critical decomposable 2-type
//! Galton-Watson branching processes with immigration.
//!
//! The crate has four layers:
//!
//! * [`law`] / [`model`] / [`simulate`] / [`decompose`] — the discrete
//!   branching engine: offspring and immigration laws with exact moments,
//!   parameter classification into the five critical regimes of the mean
//!   matrix, exact integer path simulation, and martingale-difference
//!   decompositions of the paths.
//! * [`moments`] — closed-form mean/covariance formulas, cross-time
//!   covariances, growth-order tables, and an exhaustive small-model pmf
//!   oracle.
//! * [`limits`] — the continuous limit objects: squared Bessel (CIR-type)
//!   diffusions by Euler-Maruyama, closed-form Laplace transforms, and the
//!   stationary law of the subcritical single-type chain via its
//!   generating-function product.
//! * [`harness`] — scaled step processes, distribution distances, and the
//!   per-regime experiments that compare simulation against the limit
//!   theory, with JSON/CSV reporting.
//!
//! All randomness flows through explicit [`rng`] streams derived from a
//! master seed and a replicate index, so every result is reproducible and
//! independent of the parallel schedule.

pub mod acceptance;
pub mod config;
pub mod decompose;
pub mod harness;
pub mod law;
pub mod limits;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod rng;
pub mod simulate;

mod error;

pub use error::Error;
pub use law::{Law, Marginal};
pub use linalg::{Mat2, Vec2};
pub use model::{build_model, mean_matrix_power, CaseLabel, ModelParams};
pub use rng::{seed_plan, RngStream, StreamKey};
pub use simulate::{simulate_path, PathRecord, SamplingMode};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
