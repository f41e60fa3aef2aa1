use thiserror::Error;

/// Errors produced by model construction, simulation and the statistical
/// harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A probability table fails basic sanity (negative entry, bad mass).
    #[error("invalid law: {0}")]
    InvalidLaw(String),

    /// Total mass of a finite table is not 1 within tolerance.
    #[error("law mass {total} differs from 1 by more than {tol}")]
    LawMass { total: f64, tol: f64 },

    /// Both off-diagonal offspring means are positive, so the mean matrix is
    /// irreducible and outside the decomposable setting.
    #[error("irreducible offspring mean matrix: a12={a12}, a21={a21} are both positive")]
    Irreducible { a12: f64, a21: f64 },

    /// The type-2 offspring law puts mass on outcomes with type-1 children.
    #[error("type-2 offspring law has mass {mass} on positive type-1 counts")]
    DecomposabilityViolated { mass: f64 },

    /// A population counter exceeded the 64-bit range.
    #[error("population overflow at step {step}")]
    PopulationOverflow { step: usize },

    /// A path is too short for the requested scaling window.
    #[error("path horizon {actual} is shorter than required {needed}")]
    HorizonTooShort { needed: usize, actual: usize },

    /// Lengths of a path and a derived series disagree.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// An operation needs a specific criticality case.
    #[error("case mismatch: expected {expected}, model classifies as {actual}")]
    CaseMismatch { expected: String, actual: String },

    /// The model is outside the five covered critical regimes.
    #[error("model not covered: {0}")]
    NotCovered(String),

    /// The exhaustive pmf oracle would exceed its state budget.
    #[error("state budget exceeded: {states} states, budget {budget}")]
    BudgetExceeded { states: usize, budget: usize },

    /// The exhaustive pmf oracle needs finite-support laws.
    #[error("operation requires finite-support laws: {0}")]
    UnboundedSupport(String),

    /// An iterative computation failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// Numerical quadrature could not reach the requested tolerance.
    #[error("quadrature did not converge within the subdivision budget")]
    QuadratureFailed,

    /// A statistic was requested on an empty sample.
    #[error("empty sample")]
    EmptySample,

    /// Mass folded back by the discrete Fourier inversion exceeds the bound.
    #[error("aliasing mass {mass} exceeds bound {bound}; increase transform points")]
    AliasingMass { mass: f64, bound: f64 },

    /// Experiment configuration is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A model specification file could not be parsed.
    #[error("model file: {0}")]
    ModelFile(String),
}
