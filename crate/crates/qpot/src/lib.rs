//! Exact exterior calculus and lattice potential theory for quaternionic
//! plurisubharmonic functions.
//!
//! The library has two halves.
//!
//! The symbolic half works over exact complex-rational arithmetic: an
//! exterior algebra on the span of `ω⁰ … ω^{2n−1}` ([`exterior`]), multivariate
//! polynomials in the real coordinates `x₀ … x_{4n−1}` ([`poly`]), the
//! first-order operator pairs `∇_{jα}` with the induced differentials `d₀`,
//! `d₁`, the Baston operator `Δ = d₀d₁`, Monge-Ampère densities, and the
//! quaternionic Hessian ([`calc`]), plus rational quaternion linear algebra
//! with the Moore determinant ([`quat`]).
//!
//! The numeric half discretizes the `n = 1` case, where the Monge-Ampère
//! density is the ordinary Laplacian on `ℝ⁴`: uniform lattices with masked
//! ball domains ([`grid`]), relative extremal functions computed as obstacle
//! problems, and the capacities built from their masses ([`potential`]).
//!
//! [`verify`] runs a battery of identity, inequality, and convergence checks
//! and reports margins; [`table`] and [`config`] serve the command-line
//! runner.

pub mod calc;
pub mod config;
pub mod exterior;
pub mod grid;
pub mod poly;
pub mod potential;
pub mod quat;
pub mod report;
pub mod scalar;
pub mod table;
pub mod verify;

use thiserror::Error;

/// Unified error type for every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum QpotError {
    /// Mismatched dimensions, degrees, or index ranges between operands.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Geometric or analytic precondition violated (bad radius, region
    /// escaping the masked domain, non-monotone schedule, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A compact set fails to sit inside the domain ball.
    #[error("compact set not inside the domain: {0}")]
    CompactNotInside(String),

    /// A matrix handed to the Moore determinant is not hyperhermitian.
    #[error("not hyperhermitian: {0}")]
    NotHyperhermitian(String),

    /// The obstacle solver hit its iteration cap before reaching tolerance.
    #[error("solver stalled after {iterations} sweeps: residual {residual:.3e}, tolerance {tolerance:.3e}")]
    SolverStalled {
        iterations: u64,
        residual: f64,
        tolerance: f64,
    },

    /// Configuration rejected; the message lists every violation found.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    /// Malformed file content (grid snapshots, manifests, tables).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QpotError>;
