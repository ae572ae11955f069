//! Numerical toolkit for black and dark solitons of the defocusing NLS
//! equation with intensity-dependent dispersion,
//!
//! ```text
//!   i (1 - |psi|^2) psi_t + psi_xx + 2 (1 - |psi|^2) psi = eps V(x) psi .
//! ```
//!
//! The standing kink `tanh(x)` and its traveling extensions live on a
//! truncated line with sech^2-weighted inner products. The crate provides
//!
//! * finite-difference grids, quadrature and the weighted inner product,
//! * closed-form reference fields and their numerically stable evaluation,
//! * the dark-soliton family for every wave speed,
//! * symmetric banded pencils for the linearized operators and their
//!   weighted eigensolvers,
//! * conserved quantities, Lyapunov quadratic forms, modulation
//!   decomposition,
//! * pinning of the kink by a small external potential with the
//!   stability/instability dichotomy of the bifurcating eigenvalue pair,
//! * conservative implicit-midpoint time stepping with monitors,
//! * the acceptance suite behind `blacksol verify`.

pub mod evolve;
pub mod grid;
pub mod invariants;
pub mod kernels;
pub mod linalg;
pub mod operators;
pub mod pinning;
pub mod soliton;
pub mod spectra;
pub mod verify;

pub use grid::{Grid, RealField, ComplexField};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("matrix not positive definite (pivot {index})")]
    NotPositiveDefinite { index: usize },
    #[error("singular factorization (pivot {index})")]
    SingularFactor { index: usize },
    #[error("Lanczos breakdown after {restarts} restarts")]
    Breakdown { restarts: usize },
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("grid too coarse for the field: {0}")]
    TooCoarse(String),
    #[error("field leaves admissible set: {0}")]
    NotAdmissible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
