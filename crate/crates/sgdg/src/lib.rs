//! Sparse grid interior penalty discontinuous Galerkin (IPDG) solver for the
//! d-dimensional variable-coefficient Helmholtz problem
//!
//! ```text
//!     -Δu + c·u = f   in [0,1]^d,      u = 0 on the boundary,  c ≥ 0,
//! ```
//!
//! discretized on the sparse tensor-product space spanned by orthonormal
//! multiwavelets, keeping only tensor levels `l` with `|l|_1 <= N`.
//!
//! Two stiffness operators are provided:
//!
//! * `original` — the full symmetric interior penalty bilinear form, and
//! * `modified` — the semi-orthogonality variant that drops every
//!   level-pair block with `|max(l, l')|_1 > N`, which is exactly zero for
//!   constant coefficients and asymptotically negligible for smooth ones.
//!
//! The crate is organized along the pipeline:
//!
//! * [`wavelet`] — 1D orthonormal multiwavelet hierarchy on `[0,1]`,
//! * [`space`] — multi-index combinatorics and DOF enumeration,
//! * [`quadrature`] — Gauss rules, merged segment partitions, face sets,
//! * [`problem`] — coefficient/source/solution fields and built-in problems,
//! * [`assembly`] — stiffness matrix and load vector assembly,
//! * [`sparse`] — CSR storage, Matrix Market and pattern export,
//! * [`linalg`] — SPD solvers and condition number estimation,
//! * [`metrics`] — L2 projection, error norms, convergence orders,
//! * [`study`] — convergence/sparsity study driver behind the `sgdg` CLI.

pub mod assembly;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod quadrature;
pub mod space;
pub mod sparse;
pub mod study;
pub mod wavelet;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Problem data violates a requirement (e.g. negative coefficient).
    #[error("problem error: {0}")]
    Problem(String),

    /// An operation needs data the caller did not provide.
    #[error("capability error: {0}")]
    Capability(String),

    /// Desk-scale resource guard tripped (DOF or NNZ cap).
    #[error("resource guard: {0}")]
    ResourceGuard(String),

    /// Iterative solver failed to reach the requested tolerance.
    #[error("solver failure: {message} (relative residual {residual:.3e})")]
    SolverFailure { message: String, residual: f64 },

    /// Factorization breakdown: the matrix is not positive definite.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("study configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
