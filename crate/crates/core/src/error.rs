use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid block model: {0}")]
    InvalidModel(String),

    #[error("energy {eps} is numerically an eigenvalue (pivot {pivot} below floor)")]
    SingularShift { eps: Complex64, pivot: usize },

    #[error("eigensolver did not converge on a {rows}x{cols} matrix within its iteration budget ({iterations} sweeps allowed)")]
    NoConvergence {
        rows: usize,
        cols: usize,
        iterations: usize,
    },

    #[error(
        "transfer product would overflow: accumulated log-norm {log_norm:.1} exceeds {limit}; use the spectral route"
    )]
    OverflowRisk { log_norm: f64, limit: f64 },

    #[error("transfer matrix has an eigenvalue below 1e-300 in magnitude")]
    ZeroEigenvalue,

    #[error("operation needs a unitary corner block B_n")]
    NotUnitaryCorner,

    #[error("requested work {requested} exceeds budget {budget}")]
    BudgetExceeded { requested: u64, budget: u64 },

    #[error("channel {channel} sits on a band edge (|z^2 - 1| < 1e-8)")]
    BandEdge { channel: usize },

    #[error(
        "Jensen quadrature did not converge at xi = {xi} with {angles} angles; an exponent lies close to this value"
    )]
    QuadratureStall { xi: f64, angles: usize },

    #[error("real energy {eps} coincides with a Bloch eigenvalue even after shifting the angle grid")]
    RealAxisSingularity { eps: f64 },

    #[error("counting curve has slope {slope:.3} at xi -> 0+; smallest exponent is below grid resolution")]
    NoPlateau { slope: f64 },

    #[error("breakpoints near xi = {near} are closer than the grid can separate")]
    UnresolvedCluster { near: f64 },

    #[error("lattice dimension {0} not supported (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("density-of-states histogram is empty")]
    EmptyHistogram,

    #[error("xi = 0 with non-real eigenvalues: the bounding ellipse is degenerate")]
    DegenerateXi,
}

pub type Result<T> = std::result::Result<T, Error>;
