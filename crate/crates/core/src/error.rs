use alloc::string::String;

use crate::linsolve::SolveReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid mesh: {0}")]
    Topology(String),

    #[error("weight {value:e} at a quadrature point of element {element} is not above the floor {floor:e}")]
    Degenerate {
        element: usize,
        value: f64,
        floor: f64,
    },

    #[error("attractiveness {value:e} at node {node} is not positive")]
    Positivity { node: usize, value: f64 },

    #[error("neighbourhood attractiveness of site {site} sums to zero")]
    ZeroNeighbourhood { site: usize },

    #[error("linear solver failed after {} iterations (relative residual {:e})", .0.iterations, .0.final_residual)]
    LinearSolver(SolveReport),

    #[error("fixed-point coupling did not converge at t = {time} after {iterations} iterations (increments A {incr_a:e}, rho {incr_rho:e})")]
    FixedPoint {
        time: f64,
        iterations: usize,
        incr_a: f64,
        incr_rho: f64,
    },

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    Newton { iterations: usize, residual: f64 },

    #[error("singular matrix encountered at pivot {0}")]
    Singular(usize),

    #[error("least-squares design matrix is rank deficient")]
    RankDeficient,

    #[error("curve fit failed: {0}")]
    Fit(String),

    #[error("missing snapshots: {0}")]
    MissingSnapshots(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for failures of an iterative method to reach its tolerance.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::LinearSolver(_) | Error::FixedPoint { .. } | Error::Newton { .. }
        )
    }

    /// True when the model degenerates (A reaching zero and similar).
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::Degenerate { .. } | Error::Positivity { .. } | Error::ZeroNeighbourhood { .. }
        )
    }
}
