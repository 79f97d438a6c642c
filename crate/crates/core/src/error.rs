use alloc::string::String;
use alloc::vec::Vec;

use crate::optim::OptimizerTrace;

/// Errors raised by the simulation and estimation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("contraction condition violated: |chi|_1 = {chi_sum} >= 1 ({detail})")]
    Contraction { chi_sum: f64, detail: String },

    #[error("numeric escape at t = {index}: non-finite value {value} from state {state:?}")]
    NumericEscape { index: i64, value: f64, state: Vec<f64> },

    #[error("burn-in for tol {tol} exceeds {cap} steps (lambda_0 = {lambda})")]
    BurnInUnreachable { tol: f64, cap: usize, lambda: f64 },

    #[error("missing capability: {0}")]
    Capability(&'static str),

    #[error("model family {0} has a non-differentiable recursion")]
    NotDifferentiable(&'static str),

    #[error("empty kernel window at u = {u}, b = {b}")]
    EmptyWindow { u: f64, b: f64 },

    #[error("moment order {requested} not available (innovation law has finite moments below {available})")]
    MomentOverflow { requested: f64, available: f64 },

    #[error("insufficient signal: {usable} usable points, need {needed}; increase n_rep")]
    InsufficientSignal { usable: usize, needed: usize },

    #[error("dependence tail diverges: rho = {rho}")]
    DivergentTail { rho: f64 },

    #[error("scale {sigma} below declared floor {floor}")]
    ScaleBelowFloor { sigma: f64, floor: f64 },

    #[error("parameter outside the admissible box at coordinate {coord}")]
    OutsideBox { coord: usize },

    #[error("no start converged ({} starts tried)", .trace.starts)]
    NonConvergence { trace: OptimizerTrace },

    #[error("degenerate information matrix: condition number {cond:e}")]
    DegenerateInformation { cond: f64 },

    #[error("window has {have} effective points, need {need}")]
    DegenerateWindow { have: usize, need: usize },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid { field, reason: reason.into() }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
