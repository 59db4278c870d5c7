use thiserror::Error;

/// Errors shared across the analysis modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Model parameters violate their invariants (`lambda > 0`, finite `a`, `b`).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An operation argument is out of its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The one-step Poisson mean exceeds [`crate::sim::MEAN_CAP`]; the caller
    /// should mark the trajectory as escaped.
    #[error("poisson mean {mean:.3e} exceeds the sampling cap")]
    MeanCapExceeded { mean: f64 },

    /// The parameters do not lie in the region an operation was asked to treat.
    #[error("parameters (a={a}, b={b}) are not in region {region}")]
    RegionMismatch { a: f64, b: f64, region: String },

    /// The exceptional set reaches the edge of the verification box.
    #[error("exceptional set touches the boundary of the [0,{box_size}]^2 box")]
    BoxTooSmall { box_size: u64 },

    /// Truncation loses too much probability mass for the requested analysis.
    #[error("max row defect {max_defect:.3e} exceeds the budget {budget:.3e}")]
    DefectTooLarge { max_defect: f64, budget: f64 },

    /// An iterative computation hit its iteration cap before converging.
    #[error("no convergence after {iterations} iterations (last delta {delta:.3e})")]
    NoConvergence { iterations: usize, delta: f64 },

    /// No data points fall inside the fitting window.
    #[error("fitting window is empty")]
    WindowEmpty,

    /// The dominant eigenvalue is absent or not above one.
    #[error("parameters are not in the transient T2 regime (theta absent or <= 1)")]
    NotTransientT2,
}
