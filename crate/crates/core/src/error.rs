use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge (error estimate {estimate:.3e})")]
    QuadratureNonConvergence { estimate: f64 },

    #[error("integral diverges: {reason}")]
    DivergentIntegral { reason: String },

    #[error("per-entry quadrature failed at offset {offset} (discrepancy {discrepancy:.3e})")]
    QuadratureFailure { offset: usize, discrepancy: f64 },

    #[error("no dispersion root found after {iterations} iterations (residual {residual:.3e})")]
    NoRootFound { iterations: usize, residual: f64 },

    #[error("wavenumber k = {k} is within the degenerate band around the cutoff k0 = {k0}")]
    DegenerateK { k: f64, k0: f64 },

    #[error("1 - (delta k)^2 = {gap:.3e} is too close to zero")]
    NearSingularDispersion { gap: f64 },

    #[error("evaluation window [{lo}, {hi}] leaves the grid extent [{grid_lo}, {grid_hi}]")]
    OutOfDomain { lo: f64, hi: f64, grid_lo: f64, grid_hi: f64 },

    #[error("singular system: pivot {pivot:.3e} at row {row} below threshold")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("solve residual {residual:.3e} exceeds the bound {bound:.3e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("region [{lo}, {hi}] contains too few grid nodes")]
    EmptyRegion { lo: f64, hi: f64 },

    #[error("reference solution has zero H1 norm")]
    ZeroReference,

    #[error("rate fit needs at least {needed} usable points, got {got}")]
    EmptyFit { needed: usize, got: usize },

    #[error("solution underflows inside the fit window")]
    UnderflowWindow,

    #[error("grid functions are not defined on compatible grids: {0}")]
    IncompatibleGrids(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
