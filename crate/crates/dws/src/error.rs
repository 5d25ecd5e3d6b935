use thiserror::Error;

/// Errors produced by the solvers and field operations.
#[derive(Debug, Error)]
pub enum DwsError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("symbol is not finite at k = ({k1}, {k3}): {value}")]
    NonFiniteSymbol { k1: f64, k3: f64, value: f64 },

    #[error("spectrum leaks outside the admissible band: relative mass {leak:.3e} (limit {limit:.1e})")]
    SpectrumOutsideBand { leak: f64, limit: f64 },

    #[error("input spectrum is not band-limited: {0}")]
    NotBandLimited(String),

    #[error("iteration diverged: {0}")]
    Divergence(String),

    #[error("decay truncation insufficient: bottom-layer mass {bottom:.3e} of top (limit {limit:.1e}); increase Ymax")]
    InsufficientDepth { bottom: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible envelope/surface grids: {0}")]
    IncommensurateGrids(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DwsError>;
