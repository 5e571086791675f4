//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameters are infeasible: {0}")]
    Infeasible(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("run extends past the clean horizon: T = {t_final}, T_clean = {t_clean}")]
    HorizonViolation { t_final: f64, t_clean: f64 },

    #[error("field support too close to the box boundary for x-weighted quantities (radius {radius:.3}, limit {limit:.3})")]
    SupportNearBoundary { radius: f64, limit: f64 },

    #[error("time series does not cover the requested interval or is not uniform")]
    BadTimeSeries,

    #[error("too few samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("decay fit window contains nonpositive values")]
    NonPositiveFitValues,

    #[error("Picard iteration diverged (successive differences grew for 3 consecutive sweeps)")]
    PicardDiverged,

    #[error("smallness guard: data norm {norm:.3e} exceeds guard {guard:.3e}")]
    SmallnessGuard { norm: f64, guard: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 domain infeasibility/guard,
    /// 2 usage/parse, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_)
            | Error::HorizonViolation { .. }
            | Error::SmallnessGuard { .. }
            | Error::SupportNearBoundary { .. } => 1,
            Error::InvalidParameter(_) | Error::Config(_) | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
