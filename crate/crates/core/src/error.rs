use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("offspring law is not subcritical (mean {mean})")]
    NotSubcritical { mean: f64 },

    #[error("offspring law puts mass {p1} on exactly one child; fold it into the rate instead")]
    SingleChildMass { p1: f64 },

    #[error("{what}: tolerance not met (achieved error estimate {achieved:e})")]
    Numerical { what: &'static str, achieved: f64 },

    #[error("Yaglom limit not converged by horizon {s_max}: total-variation drift {tv:.4} exceeds {threshold}; increase the horizon")]
    YaglomNotConverged { s_max: f64, tv: f64, threshold: f64 },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("operation requires a torus window")]
    NotTorus,

    #[error("measure has zero mass")]
    ZeroMeasure,

    #[error("configuration too large to realise: {units} sites exceeds cap {cap}")]
    TooLarge { units: u64, cap: u64 },

    #[error("config: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_unit_closed(name: &str, t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in [0,1], got {t}")))
    }
}

pub(crate) fn check_unit_open_left(name: &str, t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0,1], got {t}")))
    }
}
