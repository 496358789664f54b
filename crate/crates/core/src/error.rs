use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("grid under-resolves {feature}: {cells:.2} cells across, need at least 8")]
    UnderResolved { feature: String, cells: f64 },

    #[error("support radius {radius:.6} exceeded 0.9 of the domain half-width {half_width:.6} at t = {t:.6}")]
    SupportOverflow { t: f64, radius: f64, half_width: f64 },

    #[error("floor violated at cell {cell}: value {value:e} < floor {floor:e} (t = {t:.6e}); time step breaches CFL")]
    FloorViolation {
        t: f64,
        cell: usize,
        value: f64,
        floor: f64,
    },

    #[error("non-finite value at cell {cell} after step at t = {t:.6e}")]
    NonFinite { t: f64, cell: usize },

    #[error("series too short: {0}")]
    SeriesTooShort(String),

    #[error("fit requires positive samples, got {value:e} at t = {t:.6e}")]
    NonPositiveSample { t: f64, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("barenblatt profile constant failed residual validation: relative residual {0:e}")]
    BarenblattMismatch(f64),

    #[error("no admissible mu found in scan range: {0}")]
    NoAdmissibleMu(String),
}

impl Error {
    /// True for failures of the numerical evolution (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SupportOverflow { .. }
                | Error::FloorViolation { .. }
                | Error::NonFinite { .. }
                | Error::BarenblattMismatch(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
