use thiserror::Error;

/// Errors raised by parameter validation and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("parameter `{name}` = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("early-arrival penalty beta = {beta} must be below the SAV value-of-time factor theta = {theta}")]
    BetaNotBelowTheta { beta: f64, theta: f64 },

    #[error("invalid mode split (n_n = {n_n}, n_a = {n_a}) for population {n_total}")]
    InvalidSplit { n_n: f64, n_a: f64, n_total: f64 },

    #[error("SAV count {n_a} outside [0, {n_total}]")]
    SavCountOutOfRange { n_a: f64, n_total: f64 },

    #[error("no AC-pricing equilibrium with SAV riders exists (discriminant {discriminant} < 0)")]
    NoAcEquilibrium { discriminant: f64 },

    #[error("operation requires an interior parameter set (0 < B < AN); got B = {b}, AN = {an}")]
    NotInterior { b: f64, an: f64 },

    #[error(
        "time grid [{start}, {end}] with {cells} cells cannot carry {n_total} commuters at capacity; widen the grid"
    )]
    InfeasibleGrid {
        start: f64,
        end: f64,
        cells: usize,
        n_total: f64,
    },

    #[error("LP fallback solver failed: {0}")]
    Lp(String),

    #[error("malformed parameter header: {0}")]
    Header(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
