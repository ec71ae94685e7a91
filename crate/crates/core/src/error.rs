use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("level tracking lost for pair ({m}, {m_prime}) near B0 = {field} T (overlap {overlap:.3}); refine the grid")]
    TrackingLost {
        m: i32,
        m_prime: i32,
        field: f64,
        overlap: f64,
    },

    #[error("no interior gap minimum for pair ({m}, {m_prime}) in [{lo}, {hi}] T")]
    Bracketing { m: i32, m_prime: i32, lo: f64, hi: f64 },

    #[error("pair ({m}, {m_prime}) is not isolated: {detail}")]
    Reduction { m: i32, m_prime: i32, detail: String },

    #[error("projection mismatch for pair ({m}, {m_prime}): smallest overlap eigenvalue {min_eigenvalue:.3e}")]
    ProjectionMismatch {
        m: i32,
        m_prime: i32,
        min_eigenvalue: f64,
    },

    #[error("transition ({m}, {m_prime}) is radiatively dark (|s| = 0), T0 is infinite")]
    DarkTransition { m: i32, m_prime: i32 },

    #[error("step size underflow at tau = {t} (h = {h:.3e}); the problem looks stiff, try the rate-equation mode")]
    Stiffness { t: f64, h: f64 },

    #[error("integration tolerance not met: {0}")]
    Accuracy(String),

    #[error("no radiating transition in catalog")]
    ScanEmpty,

    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Parse { .. })
    }
}
