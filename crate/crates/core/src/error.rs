use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("point ({x:.6e}, {y:.6e}) lies outside the rotor and stator annuli")]
    Domain { x: f64, y: f64 },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("degenerate triangle {triangle} (signed area {area:.3e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("interface system is unstable: condition estimate {condition:.3e} exceeds {limit:.1e}")]
    Instability { condition: f64, limit: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("fourier analysis: {0}")]
    Fourier(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
