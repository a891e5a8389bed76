use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("quadrature did not converge: estimate {estimate}, residual error {residual}")]
    Quadrature { estimate: f64, residual: f64 },

    #[error("unknown spectral density `{0}`")]
    UnknownDensity(String),

    #[error("unknown {what} `{name}`")]
    UnknownOption { what: &'static str, name: String },

    #[error("invalid density table: {0}")]
    InvalidTable(String),

    #[error("pad length {pad} is shorter than the sample length {n}")]
    PadTooShort { pad: usize, n: usize },

    #[error("no pronounced peak left in the periodogram")]
    NoPeak,

    #[error("sinusoid regression is singular at frequency {theta}")]
    SingularFit { theta: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sample is degenerate: {0}")]
    DegenerateSample(&'static str),

    #[error("empirical characteristic function is degenerate at probe s = {probe}: |phi| = {modulus}")]
    DegenerateEcf { probe: f64, modulus: f64 },

    #[error("density `{0}` is not twice differentiable on its support")]
    NonSmoothDensity(String),

    #[error("time step {dt} is too coarse; need dt <= {max_dt}")]
    DtTooCoarse { dt: f64, max_dt: f64 },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        expected,
    }
}
