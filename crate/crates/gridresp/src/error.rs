use std::path::PathBuf;

/// Unified error type for the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    CaseFormat {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("machine {id}: {what} must be positive, got {value}")]
    NonPositive { id: u32, what: String, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown bus or line reference: {0}")]
    UnknownReference(String),

    #[error("jacobian is not symmetric (max asymmetry {max_asymmetry:.3e} exceeds {tol:.1e})")]
    NotSymmetric { max_asymmetry: f64, tol: f64 },

    #[error("jacobian is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("damping ratio is not uniform across machines (found {0} and {1})")]
    NonUniformDamping(f64, f64),

    #[error("mode {index} is critically damped (gamma^2 = 4*lambda = {value:.6e})")]
    CriticalDamping { index: usize, value: f64 },

    #[error("eigensolve accuracy check failed: {0}")]
    EigenAccuracy(String),

    #[error("complex arithmetic left a nonreal residue: |Im| = {imag:.3e} vs |Re| = {real:.3e}")]
    NonrealResidue { imag: f64, real: f64 },

    #[error("filter design: {0}")]
    FilterDesign(String),

    #[error("record too short: {have_s:.1}s, need at least {need_s:.1}s for this passband")]
    RecordTooShort { have_s: f64, need_s: f64 },

    #[error("channel {requested:?} not in trace; available: {available:?}")]
    MissingChannel {
        requested: String,
        available: Vec<String>,
    },

    #[error("no relation maps {from}-{to} at differentiation order {order}")]
    UnsupportedRelation {
        from: String,
        to: String,
        order: usize,
    },

    #[error("curve too short: {len} samples, need at least {need}")]
    CurveTooShort { len: usize, need: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
