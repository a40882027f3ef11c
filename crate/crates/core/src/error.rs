use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid register: {0}")]
    InvalidRegister(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("linear register reached the all-zero state")]
    DegenerateState,
    #[error("symbol stream discarded {0} consecutive extreme symbols; key is degenerate")]
    DegenerateStream(u64),
    #[error("requested an empty sequence")]
    EmptyRequest,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("block energy {energy} exceeds cap {e_max}")]
    EnergyOverflow { energy: f64, e_max: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("support size {k} exceeds measurement count {m}")]
    OverdeterminedSupport { k: usize, m: usize },
    #[error("element {index} is not a \u{b1}1 combination of the plaintext (residue {residue})")]
    InconsistentInput { index: usize, residue: f64 },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),
    #[error("singular system in least-squares solve")]
    SingularSystem,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code class: 2 for validation errors, 3 for runtime and
    /// numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidRegister(_)
            | Error::InvalidKey(_)
            | Error::EmptyRequest
            | Error::Shape(_)
            | Error::Config(_)
            | Error::EnergyOverflow { .. }
            | Error::DimensionMismatch(_)
            | Error::OverdeterminedSupport { .. }
            | Error::InconsistentInput { .. }
            | Error::GuardExceeded(_)
            | Error::Parse(_) => 2,
            Error::DegenerateState
            | Error::DegenerateStream(_)
            | Error::UndefinedCorrelation(_)
            | Error::SingularSystem
            | Error::Io(_) => 3,
        }
    }
}
