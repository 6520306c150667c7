use std::fmt;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFICATION: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const PRECONDITION: i32 = 4;
    pub const SOLVER: i32 = 5;
    pub const NUMERIC: i32 = 6;
}

#[derive(Debug)]
pub enum CliError {
    /// Malformed flags, expressions or input files.
    Usage(String),
    Io(String),
    Core(curvkit::Error),
    /// An invariant suite reported failures.
    Verification(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use curvkit::Error as E;
        match self {
            Self::Usage(_) => exit::USAGE,
            Self::Io(_) => exit::IO,
            Self::Verification(_) => exit::VERIFICATION,
            Self::Core(e) => match e {
                E::Parse(_) | E::InvalidShape(_) | E::ShapeMismatch { .. } => exit::USAGE,
                E::Precondition(_) | E::Unsupported(_) | E::GateViolation(_) | E::TriangleInequality { .. } | E::StepTooLarge { .. } => {
                    exit::PRECONDITION
                }
                E::Diverged { .. } | E::KernelDetected { .. } | E::Singular(_) => exit::SOLVER,
                _ => exit::NUMERIC,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage: {m}"),
            Self::Io(m) => write!(f, "io: {m}"),
            Self::Core(e) => write!(f, "{e}"),
            Self::Verification(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<curvkit::Error> for CliError {
    fn from(e: curvkit::Error) -> Self {
        Self::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
