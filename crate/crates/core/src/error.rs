use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected 3 mode dimensions, got {0}")]
    ModeCount(usize),

    #[error("mode {mode} has dimension {dim}; every mode needs at least 2 levels")]
    ModeTooSmall { mode: usize, dim: usize },

    #[error("mode index {0} out of range (modes are 0, 1, 2)")]
    ModeOutOfRange(usize),

    #[error("occupation {occupation} of mode {mode} exceeds cutoff (dimension {dim})")]
    OccupationOutOfRange { mode: usize, occupation: usize, dim: usize },

    #[error("partial trace needs at least one kept mode")]
    EmptyKeep,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coupling schedule is degenerate at t = {t}: g0 = {g0:e}")]
    DegenerateSchedule { t: f64, g0: f64 },

    #[error("matrix is not Hermitian (max |M - M^dag| = {0:e})")]
    NonHermitian(f64),

    #[error("integration diverged at t = {t}: trace/Hermiticity defect {defect:e}")]
    Diverged { t: f64, defect: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("exceeded {max_steps} integration steps at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error(
        "mechanical truncation alarm at t = {t}: top Fock level (cutoff {cutoff}) holds \
         population {population:e}; rerun with a larger mechanical dimension"
    )]
    TruncationAlarm { t: f64, population: f64, cutoff: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::StepUnderflow { .. }
            | Error::TooManySteps { .. }
            | Error::DegenerateSchedule { .. }
            | Error::NonHermitian(_)
            | Error::Diverged { .. } => 3,
            Error::TruncationAlarm { .. } => 4,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }
}
