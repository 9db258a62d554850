use thiserror::Error;

use crate::model::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. Each variant carries a stable
/// `E_*` token (see [`Error::code`]) and maps to exactly one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// The model document could not be parsed, or it parsed but failed
    /// validation. All diagnostics found in one pass are carried.
    #[error("{} error(s) in model", .0.iter().filter(|d| d.is_error()).count())]
    Invalid(Vec<Diagnostic>),

    #[error("enumeration limit of {limit} exceeded: at least {reached} configurations")]
    TooLarge { limit: usize, reached: u128 },

    #[error("model is infeasible: {0}")]
    Infeasible(String),

    #[error("every completion of the context has probability 0 at site `{site}`")]
    ZeroContext { site: String },

    #[error("sampler stuck at step {step}: conditional of `{site}` has zero mass")]
    Stuck { step: u64, site: String },

    #[error("profile generation stalled after {consecutive} consecutive duplicates ({found} of {wanted} distinct cases)")]
    Stall {
        consecutive: usize,
        found: usize,
        wanted: usize,
    },

    #[error("cannot merge: {0}")]
    MergeScope(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid alpha vector: {0}")]
    Alpha(String),

    #[error("parameter `{0}` has classes without ranges")]
    NoRanges(String),

    #[error("value {value} lies outside every class range of `{param}`")]
    OutOfRange { param: String, value: f64 },

    #[error("unknown reference: {0}")]
    UnknownRef(String),

    #[error("kernel is not ergodic: {0}")]
    NotErgodic(String),

    #[error("campaign document: {0}")]
    Campaign(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Invalid(diags) => diags
                .iter()
                .find(|d| d.is_error())
                .map(|d| d.code)
                .unwrap_or("E_SCHEMA"),
            Error::TooLarge { .. } => "E_TOO_LARGE",
            Error::Infeasible(_) => "E_INFEASIBLE",
            Error::ZeroContext { .. } => "E_ZERO_CONTEXT",
            Error::Stuck { .. } => "E_STUCK",
            Error::Stall { .. } => "E_STALL",
            Error::MergeScope(_) => "E_MERGE_SCOPE",
            Error::Shape(_) => "E_SHAPE",
            Error::Alpha(_) => "E_ALPHA",
            Error::NoRanges(_) => "E_NO_RANGES",
            Error::OutOfRange { .. } => "E_OUT_OF_RANGE",
            Error::UnknownRef(_) => "E_UNKNOWN_REF",
            Error::NotErgodic(_) => "E_NOT_ERGODIC",
            Error::Campaign(_) => "E_CAMPAIGN",
            Error::Io(_) => "E_IO",
        }
    }

    /// Process exit code for this error class.
    ///
    /// | code | meaning |
    /// |------|---------|
    /// | 1 | parse / validation / merge-scope / campaign document errors |
    /// | 2 | infeasible model, stuck or stalled sampler, non-ergodic kernel |
    /// | 3 | resource limit (`E_TOO_LARGE`) |
    /// | 4 | usage errors (bad flags, bad alpha, I/O, shape, lookups) |
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) | Error::MergeScope(_) | Error::Campaign(_) => 1,
            Error::Infeasible(_)
            | Error::Stuck { .. }
            | Error::Stall { .. }
            | Error::NotErgodic(_)
            | Error::ZeroContext { .. } => 2,
            Error::TooLarge { .. } => 3,
            Error::Shape(_)
            | Error::Alpha(_)
            | Error::NoRanges(_)
            | Error::OutOfRange { .. }
            | Error::UnknownRef(_)
            | Error::Io(_) => 4,
        }
    }
}
