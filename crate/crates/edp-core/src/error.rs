use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("subject `{subject}`: binary covariate `{column}` has value {value}")]
    NonBinaryValue {
        subject: String,
        column: String,
        value: f64,
    },
    #[error("subject `{subject}`: {detail}")]
    LengthMismatch { subject: String, detail: String },
    #[error("subject `{subject}`: non-finite value in {field}")]
    NonFinite { subject: String, field: &'static str },
    #[error("subject `{subject}`: times are not sorted")]
    UnsortedTimes { subject: String },
    #[error("duplicate subject id `{0}`")]
    DuplicateSubject(String),
    #[error("covariate schema must list binary columns before continuous ones")]
    SchemaOrder,
    #[error("no observed times")]
    EmptyTimes,
    #[error("observed times span a degenerate range")]
    DegenerateRange,
    #[error("knots must be distinct")]
    DegenerateKnots,
    #[error("time {0} outside the B-spline boundary knots")]
    OutOfRange(f64),
    #[error("posterior precision matrix is not positive definite")]
    SingularDesign,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("invalid priors: {0}")]
    InvalidPriors(String),
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
    #[error("scheduled iteration {0} is outside the post-burn-in range")]
    ScheduleOutOfRange(usize),
    #[error("need at least two imputations, got {0}")]
    TooFewImputations(usize),
    #[error("zero events: log-rate variance is undefined")]
    ZeroEvents,
    #[error("person-time must be positive")]
    NonPositivePersonTime,
    #[error("cluster count {k} is not in 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("trace has no retained iterations")]
    EmptyTrace,
    #[error("{0}")]
    Invalid(String),
}
