use thiserror::Error;

use crate::program::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {name} = {value} ({expected})")]
    ParameterDomain { name: &'static str, value: f64, expected: &'static str },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("program construction error: {0}")]
    Construction(String),

    #[error("non-convex input rejected: {0}")]
    NonConvex(String),

    #[error("solver did not reach an optimal point: {status:?} ({detail})")]
    Solver { status: SolveStatus, detail: String },

    #[error("unsupported by backend: {0}")]
    Unsupported(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("cannot extract policy: {0}")]
    Extraction(String),

    #[error("unknown outage id {0}")]
    UnknownOutage(usize),

    #[error("{file}: [{section}] line {line}: {message}")]
    Parse { file: String, section: String, line: usize, message: String },

    #[error("step {step}: storage {unit} state of charge {value} outside [{lo}, {hi}]")]
    StateBound { step: usize, unit: String, value: f64, lo: f64, hi: f64 },

    #[error("invalid data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ParameterDomain { .. } => "parameter-domain",
            Error::Dimension(_) => "dimension",
            Error::Construction(_) => "construction",
            Error::NonConvex(_) => "non-convex",
            Error::Solver { .. } => "solver",
            Error::Unsupported(_) => "unsupported",
            Error::Topology(_) => "topology",
            Error::Config(_) => "config",
            Error::Assembly(_) => "assembly",
            Error::Extraction(_) => "extraction",
            Error::UnknownOutage(_) => "unknown-outage",
            Error::Parse { .. } => "parse",
            Error::StateBound { .. } => "state-bound",
            Error::Data(_) => "data",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Process exit status: 2 for invalid configuration, 3 for unreadable or
    /// inconsistent input data, 4 for modelling and solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ParameterDomain { .. } => 2,
            Error::Parse { .. } | Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Topology(_) => 3,
            _ => 4,
        }
    }
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain { name, value, expected: "must lie in (0, 1]" })
    }
}

pub(crate) fn check_nonneg(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain { name, value, expected: "must be finite and nonnegative" })
    }
}
