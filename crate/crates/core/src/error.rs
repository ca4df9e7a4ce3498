use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Every variant maps onto a short machine-parsable category via
/// [`Error::category`], which the command-line front end prints on failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{0}")]
    Validation(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("window: {0}")]
    Window(String),

    #[error("customer {customer}: {message}")]
    Assignment { customer: String, message: String },

    #[error("coverage: {0}")]
    Coverage(String),

    #[error("domain: {0}")]
    Domain(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("gradient instability: {0}")]
    GradientInstability(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("non-finite value for customer {customer}: {message}")]
    Numerical { customer: String, message: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("config: {0}")]
    Config(String),

    #[error("non-finite ELBO at epoch {epoch}, batch {batch}")]
    NonFiniteElbo { epoch: usize, batch: usize },

    #[error("key mismatch between predictions and actuals: {0:?}")]
    Alignment(Vec<String>),

    #[error("leakage: {0}")]
    Leakage(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::EmptyInput(_) => "empty-input",
            Error::Window(_) => "window",
            Error::Assignment { .. } => "assignment",
            Error::Coverage(_) => "coverage",
            Error::Domain(_) => "domain",
            Error::Convergence(_) => "convergence",
            Error::GradientInstability(_) => "gradient-instability",
            Error::Shape(_) => "shape",
            Error::Contract(_) => "contract",
            Error::Numerical { .. } => "numerical",
            Error::DegenerateData(_) => "degenerate-data",
            Error::Config(_) => "config",
            Error::NonFiniteElbo { .. } => "non-finite-elbo",
            Error::Alignment(_) => "alignment",
            Error::Leakage(_) => "leakage",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse { line, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
