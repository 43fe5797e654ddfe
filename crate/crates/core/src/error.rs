use thiserror::Error;

/// Errors raised by the simulator, the verifiers and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TcsError {
    #[error("kernel argument must be finite and nonnegative, got {0}")]
    KernelDomain(f64),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("inconsistent ensemble: {0}")]
    Shape(String),

    #[error("temperature collapse: particle {index} reached T = {value:e}")]
    TemperatureCollapse { index: usize, value: f64 },

    #[error("numerical blow-up: non-finite value in {0}")]
    NumericalBlowUp(&'static str),

    #[error("inadmissible initial data: T_m = {0} must be positive")]
    InadmissibleInitialData(f64),

    #[error("integration failed at t = {time}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<TcsError>,
    },

    #[error("invalid integrator configuration: {0}")]
    InvalidIntegrator(String),

    #[error("T_m = {t_min} does not exceed eps0 = {eps0}; theorem constants are undefined")]
    ConstantsUndefined { t_min: f64, eps0: f64 },

    #[error("invalid analysis parameter: {0}")]
    InvalidAnalysis(String),

    #[error("temperature envelope excluded: A1 = 2 eps / 3 (A1 = {a1})")]
    EnvelopeExcluded { a1: f64 },

    #[error("fit needs at least {needed} positive samples in the window, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("trajectory unsuitable for this check: {0}")]
    Trajectory(String),

    #[error("config error at line {line}: {message}")]
    ConfigLine { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("time-series error at line {line}: {message}")]
    TimeSeries { line: usize, message: String },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl TcsError {
    /// Whether the error reports loss of positivity or non-finite state.
    pub fn is_numerical_failure(&self) -> bool {
        match self {
            TcsError::TemperatureCollapse { .. } | TcsError::NumericalBlowUp(_) => true,
            TcsError::AtTime { source, .. } => source.is_numerical_failure(),
            _ => false,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        TcsError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, TcsError>;
