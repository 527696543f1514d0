use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid subsystem index {index} for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("degenerate zero eigenvalue: {multiplicity} steady states")]
    DegenerateSteadyState { multiplicity: usize },

    #[error("spectral decomposition is defective; use the exponential backend")]
    DefectiveDecomposition,

    #[error("no decay: slowest nonzero eigenvalue has vanishing real part")]
    NoDecay,

    #[error("denominator below tolerance in {0}")]
    VanishingDenominator(&'static str),

    #[error("trace-distance curve never stays below epsilon (final value {final_value:.3e})")]
    CurveNeverSettles { final_value: f64 },

    #[error("integrator step-halving check failed (deviation {deviation:.3e}); use a smaller step")]
    StepCheckFailed { deviation: f64 },

    #[error("self-test battery failed: {0}")]
    SelfTestFailed(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
