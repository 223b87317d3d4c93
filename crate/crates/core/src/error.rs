use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("boundary residual {achieved:.3e} exceeds tolerance {required:.3e}")]
    ResidualTooLarge { achieved: f64, required: f64 },
    #[error("Neumann data has net flux {flux:.3e}")]
    IncompatibleData { flux: f64 },
    #[error("evaluation point within {distance:.3e} of a source")]
    EvaluationNearSource { distance: f64 },
    #[error("finite-difference step too large: Richardson disagreement {disagreement:.3e}")]
    StepTooLarge { disagreement: f64 },
    #[error("trajectory left the admissible set at t = {t_exit}")]
    LeftAdmissibleSet { t_exit: f64 },
    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("shooting diverged after {iterations} iterations (residual {residual:.3e})")]
    ShootingDiverged { iterations: usize, residual: f64 },
    #[error("cone vectors do not positively span (worst residual {residual:.3e})")]
    ConeDegenerate { residual: f64 },
    #[error("boundary bump supports overlap")]
    SupportOverlap,
    #[error("harmonic extension residual {eta:.3e} too large")]
    ExtensionResidualTooLarge { eta: f64 },
    #[error("moment Newton iteration stalled (best residual {best_residual:.3e})")]
    NewtonStalled { best_residual: f64 },
    #[error("legs do not join: mismatch {mismatch:.3e} at junction {junction}")]
    JunctionMismatch { junction: usize, mismatch: f64 },
    #[error("exact correction diverged; terminal errors {history:?}")]
    CorrectionDiverged { history: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;
