use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("OutsideChart: point {x:?} fails the chart guard of {metric}")]
    OutsideChart { metric: String, x: Vec<f64> },

    #[error("DegenerateMetric: |det g| = {det:e} at {x:?}")]
    DegenerateMetric { x: Vec<f64>, det: f64 },

    #[error("NotLorentzian: metric at {x:?} has {negative} negative eigenvalues")]
    NotLorentzian { x: Vec<f64>, negative: usize },

    #[error("FrameDegenerate: Gram-Schmidt pivot {pivot:e} for frame vector {index}")]
    FrameDegenerate { index: usize, pivot: f64 },

    #[error("LeftChart: trajectory left the chart at t = {t}")]
    LeftChart { t: f64 },

    #[error("StepUnderflow: adaptive step {step:e} fell below the minimum at t = {t}")]
    StepUnderflow { t: f64, step: f64 },

    #[error("UnsupportedDimension: {0} (shipped gamma sets cover dims 2 and 4)")]
    UnsupportedDimension(usize),

    #[error("NotTimelike: g(N,N) = {norm} is not negative")]
    NotTimelike { norm: f64 },

    #[error("NotFutureDirected: N^0 = {time_component} is not positive")]
    NotFutureDirected { time_component: f64 },

    #[error("ZeroCovector: phase points need a nonzero covector")]
    ZeroCovector,

    #[error("NotOnCharacteristicSet: |q| = {q:e} exceeds the null tolerance {tol:e}")]
    NotOnCharacteristicSet { q: f64, tol: f64 },

    #[error("KernelViolation: relative residual {residual:e} of the initial polarization exceeds {tol:e}")]
    KernelViolation { residual: f64, tol: f64 },

    #[error("ChartMapDegenerate: {0}")]
    ChartMapDegenerate(String),

    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("MissingDerivative: {0} has no closed-form derivative")]
    MissingDerivative(String),

    #[error("UnknownMetric: {0}")]
    UnknownMetric(String),

    #[error("Expression: {0}")]
    Expression(String),

    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
