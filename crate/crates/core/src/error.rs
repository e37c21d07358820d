use thiserror::Error;

pub type Result<T> = std::result::Result<T, KaeError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KaeError {
    #[error("syntax error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid torus modulus: Im τ must be positive (got {0})")]
    InvalidModulus(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("background form is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    BackgroundNotSemipositive { min_eigenvalue: f64 },

    #[error("twist form is not semipositive: min eigenvalue {min_eigenvalue:e} at t = {t_re}+{t_im}i")]
    NotSemipositive {
        min_eigenvalue: f64,
        t_re: f64,
        t_im: f64,
    },

    #[error("non-finite samples in field")]
    NonFinite,

    #[error("fiber class is not Kähler: mean of β_zz̄ is {mean:e}")]
    KahlerClassViolation { mean: f64 },

    #[error("{solver} failed to converge after {iterations} iterations (last residual {last:e})")]
    ConvergenceFailure {
        solver: &'static str,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("ε = {epsilon} rejected: fiber volume {volume:e} below {threshold:e}")]
    EpsilonTooSmall {
        epsilon: f64,
        volume: f64,
        threshold: f64,
    },

    #[error("Gram matrix numerically singular at monomial degree {degree}")]
    ConditioningFailure { degree: usize },

    #[error("chart weight is not strictly plurisubharmonic (min τ_zz̄ = {min:e})")]
    WeightNotStrictlyPsh { min: f64 },

    #[error("point {re}+{im}i lies outside the chart disk of radius {radius}")]
    PointOutsideChart { re: f64, im: f64, radius: f64 },

    #[error("{0}")]
    InvalidArgument(String),
}
