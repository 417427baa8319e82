use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time basis lost orthonormality at pair ({m}, {n}): residual {residual:.3e} exceeds {tolerance:.1e}")]
    BasisConditioning {
        m: usize,
        n: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time {t} lies outside [0, {final_time}]")]
    TimeOutOfRange { t: f64, final_time: f64 },

    #[error("derivative order {0} not supported (0, 1 or 2)")]
    DerivativeOrder(usize),

    #[error("CFL violation: dt = {dt:.4e} exceeds h/sqrt(2) = {limit:.4e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite wave field value at step {step}, node ({ix}, {iy})")]
    NonFinite { step: usize, ix: usize, iy: usize },

    #[error("phantom shape '{0}' does not fit strictly inside the measurement domain")]
    PhantomOutsideDomain(String),

    #[error("|F(x, p, 0, grad p)| = {value:.3e} below {threshold:.1e} at ({x1:.4}, {x2:.4})")]
    DegenerateNonlinearity {
        x1: f64,
        x2: f64,
        value: f64,
        threshold: f64,
    },

    #[error("Carleman weight not admissible: {0}")]
    Inadmissible(String),

    #[error("test function violates h = d_nu h = 0 on the boundary (max trace {0:.3e})")]
    BoundaryCondition(f64),

    #[error("normal equations not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("linear solver stopped after {iterations} iterations at relative residual {residual:.3e}")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("iteration diverged at k = {k}: J = {cost:.3e} > {limit:.3e}")]
    Diverged { k: usize, cost: f64, limit: f64 },

    #[error("configuration rejected:\n{0}")]
    Config(String),

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
