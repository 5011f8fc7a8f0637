use thiserror::Error;

/// Errors produced by the solver suite.
#[derive(Error, Debug)]
pub enum Error {
    #[error("grid too coarse: n = {n}, need n >= 8")]
    GridTooCoarse { n: usize },

    #[error("grid length must be positive, got {length}")]
    NonPositiveLength { length: f64 },

    #[error("non-finite sample value at x = {x}")]
    NonFiniteSample { x: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("radius too small: Legendre maximum attained on the search boundary (radius = {radius}, q = {q})")]
    RadiusTooSmall { radius: f64, q: f64 },

    #[error("lambda_ii vanishes at node x = {x}")]
    LambdaVanishes { x: f64 },

    #[error("Lagrangian unbounded near 0: no delta in the dyadic menu gives a finite bound")]
    LagrangianUnbounded,

    #[error("bounds stated for two equations only (m = {m})")]
    TwoComponentOnly { m: usize },

    #[error("invalid system: {0}")]
    InvalidSpec(String),

    #[error("solver did not converge after {iters} iterations (residual {residual:.3e})")]
    NonConvergence {
        iters: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("instability detected at t = {t:.4}: sup-norm {sup:.3e} exceeds 10x a-priori bound {bound:.3e}")]
    Instability { t: f64, sup: f64, bound: f64 },

    #[error("q_max too small: argmin attained on the velocity-grid boundary (q = {q})")]
    QGridBoundary { q: f64 },

    #[error("inner iteration not contracting: dt = {dt} too large")]
    InnerNotContracting { dt: f64 },

    #[error("run too short for period {period}: have {have}")]
    InsufficientRunLength { period: f64, have: f64 },

    #[error("empty Aubry set: discretization failure, the limit identity holds nowhere within tolerance")]
    EmptyAubrySet,

    #[error("invalid bracket: g(c) must change sign over [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("a-priori bound violated: {0}")]
    BoundViolation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
