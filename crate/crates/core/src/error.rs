use thiserror::Error;

/// Classification of the `β → 0` / `β → π` limit of the γ rate.
#[derive(Clone, Debug, PartialEq)]
pub enum PoleLimit {
    /// 0/0 form with a finite one-sided limit.
    Finite(f64),
    /// Numerator stays strictly positive: the rate diverges to +∞.
    Divergent,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("axis {axis} has {count} points, stencil needs at least {needed}")]
    Stencil {
        axis: usize,
        count: usize,
        needed: usize,
    },
    #[error("grid index {index:?} is outside the chart")]
    OutOfChart { index: Vec<usize> },
    #[error("metric is not positive definite at grid point {point}")]
    Definiteness { point: usize },
    #[error("{what} at grid point {point}")]
    Domain { what: String, point: usize },
    #[error("chart dimension {found} invalid: {reason}")]
    Dimension { found: usize, reason: String },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    Shape {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("time step {dt} violates the stability bound; use dt < {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },
    #[error(
        "phase branch is ambiguous at {} nodal point(s) and {} vortex plaquette(s); first: {:?}",
        nodal.len(),
        vortices.len(),
        nodal.first().or(vortices.first())
    )]
    BranchAmbiguity {
        nodal: Vec<Vec<usize>>,
        vortices: Vec<Vec<usize>>,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("spin {0} is not a nonnegative integer or half-integer")]
    Quantization(String),
    #[error("γ rate has a pole at β = {beta}: {limit:?}")]
    Pole { beta: f64, limit: PoleLimit },
    #[error("projection {two_sigma}/2 outside -{two_s}/2..={two_s}/2")]
    SigmaRange { two_sigma: i64, two_s: u32 },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("density limiter clipped relative mass {clipped:e} (limit {limit:e})")]
    Limiter { clipped: f64, limit: f64 },
    #[error("non-finite values after step at t = {time}")]
    Blowup { time: f64 },
    #[error("lattice resolution {k} exceeds enumeration bound {bound}")]
    EnumerationBound { k: u64, bound: u64 },
    #[error("state is not an exchange eigenstate (residual {residual:e})")]
    NotEigenstate { residual: f64 },
    #[error("{n} particles exceeds the dense symmetrizer limit {max}")]
    TooManyParticles { n: usize, max: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
