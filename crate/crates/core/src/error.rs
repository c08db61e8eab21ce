use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("nearest-neighbour subgraph is not connected")]
    DisconnectedNN,
    #[error("bad offset: {0}")]
    BadOffset(String),
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),
    #[error("region corners are not aligned to the 1/{m} grid")]
    MisalignedRegion { m: u32 },
    #[error("shrinking by {delta} leaves an empty region")]
    EmptyShrink { delta: f64 },
    #[error("node outside the field halo")]
    OutOfHalo,
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("growth envelope violated at r = {r:?}")]
    EnvelopeViolated { r: Vec<f64> },
    #[error("V + f is not convex near r = {r} (second difference {second_difference})")]
    NotConvex { r: f64, second_difference: f64 },
    #[error("solver stopped after {iterations} iterations with gradient norm {grad_norm:e}")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("quadratic system is singular beyond translations")]
    NullSpace,
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("operation requires a quadratic potential")]
    NotQuadratic,
    #[error("layers too thin: need delta/(8m) >= 2*eps*R, got {have} < {need}")]
    LayersTooThin { have: f64, need: f64 },
    #[error("operation requires a scalar field (n = 1)")]
    NotScalar,
    #[error("exponent condition violated: {0}")]
    ExponentViolation(String),
    #[error("operation requires the hyper-cubic lattice")]
    NotHypercubic,
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("growth bound violated: {0}")]
    BoundViolated(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("invalid field data: {0}")]
    InvalidField(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
