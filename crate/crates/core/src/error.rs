use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty family")]
    EmptyFamily,
    #[error("cubes of a family must share one grid shift")]
    MixedShift,
    #[error("dimension {0} unsupported (expected 1 or 2)")]
    Dimension(usize),
    #[error("invalid exponent {0}: must be >= 1 or infinite")]
    Exponent(f64),
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("cube does not meet the domain")]
    CubeOutsideDomain,
    #[error("frequency support exceeds lattice")]
    Nyquist,
    #[error("spatial scale 2^{0} not representable on the lattice")]
    Unrepresentable(f64),
    #[error("finite-difference step underflow")]
    StepUnderflow,
    #[error("non-decaying weights (ratio {0})")]
    NonDecaying(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("order m must be negative (got {0})")]
    NonNegativeOrder(f64),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("probe requires exterior point")]
    InteriorPoint,
    #[error("infinite characteristic")]
    InfiniteCharacteristic,
    #[error("exponent ordering violated: need r < p < s")]
    ExponentOrder,
    #[error("grand maximal function requires an operator")]
    MissingOperator,
    #[error("a = 1 is the Bochner-Riesz regime and is not oscillatory")]
    BochnerRiesz,
    #[error("sign gate alpha*beta > 0 failed: alpha = {alpha}, beta = {beta}")]
    SignGate { alpha: f64, beta: f64 },
    #[error("alpha = 0 is out of scope")]
    ZeroAlpha,
    #[error("scale underflow")]
    ScaleUnderflow,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
