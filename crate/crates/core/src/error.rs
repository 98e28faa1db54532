use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("order error: {0}")]
    Order(String),
    #[error("unknown name: {0}")]
    UnknownName(String),
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("principal symbol vanishes on every sampled direction")]
    DegenerateOperator,
    #[error("vector must be nonzero")]
    ZeroVector,
    #[error("vector is not in the wave cone (residual {residual:.3e})")]
    NotInWaveCone { residual: f64 },
    #[error("amplitude is not in the kernel of the symbol at the given frequency (residual {residual:.3e})")]
    NotInKernel { residual: f64 },
    #[error("operator has lower-order terms; a homogeneous operator is required")]
    NonHomogeneousOperator,
    #[error("constant rank condition fails: rank ranges over [{min_rank}, {max_rank}]")]
    ConstantRankViolation { min_rank: usize, max_rank: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("field has nonzero mean (|mean| = {0:.3e})")]
    NonzeroMean(f64),
    #[error("point must lie in the open unit ball (|A| = {0})")]
    OutOfBall(f64),
    #[error("integrand has no subgradient")]
    MissingSubgradient,
    #[error("no recession function available: {0}")]
    MissingRecession(String),
    #[error("blow-up cube leaves the domain")]
    OutOfDomain,
    #[error("measures live on different domains or grids")]
    DomainMismatch,
    #[error("theta must lie in (0,1), got {0}")]
    BadTheta(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::Shape(_) => "ShapeError",
            Error::Order(_) => "OrderError",
            Error::UnknownName(_) => "UnknownName",
            Error::NonPositiveScale(_) => "NonPositiveScale",
            Error::DegenerateOperator => "DegenerateOperator",
            Error::ZeroVector => "ZeroVector",
            Error::NotInWaveCone { .. } => "NotInWaveCone",
            Error::NotInKernel { .. } => "NotInKernel",
            Error::NonHomogeneousOperator => "NonHomogeneousOperator",
            Error::ConstantRankViolation { .. } => "ConstantRankViolation",
            Error::GridMismatch(_) => "GridMismatch",
            Error::NonzeroMean(_) => "NonzeroMean",
            Error::OutOfBall(_) => "OutOfBall",
            Error::MissingSubgradient => "MissingSubgradient",
            Error::MissingRecession(_) => "MissingRecession",
            Error::OutOfDomain => "OutOfDomain",
            Error::DomainMismatch => "DomainMismatch",
            Error::BadTheta(_) => "BadTheta",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
