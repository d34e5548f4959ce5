use thiserror::Error;

/// Every failure the library can report.
///
/// Variants map one-to-one onto the reason codes written to `failures.json`
/// by the CLI (see [`Error::code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("radius {r} exceeds qubit count {n}")]
    RadiusExceedsN { r: usize, n: usize },

    #[error("stabilizer group has {0} generators; brute force is capped at 20")]
    GroupTooLarge(usize),

    #[error("stabilizer generators are linearly dependent over GF(2)")]
    DependentGenerators,

    #[error("neighborhood enumeration needs {needed} scalar entries, cap is {cap}")]
    EnumerationTooLarge { needed: u128, cap: u128 },

    #[error("subspace is empty")]
    EmptySubspace,

    #[error("subspaces are not pairwise orthogonal (overlap {0:.3e})")]
    NotOrthogonal(f64),

    #[error("declared locality {declared} is smaller than detected locality {detected}")]
    DeclarationInconsistent { declared: usize, detected: usize },

    #[error("channel is not trace preserving (residual {0:.3e})")]
    NotTracePreserving(f64),

    #[error("channel has {0} steady states")]
    MultipleSteadyStates(usize),

    #[error("fixed point has negative eigenvalue {0:.3e}")]
    NoPositiveFixedPoint(f64),

    #[error("superoperator path limited to n <= 6 (got n = {0})")]
    SuperoperatorTooLarge(usize),

    #[error("stationary distribution is not unique ({0} closed classes)")]
    NonUniqueStationary(usize),

    #[error("stochastic matrix invalid: {0}")]
    InvalidStochastic(String),

    #[error("invalid state partition: {0}")]
    InvalidPartition(String),

    #[error("bottleneck condition violated (residual {0:.3e})")]
    ConditionViolated(f64),

    #[error("projected weight of A is too small ({0:.3e})")]
    EmptyA(f64),

    #[error("mixing time not reached within {0} steps")]
    NotConverged(u64),

    #[error("checks do not commute: z-check {z} and x-check {x} overlap oddly")]
    NonCommutingChecks { z: usize, x: usize },

    #[error("model has x-type checks; a classical model is required")]
    NotClassical,

    #[error("check support index {index} out of range for n = {n}")]
    SupportOutOfRange { index: usize, n: usize },

    #[error("boundary subspace is empty")]
    EmptyBoundary,

    #[error("center lies outside the {0}-qubit space")]
    CenterOutsideSpace(usize),

    #[error("inverse temperature must be non-negative (got {0})")]
    BetaNegative(f64),

    #[error("Hamiltonian is not diagonal in the computational basis")]
    NotDiagonal,

    #[error("Hamiltonian is not a commuting check Hamiltonian")]
    NotCommuting,

    #[error("flip on site {site} commutes with every check")]
    TrivialFlip { site: usize },

    #[error("schedule is empty")]
    EmptySchedule,

    #[error("schedule entry {index} does not fix the Gibbs state (residual {residual:.3e})")]
    MixedFixedPoints { index: usize, residual: f64 },

    #[error("state is not a fixed point of the channel (residual {0:.3e})")]
    NotFixedPoint(f64),

    #[error("radius {r} is smaller than channel locality {locality}")]
    LocalityInsufficient { r: usize, locality: usize },

    #[error("bottleneck ratio is zero")]
    ZeroDelta,

    #[error("shell parameters inadmissible: {0}")]
    ParametersInadmissible(String),

    #[error("perturbation norm {norm:.6e} exceeds g*n = {limit:.6e}")]
    PerturbationTooLarge { norm: f64, limit: f64 },

    #[error("no admissible grid points")]
    NoAdmissiblePoints,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("model not found: {0}")]
    ModelNotFound(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("assertion failed: {0}")]
    AssertionFailed(String),
}

impl Error {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonSquare { .. } => "NonSquare",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotHermitian(_) => "NotHermitian",
            Error::EmptyInput => "EmptyInput",
            Error::InvalidDensity(_) => "InvalidDensity",
            Error::InvalidTolerance(_) => "InvalidTolerance",
            Error::RadiusExceedsN { .. } => "RadiusExceedsN",
            Error::GroupTooLarge(_) => "GroupTooLarge",
            Error::DependentGenerators => "DependentGenerators",
            Error::EnumerationTooLarge { .. } => "EnumerationTooLarge",
            Error::EmptySubspace => "EmptySubspace",
            Error::NotOrthogonal(_) => "NotOrthogonal",
            Error::DeclarationInconsistent { .. } => "DeclarationInconsistent",
            Error::NotTracePreserving(_) => "NotTracePreserving",
            Error::MultipleSteadyStates(_) => "MultipleSteadyStates",
            Error::NoPositiveFixedPoint(_) => "NoPositiveFixedPoint",
            Error::SuperoperatorTooLarge(_) => "SuperoperatorTooLarge",
            Error::NonUniqueStationary(_) => "NonUniqueStationary",
            Error::InvalidStochastic(_) => "InvalidStochastic",
            Error::InvalidPartition(_) => "InvalidPartition",
            Error::ConditionViolated(_) => "ConditionViolated",
            Error::EmptyA(_) => "EmptyA",
            Error::NotConverged(_) => "NotConverged",
            Error::NonCommutingChecks { .. } => "NonCommutingChecks",
            Error::NotClassical => "NotClassical",
            Error::SupportOutOfRange { .. } => "SupportOutOfRange",
            Error::EmptyBoundary => "EmptyBoundary",
            Error::CenterOutsideSpace(_) => "CenterOutsideSpace",
            Error::BetaNegative(_) => "BetaNegative",
            Error::NotDiagonal => "NotDiagonal",
            Error::NotCommuting => "NotCommuting",
            Error::TrivialFlip { .. } => "TrivialFlip",
            Error::EmptySchedule => "EmptySchedule",
            Error::MixedFixedPoints { .. } => "MixedFixedPoints",
            Error::NotFixedPoint(_) => "NotFixedPoint",
            Error::LocalityInsufficient { .. } => "LocalityInsufficient",
            Error::ZeroDelta => "ZeroDelta",
            Error::ParametersInadmissible(_) => "ParametersInadmissible",
            Error::PerturbationTooLarge { .. } => "PerturbationTooLarge",
            Error::NoAdmissiblePoints => "NoAdmissiblePoints",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::ModelNotFound(_) => "ModelNotFound",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
            Error::AssertionFailed(_) => "AssertionFailed",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
