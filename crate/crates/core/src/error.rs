use thiserror::Error;

/// Failures raised by the geometry layer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("point {coords:?} lies outside the domain of chart `{chart}`")]
    OutOfDomain { chart: String, coords: Vec<f64> },
    #[error("finite-difference stencil leaves the domain of chart `{chart}`")]
    StencilOutOfDomain { chart: String },
    #[error("field `{label}` returned {got} components, expected {expected}")]
    ShapeError {
        label: String,
        expected: usize,
        got: usize,
    },
    #[error("field `{label}` produced a non-finite component")]
    NonFinite { label: String },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("sampling box is too small for a stencil margin of {margin}")]
    EmptyDomain { margin: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("metric is degenerate (|det g| = {det:e})")]
    DegenerateMetric { det: f64 },
    #[error("metric is not symmetric (asymmetry {asymmetry:e})")]
    AsymmetricMetric { asymmetry: f64 },
    #[error("transition matrix is singular (|det s| = {det:e})")]
    SingularTransition { det: f64 },
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),
    #[error("jacobian is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },
    #[error("metric restricted to the fibre is degenerate (|det| = {det:e})")]
    DegenerateFiberMetric { det: f64 },
    #[error("fibre points do not share one image (spread {spread:e})")]
    NotAFiber { spread: f64 },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
}

impl GeometryError {
    /// Stable variant name, used in machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Self::OutOfDomain { .. } => "OutOfDomain",
            Self::StencilOutOfDomain { .. } => "StencilOutOfDomain",
            Self::ShapeError { .. } => "ShapeError",
            Self::NonFinite { .. } => "NonFinite",
            Self::InvalidChart(_) => "InvalidChart",
            Self::EmptyDomain { .. } => "EmptyDomain",
            Self::InvalidArgument(_) => "InvalidArgument",
            Self::DegenerateMetric { .. } => "DegenerateMetric",
            Self::AsymmetricMetric { .. } => "AsymmetricMetric",
            Self::SingularTransition { .. } => "SingularTransition",
            Self::IllConditioned(_) => "IllConditioned",
            Self::RankDeficient { .. } => "RankDeficient",
            Self::DegenerateFiberMetric { .. } => "DegenerateFiberMetric",
            Self::NotAFiber { .. } => "NotAFiber",
            Self::PreconditionFailed(_) => "PreconditionFailed",
            Self::Evaluation(_) => "EvaluationError",
        }
    }

    /// Maps a domain miss inside a nested stencil onto `StencilOutOfDomain`.
    pub(crate) fn into_stencil(self) -> Self {
        match self {
            Self::OutOfDomain { chart, .. } => Self::StencilOutOfDomain { chart },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, GeometryError>;
