use thiserror::Error;

pub type Result<T> = std::result::Result<T, DeconvError>;

#[derive(Debug, Error)]
pub enum DeconvError {
    #[error("the Dirac error law has no pointwise density")]
    NoDensity,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis index {index} out of range for degree {degree}")]
    IndexOutOfRange { index: usize, degree: usize },

    #[error("point {0} lies outside [0, 1]")]
    OutsideUnitInterval(f64),

    #[error("weights are not on the simplex: {0}")]
    NotOnSimplex(String),

    #[error("weights have degree {got}, expected {expected}")]
    DegreeMismatch { expected: usize, got: usize },

    #[error(
        "observation {index} (value {value}) has zero likelihood under every basis component; \
         the support is probably too narrow"
    )]
    ZeroRow { index: usize, value: f64 },

    #[error("mixture density vanishes at observation {index}")]
    ZeroDenominator { index: usize },

    #[error("initial weights must be strictly positive (coordinate {index} is {value})")]
    NonPositiveInit { index: usize, value: f64 },

    #[error("log-likelihood decreased by {decrease:e} between degrees {from} and {to}")]
    AscentViolated {
        from: usize,
        to: usize,
        decrease: f64,
    },

    #[error("degree trace needs at least {need} entries, got {got}")]
    TraceTooShort { need: usize, got: usize },

    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },

    #[error("all observations are equal")]
    DegenerateData,

    #[error("estimated mean {0} is outside (0, 1) on the transformed scale")]
    MeanOutsideUnit(f64),

    #[error("at degree {degree}: {source}")]
    AtDegree {
        degree: usize,
        #[source]
        source: Box<DeconvError>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<DeconvError>,
    },

    #[error("unsupported model file version {found} (expected {expected})")]
    ModelVersion { found: u64, expected: u64 },

    #[error("estimator `{estimator}` failed in {failures} of {runs} runs; study aborted")]
    StudyAborted {
        estimator: String,
        failures: usize,
        runs: usize,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DeconvError {
    pub(crate) fn at_degree(self, degree: usize) -> Self {
        DeconvError::AtDegree {
            degree,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        DeconvError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with degree and stage context stripped.
    pub fn root(&self) -> &DeconvError {
        match self {
            DeconvError::AtDegree { source, .. } | DeconvError::Stage { source, .. } => {
                source.root()
            }
            other => other,
        }
    }

    /// True when the failure is caused by the input data or its configuration
    /// rather than by the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self.root(),
            DeconvError::ZeroRow { .. }
                | DeconvError::TooFewObservations { .. }
                | DeconvError::DegenerateData
                | DeconvError::MeanOutsideUnit(_)
                | DeconvError::InvalidParameter(_)
                | DeconvError::OutsideUnitInterval(_)
                | DeconvError::ModelVersion { .. }
                | DeconvError::Json(_)
        )
    }
}
