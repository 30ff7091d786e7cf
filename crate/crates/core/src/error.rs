use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} is outside the chart domain (needs clearance {clearance:e})")]
    PointOutsideDomain { point: Vec<f64>, clearance: f64 },
    #[error("metric is not positive definite at {point:?}")]
    MetricNotPositiveDefinite { point: Vec<f64> },
    #[error("map is not an immersion at node {node}")]
    NotImmersed { node: usize },
    #[error("immersion is not totally real at node {node}: rho_J = {rho:e}")]
    NotTotallyReal { node: usize, rho: f64 },
    #[error("tangent frame degenerates at node {node}")]
    DegenerateFrame { node: usize },
    #[error(
        "first-variation check agrees only with the sign flipped (analytic {analytic}, fd {fd})"
    )]
    SignConventionMismatch { analytic: f64, fd: f64 },
    #[error("raw spectrum has tail energy ratio {ratio:e} beyond the requested truncation")]
    AliasingDetected { ratio: f64 },
    #[error("invalid tail window [{lo}, {hi}] for truncation {n}")]
    InvalidWindow { lo: usize, hi: usize, n: usize },
    #[error("vector field is not positive (min {min})")]
    FieldNotPositive { min: f64 },
    #[error("radius {r} lies outside the convergence annulus ({inner}, {outer})")]
    OutsideAnnulus { r: f64, inner: f64, outer: f64 },
    #[error("curve is not parametrized by arclength (speed spread {spread:e})")]
    NotArclength { spread: f64 },
    #[error("spectral continuation amplifies modes by {factor:e} (limit {limit:e})")]
    AmplificationExceeded { factor: f64, limit: f64 },
    #[error("unsupported vector field: {0}")]
    UnsupportedField(String),
    #[error("time stepping blew up at t = {time}: tail energy ratio {ratio:e}")]
    BlowUpDetected { time: f64, ratio: f64 },
    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("boundary curves are not nested: {0}")]
    NotNested(String),
    #[error("Gauss-Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no geodesic is available in this direction: {0}")]
    GeodesicUnavailable(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::PointOutsideDomain { .. } => "PointOutsideDomain",
            Error::MetricNotPositiveDefinite { .. } => "MetricNotPositiveDefinite",
            Error::NotImmersed { .. } => "NotImmersed",
            Error::NotTotallyReal { .. } => "NotTotallyReal",
            Error::DegenerateFrame { .. } => "DegenerateFrame",
            Error::SignConventionMismatch { .. } => "SignConventionMismatch",
            Error::AliasingDetected { .. } => "AliasingDetected",
            Error::InvalidWindow { .. } => "InvalidWindow",
            Error::FieldNotPositive { .. } => "FieldNotPositive",
            Error::OutsideAnnulus { .. } => "OutsideAnnulus",
            Error::NotArclength { .. } => "NotArclength",
            Error::AmplificationExceeded { .. } => "AmplificationExceeded",
            Error::UnsupportedField(_) => "UnsupportedField",
            Error::BlowUpDetected { .. } => "BlowUpDetected",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::NotNested(_) => "NotNested",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::GeodesicUnavailable(_) => "GeodesicUnavailable",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::MetricNotPositiveDefinite { .. }
                | Error::NotTotallyReal { .. }
                | Error::DegenerateFrame { .. }
                | Error::SignConventionMismatch { .. }
                | Error::AliasingDetected { .. }
                | Error::OutsideAnnulus { .. }
                | Error::AmplificationExceeded { .. }
                | Error::BlowUpDetected { .. }
                | Error::NoConvergence { .. }
                | Error::GeodesicUnavailable(_)
                | Error::NotImmersed { .. }
                | Error::PointOutsideDomain { .. }
        )
    }
}
