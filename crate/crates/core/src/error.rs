use thiserror::Error;

/// Every failure the laboratory can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve is degenerate at s = {s}: |det| = {det:e}")]
    DegenerateCurve { s: f64, det: f64 },
    #[error("frequency outside the admissible region: {0}")]
    OutOfRegion(String),
    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("unsupported curve family: {0}")]
    UnsupportedFamily(String),
    #[error("quadrature not converged at {nodes} nodes (relative change {change:e})")]
    QuadratureNotConverged { nodes: usize, change: f64 },
    #[error("periodization risk: {mass:e} of the mass lies near the boundary")]
    PeriodizationRisk { mass: f64 },
    #[error("refinement not converged for {what} (relative change {change:e})")]
    RefinementNotConverged { what: &'static str, change: f64 },
    #[error("plate contains no grid cell")]
    EmptyPlate,
    #[error("parameters closer than the separation {lambda}: {detail}")]
    SeparationViolated { lambda: f64, detail: String },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("scale underflow: l_(k-1) = 2^{log2_scale} does not exceed r = 2^{log2_r}")]
    ScaleUnderflow { log2_scale: i64, log2_r: i64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    ConfigInvalid(Vec<String>),
    #[error("cannot read {path}: {source}")]
    FileUnreadable { path: String, source: std::io::Error },
    #[error("no run summaries found in {0}")]
    NoSummaries(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
