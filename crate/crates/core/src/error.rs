use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate gauge: Im(h1/h2) and Im(h3/h2) both vanish, rotation angle undefined")]
    DegenerateGauge,

    #[error("matrix is not gauge-fixed: |ratio| deviates from 1 by {deviation:e}")]
    NotGaugeFixed { deviation: f64 },

    #[error("off-diagonal ratio is singular (zero denominator or ratio at -1)")]
    SingularRatio,

    #[error("not on the PT curve: |Re h . Im h| / |h|^2 = {relative_cross:e} exceeds {tolerance:e}")]
    NotOnPtCurve { relative_cross: f64, tolerance: f64 },

    #[error("degenerate rotation: {0}")]
    DegenerateRotation(&'static str),

    #[error("normal-form residual {residual:e} exceeds {tolerance:e}")]
    PtResidual { residual: f64, tolerance: f64 },

    #[error("resolvent is singular at f = {frequency} MHz")]
    PoleOnGrid { frequency: f64 },

    #[error("parameter point (s = {s}, delta = {delta}) mm is outside the family bounds")]
    OutOfBounds { s: f64, delta: f64 },

    #[error("no start converged; best residual rms {best_residual:e}")]
    NonConvergence { best_residual: f64 },

    #[error("frequency span {span} MHz is narrower than the required {required} MHz")]
    InsufficientSpan { span: f64, required: f64 },

    #[error("no resonance can be resolved in the spectrum")]
    Unresolvable,

    #[error("scan quality: {failed} of {total} points failed")]
    ScanQuality { failed: usize, total: usize },

    #[error("|D| minimum at ({s}, {delta}) mm lies on the window boundary")]
    EpOutsideWindow { s: f64, delta: f64 },

    #[error("no exceptional point found: |D| landscape is flat")]
    NoEpFound,

    #[error("loop resolution too coarse at step {step}; refine the loop")]
    RefineLoop { step: usize },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
