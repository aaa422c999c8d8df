use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("fields live on different axial grids")]
    GridMismatch,
    #[error("axial window |z| <= {extent} is too short for Gaussian quadrature (need {required})")]
    Truncation { extent: f64, required: f64 },
    #[error("grid with {nodes} nodes is too coarse for a five-point stencil")]
    Stencil { nodes: usize },
    #[error("quadrature failure: minus-mode energy {value:e} is negative beyond tolerance")]
    QuadratureFailure { value: f64 },
    #[error("time step {dt:e} exceeds stability bound {bound:e}")]
    RejectedStep { dt: f64, bound: f64 },
    #[error("minimum neck radius {radius:e} below pinch threshold {threshold:e}")]
    NeckPinch { radius: f64, threshold: f64 },
    #[error("step size collapsed to {dt:e} at t = {t}")]
    NonConvergence { dt: f64, t: f64 },
    #[error("requested time {t} outside trajectory range [{start}, {end}]")]
    Range { t: f64, start: f64, end: f64 },
    #[error("slice at tau = {tau} is not graphical over the cylinder on |z| <= 1")]
    NotYetCylindrical { tau: f64 },
    #[error("renormalized graph left the validity band (max |u| = {max_dev})")]
    BlowUp { max_dev: f64 },
    #[error("integration failed at r = {last_r}: {reason}")]
    Integration { last_r: f64, reason: String },
    #[error("no shooting solution: {0}")]
    NoSolution(String),
    #[error("operation not applicable: {0}")]
    Inapplicable(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("series is not exponential: {0}")]
    Nonexponential(String),
    #[error("neutral ODE blows up near tau = {tau_blowup}")]
    OdeBlowUp { tau_blowup: f64 },
    #[error("no start plane: containment fails at the bounding box")]
    NoStartPlane,
    #[error("section is open in the sweep direction; a far-field window is required")]
    FarFieldRequired,
    #[error("discretization failure: density increases by {increase:e} at step {step}")]
    Discretization { step: usize, increase: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Validation errors map to exit code 2, numerical failures to 3.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::GridMismatch
                | Error::Truncation { .. }
                | Error::Stencil { .. }
                | Error::RejectedStep { .. }
                | Error::Range { .. }
                | Error::Inapplicable(_)
                | Error::InsufficientData(_)
                | Error::FarFieldRequired
                | Error::Parse(_)
        )
    }
}
