use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid barrier: {0}")]
    InvalidBarrier(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Propagation produced non-finite values even with scaled exponentials.
    #[error("overflow during transfer-matrix propagation at k = {k}; use a coarser segmentation or the scaled-propagation path")]
    Overflow { k: f64 },

    #[error("ambiguous branch selection at k = {k}: |Psi_ref(x_c)| residuals {odd:e} and {even:e}")]
    AmbiguousBranch { k: f64, odd: f64, even: f64 },

    #[error("branch selection failed at k = {k}: smallest normalized residual {residual:e} (unitarity or symmetry broken)")]
    BranchSelection { k: f64, residual: f64 },

    #[error("completed-scattering precondition violated: {0}")]
    CompletedScattering(String),

    #[error("k-grid too coarse: norm drift {drift:e} between resolutions {coarse} and {fine}")]
    GridRefinement { drift: f64, coarse: usize, fine: usize },

    #[error("x-grid truncates the packet support: edge density {edge_density:e}; widen the grid")]
    SupportTruncation { edge_density: f64 },

    #[error("time undefined: {0}")]
    UndefinedTime(String),

    #[error("time window too small: integrand {value:e} at t = {t}; extend the window")]
    WindowTooSmall { t: f64, value: f64 },

    #[error("phase unwrap ambiguous at k = {k}: neighbour phase step {step} rad; densify the grid")]
    PhaseUnwrap { k: f64, step: f64 },

    #[error("non-convergent extrapolation: omegas {omegas:?}, values {values:?}")]
    NonConvergent { omegas: Vec<f64>, values: Vec<f64> },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("boundary contamination: edge density {density:e} after step {step}")]
    BoundaryContamination { step: usize, density: f64 },

    #[error("tolerance check failed: {0}")]
    Tolerance(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
