use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid initial profile at site x={x}: variance {chi:.3e} is not positive")]
    InvalidProfile { x: usize, chi: f64 },

    #[error("torus size N={n} is too small: the near-diagonal stencil wraps onto the diagonal (need N >= 5)")]
    StencilWrap { n: usize },

    #[error("alpha_N = {alpha_n} gives a negative jump rate N^2(1 - alpha_N); need alpha_N < 1")]
    NegativeRate { alpha_n: f64 },

    #[error("simulation diverged: non-finite configuration at t={t}")]
    Diverged { t: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("integrator failed to reach tol={tol:.1e}: achieved {achieved:.3e} at dt={dt:.3e}")]
    IntegratorFailure { achieved: f64, tol: f64, dt: f64 },

    #[error("spectral resolution insufficient: tail mass {tail:.3e} with M={m}; increase the mode cutoff")]
    Resolution { tail: f64, m: usize },

    #[error("({x},{x}) lies on the diagonal, outside the correlation domain")]
    DiagonalAccess { x: usize },

    #[error("missing input: {0}")]
    Dependency(String),

    #[error("numerical consistency check failed: {what} (residue {residue:.3e})")]
    Consistency { what: &'static str, residue: f64 },

    #[error("kernel invariant `{what}` violated at N={n}: error {err:.3e}")]
    KernelInvariant { n: usize, what: &'static str, err: f64 },

    #[error("invalid experiment spec at `{path}`: {reason}")]
    Spec { path: String, reason: String },

    #[error("projected cost {projected:.3e} swap events exceeds the budget {ceiling:.3e}")]
    Budget { projected: f64, ceiling: f64 },

    #[error("replica {replica} panicked: {message}")]
    ReplicaPanic { replica: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
