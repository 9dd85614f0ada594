use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("polyline must have at least three distinct vertices and be closed")]
    OpenPolyline,
    #[error("polyline self-intersects between edges {0} and {1}")]
    SelfIntersection(usize, usize),
    #[error("polyline is oriented clockwise (signed area {0})")]
    Clockwise(f64),
    #[error("domain has no Dirichlet element")]
    NoDirichlet,
    #[error("element {0} has zero length")]
    DegenerateElement(usize),
    #[error("invalid mesh specification: {0}")]
    InvalidSpec(String),
    #[error("contact traces do not match: {0}")]
    ContactMismatch(String),
    #[error("empty contact set on side {0}")]
    EmptyContact(char),
    #[error("unsupported kernel/shape combination: {0}")]
    Unsupported(String),
    #[error("assembled system is singular (smallest pivot {0:e})")]
    SingularSystem(f64),
    #[error("linear solve residual {0:e} above tolerance")]
    Residual(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("QP iteration cap of {0} exceeded")]
    IterationCap(usize),
    #[error("non-positive curvature {0:e} in QP operator")]
    NonPositiveCurvature(f64),
    #[error("time step must be positive, got {0}")]
    InvalidTau(f64),
    #[error("energy residuum {0:e} is negative beyond roundoff")]
    NegativeResiduum(f64),
    #[error("time step reached the minimum at step {step} (t = {t})")]
    TauDeadlock { step: usize, t: f64 },
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { path: path.into(), msg: msg.into() }
    }
}
