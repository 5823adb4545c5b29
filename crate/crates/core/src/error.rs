use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("invalid edge ({0}, {1}): self-loops are not allowed")]
    SelfLoop(usize, usize),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    /// The weighted support does not span every vertex. `component` lists the
    /// vertices of one component that is cut off from vertex 0.
    #[error("graph is disconnected: {components} components; vertices {component:?} are not connected to vertex 0")]
    Disconnected {
        components: usize,
        component: Vec<usize>,
    },

    #[error("isolated vertex {0} has zero weighted degree")]
    IsolatedVertex(usize),

    #[error("matrix exponential action did not reach tolerance {delta:e} (residual estimate {residual:e}) at Krylov dimension {dim}")]
    ExpActionNotConverged { delta: f64, residual: f64, dim: usize },

    #[error("instance too large: {0}")]
    InstanceTooLarge(String),

    #[error("packing oracle exceeded its budget of {0} augmentations")]
    PackingBudgetExceeded(usize),

    #[error("MLE diverged: |theta|_inf = {norm:.3} exceeds {bound} after {iters} iterations (no finite minimizer)")]
    Divergence { norm: f64, bound: f64, iters: usize },

    /// Some group of items never wins a comparison against the rest, so the
    /// likelihood keeps decreasing as the group's scores go to minus infinity.
    #[error("no finite MLE: vertices {group:?} never win a weighted comparison against the other vertices")]
    NoFiniteMinimizer { group: Vec<usize> },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
