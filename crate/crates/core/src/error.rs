use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFiniteCoordinate { vertex: usize },

    #[error("element {element} references vertex {vertex}, which does not exist")]
    VertexOutOfRange { element: usize, vertex: usize },

    #[error("element {element} is degenerate")]
    DegenerateTriangle { element: usize },

    #[error("element {element} has invalid refinement edge {edge}")]
    InvalidRefinementEdge { element: usize, edge: usize },

    #[error("mesh is not conforming at element {element}: {reason}")]
    NonConforming { element: usize, reason: String },

    #[error("elements {first} and {second} traverse their shared edge in the same direction")]
    InconsistentOrientation { first: usize, second: usize },

    #[error("element {element} out of range for a mesh with {len} elements")]
    ElementOutOfRange { element: usize, len: usize },

    #[error("refinement completion exceeded {cap} passes")]
    CompletionCap { cap: usize },

    #[error("bisection depth limit of {max} exceeded")]
    DepthLimit { max: u32 },

    #[error("meshes are not nested: {0}")]
    NotNested(String),

    #[error("function does not live on the given mesh: {0}")]
    MeshMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),

    #[error("iterative solver did not converge: {0}")]
    NoConvergence(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
