use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("stencil deficiency at node {node}: {count} neighbors inside the influence radius, at least 5 required")]
    StencilDeficiency { node: usize, count: usize },

    #[error("degenerate stencil at node {node} (condition estimate {condition:.3e}); enlarge the influence radius")]
    DegenerateStencil { node: usize, condition: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unphysical value: {0}")]
    Physicality(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("system not solvable: {0}")]
    Solvability(String),

    #[error("linear solver failed at node {node}: {detail}")]
    Solver { node: usize, detail: String },

    #[error("non-finite {field} at node {node}")]
    NonFinite { node: usize, field: &'static str },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
