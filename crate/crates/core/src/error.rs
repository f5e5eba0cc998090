use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid mixing statistics: {0}")]
    InvalidMixing(String),

    #[error("eta is undefined for zero volume-averaged absorption; pass eta explicitly")]
    ZeroAbsorption,

    #[error("unsupported quadrature order {0} (need an even order in 2..=128)")]
    QuadratureOrder(usize),

    #[error("invalid mesh request: {0}")]
    InvalidMesh(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular coupling block at cell {cell}, direction {direction} (det = {det:e})")]
    SingularBlock {
        cell: usize,
        direction: usize,
        det: f64,
    },

    #[error("linear system is singular at pivot {0}")]
    SingularSystem(usize),

    #[error("source iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        residual_history: Vec<f64>,
        last_scalar_flux: Vec<f64>,
    },

    #[error("{model}: {source}")]
    Model {
        model: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attaches the producing model's name to a solver error.
    pub fn in_model(self, model: impl Into<String>) -> Self {
        Error::Model {
            model: model.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
