use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point ({lat}, {lon}) lies outside the terrain grid")]
    OutOfBounds { lat: f64, lon: f64 },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("sites `{0}` and `{1}` are not connected")]
    Disconnected(String, String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("stretch is undefined for coincident endpoints")]
    CoincidentEndpoints,

    #[error("{count} candidate links exceed the exact-search guard of {guard}")]
    GuardExceeded { count: usize, guard: usize },

    #[error("pair ({0}, {1}) is not routed by the design")]
    Unrouted(usize, usize),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by infeasible inputs rather than malformed ones.
    pub fn is_infeasibility(&self) -> bool {
        matches!(self, Error::Disconnected(..) | Error::Unrouted(..))
    }
}
