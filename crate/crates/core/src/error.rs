use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("residue correspondence mismatch: {0}")]
    Correspondence(String),

    #[error("elastic network is disconnected ({components} components: {detail})")]
    Connectivity { components: usize, detail: String },

    #[error("coincident coordinates for residues {0} and {1}")]
    DuplicateCoordinates(usize, usize),

    #[error("zero fluctuation at residue {0}")]
    ZeroFluctuation(usize),

    #[error("degenerate direction vector (norm {0:e})")]
    DegenerateDirection(f64),

    #[error("empty interface: {0}")]
    EmptyInterface(String),

    #[error("non-finite score at sampling step {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("structure {0} contains no complete residues")]
    EmptyStructure(String),

    #[error("bad file format in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("unknown configuration key `{key}`; valid keys: {valid}")]
    UnknownConfigKey { key: String, valid: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
