use serde::Serialize;
use thiserror::Error;

/// Initial-data direction that no admissible control can steer to zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UncontrollableDirection {
    pub sigma: f64,
    /// Position of the eigenvalue in the assembled spectrum.
    pub index: usize,
    pub multiplicity: usize,
    pub rank: usize,
    /// Unit vector in the coordinates of the orthonormal eigenspace basis.
    pub direction: Vec<f64>,
    /// The same direction as edge weights per scalar eigenfunction of the eigenspace.
    pub edge_profile: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("gram matrix too ill-conditioned (condition {condition:.3e} > {limit:.1e}); lower the number of modes or raise the horizon")]
    Conditioning { condition: f64, limit: f64 },
    #[error("duplicate exponent {0} in biorthogonal family; fold multiplicity into channels instead")]
    DuplicateExponent(f64),
    #[error("eigenvalue {} (index {}) is not controllable with the given channels: rank {} < multiplicity {}", .0.sigma, .0.index, .0.rank, .0.multiplicity)]
    Uncontrollable(Box<UncontrollableDirection>),
}

impl Error {
    /// Machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Domain(_) => "domain",
            Error::Numerical(_) => "numerical",
            Error::Conditioning { .. } => "conditioning",
            Error::DuplicateExponent(_) => "duplicate_exponent",
            Error::Uncontrollable(_) => "uncontrollable_direction",
        }
    }

    /// Structured refusals are valid requests the mathematics declines.
    pub fn is_refusal(&self) -> bool {
        matches!(self, Error::Conditioning { .. } | Error::Uncontrollable(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
