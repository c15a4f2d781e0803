use thiserror::Error;

use crate::lattice::Offset;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("hopping set may not contain the on-site offset (0,0)")]
    OnSiteHopping,

    #[error("hopping set is not symmetric: {0}")]
    AsymmetricHoppings(String),

    #[error("force has no commensurate direction (q, r); rationalize it first")]
    IncommensurateForce,

    #[error("invalid force: {0}")]
    InvalidForce(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("band grid of size {grid} aliases offset {offset:?} (need grid > 2 * max|m_i|)")]
    Aliasing { offset: Offset, grid: usize },

    #[error("inverse transform of the band is not real: residue {residue:e} at {offset:?}")]
    NonRealTransform { offset: Offset, residue: f64 },

    #[error("gaussian tail mass {tail:e} beyond a {side}x{side} grid exceeds {limit:e}")]
    TailMass { tail: f64, side: usize, limit: f64 },

    #[error("boundary mass {mass:e} exceeds {limit:e}")]
    BoundaryMass { mass: f64, limit: f64 },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("hopping range {range} does not fit a grid of side {side}")]
    HoppingRange { range: i32, side: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
