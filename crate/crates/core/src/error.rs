use thiserror::Error;

use crate::lattice::{Edge, Site};

/// Errors raised by the model constructors, engines and checks.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("region must contain at least one site")]
    EmptyRegion,

    #[error("sites {0} and {1} are not nearest neighbours")]
    NotAdjacent(Site, Site),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no coupling for edge {0}")]
    MissingCoupling(Edge),

    #[error("no spin value for site {0}")]
    MissingSpin(Site),

    #[error("region has {sites} sites, tensor quadrature is limited to {limit}")]
    RegionTooLarge { sites: usize, limit: usize },

    #[error("region is not a disjoint union of simple paths")]
    NotAChain,

    #[error("regions are not nested: {0}")]
    NotNested(String),

    #[error("regions overlap")]
    Overlap,

    #[error("site {0} is not interior to every region of the sequence")]
    NotInterior(Site),

    #[error("potential degree {degree} does not exceed p = {p}")]
    DegreeTooLow { degree: usize, p: f64 },

    #[error("cutoff search for the quadrature interval did not converge")]
    CutoffSearchFailed,

    #[error("quadrature did not reach tolerance {tol} with {panels} panels")]
    QuadratureNotConverged { tol: f64, panels: usize },

    #[error("lambda = {lambda} exceeds the grid validity limit {max}")]
    LambdaOutOfRange { lambda: f64, max: f64 },

    #[error("observable `{0}` is not supported by this engine")]
    UnsupportedObservable(String),

    #[error("engine cannot be used here: {0}")]
    EngineInfeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
