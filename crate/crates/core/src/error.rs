use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// f(x) fell below the f⋆ handed to a Polyak-type step.
    #[error("invalid f*: f(x) = {f_val:e} is below the supplied optimal value {f_star:e}")]
    InvalidFStar { f_val: f64, f_star: f64 },

    #[error(
        "degenerate momentum: denominator {denominator:e} is negligible against scale {scale:e} \
         (numerator {numerator:e})"
    )]
    DegenerateMomentum {
        numerator: f64,
        denominator: f64,
        scale: f64,
    },

    #[error("conjugate gradient breakdown: search-direction curvature {curvature:e}")]
    Breakdown { curvature: f64 },

    #[error(
        "invalid Q polynomial: Q({lambda:e}) = {value:e} is not positive on an active eigenvalue"
    )]
    InvalidQ { lambda: f64, value: f64 },

    #[error("spectral measure exhausted: the polynomial sequence terminates")]
    MeasureExhausted,

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("iteration {t}: {source}")]
    AtIteration {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(self, t: usize) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                t,
                source: Box::new(e),
            },
        }
    }

    /// Strips the iteration tag, if any.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_numerical_degeneracy(&self) -> bool {
        matches!(
            self.root(),
            Error::DegenerateMomentum { .. }
                | Error::Breakdown { .. }
                | Error::InvalidFStar { .. }
                | Error::MeasureExhausted
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
