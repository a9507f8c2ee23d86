//! Error taxonomy shared by all modules.

/// Failure modes surfaced by the library.
///
/// Messages carry the offending quantity so CLI output and test logs can
/// report the failing row without re-deriving it.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Orientation certificate failed: `min det(I + d phi)` was not positive.
    #[error("not a diffeomorphism: min det(dPhi) = {min_det} at {witness:?}")]
    NotADiffeomorphism { min_det: f64, witness: Vec<f64> },

    /// A linear solve met a Jacobian determinant below the conditioning floor.
    #[error("singular or far from identity: |det| = {det} below floor {floor}")]
    SingularOrFarFromIdentity { det: f64, floor: f64 },

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    /// Newton iteration failed to reach tolerance within the iteration budget.
    #[error("no convergence: residual {residual} after {iterations} iterations at {point:?}")]
    NoConvergence {
        residual: f64,
        iterations: usize,
        point: Vec<f64>,
    },

    /// `det dPhi` crossed zero along a trajectory.
    #[error("flow degeneracy: det(W1) = {det} at t = {time}, seed {seed}")]
    FlowDegeneracy { det: f64, time: f64, seed: usize },

    #[error("numerical blowup: {0}")]
    NumericalBlowup(String),

    /// Straight-segment admissibility certificate failed.
    #[error("segment not admissible: min det(I + t dphi) = {min_det} at t = {time}")]
    SegmentNotAdmissible { min_det: f64, time: f64 },

    /// A polygon leg failed its admissibility certificate.
    #[error("polygon not admissible at segment {segment}: {source}")]
    PolygonNotAdmissible {
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    /// An a-priori bound was violated beyond tolerance during integration.
    #[error("monitor failure: {0}")]
    MonitorFailure(String),
}

pub type Result<A> = std::result::Result<A, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
