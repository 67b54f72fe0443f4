use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scenario field is out of its valid range.
    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: &'static str, reason: String },

    /// The probing threshold exceeds what a matched beam at full power can radiate.
    #[error("probing threshold {threshold} W exceeds the matched-beam ceiling {ceiling} W (Pmax * M)")]
    ProbingCeiling { threshold: f64, ceiling: f64 },

    /// Options failed validation.
    #[error("invalid option `{field}`: {reason}")]
    InvalidOptions { field: &'static str, reason: String },

    /// Every beamformer is orthogonal to the probe steering vector.
    #[error("probe projection is ill-posed: beamformers are orthogonal to the probe direction")]
    DegenerateProbe,

    /// The rho update saw a non-positive denominator, so `u` was not the MMSE receiver.
    #[error("rho update for user {user}: denominator {denominator} is not positive")]
    NotMmseReceiver { user: usize, denominator: f64 },

    /// The concave surrogate cannot reach the threshold anywhere on the chain polytope.
    #[error("surrogate constraint infeasible: best achievable {achieved} < threshold {threshold}")]
    SurrogateInfeasible { achieved: f64, threshold: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
