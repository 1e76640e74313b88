use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("feasible set is empty: {sites} sites with floor {eps} exceed unit mass")]
    EmptyFeasibleSet { sites: usize, eps: f64 },

    /// Acceptance probability of a topic is too small to evaluate the model.
    #[error("degenerate acceptance probability for topic {topic}: rho = {rho:e}")]
    DegenerateAcceptance { topic: usize, rho: f64 },

    #[error("cost series did not reach its decay regime within {l_max} terms (rho = {rho:e})")]
    SeriesCap { l_max: u64, rho: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("lattice has {points} points, above the limit of {limit}; use a coarser resolution")]
    LatticeTooLarge { points: u128, limit: u128 },

    #[error("session exceeded {0} trials without acceptance")]
    RunawaySession(u64),

    #[error("influence levels sum to {0:e}; all topics are unreachable")]
    DegenerateInfluence(f64),

    #[error("invalid step schedule: {0}")]
    InvalidSchedule(String),

    #[error("step size {0} outside [0, 1]")]
    InvalidMixingStep(f64),
}
