use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Array shapes disagree with the declared per-stage dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A transition row does not sum to one within tolerance.
    #[error("transition row at (h={h}, s={s}, a={a}, b={b}) sums to {sum:.17}, expected 1")]
    NonStochasticRow { h: usize, s: usize, a: usize, b: usize, sum: f64 },

    /// A transition probability is negative or non-finite.
    #[error("invalid transition probability {value} at (h={h}, s={s}, a={a}, b={b}, next={next})")]
    InvalidTransition { h: usize, s: usize, a: usize, b: usize, next: usize, value: f64 },

    /// A reward lies outside [0, 1] or is non-finite.
    #[error("reward {value} at (h={h}, s={s}, a={a}, b={b}) lies outside [0, 1]")]
    RewardOutOfRange { h: usize, s: usize, a: usize, b: usize, value: f64 },

    /// The declared turn partition is inconsistent with the action sets.
    #[error("invalid turn partition: {0}")]
    TurnPartition(String),

    /// A payoff matrix is empty, ragged, or contains non-finite entries.
    #[error("invalid payoff matrix: {0}")]
    BadMatrix(String),

    /// A policy table is malformed (wrong shape, negative mass, bad sum).
    #[error("invalid policy: {0}")]
    BadPolicy(String),

    /// An iterative solver exceeded its pivot budget or lost feasibility.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Support enumeration is restricted to small matrices.
    #[error("support enumeration supports at most 6x6 matrices, got {rows}x{cols}")]
    SupportGuard { rows: usize, cols: usize },

    /// A learner was asked to act before its first planning pass.
    #[error("policies have not been planned yet")]
    NotPlanned,

    /// An importance-weighted estimate was requested for a zero-probability action.
    #[error("played action has zero probability under the sampling policy")]
    ZeroPlayedProbability,

    /// A run or mixture was requested from an empty policy history.
    #[error("policy history is empty")]
    EmptyHistory,

    /// The experiment configuration is inconsistent with the game.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
