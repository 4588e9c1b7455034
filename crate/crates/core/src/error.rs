use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("{outcomes} outcomes but {probs} probabilities")]
    LengthMismatch { outcomes: usize, probs: usize },
    #[error("distribution has no outcomes")]
    Empty,
    #[error("probability at index {index} is {value}, outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("weights have zero total mass")]
    ZeroMass,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scenario io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },
}

impl ScenarioError {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has no outcome `{outcome}`")]
    UnknownOutcome { node: String, outcome: String },
    #[error("real-state node `{0}` cannot be observed directly")]
    RealStateObserved(String),
    #[error("zero-probability evidence")]
    ZeroProbabilityEvidence,
    #[error("joint state space of {size} configurations exceeds the enumeration limit")]
    StateSpaceTooLarge { size: f64 },
    #[error("outcome `{0}` has no aggregation mapping")]
    UnmappedOutcome(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("observed outcome has zero probability under the current belief")]
    ZeroProbabilityOutcome,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("shutdown level {0} does not exist")]
    InvalidLevel(usize),
    #[error("level {level}: p + q = {sum} exceeds 1")]
    InvalidParameters { level: usize, sum: f64 },
    #[error("belief has all of its mass on the ignited state")]
    AllMassIgnited,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("shutdown level {0} does not exist")]
    InvalidLevel(usize),
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("belief must carry no ignited mass")]
    IgnitedBelief,
    #[error("scenario defines no decision horizons")]
    NoHorizons,
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VoiError {
    #[error("unknown plan path {0}")]
    UnknownPath(usize),
    #[error("path {0} is not on the frontier")]
    NotOnFrontier(usize),
    #[error("no eligible tests at path {0}")]
    NoEligibleTests(usize),
    #[error("malformed plan tree: {0}")]
    MalformedTree(String),
    #[error("constrained tree exceeds {limit} nodes")]
    TreeTooLarge { limit: usize },
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("expected event seq {expected}, got {found}")]
    OutOfOrder { expected: u64, found: u64 },
    #[error("event timestamp {found} precedes session clock {clock}")]
    TimeRegression { clock: f64, found: f64 },
    #[error("first event must be session-created")]
    NotCreated,
    #[error("session already created")]
    AlreadyCreated,
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown test `{0}`")]
    UnknownTest(String),
    #[error("test `{test}` has no outcome `{outcome}`")]
    UnknownTestOutcome { test: String, outcome: String },
    #[error("shutdown level {0} does not exist")]
    InvalidLevel(usize),
    #[error("time advance must be nonnegative and finite, got {0}")]
    InvalidAdvance(f64),
    #[error("time-advance stamped {found}, expected clock + dt = {expected}")]
    AdvanceMismatch { expected: f64, found: f64 },
    #[error("ignition already reported; only emergency shutdown applies")]
    IgnitionEvident,
    #[error("session already advanced to seq {current}, request expected {expected}")]
    Conflict { expected: u64, current: u64 },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Voi(#[from] VoiError),
    #[error("event log io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log parse error: {0}")]
    Json(#[from] serde_json::Error),
}
