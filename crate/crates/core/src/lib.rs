//! Engineering risk management engine.
//!
//! Diagnosis of a leak from noisy observations, projection of its
//! evolution, a shutdown recommendation by expected utility, and an anytime
//! contingent plan for gathering more information before acting.

pub mod decision;
pub mod distribution;
pub mod error;
pub mod evolution;
pub mod inference;
pub mod scenario;
pub mod session;
pub mod simulate;
pub mod voi;

pub use decision::{
    classify_severity, escalating_recommend, escalating_recommend_over, expected_utility, forced_shutdown, recommend,
    RankedLevel, Recommendation, SeverityLayer,
};
pub use distribution::DiscreteDistribution;
pub use error::{
    DecisionError, DistributionError, EvolutionError, InferenceError, ScenarioError,
    SessionError, VoiError,
};
pub use evolution::{
    condition_on_no_ignition, ignition_probability, project, project_for,
    transition_matrix_for_level, LeakBelief, LeakState, TransitionMatrix,
};
pub use inference::{
    aggregate, bayes_update, joint_enumeration_oracle, observation_predictive, posterior, Evidence,
};
pub use scenario::{
    builtin_desk_alarm, builtin_gas_compressor, builtin_scenarios, load_scenario, AggregateState, BeliefNetworkSpec, FramingConstraints,
    ScenarioBundle, TestSpec,
};
pub use session::{
    apply_event, replay, replay_from, DiagnosisView, EventKind, EventLog, Pending, ProfilePoint, ScenarioCatalog,
    Session, SessionEvent, SessionState,
};
pub use simulate::{simulate, LevelCurve, Simulation};
pub use voi::{build_plan, eligible_tests, full_enumeration_oracle, ContingentPlan, Heuristic};
