//! Contingent information-gathering plans.
//!
//! A plan is a decision tree that alternates between choosing a test (or
//! acting now) and observing the test's outcome. It starts as a single
//! act-now leaf and grows one path at a time: every expansion turns a leaf
//! into a choice between acting now and each eligible test, then the tree is
//! rolled back. The rolled-back value of the root is the best plan found so
//! far and never decreases as the tree grows.
//!
//! While a test runs the leak keeps evolving under the status-quo level, so
//! every test branch carries an ignition-interrupt child that ends the path.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{escalating_recommend_over, expected_utility, Recommendation};
use crate::distribution::{DiscreteDistribution, SUM_TOLERANCE};
use crate::error::{DecisionError, VoiError};
use crate::evolution::{
    condition_on_no_ignition, project_for, transition_matrix_for_level, LeakBelief, LeakState,
};
use crate::inference::{bayes_update_probs, predictive_probs};
use crate::scenario::{FramingConstraints, ScenarioBundle, TestSpec};

pub type NodeId = usize;

/// Node limit for [`full_enumeration_oracle`].
pub const ORACLE_NODE_LIMIT: usize = 1_000_000;

/// Slack on time and cost budgets.
const BUDGET_SLACK: f64 = 1e-9;

/// A test must beat acting now by more than this fraction of the act-now
/// value (at least this much in absolute terms) to be chosen, so rounding
/// noise never makes a worthless test look valuable.
pub const ACT_NOW_MARGIN: f64 = 1e-12;

fn beats_act_now(value: f64, act_now: f64) -> bool {
    value > act_now + ACT_NOW_MARGIN * act_now.abs().max(1.0)
}

/// Tests performed so far along one path, with the time and test cost spent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathSoFar {
    pub tests: Vec<String>,
    pub time: f64,
    pub cost: f64,
}

impl PathSoFar {
    fn extended(&self, test: &TestSpec) -> PathSoFar {
        let mut tests = self.tests.clone();
        tests.push(test.id.clone());
        PathSoFar {
            tests,
            time: self.time + test.duration,
            cost: self.cost + test.cost,
        }
    }
}

/// Everything known at a node: the path that reached it, the belief there
/// and the probability of reaching it from the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub path: PathSoFar,
    pub belief: LeakBelief,
    pub reach_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeChild {
    pub outcome: String,
    pub prob: f64,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NodeKind {
    Choice {
        act_now: NodeId,
        branches: Vec<NodeId>,
        /// Argmax child after the last rollback.
        best: NodeId,
    },
    OutcomeBranch {
        test_id: String,
        ignition_prob: f64,
        ignition: NodeId,
        outcomes: Vec<OutcomeChild>,
    },
    ActNowLeaf {
        recommendation: Box<Recommendation>,
    },
    IgnitionLeaf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub kind: NodeKind,
    pub state: PathState,
    pub eu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Heuristic {
    /// Expand the frontier path with the largest reach probability times leaf EU.
    HighestEvPath,
    /// Sample a frontier path in proportion to its reach probability.
    ProbabilityWeighted,
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::HighestEvPath => "highest-ev-path",
            Heuristic::ProbabilityWeighted => "probability-weighted",
        })
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "highest-ev-path" => Ok(Heuristic::HighestEvPath),
            "probability-weighted" => Ok(Heuristic::ProbabilityWeighted),
            other => Err(format!(
                "unknown heuristic `{other}` (expected highest-ev-path or probability-weighted)"
            )),
        }
    }
}

/// An information-gathering decision tree grown incrementally.
#[derive(Debug, Clone)]
pub struct ContingentPlan {
    pub nodes: Vec<PlanNode>,
    pub best_eu: f64,
    pub expansions_used: u32,
    /// Act-now leaves that can still be expanded, in creation order.
    pub frontier: Vec<NodeId>,
    /// Root value after every expansion.
    pub history: Vec<f64>,
    pub status_quo_level: usize,
    pub constraints: FramingConstraints,
}

pub const ROOT: NodeId = 0;

/// Tests that may run next on a path, in catalog order. Besides the framing
/// constraints, a test must finish before the longest decision horizon.
pub fn eligible_tests(
    bundle: &ScenarioBundle,
    belief: &LeakBelief,
    path: &PathSoFar,
    constraints: &FramingConstraints,
) -> Vec<String> {
    if path.tests.len() >= constraints.max_tests as usize {
        return Vec::new();
    }
    let Ok(alive) = condition_on_no_ignition(belief) else {
        return Vec::new();
    };
    let aggregate = alive.leak_part();
    let decision_deadline = bundle.value.horizons.last().copied().unwrap_or(0.0);
    bundle
        .tests
        .iter()
        .filter(|t| path.time + t.duration <= constraints.max_total_time + BUDGET_SLACK)
        .filter(|t| path.time + t.duration < decision_deadline)
        .filter(|t| path.cost + t.cost <= constraints.max_total_cost + BUDGET_SLACK)
        .filter(|t| t.repeatable || !path.tests.contains(&t.id))
        .filter(|t| t.eligibility.iter().all(|th| th.holds(&aggregate)))
        .map(|t| t.id.clone())
        .collect()
}

/// Outcome split of one test run from a path state.
struct TestSplit {
    ignition_prob: f64,
    ignition_state: PathState,
    /// (outcome label, branch probability, resulting state)
    outcomes: Vec<(String, f64, PathState)>,
}

fn split_on_test(
    bundle: &ScenarioBundle,
    state: &PathState,
    test: &TestSpec,
    status_quo_level: usize,
) -> Result<TestSplit, VoiError> {
    let matrix = transition_matrix_for_level(&bundle.transitions, status_quo_level)?;
    let during = project_for(&state.belief, &matrix, test.duration);
    let ignition_prob = during.ignited();
    let path = state.path.extended(test);
    let ignition_state = PathState {
        path: path.clone(),
        belief: LeakBelief::indicator(LeakState::Ignited),
        reach_prob: state.reach_prob * ignition_prob,
    };
    let survive = 1.0 - ignition_prob;
    let alive = condition_on_no_ignition(&during).ok();
    let leak = alive.map_or(state.belief.leak_part(), |b| b.leak_part());
    let rows = test.rows();
    let predictive = predictive_probs(&rows, &leak);
    let outcomes = test
        .outcomes
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let prob = if alive.is_some() { survive * predictive[k] } else { 0.0 };
            let belief = if prob > 0.0 {
                let post = bayes_update_probs(&leak, &test.likelihood_column(k))?;
                LeakBelief([post[0], post[1], post[2], 0.0])
            } else {
                LeakBelief([leak[0], leak[1], leak[2], 0.0])
            };
            Ok((
                label.clone(),
                prob,
                PathState {
                    path: path.clone(),
                    belief,
                    reach_prob: state.reach_prob * prob,
                },
            ))
        })
        .collect::<Result<Vec<_>, VoiError>>()?;
    Ok(TestSplit {
        ignition_prob,
        ignition_state,
        outcomes,
    })
}

/// Production lost at the status-quo level while testing, plus test costs.
fn accrued_cost(bundle: &ScenarioBundle, state: &PathState, status_quo_level: usize) -> Result<f64, VoiError> {
    let rate = bundle
        .production_rate(status_quo_level)
        .ok_or(DecisionError::InvalidLevel(status_quo_level))?;
    Ok(state.path.cost + rate * state.path.time)
}

/// Decision horizons still ahead of a leaf, measured from the leaf.
fn remaining_horizons(bundle: &ScenarioBundle, elapsed: f64) -> Vec<f64> {
    bundle
        .value
        .horizons
        .iter()
        .filter(|&&h| h > elapsed)
        .map(|&h| h - elapsed)
        .collect()
}

/// Acting at a leaf: the level comes from horizon escalation over the
/// remaining horizons, and it is valued up to the longest horizon so that
/// every leaf of the tree covers the same time window.
fn act_now(
    bundle: &ScenarioBundle,
    state: &PathState,
    status_quo_level: usize,
) -> Result<(Recommendation, f64), VoiError> {
    let aggregate = state.belief.to_aggregate()?;
    let horizons = remaining_horizons(bundle, state.path.time);
    let window = *horizons.last().ok_or(DecisionError::NoHorizons)?;
    let rec = escalating_recommend_over(&aggregate, 0.0, status_quo_level, &horizons, bundle)?;
    let value = if rec.horizon_used == window {
        rec.chosen_utility()
    } else {
        expected_utility(&state.belief, rec.chosen, window, &bundle.transitions, &bundle.value)?
    };
    Ok((rec, value - accrued_cost(bundle, state, status_quo_level)?))
}

fn ignition_eu(bundle: &ScenarioBundle, state: &PathState, status_quo_level: usize) -> Result<f64, VoiError> {
    Ok(-bundle.value.ignition_loss - accrued_cost(bundle, state, status_quo_level)?)
}

impl ContingentPlan {
    /// A plan consisting of the single act-now leaf.
    pub fn new(
        bundle: &ScenarioBundle,
        diagnosis: &DiscreteDistribution,
        status_quo_level: usize,
        constraints: &FramingConstraints,
    ) -> Result<Self, VoiError> {
        let state = PathState {
            path: PathSoFar::default(),
            belief: LeakBelief::from_aggregate(diagnosis)?,
            reach_prob: 1.0,
        };
        let (rec, eu) = act_now(bundle, &state, status_quo_level)?;
        let expandable = !eligible_tests(bundle, &state.belief, &state.path, constraints).is_empty();
        let root = PlanNode {
            kind: NodeKind::ActNowLeaf { recommendation: Box::new(rec) },
            state,
            eu,
        };
        Ok(Self {
            nodes: vec![root],
            best_eu: eu,
            expansions_used: 0,
            frontier: if expandable { vec![ROOT] } else { Vec::new() },
            history: Vec::new(),
            status_quo_level,
            constraints: constraints.clone(),
        })
    }

    pub fn root(&self) -> &PlanNode {
        &self.nodes[ROOT]
    }

    /// Value of acting immediately at the root.
    pub fn act_now_eu(&self) -> f64 {
        match &self.root().kind {
            NodeKind::Choice { act_now, .. } => self.nodes[*act_now].eu,
            _ => self.root().eu,
        }
    }

    /// The root's recommended first step: a test id, or `None` to act now.
    pub fn first_action(&self) -> Option<&str> {
        match &self.root().kind {
            NodeKind::Choice { best, act_now, .. } if best != act_now => {
                match &self.nodes[*best].kind {
                    NodeKind::OutcomeBranch { test_id, .. } => Some(test_id),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// Recommendation attached to the act-now option at the root.
    pub fn act_now_recommendation(&self) -> Option<&Recommendation> {
        let id = match &self.root().kind {
            NodeKind::Choice { act_now, .. } => *act_now,
            _ => ROOT,
        };
        match &self.nodes[id].kind {
            NodeKind::ActNowLeaf { recommendation } => Some(recommendation),
            _ => None,
        }
    }

    fn push(&mut self, node: PlanNode) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Replaces the act-now leaf at the end of `path` by a choice between
    /// acting now and every eligible test. Returns the new frontier leaves.
    pub fn expand_path(
        &mut self,
        path: NodeId,
        bundle: &ScenarioBundle,
    ) -> Result<Vec<NodeId>, VoiError> {
        let node = self.nodes.get(path).ok_or(VoiError::UnknownPath(path))?;
        let Some(slot) = self.frontier.iter().position(|&p| p == path) else {
            return Err(VoiError::NotOnFrontier(path));
        };
        let NodeKind::ActNowLeaf { recommendation } = &node.kind else {
            return Err(VoiError::NotOnFrontier(path));
        };
        let state = node.state.clone();
        let leaf_eu = node.eu;
        let recommendation = recommendation.clone();
        let sq = self.status_quo_level;

        let tests = eligible_tests(bundle, &state.belief, &state.path, &self.constraints);
        if tests.is_empty() {
            self.frontier.remove(slot);
            return Err(VoiError::NoEligibleTests(path));
        }

        let act_now_id = self.push(PlanNode {
            kind: NodeKind::ActNowLeaf { recommendation },
            state: state.clone(),
            eu: leaf_eu,
        });
        let mut branches = Vec::with_capacity(tests.len());
        let mut new_frontier = Vec::new();
        for test_id in &tests {
            let test = bundle.test(test_id).expect("eligible tests come from the catalog");
            let split = split_on_test(bundle, &state, test, sq)?;
            let ign_eu = ignition_eu(bundle, &split.ignition_state, sq)?;
            let ignition = self.push(PlanNode {
                kind: NodeKind::IgnitionLeaf,
                state: split.ignition_state,
                eu: ign_eu,
            });
            let mut outcomes = Vec::with_capacity(split.outcomes.len());
            for (label, prob, child_state) in split.outcomes {
                let (rec, eu) = act_now(bundle, &child_state, sq)?;
                let expandable = prob > 0.0
                    && !eligible_tests(bundle, &child_state.belief, &child_state.path, &self.constraints)
                        .is_empty();
                let id = self.push(PlanNode {
                    kind: NodeKind::ActNowLeaf { recommendation: Box::new(rec) },
                    state: child_state,
                    eu,
                });
                if expandable {
                    new_frontier.push(id);
                }
                outcomes.push(OutcomeChild { outcome: label, prob, node: id });
            }
            let branch = self.push(PlanNode {
                kind: NodeKind::OutcomeBranch {
                    test_id: test_id.clone(),
                    ignition_prob: split.ignition_prob,
                    ignition,
                    outcomes,
                },
                state: state.clone(),
                eu: f64::NAN,
            });
            branches.push(branch);
        }
        self.nodes[path].kind = NodeKind::Choice {
            act_now: act_now_id,
            branches,
            best: act_now_id,
        };
        self.frontier.remove(slot);
        self.frontier.extend(&new_frontier);
        self.expansions_used += 1;
        Ok(new_frontier)
    }

    /// Backward induction: expectation at outcome branches, maximum at
    /// choices. Acting now wins unless a test beats it by more than
    /// [`ACT_NOW_MARGIN`]; ties between tests go to catalog order. Returns the root
    /// value and records it as `best_eu`.
    pub fn rollback(&mut self) -> Result<f64, VoiError> {
        let value = self.rollback_node(ROOT, 0)?;
        self.best_eu = value;
        Ok(value)
    }

    fn rollback_node(&mut self, id: NodeId, depth: usize) -> Result<f64, VoiError> {
        if depth > self.nodes.len() {
            return Err(VoiError::MalformedTree("cycle in plan tree".into()));
        }
        let node = self
            .nodes
            .get(id)
            .ok_or_else(|| VoiError::MalformedTree(format!("dangling child {id}")))?;
        enum Shape {
            Leaf(f64),
            Branch(f64, NodeId, Vec<(f64, NodeId)>),
            Choice(NodeId, Vec<NodeId>),
        }
        let shape = match &node.kind {
            NodeKind::ActNowLeaf { .. } | NodeKind::IgnitionLeaf => Shape::Leaf(node.eu),
            NodeKind::OutcomeBranch { ignition_prob, ignition, outcomes, .. } => Shape::Branch(
                *ignition_prob,
                *ignition,
                outcomes.iter().map(|o| (o.prob, o.node)).collect(),
            ),
            NodeKind::Choice { act_now, branches, .. } => Shape::Choice(*act_now, branches.clone()),
        };
        let value = match shape {
            Shape::Leaf(eu) => eu,
            Shape::Branch(ignition_prob, ignition, outcomes) => {
                let total = ignition_prob + outcomes.iter().map(|o| o.0).sum::<f64>();
                if (total - 1.0).abs() > SUM_TOLERANCE {
                    return Err(VoiError::MalformedTree(format!(
                        "branch {id} probabilities sum to {total}"
                    )));
                }
                let mut value = ignition_prob * self.rollback_node(ignition, depth + 1)?;
                for (prob, child) in outcomes {
                    value += prob * self.rollback_node(child, depth + 1)?;
                }
                value
            }
            Shape::Choice(act_now, branches) => {
                if !matches!(
                    self.nodes.get(act_now).map(|n| &n.kind),
                    Some(NodeKind::ActNowLeaf { .. })
                ) {
                    return Err(VoiError::MalformedTree(format!(
                        "choice {id} lacks an act-now leaf"
                    )));
                }
                let act_now_value = self.rollback_node(act_now, depth + 1)?;
                let mut best_test: Option<(NodeId, f64)> = None;
                for b in branches {
                    if !matches!(self.nodes.get(b).map(|n| &n.kind), Some(NodeKind::OutcomeBranch { .. })) {
                        return Err(VoiError::MalformedTree(format!(
                            "choice {id} has a non-test branch {b}"
                        )));
                    }
                    let v = self.rollback_node(b, depth + 1)?;
                    if best_test.is_none_or(|(_, bv)| v > bv) {
                        best_test = Some((b, v));
                    }
                }
                let (best, best_value) = match best_test {
                    Some((b, v)) if beats_act_now(v, act_now_value) => (b, v),
                    _ => (act_now, act_now_value),
                };
                if let NodeKind::Choice { best: slot, .. } = &mut self.nodes[id].kind {
                    *slot = best;
                }
                best_value
            }
        };
        self.nodes[id].eu = value;
        Ok(value)
    }

    fn select(&self, heuristic: Heuristic, rng: &mut ChaCha8Rng) -> Option<NodeId> {
        match heuristic {
            Heuristic::HighestEvPath => {
                let mut best: Option<(f64, NodeId)> = None;
                for &id in &self.frontier {
                    let n = &self.nodes[id];
                    let score = n.state.reach_prob * n.eu;
                    if best.is_none_or(|(s, _)| score > s) {
                        best = Some((score, id));
                    }
                }
                best.map(|(_, id)| id)
            }
            Heuristic::ProbabilityWeighted => {
                if self.frontier.is_empty() {
                    return None;
                }
                let weights: Vec<f64> = self
                    .frontier
                    .iter()
                    .map(|&id| self.nodes[id].state.reach_prob)
                    .collect();
                let index = match WeightedIndex::new(&weights) {
                    Ok(dist) => dist.sample(rng),
                    Err(_) => 0,
                };
                Some(self.frontier[index])
            }
        }
    }

    /// Walks the tree and reports the first path that breaks a framing
    /// constraint or repeats a non-repeatable test.
    pub fn check_constraints(&self, bundle: &ScenarioBundle) -> Result<(), String> {
        let c = &self.constraints;
        for (id, node) in self.nodes.iter().enumerate() {
            let p = &node.state.path;
            if p.tests.len() > c.max_tests as usize {
                return Err(format!("node {id}: {} tests", p.tests.len()));
            }
            if p.time > c.max_total_time + BUDGET_SLACK {
                return Err(format!("node {id}: time {}", p.time));
            }
            if p.cost > c.max_total_cost + BUDGET_SLACK {
                return Err(format!("node {id}: cost {}", p.cost));
            }
            for (i, t) in p.tests.iter().enumerate() {
                let repeatable = bundle.test(t).is_some_and(|t| t.repeatable);
                if !repeatable && p.tests[..i].contains(t) {
                    return Err(format!("node {id}: test {t} repeated"));
                }
            }
        }
        Ok(())
    }
}

/// Anytime plan construction: start from acting now and expand one
/// frontier path per iteration, rolling back after each expansion.
pub fn build_plan(
    bundle: &ScenarioBundle,
    diagnosis: &DiscreteDistribution,
    status_quo_level: usize,
    constraints: &FramingConstraints,
    heuristic: Heuristic,
) -> Result<ContingentPlan, VoiError> {
    let mut plan = ContingentPlan::new(bundle, diagnosis, status_quo_level, constraints)?;
    let mut rng = ChaCha8Rng::seed_from_u64(constraints.seed);
    for _ in 0..constraints.expansion_budget {
        let Some(path) = plan.select(heuristic, &mut rng) else {
            break;
        };
        match plan.expand_path(path, bundle) {
            Ok(_) | Err(VoiError::NoEligibleTests(_)) => {}
            Err(e) => return Err(e),
        }
        let value = plan.rollback()?;
        plan.history.push(value);
    }
    Ok(plan)
}

/// Reference optimum: solves the whole constrained tree by direct
/// recursion, without the incremental machinery.
pub fn full_enumeration_oracle(
    bundle: &ScenarioBundle,
    diagnosis: &DiscreteDistribution,
    status_quo_level: usize,
    constraints: &FramingConstraints,
) -> Result<f64, VoiError> {
    let root = PathState {
        path: PathSoFar::default(),
        belief: LeakBelief::from_aggregate(diagnosis)?,
        reach_prob: 1.0,
    };
    let mut visited = 0usize;
    solve(bundle, &root, status_quo_level, constraints, &mut visited)
}

fn solve(
    bundle: &ScenarioBundle,
    state: &PathState,
    sq: usize,
    constraints: &FramingConstraints,
    visited: &mut usize,
) -> Result<f64, VoiError> {
    *visited += 1;
    if *visited > ORACLE_NODE_LIMIT {
        return Err(VoiError::TreeTooLarge { limit: ORACLE_NODE_LIMIT });
    }
    let (_, act_now_value) = act_now(bundle, state, sq)?;
    let mut best_test = f64::NEG_INFINITY;
    for test_id in eligible_tests(bundle, &state.belief, &state.path, constraints) {
        let test = bundle.test(&test_id).expect("catalog test");
        let split = split_on_test(bundle, state, test, sq)?;
        *visited += 2;
        let mut value = split.ignition_prob * ignition_eu(bundle, &split.ignition_state, sq)?;
        for (_, prob, child) in &split.outcomes {
            let v = if *prob > 0.0 {
                solve(bundle, child, sq, constraints, visited)?
            } else {
                *visited += 1;
                act_now(bundle, child, sq)?.1
            };
            value += prob * v;
        }
        best_test = best_test.max(value);
    }
    Ok(if beats_act_now(best_test, act_now_value) {
        best_test
    } else {
        act_now_value
    })
}

// JSON view: nested nodes instead of the arena.

#[derive(Serialize)]
struct NodeView<'a> {
    id: NodeId,
    #[serde(flatten)]
    body: BodyView<'a>,
    eu: f64,
    time: f64,
    cost: f64,
    reach_prob: f64,
    belief: &'a LeakBelief,
    path: &'a [String],
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum BodyView<'a> {
    Choice {
        /// `"act-now"` or the chosen test id.
        best: String,
        act_now: Box<NodeView<'a>>,
        tests: Vec<NodeView<'a>>,
    },
    OutcomeBranch {
        test_id: &'a str,
        ignition_prob: f64,
        ignition: Box<NodeView<'a>>,
        outcomes: Vec<OutcomeView<'a>>,
    },
    ActNowLeaf {
        recommendation: &'a Recommendation,
    },
    IgnitionLeaf,
}

#[derive(Serialize)]
struct OutcomeView<'a> {
    outcome: &'a str,
    prob: f64,
    node: NodeView<'a>,
}

#[derive(Serialize)]
struct PlanView<'a> {
    best_eu: f64,
    act_now_eu: f64,
    gain: f64,
    first_action: &'a str,
    expansions_used: u32,
    frontier: &'a [NodeId],
    history: &'a [f64],
    status_quo_level: usize,
    constraints: &'a FramingConstraints,
    root: NodeView<'a>,
}

impl ContingentPlan {
    fn view(&self, id: NodeId) -> NodeView<'_> {
        let node = &self.nodes[id];
        let body = match &node.kind {
            NodeKind::Choice { act_now, branches, best } => BodyView::Choice {
                best: match &self.nodes[*best].kind {
                    NodeKind::OutcomeBranch { test_id, .. } => test_id.clone(),
                    _ => "act-now".into(),
                },
                act_now: Box::new(self.view(*act_now)),
                tests: branches.iter().map(|&b| self.view(b)).collect(),
            },
            NodeKind::OutcomeBranch { test_id, ignition_prob, ignition, outcomes } => {
                BodyView::OutcomeBranch {
                    test_id,
                    ignition_prob: *ignition_prob,
                    ignition: Box::new(self.view(*ignition)),
                    outcomes: outcomes
                        .iter()
                        .map(|o| OutcomeView {
                            outcome: &o.outcome,
                            prob: o.prob,
                            node: self.view(o.node),
                        })
                        .collect(),
                }
            }
            NodeKind::ActNowLeaf { recommendation } => BodyView::ActNowLeaf { recommendation },
            NodeKind::IgnitionLeaf => BodyView::IgnitionLeaf,
        };
        NodeView {
            id,
            body,
            eu: node.eu,
            time: node.state.path.time,
            cost: node.state.path.cost,
            reach_prob: node.state.reach_prob,
            belief: &node.state.belief,
            path: &node.state.path.tests,
        }
    }
}

impl Serialize for ContingentPlan {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PlanView {
            best_eu: self.best_eu,
            act_now_eu: self.act_now_eu(),
            gain: self.best_eu - self.act_now_eu(),
            first_action: self.first_action().unwrap_or("act-now"),
            expansions_used: self.expansions_used,
            frontier: &self.frontier,
            history: &self.history,
            status_quo_level: self.status_quo_level,
            constraints: &self.constraints,
            root: self.view(ROOT),
        }
        .serialize(serializer)
    }
}
