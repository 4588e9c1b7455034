//! Scenario bundles: the diagnosis network, the leak dynamics, the value
//! model, the test catalog and the default framing constraints for one
//! monitored module.
//!
//! Bundles are validated once on load and are immutable afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::distribution::SUM_TOLERANCE;
use crate::error::ScenarioError;

const GAS_COMPRESSOR_JSON: &str = include_str!("../scenarios/gas_compressor.json");
const DESK_ALARM_JSON: &str = include_str!("../scenarios/desk_alarm.json");

/// Separator joining parent outcome labels into a CPT row key.
pub const CPT_KEY_SEPARATOR: &str = "|";

/// Decision-facing leak states the detailed real state collapses onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateState {
    None,
    Progressive,
    Catastrophic,
}

impl AggregateState {
    pub const ALL: [AggregateState; 3] = [
        AggregateState::None,
        AggregateState::Progressive,
        AggregateState::Catastrophic,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            AggregateState::None => "none",
            AggregateState::Progressive => "progressive",
            AggregateState::Catastrophic => "catastrophic",
        }
    }

    pub fn labels() -> [&'static str; 3] {
        Self::ALL.map(Self::label)
    }
}

impl fmt::Display for AggregateState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub outcomes: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    /// One row per parent configuration, keyed by the parent outcome labels
    /// joined with `|` in parent order. Root nodes use the empty key.
    pub cpt: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefNetworkSpec {
    pub nodes: Vec<NodeSpec>,
    pub real_state_node: String,
}

impl BeliefNetworkSpec {
    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn real_state(&self) -> Option<&NodeSpec> {
        self.node(&self.real_state_node)
    }

    /// CPT row keys of `node` in row-major order (first parent varies slowest).
    pub fn row_keys(&self, node: &NodeSpec) -> Option<Vec<String>> {
        let mut keys = vec![String::new()];
        for (i, parent) in node.parents.iter().enumerate() {
            let parent = self.node(parent)?;
            keys = keys
                .iter()
                .flat_map(|prefix| {
                    parent.outcomes.iter().map(move |o| {
                        if i == 0 {
                            o.clone()
                        } else {
                            format!("{prefix}{CPT_KEY_SEPARATOR}{o}")
                        }
                    })
                })
                .collect();
        }
        Some(keys)
    }
}

/// Per-step transition probabilities of one shutdown level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub name: String,
    /// progressive -> catastrophic
    pub p: f64,
    /// progressive -> ignited
    pub q: f64,
    /// catastrophic -> ignited
    pub r: f64,
    /// none -> progressive
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    /// Index 0 is the least extensive shutdown.
    pub levels: Vec<LevelSpec>,
    pub step_duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeverityThresholds {
    pub high: f64,
    pub intermediate: f64,
    pub low: f64,
}

impl Default for SeverityThresholds {
    fn default() -> Self {
        Self {
            high: 0.25,
            intermediate: 0.05,
            low: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueSpec {
    /// Production cost per time unit, keyed by level name.
    pub production_loss_rate: BTreeMap<String, f64>,
    pub ignition_loss: f64,
    /// Candidate decision horizons, strictly ascending.
    pub horizons: Vec<f64>,
    #[serde(default)]
    pub severity: SeverityThresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Ge => lhs >= rhs,
            Comparison::Gt => lhs > rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Lt => lhs < rhs,
        }
    }
}

/// `P(states) op value` on the aggregate posterior; `states` are summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub states: Vec<AggregateState>,
    pub op: Comparison,
    pub value: f64,
}

impl Threshold {
    pub fn holds(&self, aggregate: &[f64; 3]) -> bool {
        let mass: f64 = self.states.iter().map(|s| aggregate[s.index()]).sum();
        self.op.holds(mass, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub id: String,
    pub label: String,
    pub outcomes: Vec<String>,
    pub likelihood: BTreeMap<AggregateState, Vec<f64>>,
    pub duration: f64,
    pub cost: f64,
    /// Conjunction of thresholds; empty means always eligible.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eligibility: Vec<Threshold>,
    #[serde(default)]
    pub repeatable: bool,
}

impl TestSpec {
    /// Likelihood rows in aggregate-state order.
    pub fn rows(&self) -> [&[f64]; 3] {
        AggregateState::ALL.map(|s| self.likelihood.get(&s).map(Vec::as_slice).unwrap_or(&[]))
    }

    pub fn outcome_index(&self, outcome: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == outcome)
    }

    /// Likelihood of `outcome` under each aggregate state.
    pub fn likelihood_column(&self, outcome: usize) -> [f64; 3] {
        self.rows().map(|row| row[outcome])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramingConstraints {
    pub max_tests: u32,
    pub max_total_time: f64,
    pub max_total_cost: f64,
    pub expansion_budget: u32,
    /// Seed for sampling heuristics.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBundle {
    pub id: String,
    pub network: BeliefNetworkSpec,
    pub transitions: TransitionSpec,
    pub value: ValueSpec,
    pub tests: Vec<TestSpec>,
    #[serde(rename = "constraints")]
    pub constraints_default: FramingConstraints,
    /// Detailed real-state label -> aggregate leak state.
    pub aggregation: BTreeMap<String, AggregateState>,
}

/// Parses and validates a scenario document.
pub fn load_scenario<R: Read>(mut source: R) -> Result<ScenarioBundle, ScenarioError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let bundle: ScenarioBundle = serde_json::from_str(&text)?;
    bundle.validate()?;
    Ok(bundle)
}

/// The bundled offshore gas-compressor module scenario.
pub fn builtin_gas_compressor() -> ScenarioBundle {
    load_scenario(GAS_COMPRESSOR_JSON.as_bytes()).expect("bundled scenario is valid")
}

/// Three-state leak with a single alarm: small enough to check by hand.
pub fn builtin_desk_alarm() -> ScenarioBundle {
    load_scenario(DESK_ALARM_JSON.as_bytes()).expect("bundled scenario is valid")
}

/// Every bundled scenario, keyed by id.
pub fn builtin_scenarios() -> Vec<ScenarioBundle> {
    vec![builtin_gas_compressor(), builtin_desk_alarm()]
}

impl ScenarioBundle {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn level_count(&self) -> usize {
        self.transitions.levels.len()
    }

    pub fn max_level(&self) -> usize {
        self.level_count() - 1
    }

    pub fn level_index(&self, name: &str) -> Option<usize> {
        self.transitions.levels.iter().position(|l| l.name == name)
    }

    pub fn level_name(&self, level: usize) -> Option<&str> {
        self.transitions.levels.get(level).map(|l| l.name.as_str())
    }

    pub fn production_rate(&self, level: usize) -> Option<f64> {
        let name = self.level_name(level)?;
        self.value.production_loss_rate.get(name).copied()
    }

    pub fn test(&self, id: &str) -> Option<&TestSpec> {
        self.tests.iter().find(|t| t.id == id)
    }

    /// Checks every bundle invariant; the error names the first violation.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.id.trim().is_empty() {
            return Err(ScenarioError::validation("id", "must be nonempty"));
        }
        validate_network(&self.network)?;
        self.validate_aggregation()?;
        validate_transitions(&self.transitions)?;
        self.validate_value()?;
        validate_tests(&self.tests)?;
        validate_constraints(&self.constraints_default, "constraints")?;
        Ok(())
    }

    fn validate_aggregation(&self) -> Result<(), ScenarioError> {
        let real = self
            .network
            .real_state()
            .expect("real-state node checked by network validation");
        for outcome in &real.outcomes {
            if !self.aggregation.contains_key(outcome) {
                return Err(ScenarioError::validation(
                    format!("aggregation[{outcome:?}]"),
                    format!("real-state outcome `{outcome}` has no aggregate mapping"),
                ));
            }
        }
        for key in self.aggregation.keys() {
            if !real.outcomes.contains(key) {
                return Err(ScenarioError::validation(
                    format!("aggregation[{key:?}]"),
                    format!("`{key}` is not an outcome of `{}`", real.name),
                ));
            }
        }
        Ok(())
    }

    fn validate_value(&self) -> Result<(), ScenarioError> {
        let value = &self.value;
        let mut previous = f64::NEG_INFINITY;
        for level in &self.transitions.levels {
            let path = format!("value.production_loss_rate[{:?}]", level.name);
            let rate = *value
                .production_loss_rate
                .get(&level.name)
                .ok_or_else(|| ScenarioError::validation(&path, "missing rate for level"))?;
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(ScenarioError::validation(&path, "must be nonnegative"));
            }
            if rate < previous {
                return Err(ScenarioError::validation(
                    &path,
                    "production loss must be non-decreasing in level",
                ));
            }
            previous = rate;
        }
        for key in value.production_loss_rate.keys() {
            if !self.transitions.levels.iter().any(|l| &l.name == key) {
                return Err(ScenarioError::validation(
                    format!("value.production_loss_rate[{key:?}]"),
                    "not a shutdown level",
                ));
            }
        }
        if !(value.ignition_loss.is_finite() && value.ignition_loss >= 0.0) {
            return Err(ScenarioError::validation(
                "value.ignition_loss",
                "must be nonnegative",
            ));
        }
        if value.horizons.is_empty() {
            return Err(ScenarioError::validation("value.horizons", "must be nonempty"));
        }
        let mut previous = 0.0;
        for (i, &h) in value.horizons.iter().enumerate() {
            if !(h.is_finite() && h > previous) {
                return Err(ScenarioError::validation(
                    format!("value.horizons[{i}]"),
                    "horizons must be positive and strictly ascending",
                ));
            }
            previous = h;
        }
        let sev = value.severity;
        for (name, t) in [
            ("high", sev.high),
            ("intermediate", sev.intermediate),
            ("low", sev.low),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(ScenarioError::validation(
                    format!("value.severity.{name}"),
                    "threshold must lie in [0, 1]",
                ));
            }
        }
        Ok(())
    }
}

fn check_row(row: &[f64], width: usize, path: &str, what: &str) -> Result<(), ScenarioError> {
    if row.len() != width {
        return Err(ScenarioError::validation(
            path,
            format!("{what} has {} entries, expected {width}", row.len()),
        ));
    }
    if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(ScenarioError::validation(
            path,
            format!("{what} entry {bad} outside [0, 1]"),
        ));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(ScenarioError::validation(
            path,
            format!("{what} sums to {sum}, expected 1"),
        ));
    }
    Ok(())
}

fn validate_network(net: &BeliefNetworkSpec) -> Result<(), ScenarioError> {
    if net.nodes.is_empty() {
        return Err(ScenarioError::validation("network.nodes", "must be nonempty"));
    }
    let mut names = BTreeSet::new();
    for node in &net.nodes {
        let path = format!("network.nodes[{}]", node.name);
        if !names.insert(node.name.as_str()) {
            return Err(ScenarioError::validation(path, "duplicate node name"));
        }
        if node.outcomes.is_empty() {
            return Err(ScenarioError::validation(path, "node has no outcomes"));
        }
        let distinct: BTreeSet<_> = node.outcomes.iter().collect();
        if distinct.len() != node.outcomes.len() {
            return Err(ScenarioError::validation(path, "duplicate outcome label"));
        }
        if let Some(o) = node.outcomes.iter().find(|o| o.contains(CPT_KEY_SEPARATOR)) {
            return Err(ScenarioError::validation(
                path,
                format!("outcome `{o}` contains the reserved `{CPT_KEY_SEPARATOR}`"),
            ));
        }
    }
    for node in &net.nodes {
        for parent in &node.parents {
            if !names.contains(parent.as_str()) {
                return Err(ScenarioError::validation(
                    format!("network.nodes[{}].parents", node.name),
                    format!("parent `{parent}` does not resolve"),
                ));
            }
        }
        let distinct: BTreeSet<_> = node.parents.iter().collect();
        if distinct.len() != node.parents.len() {
            return Err(ScenarioError::validation(
                format!("network.nodes[{}].parents", node.name),
                "duplicate parent",
            ));
        }
    }
    if let Some(node) = find_cycle(net) {
        return Err(ScenarioError::validation(
            format!("network.nodes[{node}].parents"),
            "cycle in parent graph",
        ));
    }
    for node in &net.nodes {
        let keys = net.row_keys(node).expect("parents resolve");
        let path = format!("network.nodes[{}].cpt", node.name);
        if node.cpt.len() != keys.len() {
            return Err(ScenarioError::validation(
                &path,
                format!(
                    "{} rows, expected one per parent configuration ({})",
                    node.cpt.len(),
                    keys.len()
                ),
            ));
        }
        for (row_index, key) in keys.iter().enumerate() {
            let row = node.cpt.get(key).ok_or_else(|| {
                ScenarioError::validation(
                    &path,
                    format!("row {row_index} (`{key}`) is missing"),
                )
            })?;
            check_row(
                row,
                node.outcomes.len(),
                &format!("{path}[{key:?}]"),
                &format!("node `{}` row {row_index}", node.name),
            )?;
        }
    }
    if net.real_state().is_none() {
        return Err(ScenarioError::validation(
            "network.real_state_node",
            format!("`{}` is not a node", net.real_state_node),
        ));
    }
    Ok(())
}

/// Returns a node on a cycle, if any.
fn find_cycle(net: &BeliefNetworkSpec) -> Option<&str> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    fn visit<'a>(net: &'a BeliefNetworkSpec, i: usize, marks: &mut [Mark]) -> Option<&'a str> {
        match marks[i] {
            Mark::Done => return None,
            Mark::Active => return Some(&net.nodes[i].name),
            Mark::Fresh => {}
        }
        marks[i] = Mark::Active;
        for parent in &net.nodes[i].parents {
            let j = net.node_index(parent)?;
            if let Some(hit) = visit(net, j, marks) {
                return Some(hit);
            }
        }
        marks[i] = Mark::Done;
        None
    }
    let mut marks = vec![Mark::Fresh; net.nodes.len()];
    (0..net.nodes.len()).find_map(|i| visit(net, i, &mut marks))
}

fn validate_transitions(spec: &TransitionSpec) -> Result<(), ScenarioError> {
    if spec.levels.is_empty() {
        return Err(ScenarioError::validation("transitions.levels", "must be nonempty"));
    }
    if !(spec.step_duration.is_finite() && spec.step_duration > 0.0) {
        return Err(ScenarioError::validation(
            "transitions.step_duration",
            "must be positive",
        ));
    }
    let mut names = BTreeSet::new();
    for (i, level) in spec.levels.iter().enumerate() {
        let path = format!("transitions.levels[{i}]");
        if !names.insert(level.name.as_str()) {
            return Err(ScenarioError::validation(path, "duplicate level name"));
        }
        for (param, v) in [("p", level.p), ("q", level.q), ("r", level.r), ("s", level.s)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ScenarioError::validation(
                    format!("{path}.{param}"),
                    format!("{v} outside [0, 1]"),
                ));
            }
        }
        if level.p + level.q > 1.0 {
            return Err(ScenarioError::validation(
                format!("{path}"),
                "p + q exceeds 1",
            ));
        }
        if i > 0 {
            let prev = &spec.levels[i - 1];
            for (param, before, now) in [
                ("p", prev.p, level.p),
                ("q", prev.q, level.q),
                ("r", prev.r, level.r),
                ("s", prev.s, level.s),
            ] {
                if now > before {
                    return Err(ScenarioError::validation(
                        format!("{path}.{param}"),
                        "transition parameters must be non-increasing in shutdown level",
                    ));
                }
            }
        }
    }
    Ok(())
}

fn validate_tests(tests: &[TestSpec]) -> Result<(), ScenarioError> {
    let mut ids = BTreeSet::new();
    for (i, test) in tests.iter().enumerate() {
        let path = format!("tests[{i}]");
        if !ids.insert(test.id.as_str()) {
            return Err(ScenarioError::validation(path, "duplicate test id"));
        }
        if test.outcomes.is_empty() {
            return Err(ScenarioError::validation(path, "test has no outcomes"));
        }
        for state in AggregateState::ALL {
            let row = test.likelihood.get(&state).ok_or_else(|| {
                ScenarioError::validation(
                    format!("{path}.likelihood"),
                    format!("missing row for aggregate state `{state}`"),
                )
            })?;
            check_row(
                row,
                test.outcomes.len(),
                &format!("{path}.likelihood.{state}"),
                &format!("test `{}` likelihood", test.id),
            )?;
        }
        if !(test.duration.is_finite() && test.duration >= 0.0) {
            return Err(ScenarioError::validation(
                format!("{path}.duration"),
                "must be nonnegative",
            ));
        }
        if !(test.cost.is_finite() && test.cost >= 0.0) {
            return Err(ScenarioError::validation(
                format!("{path}.cost"),
                "must be nonnegative",
            ));
        }
        for (j, t) in test.eligibility.iter().enumerate() {
            if t.states.is_empty() || !(0.0..=1.0).contains(&t.value) {
                return Err(ScenarioError::validation(
                    format!("{path}.eligibility[{j}]"),
                    "threshold needs at least one state and a value in [0, 1]",
                ));
            }
        }
    }
    Ok(())
}

pub(crate) fn validate_constraints(c: &FramingConstraints, path: &str) -> Result<(), ScenarioError> {
    for (name, v) in [
        ("max_total_time", c.max_total_time),
        ("max_total_cost", c.max_total_cost),
    ] {
        if v.is_nan() || v < 0.0 {
            return Err(ScenarioError::validation(
                format!("{path}.{name}"),
                "must be nonnegative",
            ));
        }
    }
    if c.expansion_budget < 1 {
        return Err(ScenarioError::validation(
            format!("{path}.expansion_budget"),
            "must be at least 1",
        ));
    }
    Ok(())
}

impl FramingConstraints {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        validate_constraints(self, "constraints")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> ScenarioBundle {
        builtin_gas_compressor()
    }

    fn reload(b: &ScenarioBundle) -> Result<ScenarioBundle, ScenarioError> {
        load_scenario(b.to_json_pretty().as_bytes())
    }

    fn validation_path(err: ScenarioError) -> (String, String) {
        match err {
            ScenarioError::Validation { path, message } => (path, message),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn builtin_shape() {
        let b = fixture();
        let real = b.network.real_state().unwrap();
        assert_eq!(real.outcomes.len(), 7);
        assert_eq!(b.aggregation.len(), 7);
        let targets: BTreeSet<_> = b.aggregation.values().copied().collect();
        assert_eq!(targets.len(), 3);
        assert_eq!(b.level_count(), 4);
        assert_eq!(b.level_name(3), Some("esd"));
        assert!(b.tests.len() >= 4);
    }

    #[test]
    fn builtin_round_trips() {
        let b = fixture();
        assert_eq!(reload(&b).unwrap(), b);
    }

    #[test]
    fn cpt_row_sum_names_node_and_row() {
        let mut b = fixture();
        let node = b.network.nodes.iter_mut().find(|n| n.name == "pd_a").unwrap();
        let key = node.cpt.keys().nth(1).unwrap().clone();
        let row = node.cpt.get_mut(&key).unwrap();
        row[0] -= 0.1;
        let (path, message) = validation_path(reload(&b).unwrap_err());
        assert!(path.contains("pd_a"), "{path}");
        assert!(message.contains("row"), "{message}");
        assert!(message.contains("0.9"), "{message}");
    }

    #[test]
    fn cycle_rejected() {
        let mut b = fixture();
        let a = NodeSpec {
            name: "a".into(),
            outcomes: vec!["x".into(), "y".into()],
            parents: vec!["b".into()],
            cpt: [("x".to_string(), vec![0.5, 0.5]), ("y".to_string(), vec![0.5, 0.5])]
                .into_iter()
                .collect(),
        };
        let mut bnode = a.clone();
        bnode.name = "b".into();
        bnode.parents = vec!["a".into()];
        b.network.nodes.push(a);
        b.network.nodes.push(bnode);
        let (_, message) = validation_path(reload(&b).unwrap_err());
        assert!(message.contains("cycle"), "{message}");
    }

    #[test]
    fn malformed_json_is_parse_error() {
        let err = load_scenario(&b"{\"id\": 3"[..]).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
    }

    // Each mutation breaks exactly one invariant of the fixture.
    #[test]
    fn every_invariant_is_enforced() {
        type Mutation = (&'static str, fn(&mut ScenarioBundle));
        let mutations: Vec<Mutation> = vec![
            ("unresolved parent", |b| b.network.nodes[1].parents.push("ghost".into())),
            ("missing cpt row", |b| {
                let key = b.network.nodes[1].cpt.keys().next().unwrap().clone();
                b.network.nodes[1].cpt.remove(&key);
            }),
            ("negative cpt entry", |b| {
                let row = b.network.nodes[1].cpt.values_mut().next().unwrap();
                row[0] = -0.5;
                row[1] = 1.5;
            }),
            ("unknown real-state node", |b| b.network.real_state_node = "ghost".into()),
            ("unmapped detailed state", |b| {
                let key = b.aggregation.keys().next().unwrap().clone();
                b.aggregation.remove(&key);
            }),
            ("p + q > 1", |b| {
                b.transitions.levels[0].p = 0.8;
                b.transitions.levels[0].q = 0.3;
            }),
            ("non-monotone r", |b| b.transitions.levels[2].r = 0.9),
            ("non-monotone production", |b| {
                b.value.production_loss_rate.insert("esd".into(), 0.0);
            }),
            ("horizons not ascending", |b| b.value.horizons = vec![60.0, 30.0]),
            ("negative ignition loss", |b| b.value.ignition_loss = -1.0),
            ("likelihood row sum", |b| {
                let row = b.tests[0].likelihood.get_mut(&AggregateState::None).unwrap();
                row[0] *= 0.5;
            }),
            ("likelihood missing state", |b| {
                b.tests[0].likelihood.remove(&AggregateState::Catastrophic);
            }),
            ("negative test cost", |b| b.tests[0].cost = -2.0),
            ("zero expansion budget", |b| b.constraints_default.expansion_budget = 0),
            ("negative max time", |b| b.constraints_default.max_total_time = -1.0),
            ("duplicate test id", |b| {
                let t = b.tests[0].clone();
                b.tests.push(t);
            }),
        ];
        for (name, mutate) in mutations {
            let mut b = fixture();
            mutate(&mut b);
            assert!(
                matches!(reload(&b), Err(ScenarioError::Validation { .. })),
                "mutation `{name}` was accepted"
            );
        }
    }

    #[test]
    fn row_keys_are_row_major() {
        let b = fixture();
        let net = &b.network;
        let keys = net.row_keys(net.node("pd_a").unwrap()).unwrap();
        assert_eq!(keys, net.node("leak_state").unwrap().outcomes);
        let root = net.row_keys(net.node("leak_state").unwrap()).unwrap();
        assert_eq!(root, vec![String::new()]);
    }
}
