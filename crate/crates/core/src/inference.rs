//! Exact belief-network inference.
//!
//! Posteriors are computed by variable elimination over the CPT factors
//! after reducing them by the evidence. Variables are eliminated in
//! min-degree order with ties broken by node name, so results are
//! reproducible bit for bit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::InferenceError;
use crate::scenario::{AggregateState, BeliefNetworkSpec};

/// Largest joint state space the enumeration oracle accepts.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// Observed outcomes keyed by node name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence(pub BTreeMap<String, String>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, node: impl Into<String>, outcome: impl Into<String>) -> Self {
        self.0.insert(node.into(), outcome.into());
        self
    }

    pub fn insert(&mut self, node: impl Into<String>, outcome: impl Into<String>) {
        self.0.insert(node.into(), outcome.into());
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Resolves evidence to `(node index, outcome index)` pairs.
    pub fn resolve(&self, net: &BeliefNetworkSpec) -> Result<Vec<(usize, usize)>, InferenceError> {
        self.0
            .iter()
            .map(|(node, outcome)| {
                if *node == net.real_state_node {
                    return Err(InferenceError::RealStateObserved(node.clone()));
                }
                let i = net
                    .node_index(node)
                    .ok_or_else(|| InferenceError::UnknownNode(node.clone()))?;
                let k = net.nodes[i]
                    .outcomes
                    .iter()
                    .position(|o| o == outcome)
                    .ok_or_else(|| InferenceError::UnknownOutcome {
                        node: node.clone(),
                        outcome: outcome.clone(),
                    })?;
                Ok((i, k))
            })
            .collect()
    }
}

/// Dense table over a set of variables; the last variable varies fastest.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.vars.len()];
        for i in (0..self.vars.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    fn position(&self, var: usize) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }

    /// Fixes `var` to `value` and drops it from the scope.
    fn reduce(&self, var: usize, value: usize) -> Factor {
        let Some(axis) = self.position(var) else {
            return self.clone();
        };
        let strides = self.strides();
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(axis);
        cards.remove(axis);
        let len: usize = cards.iter().product();
        let inner = strides[axis];
        let outer_stride = inner * self.cards[axis];
        let values = (0..len)
            .map(|j| {
                let outer = j / inner;
                let rest = j % inner;
                self.values[outer * outer_stride + value * inner + rest]
            })
            .collect();
        Factor { vars, cards, values }
    }

    fn sum_out(&self, var: usize) -> Factor {
        let Some(axis) = self.position(var) else {
            return self.clone();
        };
        let strides = self.strides();
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(axis);
        cards.remove(axis);
        let len: usize = cards.iter().product();
        let inner = strides[axis];
        let card = self.cards[axis];
        let values = (0..len)
            .map(|j| {
                let base = (j / inner) * inner * card + j % inner;
                (0..card).map(|k| self.values[base + k * inner]).sum()
            })
            .collect();
        Factor { vars, cards, values }
    }

    fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(&v) {
                vars.push(v);
                cards.push(c);
            }
        }
        let map_strides = |f: &Factor| -> Vec<usize> {
            let s = f.strides();
            vars.iter()
                .map(|v| f.position(*v).map_or(0, |i| s[i]))
                .collect()
        };
        let sa = map_strides(self);
        let sb = map_strides(other);
        let len: usize = cards.iter().product();
        let mut values = Vec::with_capacity(len);
        let mut digits = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..len {
            values.push(self.values[ia] * other.values[ib]);
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                ia += sa[d];
                ib += sb[d];
                if digits[d] < cards[d] {
                    break;
                }
                ia -= sa[d] * cards[d];
                ib -= sb[d] * cards[d];
                digits[d] = 0;
            }
        }
        Factor { vars, cards, values }
    }
}

fn cpt_factor(net: &BeliefNetworkSpec, index: usize) -> Result<Factor, InferenceError> {
    let node = &net.nodes[index];
    let mut vars = Vec::with_capacity(node.parents.len() + 1);
    let mut cards = Vec::with_capacity(node.parents.len() + 1);
    for parent in &node.parents {
        let j = net
            .node_index(parent)
            .ok_or_else(|| InferenceError::UnknownNode(parent.clone()))?;
        vars.push(j);
        cards.push(net.nodes[j].outcomes.len());
    }
    vars.push(index);
    cards.push(node.outcomes.len());
    let keys = net
        .row_keys(node)
        .ok_or_else(|| InferenceError::UnknownNode(node.name.clone()))?;
    let mut values = Vec::with_capacity(keys.len() * node.outcomes.len());
    for key in keys {
        let row = node.cpt.get(&key).ok_or_else(|| InferenceError::DimensionMismatch {
            expected: node.outcomes.len(),
            found: 0,
        })?;
        if row.len() != node.outcomes.len() {
            return Err(InferenceError::DimensionMismatch {
                expected: node.outcomes.len(),
                found: row.len(),
            });
        }
        values.extend_from_slice(row);
    }
    Ok(Factor { vars, cards, values })
}

fn query_index(net: &BeliefNetworkSpec, query: &str) -> Result<usize, InferenceError> {
    net.node_index(query)
        .ok_or_else(|| InferenceError::UnknownNode(query.to_string()))
}

/// Exact `P(query | evidence)`.
pub fn posterior(
    net: &BeliefNetworkSpec,
    evidence: &Evidence,
    query: &str,
) -> Result<DiscreteDistribution, InferenceError> {
    let q = query_index(net, query)?;
    let observed = evidence.resolve(net)?;

    let mut factors = (0..net.nodes.len())
        .map(|i| cpt_factor(net, i))
        .collect::<Result<Vec<_>, _>>()?;
    for &(var, value) in &observed {
        for f in &mut factors {
            *f = f.reduce(var, value);
        }
    }

    let mut remaining: BTreeSet<usize> = (0..net.nodes.len())
        .filter(|&v| v != q && !observed.iter().any(|&(o, _)| o == v))
        .collect();
    while let Some(var) = next_elimination(net, &factors, &remaining) {
        remaining.remove(&var);
        let (touching, rest): (Vec<_>, Vec<_>) =
            factors.into_iter().partition(|f| f.position(var).is_some());
        factors = rest;
        if let Some(joined) = touching.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(joined.sum_out(var));
        }
    }

    let result = factors
        .into_iter()
        .reduce(|a, b| a.product(&b))
        .expect("network has at least one node");
    // Observed query: the scope may have collapsed to a scalar.
    let weights = if result.vars.is_empty() {
        let card = net.nodes[q].outcomes.len();
        let mut w = vec![0.0; card];
        if let Some(&(_, k)) = observed.iter().find(|&&(v, _)| v == q) {
            w[k] = result.values[0];
        }
        w
    } else {
        result.values
    };
    normalize(&net.nodes[q].outcomes, weights)
}

/// Min-degree on the current interaction graph, ties by node name.
fn next_elimination(
    net: &BeliefNetworkSpec,
    factors: &[Factor],
    remaining: &BTreeSet<usize>,
) -> Option<usize> {
    remaining
        .iter()
        .map(|&v| {
            let mut neighbours = BTreeSet::new();
            for f in factors.iter().filter(|f| f.position(v).is_some()) {
                neighbours.extend(f.vars.iter().copied().filter(|&u| u != v));
            }
            (neighbours.len(), net.nodes[v].name.as_str(), v)
        })
        .min()
        .map(|(_, _, v)| v)
}

fn normalize(outcomes: &[String], weights: Vec<f64>) -> Result<DiscreteDistribution, InferenceError> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(InferenceError::ZeroProbabilityEvidence);
    }
    let probs = weights.into_iter().map(|w| w / total).collect();
    Ok(DiscreteDistribution::new(outcomes.iter().cloned(), probs)?)
}

/// Reference posterior by enumerating the full joint distribution.
pub fn joint_enumeration_oracle(
    net: &BeliefNetworkSpec,
    evidence: &Evidence,
    query: &str,
) -> Result<DiscreteDistribution, InferenceError> {
    let q = query_index(net, query)?;
    let observed = evidence.resolve(net)?;
    let cards: Vec<usize> = net.nodes.iter().map(|n| n.outcomes.len()).collect();
    let size: f64 = cards.iter().map(|&c| c as f64).product();
    if size > ENUMERATION_LIMIT {
        return Err(InferenceError::StateSpaceTooLarge { size });
    }
    let parents: Vec<Vec<usize>> = net
        .nodes
        .iter()
        .map(|n| {
            n.parents
                .iter()
                .map(|p| {
                    net.node_index(p)
                        .ok_or_else(|| InferenceError::UnknownNode(p.clone()))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    // Rows looked up by their string key once per parent configuration.
    let tables: Vec<BTreeMap<Vec<usize>, &Vec<f64>>> = net
        .nodes
        .iter()
        .enumerate()
        .map(|(i, node)| {
            let mut table = BTreeMap::new();
            let mut config = vec![0usize; parents[i].len()];
            loop {
                let key = config
                    .iter()
                    .zip(&parents[i])
                    .map(|(&k, &p)| net.nodes[p].outcomes[k].as_str())
                    .collect::<Vec<_>>()
                    .join(crate::scenario::CPT_KEY_SEPARATOR);
                let row = node.cpt.get(&key).ok_or(InferenceError::DimensionMismatch {
                    expected: node.outcomes.len(),
                    found: 0,
                })?;
                table.insert(config.clone(), row);
                let mut d = config.len();
                loop {
                    if d == 0 {
                        return Ok(table);
                    }
                    d -= 1;
                    config[d] += 1;
                    if config[d] < cards[parents[i][d]] {
                        break;
                    }
                    config[d] = 0;
                }
            }
        })
        .collect::<Result<_, InferenceError>>()?;

    let mut weights = vec![0.0; cards[q]];
    let mut assignment = vec![0usize; cards.len()];
    'outer: loop {
        let consistent = observed.iter().all(|&(v, k)| assignment[v] == k);
        if consistent {
            let mut p = 1.0;
            for (i, table) in tables.iter().enumerate() {
                let config: Vec<usize> = parents[i].iter().map(|&j| assignment[j]).collect();
                p *= table[&config][assignment[i]];
            }
            weights[assignment[q]] += p;
        }
        let mut d = cards.len();
        loop {
            if d == 0 {
                break 'outer;
            }
            d -= 1;
            assignment[d] += 1;
            if assignment[d] < cards[d] {
                break;
            }
            assignment[d] = 0;
        }
    }
    normalize(&net.nodes[q].outcomes, weights)
}

/// Collapses a detailed real-state distribution onto the aggregate leak states.
pub fn aggregate(
    detailed: &DiscreteDistribution,
    aggregation: &BTreeMap<String, AggregateState>,
) -> Result<DiscreteDistribution, InferenceError> {
    let mut mass = [0.0; 3];
    for (outcome, p) in detailed.outcomes().iter().zip(detailed.probs()) {
        let state = aggregation
            .get(outcome)
            .ok_or_else(|| InferenceError::UnmappedOutcome(outcome.clone()))?;
        mass[state.index()] += p;
    }
    aggregate_distribution(mass)
}

pub(crate) fn aggregate_distribution(mass: [f64; 3]) -> Result<DiscreteDistribution, InferenceError> {
    let total: f64 = mass.iter().sum();
    // Re-normalize away summation rounding.
    let probs = mass.iter().map(|m| m / total).collect();
    Ok(DiscreteDistribution::new(AggregateState::labels(), probs)?)
}

/// Predictive distribution over a test's outcomes:
/// `P(o) = sum_s belief(s) * likelihood[s](o)`.
pub fn observation_predictive(
    likelihood: &[DiscreteDistribution],
    belief: &DiscreteDistribution,
) -> Result<DiscreteDistribution, InferenceError> {
    if likelihood.len() != belief.len() {
        return Err(InferenceError::DimensionMismatch {
            expected: belief.len(),
            found: likelihood.len(),
        });
    }
    let outcomes = likelihood[0].outcomes();
    if let Some(bad) = likelihood.iter().find(|row| row.outcomes() != outcomes) {
        return Err(InferenceError::DimensionMismatch {
            expected: outcomes.len(),
            found: bad.len(),
        });
    }
    let rows: Vec<&[f64]> = likelihood.iter().map(|d| d.probs()).collect();
    let probs = predictive_probs(&rows, belief.probs());
    let total: f64 = probs.iter().sum();
    Ok(DiscreteDistribution::new(
        outcomes.iter().cloned(),
        probs.into_iter().map(|p| p / total).collect(),
    )?)
}

/// Unnormalized mixture of likelihood rows; rows indexed by belief state.
pub fn predictive_probs(rows: &[&[f64]], belief: &[f64]) -> Vec<f64> {
    let width = rows.first().map_or(0, |r| r.len());
    (0..width)
        .map(|o| rows.iter().zip(belief).map(|(row, b)| b * row[o]).sum())
        .collect()
}

/// Posterior after observing an outcome with per-state likelihood `row`.
pub fn bayes_update(
    belief: &DiscreteDistribution,
    row: &[f64],
) -> Result<DiscreteDistribution, InferenceError> {
    let probs = bayes_update_probs(belief.probs(), row)?;
    Ok(DiscreteDistribution::new(belief.outcomes().iter().cloned(), probs)?)
}

pub(crate) fn bayes_update_probs(belief: &[f64], row: &[f64]) -> Result<Vec<f64>, InferenceError> {
    if belief.len() != row.len() {
        return Err(InferenceError::DimensionMismatch {
            expected: belief.len(),
            found: row.len(),
        });
    }
    let joint: Vec<f64> = belief.iter().zip(row).map(|(b, l)| b * l).collect();
    let total: f64 = joint.iter().sum();
    if !(total > 0.0) {
        return Err(InferenceError::ZeroProbabilityOutcome);
    }
    Ok(joint.into_iter().map(|j| j / total).collect())
}
