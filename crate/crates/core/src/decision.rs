//! Principal decision: choose the shutdown level with the highest expected
//! utility, escalating the decision horizon when the short horizon does not
//! already call for the most extensive shutdown.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::DecisionError;
use crate::evolution::{
    condition_on_no_ignition, project_for, transition_matrix_for_level, LeakBelief,
};
use crate::scenario::{ScenarioBundle, SeverityThresholds, TransitionSpec, ValueSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLevel {
    pub level: usize,
    pub name: String,
    /// Negative expected cost over the horizon.
    pub expected_utility: f64,
    pub ignition_prob_at_decision: f64,
    pub ignition_prob_at_horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// Sorted by expected utility, best first.
    pub ranked: Vec<RankedLevel>,
    pub chosen: usize,
    pub chosen_name: String,
    pub horizon_used: f64,
    /// Set when ignition was evident and ranking was bypassed.
    #[serde(default)]
    pub forced: bool,
}

impl Recommendation {
    pub fn chosen_utility(&self) -> f64 {
        self.ranked[0].expected_utility
    }

    pub fn utility_of(&self, level: usize) -> Option<f64> {
        self.ranked
            .iter()
            .find(|r| r.level == level)
            .map(|r| r.expected_utility)
    }
}

/// Response layers, least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityLayer {
    Normal,
    Low,
    Intermediate,
    High,
}

impl SeverityLayer {
    /// Who handles a situation at this layer.
    pub fn response(self) -> &'static str {
        match self {
            SeverityLayer::Normal => "Standard procedures",
            SeverityLayer::Low => "Deterministic expert system",
            SeverityLayer::Intermediate => "Normative decision system",
            SeverityLayer::High => "Emergency shutdown",
        }
    }
}

impl fmt::Display for SeverityLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SeverityLayer::Normal => "normal",
            SeverityLayer::Low => "low",
            SeverityLayer::Intermediate => "intermediate",
            SeverityLayer::High => "high",
        };
        f.write_str(s)
    }
}

fn production_rate(
    transitions: &TransitionSpec,
    value: &ValueSpec,
    level: usize,
) -> Result<f64, DecisionError> {
    let name = &transitions
        .levels
        .get(level)
        .ok_or(DecisionError::InvalidLevel(level))?
        .name;
    value
        .production_loss_rate
        .get(name)
        .copied()
        .ok_or(DecisionError::InvalidLevel(level))
}

/// Expected utility and the horizon ignition probability for one level.
fn evaluate_level(
    belief: &LeakBelief,
    level: usize,
    horizon: f64,
    transitions: &TransitionSpec,
    value: &ValueSpec,
) -> Result<(f64, f64), DecisionError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(DecisionError::InvalidHorizon(horizon));
    }
    if belief.ignited() != 0.0 {
        return Err(DecisionError::IgnitedBelief);
    }
    let matrix = transition_matrix_for_level(transitions, level).map_err(|e| match e {
        crate::error::EvolutionError::InvalidLevel(l) => DecisionError::InvalidLevel(l),
        other => other.into(),
    })?;
    let rate = production_rate(transitions, value, level)?;
    let p_ignition = project_for(belief, &matrix, horizon).ignited();
    let eu = -rate * horizon - value.ignition_loss * p_ignition;
    Ok((eu, p_ignition))
}

/// `-production_rate(level) * horizon - ignition_loss * P(ignition by horizon)`
/// for a belief that has not ignited.
pub fn expected_utility(
    belief: &LeakBelief,
    level: usize,
    horizon: f64,
    transitions: &TransitionSpec,
    value: &ValueSpec,
) -> Result<f64, DecisionError> {
    evaluate_level(belief, level, horizon, transitions, value).map(|(eu, _)| eu)
}

/// Ranks every shutdown level for a diagnosis over (none, progressive,
/// catastrophic). The leak evolves under `status_quo_level` for `delay`
/// before the decision takes effect.
pub fn recommend(
    diagnosis: &DiscreteDistribution,
    delay: f64,
    status_quo_level: usize,
    horizon: f64,
    bundle: &ScenarioBundle,
) -> Result<Recommendation, DecisionError> {
    let initial = LeakBelief::from_aggregate(diagnosis)?;
    let status_quo = transition_matrix_for_level(&bundle.transitions, status_quo_level)
        .map_err(|_| DecisionError::InvalidLevel(status_quo_level))?;
    let at_decision = project_for(&initial, &status_quo, delay.max(0.0));
    let p_decision = at_decision.ignited();
    let belief = condition_on_no_ignition(&at_decision)?;

    let mut ranked = (0..bundle.level_count())
        .map(|level| {
            let (eu, p_horizon) =
                evaluate_level(&belief, level, horizon, &bundle.transitions, &bundle.value)?;
            Ok(RankedLevel {
                level,
                name: bundle.transitions.levels[level].name.clone(),
                expected_utility: eu,
                ignition_prob_at_decision: p_decision,
                ignition_prob_at_horizon: p_horizon,
            })
        })
        .collect::<Result<Vec<_>, DecisionError>>()?;
    // Ties go to the more extensive shutdown.
    ranked.sort_by(|a, b| {
        b.expected_utility
            .total_cmp(&a.expected_utility)
            .then(b.level.cmp(&a.level))
    });
    Ok(Recommendation {
        chosen: ranked[0].level,
        chosen_name: ranked[0].name.clone(),
        ranked,
        horizon_used: horizon,
        forced: false,
    })
}

/// Tries horizons shortest first and stops as soon as one recommends the
/// most extensive shutdown; otherwise answers at the longest horizon.
pub fn escalating_recommend(
    diagnosis: &DiscreteDistribution,
    delay: f64,
    status_quo_level: usize,
    bundle: &ScenarioBundle,
) -> Result<Recommendation, DecisionError> {
    escalating_recommend_over(diagnosis, delay, status_quo_level, &bundle.value.horizons, bundle)
}

/// [`escalating_recommend`] over an explicit ascending horizon list.
pub fn escalating_recommend_over(
    diagnosis: &DiscreteDistribution,
    delay: f64,
    status_quo_level: usize,
    horizons: &[f64],
    bundle: &ScenarioBundle,
) -> Result<Recommendation, DecisionError> {
    let max_level = bundle.max_level();
    let mut last = None;
    for &horizon in horizons {
        let rec = recommend(diagnosis, delay, status_quo_level, horizon, bundle)?;
        if rec.chosen == max_level {
            return Ok(rec);
        }
        last = Some(rec);
    }
    last.ok_or(DecisionError::NoHorizons)
}

/// Recommendation when ignition is already evident: the most extensive
/// shutdown, with the ignition loss booked as certain.
pub fn forced_shutdown(bundle: &ScenarioBundle) -> Recommendation {
    let level = bundle.max_level();
    let horizon = bundle.value.horizons[0];
    let rate = bundle.production_rate(level).unwrap_or(0.0);
    let name = bundle.transitions.levels[level].name.clone();
    Recommendation {
        ranked: vec![RankedLevel {
            level,
            name: name.clone(),
            expected_utility: -rate * horizon - bundle.value.ignition_loss,
            ignition_prob_at_decision: 1.0,
            ignition_prob_at_horizon: 1.0,
        }],
        chosen: level,
        chosen_name: name,
        horizon_used: horizon,
        forced: true,
    }
}

/// Maps a diagnosis onto a response layer.
pub fn classify_severity(
    aggregate: &DiscreteDistribution,
    ignition_evident: bool,
    thresholds: &SeverityThresholds,
) -> SeverityLayer {
    let p = aggregate.probs();
    let catastrophic = p.get(2).copied().unwrap_or(0.0);
    let leak = p.get(1).copied().unwrap_or(0.0) + catastrophic;
    if ignition_evident || catastrophic >= thresholds.high {
        SeverityLayer::High
    } else if leak >= thresholds.intermediate {
        SeverityLayer::Intermediate
    } else if leak >= thresholds.low {
        SeverityLayer::Low
    } else {
        SeverityLayer::Normal
    }
}
