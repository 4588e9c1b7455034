//! Discrete-time leak evolution under a shutdown level.
//!
//! A leak moves through none -> progressive -> catastrophic and either leak
//! type may ignite. Ignition is absorbing and there are no repair
//! transitions inside the evolution window.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distribution::{DiscreteDistribution, SUM_TOLERANCE};
use crate::error::{DistributionError, EvolutionError};
use crate::scenario::{AggregateState, LevelSpec, TransitionSpec};

/// Slack applied before rounding a duration up to whole steps, so that
/// e.g. `0.3 / 0.1` does not become four steps.
const STEP_ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakState {
    None,
    Progressive,
    Catastrophic,
    Ignited,
}

impl LeakState {
    pub const ALL: [LeakState; 4] = [
        LeakState::None,
        LeakState::Progressive,
        LeakState::Catastrophic,
        LeakState::Ignited,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            LeakState::None => "none",
            LeakState::Progressive => "progressive",
            LeakState::Catastrophic => "catastrophic",
            LeakState::Ignited => "ignited",
        }
    }

    pub fn labels() -> [&'static str; 4] {
        Self::ALL.map(Self::label)
    }
}

impl From<AggregateState> for LeakState {
    fn from(s: AggregateState) -> Self {
        match s {
            AggregateState::None => LeakState::None,
            AggregateState::Progressive => LeakState::Progressive,
            AggregateState::Catastrophic => LeakState::Catastrophic,
        }
    }
}

impl fmt::Display for LeakState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Probability vector over [`LeakState`] in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LeakBelief(pub [f64; 4]);

impl LeakBelief {
    pub fn new(probs: [f64; 4]) -> Result<Self, EvolutionError> {
        DiscreteDistribution::new(LeakState::labels(), probs.to_vec())?;
        Ok(Self(probs))
    }

    pub fn indicator(state: LeakState) -> Self {
        let mut probs = [0.0; 4];
        probs[state.index()] = 1.0;
        Self(probs)
    }

    /// Embeds an aggregate distribution (none, progressive, catastrophic)
    /// with zero ignited mass.
    pub fn from_aggregate(aggregate: &DiscreteDistribution) -> Result<Self, EvolutionError> {
        let p = aggregate.probs();
        if p.len() != 3 {
            return Err(DistributionError::LengthMismatch { outcomes: 3, probs: p.len() }.into());
        }
        Ok(Self([p[0], p[1], p[2], 0.0]))
    }

    pub fn prob(&self, state: LeakState) -> f64 {
        self.0[state.index()]
    }

    pub fn ignited(&self) -> f64 {
        self.0[LeakState::Ignited.index()]
    }

    /// The (none, progressive, catastrophic) part, unnormalized.
    pub fn leak_part(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn to_distribution(&self) -> DiscreteDistribution {
        DiscreteDistribution::new(LeakState::labels(), self.0.to_vec())
            .expect("leak belief is a valid distribution")
    }

    /// Aggregate-state view; requires zero ignited mass up to tolerance.
    pub fn to_aggregate(&self) -> Result<DiscreteDistribution, EvolutionError> {
        let part = self.leak_part();
        let total: f64 = part.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistributionError::NotNormalized { sum: total }.into());
        }
        Ok(DiscreteDistribution::new(
            AggregateState::labels(),
            part.iter().map(|p| p / total).collect(),
        )?)
    }

    pub fn max_abs_diff(&self, other: &LeakBelief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Row-stochastic 4x4 matrix over [`LeakState`] for one shutdown level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub rows: [[f64; 4]; 4],
    pub step_duration: f64,
}

impl TransitionMatrix {
    pub fn from_level(level: &LevelSpec, step_duration: f64) -> Self {
        let LevelSpec { p, q, r, s, .. } = *level;
        Self {
            rows: [
                [1.0 - s, s, 0.0, 0.0],
                [0.0, 1.0 - p - q, p, q],
                [0.0, 0.0, 1.0 - r, r],
                [0.0, 0.0, 0.0, 1.0],
            ],
            step_duration,
        }
    }

    /// One step of `belief * M`.
    pub fn step(&self, belief: &LeakBelief) -> LeakBelief {
        let mut next = [0.0; 4];
        for (i, b) in belief.0.iter().enumerate() {
            for (j, n) in next.iter_mut().enumerate() {
                *n += b * self.rows[i][j];
            }
        }
        LeakBelief(next)
    }

    /// Number of whole steps covering `duration`, rounding up.
    pub fn steps_for(&self, duration: f64) -> u64 {
        steps_for(duration, self.step_duration)
    }
}

pub fn steps_for(duration: f64, step_duration: f64) -> u64 {
    if duration <= 0.0 {
        return 0;
    }
    (duration / step_duration - STEP_ROUNDING_SLACK).ceil().max(0.0) as u64
}

pub fn transition_matrix_for_level(
    spec: &TransitionSpec,
    level: usize,
) -> Result<TransitionMatrix, EvolutionError> {
    let params = spec
        .levels
        .get(level)
        .ok_or(EvolutionError::InvalidLevel(level))?;
    if params.p + params.q > 1.0 {
        return Err(EvolutionError::InvalidParameters {
            level,
            sum: params.p + params.q,
        });
    }
    Ok(TransitionMatrix::from_level(params, spec.step_duration))
}

/// `belief * M^steps`.
pub fn project(belief: &LeakBelief, matrix: &TransitionMatrix, steps: u64) -> LeakBelief {
    let mut b = *belief;
    for _ in 0..steps {
        b = matrix.step(&b);
    }
    b
}

/// Projects over an elapsed time, rounding the duration up to whole steps.
pub fn project_for(belief: &LeakBelief, matrix: &TransitionMatrix, duration: f64) -> LeakBelief {
    project(belief, matrix, matrix.steps_for(duration))
}

/// Probability that ignition has occurred by the end of `steps`.
pub fn ignition_probability(belief: &LeakBelief, matrix: &TransitionMatrix, steps: u64) -> f64 {
    project(belief, matrix, steps).ignited()
}

/// Drops the ignited mass and renormalizes over the leak states.
pub fn condition_on_no_ignition(belief: &LeakBelief) -> Result<LeakBelief, EvolutionError> {
    let part = belief.leak_part();
    let total: f64 = part.iter().sum();
    if !(total > 0.0) {
        return Err(EvolutionError::AllMassIgnited);
    }
    if belief.ignited() == 0.0 {
        return Ok(*belief);
    }
    Ok(LeakBelief([part[0] / total, part[1] / total, part[2] / total, 0.0]))
}
