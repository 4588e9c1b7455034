//! Discrete probability vectors over named outcomes.

use serde::{Deserialize, Serialize};

use crate::error::DistributionError;

/// Tolerance applied to "sums to one" checks across the crate.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A probability vector over an ordered list of outcome labels.
///
/// Serialized as two parallel arrays ordered by outcome order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct DiscreteDistribution {
    outcomes: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    outcomes: Vec<String>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = DistributionError;

    fn try_from(raw: RawDistribution) -> Result<Self, Self::Error> {
        DiscreteDistribution::new(raw.outcomes, raw.probs)
    }
}

impl DiscreteDistribution {
    pub fn new<S: Into<String>>(
        outcomes: impl IntoIterator<Item = S>,
        probs: Vec<f64>,
    ) -> Result<Self, DistributionError> {
        let outcomes: Vec<String> = outcomes.into_iter().map(Into::into).collect();
        if outcomes.len() != probs.len() {
            return Err(DistributionError::LengthMismatch {
                outcomes: outcomes.len(),
                probs: probs.len(),
            });
        }
        if outcomes.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (i, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(DistributionError::OutOfRange { index: i, value: p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistributionError::NotNormalized { sum });
        }
        Ok(Self { outcomes, probs })
    }

    /// Normalizes nonnegative weights. Fails when the total mass is zero.
    pub fn from_weights<S: Into<String>>(
        outcomes: impl IntoIterator<Item = S>,
        weights: Vec<f64>,
    ) -> Result<Self, DistributionError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(DistributionError::ZeroMass);
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Self::new(outcomes, probs)
    }

    /// Point mass on `index`.
    pub fn indicator<S: Into<String>>(
        outcomes: impl IntoIterator<Item = S>,
        index: usize,
    ) -> Result<Self, DistributionError> {
        let outcomes: Vec<String> = outcomes.into_iter().map(Into::into).collect();
        let mut probs = vec![0.0; outcomes.len()];
        match probs.get_mut(index) {
            Some(p) => *p = 1.0,
            None => {
                return Err(DistributionError::OutOfRange {
                    index,
                    value: 1.0,
                })
            }
        }
        Self::new(outcomes, probs)
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob_of(&self, outcome: &str) -> Option<f64> {
        self.outcomes
            .iter()
            .position(|o| o == outcome)
            .map(|i| self.probs[i])
    }

    /// L-infinity distance; `None` when outcome lists differ.
    pub fn max_abs_diff(&self, other: &DiscreteDistribution) -> Option<f64> {
        if self.outcomes != other.outcomes {
            return None;
        }
        Some(
            self.probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized() {
        let err = DiscreteDistribution::new(["a", "b"], vec![0.5, 0.4]).unwrap_err();
        assert!(matches!(err, DistributionError::NotNormalized { .. }));
    }

    #[test]
    fn rejects_negative() {
        let err = DiscreteDistribution::new(["a", "b"], vec![1.5, -0.5]).unwrap_err();
        assert!(matches!(err, DistributionError::OutOfRange { index: 0, .. }));
    }

    #[test]
    fn from_weights_normalizes() {
        let d = DiscreteDistribution::from_weights(["a", "b"], vec![1.0, 3.0]).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
        assert!(DiscreteDistribution::from_weights(["a"], vec![0.0]).is_err());
    }

    #[test]
    fn json_validates_on_read() {
        let ok: DiscreteDistribution =
            serde_json::from_str(r#"{"outcomes":["x","y"],"probs":[0.25,0.75]}"#).unwrap();
        assert_eq!(ok.prob_of("y"), Some(0.75));
        assert!(serde_json::from_str::<DiscreteDistribution>(
            r#"{"outcomes":["x","y"],"probs":[0.25,0.25]}"#
        )
        .is_err());
    }
}
