//! Planner sampling distributions over world-model-known pairs.
//!
//! With confidence `C`, correction weights `w`, regularisation `λ` and the
//! softmax `σ(w·λ)` taken over the `K` known pairs:
//!
//! | formula | likelihood                |
//! |---------|---------------------------|
//! | F1      | `C + σ(w·λ) / λ`          |
//! | F2      | `C − σ(w·λ) / λ`          |
//! | F3      | `1/K + σ(w·λ) / λ`        |
//! | Uniform | `1/K`                     |
//!
//! Negative likelihoods are clamped to zero before normalising; if nothing
//! positive remains the distribution falls back to `C`.
//!
//! F3's uniform term is `1/K` rather than `1/(|S|·|A|)`: pairs the model has
//! never seen cannot be sampled, so the uniform floor is spread over the
//! known pairs only.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dice::DiceWeights;
use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId};
use crate::world_model::TabularWorldModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Formula {
    F1,
    F2,
    F3,
    Uniform,
}

impl Formula {
    pub fn name(self) -> &'static str {
        match self {
            Formula::F1 => "F1",
            Formula::F2 => "F2",
            Formula::F3 => "F3",
            Formula::Uniform => "Uniform",
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" | "1" => Ok(Formula::F1),
            "f2" | "2" => Ok(Formula::F2),
            "f3" | "3" => Ok(Formula::F3),
            "uniform" => Ok(Formula::Uniform),
            _ => Err(Error::InvalidHyperparams(format!("unknown sampling formula '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplingDistribution {
    n_states: usize,
    n_actions: usize,
    pairs: Vec<usize>,
    probs: Vec<f64>,
    sampler: WeightedIndex<f64>,
    fell_back: bool,
}

impl PartialEq for SamplingDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.n_states == other.n_states
            && self.n_actions == other.n_actions
            && self.pairs == other.pairs
            && self.probs == other.probs
    }
}

impl SamplingDistribution {
    fn from_likelihoods(n_states: usize, n_actions: usize, pairs: Vec<usize>, likelihood: Vec<f64>, fell_back: bool) -> Self {
        let total: f64 = likelihood.iter().sum();
        let probs: Vec<f64> = likelihood.iter().map(|l| l / total).collect();
        let sampler = WeightedIndex::new(&probs).expect("positive total likelihood");
        Self { n_states, n_actions, pairs, probs, sampler, fell_back }
    }

    /// Probability of `(s, a)`; zero for unknown pairs.
    pub fn prob(&self, s: StateId, a: ActionId) -> f64 {
        let flat = s * self.n_actions + a;
        self.pairs.binary_search(&flat).map(|i| self.probs[i]).unwrap_or(0.0)
    }

    /// Full row-major table over all pairs.
    pub fn table(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.n_states * self.n_actions];
        for (&p, &pr) in self.pairs.iter().zip(&self.probs) {
            t[p] = pr;
        }
        t
    }

    /// Known pairs (flat indices, ascending) and their probabilities.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.pairs.iter().copied().zip(self.probs.iter().copied())
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    /// Whether every likelihood was clamped and `C` was used instead.
    pub fn fell_back(&self) -> bool {
        self.fell_back
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (StateId, ActionId) {
        let flat = self.pairs[self.sampler.sample(rng)];
        (flat / self.n_actions, flat % self.n_actions)
    }
}

/// Softmax of `w·λ` over the given pairs, shifted by the max for stability.
fn softmax(w: &DiceWeights, pairs: &[usize], lambda: f64) -> Vec<f64> {
    let logits: Vec<f64> = pairs.iter().map(|&p| w.values()[p] * lambda).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn sampling_probabilities(
    model: &TabularWorldModel,
    w: &DiceWeights,
    lambda: f64,
    formula: Formula,
) -> Result<SamplingDistribution> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidHyperparams(format!("lambda must be positive, got {lambda}")));
    }
    let (ns, na) = (model.n_states(), model.n_actions());
    if w.n_states() != ns || w.n_actions() != na {
        return Err(Error::InvalidHyperparams("weights and model have different shapes".into()));
    }
    let pairs = model.known_pairs();
    let k = pairs.len() as f64;
    let confidence = model.confidence_table();
    let conf: Vec<f64> = pairs.iter().map(|&p| confidence[p]).collect();

    let likelihood: Vec<f64> = match formula {
        Formula::Uniform => vec![1.0 / k; pairs.len()],
        _ => {
            let sm = softmax(w, &pairs, lambda);
            conf.iter()
                .zip(&sm)
                .map(|(&c, &s)| match formula {
                    Formula::F1 => c + s / lambda,
                    Formula::F2 => c - s / lambda,
                    _ => 1.0 / k + s / lambda,
                })
                .map(|l| l.max(0.0))
                .collect()
        }
    };
    if likelihood.iter().sum::<f64>() > 0.0 {
        Ok(SamplingDistribution::from_likelihoods(ns, na, pairs, likelihood, false))
    } else {
        Ok(SamplingDistribution::from_likelihoods(ns, na, pairs, conf, true))
    }
}
