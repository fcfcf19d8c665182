//! The SimuDICE outer loop and the offline Dyna-Q baseline.
//!
//! Both share the same skeleton: fit the world model, learn an initial Q
//! table by experience replay, then run `iterations` rounds of planning with
//! `planning_steps × N` simulated updates each (`N` = dataset size). SimuDICE
//! re-derives the planner's sampling distribution every round from DualDICE
//! weights of the current greedy policy; Dyna-Q samples known pairs
//! uniformly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::planner::plan;
use super::q_learning::offline_q_learning;
use super::sampling::{sampling_probabilities, Formula, SamplingDistribution};
use crate::dataset::Dataset;
use crate::dice::{solve_dualdice, weights_from_nu, DiceWeights, WeightStats, DEFAULT_RIDGE};
use crate::error::{Error, Result};
use crate::mdp::{greedy_policy, Policy, QTable};
use crate::world_model::TabularWorldModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub planning_steps: usize,
    pub iterations: usize,
    pub lambda: f64,
    pub replay_epochs: usize,
    pub formula: Formula,
    pub ridge: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.99,
            planning_steps: 10,
            iterations: 1,
            lambda: 1000.0,
            replay_epochs: 10,
            formula: Formula::F1,
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperparams(msg));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.ridge >= 0.0) {
            return bad(format!("ridge must be non-negative, got {}", self.ridge));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationDiagnostics {
    /// `None` when no DICE weights were computed (Dyna-Q).
    pub weights: Option<WeightStats>,
    pub sampling_entropy: f64,
    /// L2 norm of the Q change produced by this round's planning.
    pub q_change_norm: f64,
    pub fell_back: bool,
}

#[derive(Debug, Clone)]
pub struct LearnerOutput {
    pub q: QTable,
    pub policy: Policy,
    pub diagnostics: Vec<IterationDiagnostics>,
}

/// Everything SimuDICE computes in one round before planning.
#[derive(Debug, Clone)]
pub struct RoundInputs {
    pub weights: DiceWeights,
    pub distribution: SamplingDistribution,
}

/// DualDICE weights for the greedy policy of `q` and the resulting sampling
/// distribution.
pub fn simudice_round_inputs(
    d: &Dataset,
    model: &TabularWorldModel,
    q: &QTable,
    h: &Hyperparams,
) -> Result<RoundInputs> {
    let target = greedy_policy(q);
    let nu = solve_dualdice(d, &target, h.gamma, h.ridge)?;
    let weights = weights_from_nu(&nu, d, &target, h.gamma);
    let distribution = sampling_probabilities(model, &weights, h.lambda, h.formula)?;
    Ok(RoundInputs { weights, distribution })
}

fn planning_round<R: Rng + ?Sized>(
    q: &mut QTable,
    model: &TabularWorldModel,
    p: &SamplingDistribution,
    h: &Hyperparams,
    n_records: usize,
    rng: &mut R,
) -> Result<f64> {
    let before = q.clone();
    plan(q, model, p, h.alpha, h.gamma, h.planning_steps * n_records, rng)?;
    Ok(q.l2_diff(&before))
}

pub fn run_simudice<R: Rng + ?Sized>(d: &Dataset, h: &Hyperparams, rng: &mut R) -> Result<LearnerOutput> {
    h.validate()?;
    let model = TabularWorldModel::fit(d);
    let mut q = offline_q_learning(d, h.replay_epochs, h.alpha, h.gamma, rng);
    let mut diagnostics = Vec::with_capacity(h.iterations);
    for _ in 0..h.iterations {
        let RoundInputs { weights, distribution } = simudice_round_inputs(d, &model, &q, h)?;
        let q_change_norm = planning_round(&mut q, &model, &distribution, h, d.len(), rng)?;
        diagnostics.push(IterationDiagnostics {
            weights: weights.stats(),
            sampling_entropy: distribution.entropy(),
            q_change_norm,
            fell_back: distribution.fell_back(),
        });
    }
    let policy = greedy_policy(&q);
    Ok(LearnerOutput { q, policy, diagnostics })
}

/// SimuDICE with uniform sampling over known pairs and no DICE step.
pub fn offline_dyna_q<R: Rng + ?Sized>(d: &Dataset, h: &Hyperparams, rng: &mut R) -> Result<LearnerOutput> {
    h.validate()?;
    let model = TabularWorldModel::fit(d);
    let mut q = offline_q_learning(d, h.replay_epochs, h.alpha, h.gamma, rng);
    let no_weights = DiceWeights::new(d.n_states(), d.n_actions(), vec![0.0; d.n_states() * d.n_actions()], vec![false; d.n_states() * d.n_actions()]);
    let p = sampling_probabilities(&model, &no_weights, h.lambda, Formula::Uniform)?;
    let mut diagnostics = Vec::with_capacity(h.iterations);
    for _ in 0..h.iterations {
        let q_change_norm = planning_round(&mut q, &model, &p, h, d.len(), rng)?;
        diagnostics.push(IterationDiagnostics {
            weights: None,
            sampling_entropy: p.entropy(),
            q_change_norm,
            fell_back: false,
        });
    }
    let policy = greedy_policy(&q);
    Ok(LearnerOutput { q, policy, diagnostics })
}

/// Offline Q-learning baseline wrapped in the common output type.
pub fn offline_q_baseline<R: Rng + ?Sized>(d: &Dataset, h: &Hyperparams, rng: &mut R) -> Result<LearnerOutput> {
    h.validate()?;
    let q = offline_q_learning(d, h.replay_epochs, h.alpha, h.gamma, rng);
    let policy = greedy_policy(&q);
    Ok(LearnerOutput { q, policy, diagnostics: Vec::new() })
}
