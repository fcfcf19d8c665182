//! DualDICE correction weights `w = d^π / d^D` for tabular data.
//!
//! With a tabular `ν` the inner maximisation of DualDICE is solved per pair,
//! which leaves the empirical objective
//!
//! ```text
//! J(ν) = ½ · Σ_(s,a) d̂(s,a) · ē(s,a)²  −  (1 − γ) · mean_i Σ_a0 π(a0|s0_i) ν(s0_i,a0)
//! ē(s,a) = ν(s,a) − γ · mean over records of (s,a) of Σ_a' π(a'|s') ν(s',a')
//! ```
//!
//! a convex quadratic `½ νᵀHν − cᵀν`. Records flagged `done` contribute no
//! continuation term. Squaring the pair-level residual rather than each
//! record's keeps the estimate unbiased under stochastic transitions. The
//! weights are the residuals `ē` of the minimiser.
//!
//! The system `(H + ridge·I) ν = c` is solved once and then polished with a
//! few steps of iterative refinement against `H`, which removes the ridge
//! bias on well-determined directions. Only pairs that occur in some term of
//! `J` enter the linear system; every other coordinate stays zero.

use std::collections::BTreeMap;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mdp::{visitation_distribution_exact, Policy, TabularMdp};

pub const DEFAULT_RIDGE: f64 = 1e-8;
const REFINEMENT_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuFunction {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl NuFunction {
    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_states * n_actions);
        Self { n_states, n_actions, values }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Σ_a π(a|s) ν(s, a)`
    fn expected(&self, pi: &Policy, s: usize) -> f64 {
        pi.row(s).iter().zip(&self.values[s * self.n_actions..]).map(|(p, v)| p * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiceWeights {
    n_states: usize,
    n_actions: usize,
    w: Vec<f64>,
    support: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl DiceWeights {
    pub fn new(n_states: usize, n_actions: usize, w: Vec<f64>, support: Vec<bool>) -> Self {
        assert_eq!(w.len(), n_states * n_actions);
        assert_eq!(support.len(), w.len());
        Self { n_states, n_actions, w, support }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.w[s * self.n_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn in_support(&self, s: usize, a: usize) -> bool {
        self.support[s * self.n_actions + a]
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    /// Unweighted min / mean / max over supported pairs.
    pub fn stats(&self) -> Option<WeightStats> {
        let vals: Vec<f64> = self.w.iter().zip(&self.support).filter(|(_, &s)| s).map(|(&w, _)| w).collect();
        if vals.is_empty() {
            return None;
        }
        Some(WeightStats {
            min: vals.iter().copied().fold(f64::INFINITY, f64::min),
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
            max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// The assembled quadratic over the active pairs.
#[derive(Debug, Clone)]
pub struct DualDiceProblem {
    /// Flat pair index of each variable.
    pub variables: Vec<usize>,
    /// `H`, without ridge.
    pub hessian: DMatrix<f64>,
    /// `c`
    pub linear: DVector<f64>,
}

struct Indexer {
    slot: Vec<Option<usize>>,
    variables: Vec<usize>,
}

impl Indexer {
    fn get(&mut self, pair: usize) -> usize {
        *self.slot[pair].get_or_insert_with(|| {
            self.variables.push(pair);
            self.variables.len() - 1
        })
    }
}

fn check_inputs(d: &Dataset, pi: &Policy, gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidHyperparams(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    if pi.n_states() != d.n_states() || pi.n_actions() != d.n_actions() {
        return Err(Error::InvalidPolicy("policy shape does not match the dataset".into()));
    }
    Ok(())
}

/// Sparse `b_p` with `b_pᵀν = ē(p)`, and the record count of `p`, for each
/// pair in the data.
fn residual_terms(d: &Dataset, pi: &Policy, gamma: f64, idx: &mut Indexer) -> Vec<(Vec<(usize, f64)>, f64)> {
    let na = d.n_actions();
    let mut by_pair: BTreeMap<usize, (BTreeMap<usize, f64>, f64)> = BTreeMap::new();
    for r in d.records() {
        let (cont, count) = by_pair.entry(r.state * na + r.action).or_default();
        *count += 1.0;
        if !r.done {
            for (a, &p) in pi.row(r.next_state).iter().enumerate() {
                if p > 0.0 {
                    *cont.entry(r.next_state * na + a).or_default() += p;
                }
            }
        }
    }
    by_pair
        .into_iter()
        .map(|(pair, (cont, count))| {
            let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
            *terms.entry(pair).or_default() += 1.0;
            for (next, p) in cont {
                *terms.entry(next).or_default() -= gamma * p / count;
            }
            (terms.into_iter().map(|(q, v)| (idx.get(q), v)).collect(), count)
        })
        .collect()
}

pub fn assemble_dualdice(d: &Dataset, pi: &Policy, gamma: f64) -> Result<DualDiceProblem> {
    check_inputs(d, pi, gamma)?;
    let na = d.n_actions();
    let n_records = d.len() as f64;
    let mut idx = Indexer { slot: vec![None; d.n_states() * na], variables: Vec::new() };
    let residuals = residual_terms(d, pi, gamma, &mut idx);
    let mut initial = Vec::new();
    for r in d.records() {
        for (a, &p) in pi.row(r.episode_start_state).iter().enumerate() {
            if p > 0.0 {
                initial.push((idx.get(r.episode_start_state * na + a), p));
            }
        }
    }

    let n = idx.variables.len();
    let mut hessian = DMatrix::zeros(n, n);
    for (b, count) in &residuals {
        let weight = count / n_records;
        for &(i, bi) in b {
            for &(j, bj) in b {
                hessian[(i, j)] += weight * bi * bj;
            }
        }
    }
    let mut linear = DVector::zeros(n);
    for (i, p) in initial {
        linear[i] += (1.0 - gamma) * p / n_records;
    }
    Ok(DualDiceProblem { variables: idx.variables, hessian, linear })
}

/// Closed-form minimiser of the empirical DualDICE objective.
pub fn solve_dualdice(d: &Dataset, pi: &Policy, gamma: f64, ridge: f64) -> Result<NuFunction> {
    if !(ridge >= 0.0) {
        return Err(Error::InvalidHyperparams(format!("ridge must be non-negative, got {ridge}")));
    }
    let problem = assemble_dualdice(d, pi, gamma)?;
    let n = problem.variables.len();
    let system = &problem.hessian + DMatrix::identity(n, n) * ridge;
    let singular = || {
        let diag = system.diagonal();
        Error::Singular(format!(
            "DualDICE system with {n} variables (ridge {ridge}); diagonal range [{:.3e}, {:.3e}]",
            diag.min(),
            diag.max()
        ))
    };
    let finite = |x: &DVector<f64>| x.iter().all(|v| v.is_finite());
    let solver: Box<dyn Fn(&DVector<f64>) -> Option<DVector<f64>>> = match system.clone().cholesky() {
        Some(c) if finite(&c.solve(&problem.linear)) => Box::new(move |b| Some(c.solve(b))),
        _ => {
            let lu = system.clone().lu();
            Box::new(move |b| lu.solve(b))
        }
    };
    let mut solution = solver(&problem.linear).filter(finite).ok_or_else(singular)?;
    if ridge > 0.0 {
        for _ in 0..REFINEMENT_STEPS {
            let residual = &problem.linear - &problem.hessian * &solution;
            match solver(&residual).filter(finite) {
                Some(step) => solution += step,
                None => break,
            }
        }
    }
    let mut values = vec![0.0; d.n_states() * d.n_actions()];
    for (k, &pair) in problem.variables.iter().enumerate() {
        values[pair] = solution[k];
    }
    Ok(NuFunction { n_states: d.n_states(), n_actions: d.n_actions(), values })
}

/// Empirical objective `J(ν)`.
pub fn dualdice_objective(nu: &NuFunction, d: &Dataset, pi: &Policy, gamma: f64) -> f64 {
    let n = d.len() as f64;
    let w = weights_from_nu(nu, d, pi, gamma);
    let quad: f64 = d.records().iter().map(|r| w.get(r.state, r.action).powi(2)).sum();
    let init: f64 = d.records().iter().map(|r| nu.expected(pi, r.episode_start_state)).sum();
    0.5 * quad / n - (1.0 - gamma) * init / n
}

/// Per-pair mean Bellman residual of `ν` over the dataset records; zero off
/// the dataset support.
pub fn weights_from_nu(nu: &NuFunction, d: &Dataset, pi: &Policy, gamma: f64) -> DiceWeights {
    let na = d.n_actions();
    let size = d.n_states() * na;
    let mut sums = vec![0.0; size];
    let mut counts = vec![0u64; size];
    for r in d.records() {
        let i = r.state * na + r.action;
        let cont = if r.done { 0.0 } else { nu.expected(pi, r.next_state) };
        sums[i] += nu.get(r.state, r.action) - gamma * cont;
        counts[i] += 1;
    }
    let w = sums.iter().zip(&counts).map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let support = counts.iter().map(|&c| c > 0).collect();
    DiceWeights { n_states: d.n_states(), n_actions: na, w, support }
}

/// Exact ratio `d^π / dD` from the visitation oracle. Pairs with `dD = 0`
/// get weight zero and are left out of the support.
pub fn exact_weights_oracle(mdp: &TabularMdp, pi: &Policy, d_data: &[f64]) -> Result<DiceWeights> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if d_data.len() != ns * na {
        return Err(Error::InvalidDataset("data distribution has the wrong size".into()));
    }
    let d_pi = visitation_distribution_exact(mdp, pi)?;
    let mut w = vec![0.0; ns * na];
    let mut support = vec![false; ns * na];
    for i in 0..ns * na {
        if d_data[i] > 0.0 {
            w[i] = d_pi[i] / d_data[i];
            support[i] = true;
        } else if d_pi[i] > 0.0 {
            debug!("pair {i} has d^pi = {:.3e} but no data mass; weight set to 0", d_pi[i]);
        }
    }
    Ok(DiceWeights { n_states: ns, n_actions: na, w, support })
}

/// `(1/N) Σ_i w(s_i, a_i) r_i`
pub fn dice_value_estimate(w: &DiceWeights, d: &Dataset) -> f64 {
    d.records().iter().map(|r| w.get(r.state, r.action) * r.reward).sum::<f64>() / d.len() as f64
}

/// `(1/N) Σ_i w(s_i, a_i)`
pub fn weighted_mean(w: &DiceWeights, d: &Dataset) -> f64 {
    d.records().iter().map(|r| w.get(r.state, r.action)).sum::<f64>() / d.len() as f64
}
