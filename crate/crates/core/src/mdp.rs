//! Tabular MDPs, Q-tables and policies, plus exact linear-algebra oracles.
//!
//! Two return conventions coexist here. [`policy_value_exact`] with
//! [`ValueScale::Discounted`] gives the plain discounted return
//! `ρ(π) = E[Σ_t γ^t r_t]`, while the visitation distribution carries the
//! `(1 − γ)` factor so that it sums to one. Consequently
//! `Σ d^π(s,a) r(s,a) = (1 − γ) ρ(π)`, which is what
//! [`ValueScale::PerUnit`] returns.
//!
//! Terminal states are treated as absorbing with zero reward by every oracle,
//! regardless of what their rows in the transition table say.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = usize;
pub type ActionId = usize;

const PROB_TOL: f64 = 1e-12;

/// Full specification of a finite MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    terminal: Vec<bool>,
    mu0: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    /// `transition` is indexed `[(s * n_actions + a) * n_states + s']` and
    /// `reward` is indexed `[s * n_actions + a]`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        terminal: Vec<bool>,
        mu0: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("state and action counts must be positive".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidMdp(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::InvalidMdp("reward table has the wrong size".into()));
        }
        if terminal.len() != n_states || mu0.len() != n_states {
            return Err(Error::InvalidMdp("terminal/mu0 vectors have the wrong size".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp("non-finite reward".into()));
        }
        if mu0.iter().any(|&p| !(p >= 0.0)) || (mu0.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidMdp("mu0 is not a probability vector".into()));
        }
        for s in 0..n_states {
            if terminal[s] {
                continue;
            }
            for a in 0..n_actions {
                let row = &transition[(s * n_actions + a) * n_states..][..n_states];
                if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidMdp(format!(
                        "transition row ({s}, {a}) is not a probability vector"
                    )));
                }
            }
        }
        Ok(Self { n_states, n_actions, transition, reward, terminal, mu0, gamma })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        Ok(Self { gamma, ..self.clone() })
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s]
    }

    /// Transition row `T(· | s, a)` as stored.
    pub fn transition_row(&self, s: StateId, a: ActionId) -> &[f64] {
        &self.transition[(s * self.n_actions + a) * self.n_states..][..self.n_states]
    }

    pub fn reward(&self, s: StateId, a: ActionId) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Reward with terminal states forced to zero.
    fn oracle_reward(&self, s: StateId, a: ActionId) -> f64 {
        if self.terminal[s] {
            0.0
        } else {
            self.reward(s, a)
        }
    }

    /// State-to-state kernel under `pi`, terminals absorbing.
    fn state_kernel(&self, pi: &Policy) -> DMatrix<f64> {
        let n = self.n_states;
        let mut p = DMatrix::zeros(n, n);
        for s in 0..n {
            if self.terminal[s] {
                p[(s, s)] = 1.0;
                continue;
            }
            for a in 0..self.n_actions {
                let pa = pi.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                for (s2, &t) in self.transition_row(s, a).iter().enumerate() {
                    if t != 0.0 {
                        p[(s, s2)] += pa * t;
                    }
                }
            }
        }
        p
    }

    fn check_policy(&self, pi: &Policy) -> Result<()> {
        if pi.n_states() != self.n_states || pi.n_actions() != self.n_actions {
            return Err(Error::InvalidPolicy(format!(
                "policy shape {}x{} does not match mdp {}x{}",
                pi.n_states(),
                pi.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }
}

/// Action-value table, row-major over `(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::InvalidPolicy("q-table has the wrong size".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolicy("q-table contains non-finite entries".into()));
        }
        Ok(Self { n_states, n_actions, values })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.values[s * self.n_actions..][..self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self, s: StateId) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// First action attaining the row maximum.
    pub fn argmax(&self, s: StateId) -> ActionId {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Stochastic policy table `π(a | s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || probs.len() != n_states * n_actions {
            return Err(Error::InvalidPolicy("probability table has the wrong size".into()));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidPolicy(format!("row {s} is not a distribution")));
            }
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    /// Deterministic policy from one action per state.
    pub fn deterministic(n_actions: usize, actions: &[ActionId]) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self { n_states: actions.len(), n_actions, probs }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: StateId, a: ActionId) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.probs[s * self.n_actions..][..self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: StateId, rng: &mut R) -> ActionId {
        let row = self.row(s);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        // rounding can leave acc a hair below 1
        row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// One-hot policy on the lowest-index argmax of each Q row.
pub fn greedy_policy(q: &QTable) -> Policy {
    let actions: Vec<_> = (0..q.n_states()).map(|s| q.argmax(s)).collect();
    Policy::deterministic(q.n_actions(), &actions)
}

pub fn epsilon_greedy_policy(q: &QTable, epsilon: f64) -> Result<Policy> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let n_actions = q.n_actions();
    let explore = epsilon / n_actions as f64;
    let mut probs = vec![explore; q.n_states() * n_actions];
    for s in 0..q.n_states() {
        probs[s * n_actions + q.argmax(s)] = 1.0 - epsilon + explore;
    }
    Ok(Policy { n_states: q.n_states(), n_actions, probs })
}

/// Scale of the value returned by [`policy_value_exact`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueScale {
    /// `ρ(π) = μ0ᵀ V^π`, the discounted return.
    Discounted,
    /// `(1 − γ) ρ(π)`, the expectation of reward under `d^π`.
    PerUnit,
}

fn solve_dense(a: DMatrix<f64>, b: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    a.lu()
        .solve(&b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(format!("{what}: LU factorisation failed")))
}

/// Per-state values `V^π` from `(I − γ P^π) V = r^π`.
pub fn state_values_exact(mdp: &TabularMdp, pi: &Policy) -> Result<Vec<f64>> {
    mdp.check_policy(pi)?;
    let n = mdp.n_states;
    let p = mdp.state_kernel(pi);
    let a = DMatrix::identity(n, n) - p * mdp.gamma;
    let r = DVector::from_fn(n, |s, _| (0..mdp.n_actions).map(|a| pi.prob(s, a) * mdp.oracle_reward(s, a)).sum());
    Ok(solve_dense(a, r, "policy evaluation")?.iter().copied().collect())
}

pub fn policy_value_exact(mdp: &TabularMdp, pi: &Policy, scale: ValueScale) -> Result<f64> {
    let v = state_values_exact(mdp, pi)?;
    let rho: f64 = mdp.mu0.iter().zip(&v).map(|(m, v)| m * v).sum();
    Ok(match scale {
        ValueScale::Discounted => rho,
        ValueScale::PerUnit => (1.0 - mdp.gamma) * rho,
    })
}

/// Discounted state-action visitation `d^π(s, a)`, row-major over `(s, a)`.
///
/// Solved at the state level, `d_Sᵀ (I − γ P^π) = (1 − γ) μ0ᵀ`, then lifted
/// with `d(s, a) = d_S(s) π(a | s)`; this is the same fixed point as the
/// state-action system with a smaller factorisation.
pub fn visitation_distribution_exact(mdp: &TabularMdp, pi: &Policy) -> Result<Vec<f64>> {
    mdp.check_policy(pi)?;
    let n = mdp.n_states;
    let p = mdp.state_kernel(pi);
    let a = (DMatrix::identity(n, n) - p * mdp.gamma).transpose();
    let b = DVector::from_iterator(n, mdp.mu0.iter().map(|m| (1.0 - mdp.gamma) * m));
    let ds = solve_dense(a, b, "visitation distribution")?;
    let mut d = vec![0.0; n * mdp.n_actions];
    for s in 0..n {
        for a in 0..mdp.n_actions {
            // clamp round-off negatives
            d[s * mdp.n_actions + a] = (ds[s] * pi.prob(s, a)).max(0.0);
        }
    }
    Ok(d)
}

/// Undiscounted per-step reward of `pi` over episodes truncated at
/// `horizon` steps: `E[Σ r_t] / E[episode length]`.
///
/// This is the population counterpart of total reward divided by total steps
/// across many rollouts.
pub fn per_step_reward_exact(mdp: &TabularMdp, pi: &Policy, horizon: usize) -> Result<f64> {
    mdp.check_policy(pi)?;
    let n = mdp.n_states;
    let mut occupancy: Vec<f64> = mdp.mu0.iter().enumerate().map(|(s, &m)| if mdp.terminal[s] { 0.0 } else { m }).collect();
    let mut total_reward = 0.0;
    let mut total_steps = 0.0;
    for _ in 0..horizon {
        let mut next = vec![0.0; n];
        for s in 0..n {
            let mass = occupancy[s];
            if mass == 0.0 {
                continue;
            }
            total_steps += mass;
            for a in 0..mdp.n_actions {
                let pa = pi.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                total_reward += mass * pa * mdp.reward(s, a);
                for (s2, &t) in mdp.transition_row(s, a).iter().enumerate() {
                    if t != 0.0 && !mdp.terminal[s2] {
                        next[s2] += mass * pa * t;
                    }
                }
            }
        }
        occupancy = next;
    }
    if total_steps == 0.0 {
        return Err(Error::InvalidMdp("initial distribution is supported on terminal states only".into()));
    }
    Ok(total_reward / total_steps)
}

/// Optimal Q-values by value iteration, iterated until the max-norm change
/// drops below `tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64, max_iters: usize) -> QTable {
    let (n, na) = (mdp.n_states, mdp.n_actions);
    let mut q = QTable::zeros(n, na);
    for _ in 0..max_iters {
        let v: Vec<f64> = (0..n).map(|s| if mdp.terminal[s] { 0.0 } else { q.max_value(s) }).collect();
        let mut next = QTable::zeros(n, na);
        for s in 0..n {
            if mdp.terminal[s] {
                continue;
            }
            for a in 0..na {
                let cont: f64 = mdp.transition_row(s, a).iter().zip(&v).map(|(t, v)| t * v).sum();
                next.set(s, a, mdp.reward(s, a) + mdp.gamma * cont);
            }
        }
        let delta = next.max_abs_diff(&q);
        q = next;
        if delta < tol {
            break;
        }
    }
    q
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Deterministic MDP from a successor table.
    pub fn deterministic_mdp(
        n_actions: usize,
        next: &[&[usize]],
        reward: &[&[f64]],
        terminal: &[bool],
        mu0: &[f64],
        gamma: f64,
    ) -> TabularMdp {
        let n = next.len();
        let mut t = vec![0.0; n * n_actions * n];
        for s in 0..n {
            for a in 0..n_actions {
                t[(s * n_actions + a) * n + next[s][a]] = 1.0;
            }
        }
        let r = reward.iter().flat_map(|row| row.iter().copied()).collect();
        TabularMdp::new(n, n_actions, t, r, terminal.to_vec(), mu0.to_vec(), gamma).unwrap()
    }

    /// 3-state chain: action 0 moves right (state 2 loops), action 1 goes
    /// back to 0. Reward 1 in state 2.
    pub fn chain3(gamma: f64) -> TabularMdp {
        deterministic_mdp(
            2,
            &[&[1, 0], &[2, 0], &[2, 0]],
            &[&[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]],
            &[false; 3],
            &[1.0, 0.0, 0.0],
            gamma,
        )
    }
}
