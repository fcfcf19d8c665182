use rand::Rng;

use crate::dataset::Dataset;
use crate::mdp::{ActionId, QTable, StateId};

/// One tabular Q-learning step. Termination zeroes the bootstrap term;
/// truncation does not, so callers pass `done` only for true terminations.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    q: &mut QTable,
    s: StateId,
    a: ActionId,
    r: f64,
    next: StateId,
    done: bool,
    alpha: f64,
    gamma: f64,
) {
    let bootstrap = if done { 0.0 } else { gamma * q.max_value(next) };
    let old = q.get(s, a);
    q.set(s, a, old + alpha * (r + bootstrap - old));
}

/// Experience-replay Q-learning over a fixed dataset: `epochs × N` updates on
/// records drawn uniformly with replacement, starting from `Q ≡ 0`.
pub fn offline_q_learning<R: Rng + ?Sized>(d: &Dataset, epochs: usize, alpha: f64, gamma: f64, rng: &mut R) -> QTable {
    let mut q = QTable::zeros(d.n_states(), d.n_actions());
    let records = d.records();
    for _ in 0..epochs * records.len() {
        let r = &records[rng.random_range(0..records.len())];
        q_update(&mut q, r.state, r.action, r.reward, r.next_state, r.done, alpha, gamma);
    }
    q
}
