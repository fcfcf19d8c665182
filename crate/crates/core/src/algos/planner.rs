use rand::Rng;

use super::q_learning::q_update;
use super::sampling::SamplingDistribution;
use crate::error::Result;
use crate::mdp::QTable;
use crate::world_model::TabularWorldModel;

/// Simulated Q-learning: `n_updates` times, draw `(s, a)` from `p`, ask the
/// model for `(s', r, done)` and apply [`q_update`].
pub fn plan<R: Rng + ?Sized>(
    q: &mut QTable,
    model: &TabularWorldModel,
    p: &SamplingDistribution,
    alpha: f64,
    gamma: f64,
    n_updates: usize,
    rng: &mut R,
) -> Result<()> {
    for _ in 0..n_updates {
        let (s, a) = p.sample(rng);
        let pred = model.predict(s, a)?;
        q_update(q, s, a, pred.reward, pred.next_state, pred.done, alpha, gamma);
    }
    Ok(())
}
