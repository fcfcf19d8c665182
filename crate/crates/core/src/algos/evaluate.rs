use rand::Rng;

use crate::envs::{Env, EnvKind};
use crate::error::{Error, Result};
use crate::mdp::Policy;

/// Average per-step reward of `pi` over `n_episodes` rollouts in the real
/// environment: total reward divided by total steps.
pub fn evaluate_policy<R: Rng + ?Sized>(
    env: EnvKind,
    pi: &Policy,
    n_episodes: usize,
    max_steps: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_episodes == 0 || max_steps == 0 {
        return Err(Error::InvalidHyperparams("evaluation needs at least one episode and one step".into()));
    }
    let mut sim = Env::with_max_steps(env, max_steps);
    let mut total_reward = 0.0;
    let mut total_steps = 0usize;
    for _ in 0..n_episodes {
        let mut s = sim.reset(rng);
        loop {
            let step = sim.step(pi.sample(s, rng))?;
            total_reward += step.reward;
            total_steps += 1;
            if step.done || step.truncated {
                break;
            }
            s = step.next_state;
        }
    }
    Ok(total_reward / total_steps as f64)
}
