//! Offline datasets: behaviour-policy construction, collection and the
//! newline-delimited JSON file format.
//!
//! File layout: the first line is a header object
//! `{"env", "epsilon", "seed", "n_records"}`, each following line is one
//! [`ExperienceRecord`]. Rewards are written with shortest round-trip
//! precision so a save/load cycle is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algos::{evaluate_policy, q_update};
use crate::envs::{Env, EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::mdp::{greedy_policy, ActionId, Policy, QTable, StateId};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperienceRecord {
    pub episode_start_state: StateId,
    pub state: StateId,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: StateId,
    pub done: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    env_spec: EnvSpec,
    records: Vec<ExperienceRecord>,
    behavior_epsilon: f64,
    collection_seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    env: String,
    epsilon: f64,
    seed: u64,
    n_records: usize,
}

impl Dataset {
    pub fn new(
        env: EnvKind,
        records: Vec<ExperienceRecord>,
        behavior_epsilon: f64,
        collection_seed: u64,
    ) -> Result<Self> {
        let env_spec = env.spec();
        if records.is_empty() {
            return Err(Error::InvalidDataset("datasets must be non-empty".into()));
        }
        for (i, r) in records.iter().enumerate() {
            for (kind, index, limit) in [
                ("episode_start_state", r.episode_start_state, env_spec.n_states),
                ("state", r.state, env_spec.n_states),
                ("next_state", r.next_state, env_spec.n_states),
                ("action", r.action, env_spec.n_actions),
            ] {
                if index >= limit {
                    return Err(Error::InvalidDataset(format!(
                        "record {i}: {kind} {index} out of range for {} (limit {limit})",
                        env.name()
                    )));
                }
            }
            if r.done && r.truncated {
                return Err(Error::InvalidDataset(format!("record {i} is both done and truncated")));
            }
            if !r.reward.is_finite() {
                return Err(Error::InvalidDataset(format!("record {i} has a non-finite reward")));
            }
        }
        Ok(Self { env_spec, records, behavior_epsilon, collection_seed })
    }

    pub fn env(&self) -> EnvKind {
        self.env_spec.kind
    }

    pub fn env_spec(&self) -> EnvSpec {
        self.env_spec
    }

    pub fn records(&self) -> &[ExperienceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn behavior_epsilon(&self) -> f64 {
        self.behavior_epsilon
    }

    pub fn collection_seed(&self) -> u64 {
        self.collection_seed
    }

    pub fn n_states(&self) -> usize {
        self.env_spec.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.env_spec.n_actions
    }

    /// Empirical `d̂^D(s, a)` over all pairs, row-major.
    pub fn empirical_distribution(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_states() * self.n_actions()];
        for r in &self.records {
            d[r.state * self.n_actions() + r.action] += 1.0;
        }
        let n = self.len() as f64;
        d.iter_mut().for_each(|x| *x /= n);
        d
    }

    /// Empirical distribution of `episode_start_state` over records.
    pub fn empirical_initial_distribution(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.n_states()];
        for r in &self.records {
            mu[r.episode_start_state] += 1.0;
        }
        let n = self.len() as f64;
        mu.iter_mut().for_each(|x| *x /= n);
        mu
    }

    pub fn mean_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum::<f64>() / self.len() as f64
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io { path: path.to_path_buf(), source };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        let header = Header {
            env: self.env().name().to_string(),
            epsilon: self.behavior_epsilon,
            seed: self.collection_seed,
            n_records: self.len(),
        };
        let line = serde_json::to_string(&header).expect("header serialises");
        writeln!(out, "{line}").map_err(io_err)?;
        for r in &self.records {
            let line = serde_json::to_string(r).expect("record serialises");
            writeln!(out, "{line}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let malformed = |line: usize, message: String| Error::MalformedDataset { path: path.to_path_buf(), line, message };
        let mut lines = BufReader::new(file).lines().enumerate();
        let header: Header = match lines.next() {
            Some((_, Ok(text))) => serde_json::from_str(&text).map_err(|e| malformed(1, e.to_string()))?,
            Some((_, Err(source))) => return Err(Error::Io { path: path.to_path_buf(), source }),
            None => return Err(malformed(1, "missing header".into())),
        };
        let env: EnvKind = header.env.parse()?;
        let mut records = Vec::with_capacity(header.n_records);
        for (i, line) in lines {
            let text = line.map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
            if text.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&text).map_err(|e| malformed(i + 1, e.to_string()))?);
        }
        if records.len() != header.n_records {
            return Err(malformed(
                1,
                format!("header declares {} records, file has {}", header.n_records, records.len()),
            ));
        }
        Self::new(env, records, header.epsilon, header.seed)
    }
}

/// Roll out `policy` until exactly `n_timesteps` transitions are recorded.
///
/// Episodes are capped at the environment's step limit; the last episode may
/// be cut short. All randomness comes from `seed`.
pub fn collect_dataset(
    env: EnvKind,
    policy: &Policy,
    n_timesteps: usize,
    behavior_epsilon: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_timesteps == 0 {
        return Err(Error::InvalidDataset("n_timesteps must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut sim = Env::new(env);
    let mut records = Vec::with_capacity(n_timesteps);
    while records.len() < n_timesteps {
        let start = sim.reset(&mut rng);
        let mut s = start;
        while records.len() < n_timesteps {
            let a = policy.sample(s, &mut rng);
            let step = sim.step(a)?;
            records.push(ExperienceRecord {
                episode_start_state: start,
                state: s,
                action: a,
                reward: step.reward,
                next_state: step.next_state,
                done: step.done,
                truncated: step.truncated,
            });
            if step.done || step.truncated {
                break;
            }
            s = step.next_state;
        }
    }
    Dataset::new(env, records, behavior_epsilon, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialTrainingConfig {
    pub alpha: f64,
    pub gamma: f64,
    /// ε of the exploratory policy used while training online.
    pub explore_epsilon: f64,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub step_budget: usize,
}

impl Default for PartialTrainingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.99,
            explore_epsilon: 0.1,
            eval_every: 1000,
            eval_episodes: 500,
            step_budget: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PartialPolicy {
    pub q: QTable,
    /// Per-step reward of the greedy policy at the returned checkpoint.
    pub achieved: f64,
    pub training_steps: usize,
    pub within_tolerance: bool,
}

/// Paper-protocol per-step targets for the partially trained policies.
pub fn partial_policy_target(env: EnvKind) -> f64 {
    match env {
        EnvKind::Taxi => 0.1,
        EnvKind::FrozenLake => 0.0,
        EnvKind::CliffWalking => -2.38,
    }
}

/// Online Q-learning with periodic greedy evaluations, stopping at the first
/// checkpoint whose per-step reward is within `tolerance` of the target.
/// When the budget runs out the closest checkpoint is returned.
pub fn train_partial_policy<R: Rng + ?Sized>(
    env: EnvKind,
    target: f64,
    tolerance: f64,
    config: &PartialTrainingConfig,
    rng: &mut R,
) -> Result<PartialPolicy> {
    let spec = env.spec();
    let mut q = QTable::zeros(spec.n_states, spec.n_actions);
    let mut best: Option<PartialPolicy> = None;
    let mut sim = Env::new(env);
    let mut s = sim.reset(rng);
    for step in 1..=config.step_budget {
        let a = if rng.random::<f64>() < config.explore_epsilon {
            rng.random_range(0..spec.n_actions)
        } else {
            q.argmax(s)
        };
        let r = sim.step(a)?;
        q_update(&mut q, s, a, r.reward, r.next_state, r.done, config.alpha, config.gamma);
        s = if r.done || r.truncated { sim.reset(rng) } else { r.next_state };

        if step % config.eval_every == 0 {
            let achieved = evaluate_policy(env, &greedy_policy(&q), config.eval_episodes, spec.max_episode_steps, rng)?;
            let within_tolerance = (achieved - target).abs() <= tolerance;
            let closer = best.as_ref().is_none_or(|b| (achieved - target).abs() < (b.achieved - target).abs());
            if closer {
                best = Some(PartialPolicy { q: q.clone(), achieved, training_steps: step, within_tolerance });
            }
            if within_tolerance {
                break;
            }
        }
    }
    let best = best.unwrap_or(PartialPolicy { q, achieved: f64::NAN, training_steps: 0, within_tolerance: false });
    if !best.within_tolerance {
        warn!(
            "{}: partial policy target {target} not reached within ±{tolerance}; using closest checkpoint ({:.4} after {} steps)",
            env.name(),
            best.achieved,
            best.training_steps
        );
    }
    Ok(best)
}
