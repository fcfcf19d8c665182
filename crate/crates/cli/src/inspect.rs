use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use simudice_core::algos::evaluate_policy;
use simudice_core::dataset::Dataset;
use simudice_core::envs::EnvKind;
use simudice_core::mdp::{greedy_policy, per_step_reward_exact, policy_value_exact, value_iteration, Policy, ValueScale};
use simudice_core::rng::derive_rng;

use crate::config::{Algorithm, ExperimentConfig};
use crate::runner::{learn, RunPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub env: EnvKind,
    pub policy: Policy,
}

impl PolicyFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)? + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: PolicyFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let spec = file.env.spec();
        let p = &file.policy;
        if p.n_states() != spec.n_states || p.n_actions() != spec.n_actions {
            bail!("{}: policy shape {}x{} does not fit {}", path.display(), p.n_states(), p.n_actions(), file.env);
        }
        // re-run constructor checks on deserialized probabilities
        Policy::new(p.n_states(), p.n_actions(), p.probs().to_vec())?;
        Ok(file)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub env: EnvKind,
    pub episodes: usize,
    pub avg_per_step_reward: f64,
    /// Exact expectation of the same quantity.
    pub exact_per_step_reward: f64,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "env: {}", self.env)?;
        writeln!(f, "episodes: {}", self.episodes)?;
        writeln!(f, "avg_per_step_reward: {:.6}", self.avg_per_step_reward)?;
        write!(f, "exact_per_step_reward: {:.6}", self.exact_per_step_reward)
    }
}

pub fn eval_policy(config: &ExperimentConfig, file: &PolicyFile) -> Result<EvalReport> {
    let mut rng = derive_rng(config.master_seed, &format!("eval-cmd/{}", file.env.name()), 0);
    let avg = evaluate_policy(file.env, &file.policy, config.eval_episodes, config.max_episode_steps, &mut rng)?;
    let mdp = file.env.to_tabular_mdp(config.hyperparams.gamma)?;
    let exact = per_step_reward_exact(&mdp, &file.policy, config.max_episode_steps)?;
    Ok(EvalReport { env: file.env, episodes: config.eval_episodes, avg_per_step_reward: avg, exact_per_step_reward: exact })
}

/// Learns a greedy policy from a saved dataset with the same seeding as a
/// sweep run at `seed`.
pub fn learn_from_dataset(
    config: &ExperimentConfig,
    dataset: &Dataset,
    algorithm: Algorithm,
    planning_steps: usize,
    iterations: usize,
    seed: usize,
) -> Result<PolicyFile> {
    let (planning_steps, iterations) = if algorithm.uses_planning() { (planning_steps, iterations) } else { (0, 0) };
    let point = RunPoint {
        env: dataset.env(),
        epsilon: dataset.behavior_epsilon(),
        dataset_size: dataset.len(),
        algorithm,
        planning_steps,
        iterations,
    };
    let out = learn(config, &point, dataset, seed)?;
    Ok(PolicyFile { env: dataset.env(), policy: out.policy })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OraclePolicy {
    Uniform,
    Optimal,
    File(std::path::PathBuf),
}

impl std::str::FromStr for OraclePolicy {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "uniform" => OraclePolicy::Uniform,
            "optimal" => OraclePolicy::Optimal,
            path => OraclePolicy::File(path.into()),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub env: EnvKind,
    pub gamma: f64,
    pub n_states: usize,
    pub n_actions: usize,
    pub discounted_value: f64,
    pub normalized_value: f64,
    pub per_step_reward: f64,
    pub optimal_normalized_value: f64,
    pub optimal_per_step_reward: f64,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "env: {} ({} states, {} actions), gamma {}", self.env, self.n_states, self.n_actions, self.gamma)?;
        writeln!(f, "discounted value:          {:.6}", self.discounted_value)?;
        writeln!(f, "normalized value (1-g)*V:  {:.6}", self.normalized_value)?;
        writeln!(f, "per-step reward:           {:.6}", self.per_step_reward)?;
        writeln!(f, "optimal normalized value:  {:.6}", self.optimal_normalized_value)?;
        write!(f, "optimal per-step reward:   {:.6}", self.optimal_per_step_reward)
    }
}

pub fn oracle(env: EnvKind, gamma: f64, which: &OraclePolicy, max_steps: usize) -> Result<OracleReport> {
    let mdp = env.to_tabular_mdp(gamma)?;
    let optimal = greedy_policy(&value_iteration(&mdp, 1e-10, 1_000_000));
    let pi = match which {
        OraclePolicy::Uniform => Policy::uniform(env.n_states(), env.n_actions()),
        OraclePolicy::Optimal => optimal.clone(),
        OraclePolicy::File(path) => {
            let file = PolicyFile::load(path)?;
            if file.env != env {
                bail!("policy file is for {}, not {env}", file.env);
            }
            file.policy
        }
    };
    Ok(OracleReport {
        env,
        gamma,
        n_states: env.n_states(),
        n_actions: env.n_actions(),
        discounted_value: policy_value_exact(&mdp, &pi, ValueScale::Discounted)?,
        normalized_value: policy_value_exact(&mdp, &pi, ValueScale::PerUnit)?,
        per_step_reward: per_step_reward_exact(&mdp, &pi, max_steps)?,
        optimal_normalized_value: policy_value_exact(&mdp, &optimal, ValueScale::PerUnit)?,
        optimal_per_step_reward: per_step_reward_exact(&mdp, &optimal, max_steps)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cliff_walking_oracle() {
        let r = oracle(EnvKind::CliffWalking, 0.99, &OraclePolicy::Optimal, 100).unwrap();
        assert_eq!(r.per_step_reward, -1.0);
        assert_eq!(r.per_step_reward, r.optimal_per_step_reward);
        let u = oracle(EnvKind::CliffWalking, 0.99, &OraclePolicy::Uniform, 100).unwrap();
        assert!(u.per_step_reward < -1.0);
    }

    #[test]
    fn policy_file_round_trip_and_shape_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let file = PolicyFile { env: EnvKind::FrozenLake, policy: Policy::uniform(16, 4) };
        file.save(&path).unwrap();
        assert_eq!(PolicyFile::load(&path).unwrap(), file);
        let wrong = PolicyFile { env: EnvKind::Taxi, policy: Policy::uniform(16, 4) };
        wrong.save(&path).unwrap();
        assert!(PolicyFile::load(&path).is_err());
    }
}
