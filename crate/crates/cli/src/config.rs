use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use simudice_core::algos::{Formula, Hyperparams};
use simudice_core::envs::EnvKind;

/// Every key accepted in a config file, for `--help`.
pub const CONFIG_KEYS_HELP: &str = "\
Config file keys (TOML; all optional, CLI flags override):
  environments        list of env names              [\"Taxi\", \"FrozenLake\", \"CliffWalking\"]
  epsilons            behaviour-policy epsilons      [0.1, 0.4, 0.7]
  dataset_sizes       dataset sizes in timesteps     [500]
  algorithms          SimuDICE-F1|F2|F3|Uniform, DynaQ, OfflineQ
                                                     [\"SimuDICE-F1\", \"DynaQ\", \"OfflineQ\"]
  planning_steps_list planning steps per record      [10, 20]
  iterations_list     outer iterations               [1]
  seeds               seeds per config point         20
  master_seed         root of every random stream    0
  eval_episodes       evaluation rollouts per run    500
  max_episode_steps   episode cap                    100
  partial_tolerance   behaviour-policy target band   0.05
  run_time_limit_s    abort a run after this long    60
  [hyperparams]       alpha, gamma, lambda, replay_epochs, ridge
                      (planning_steps / iterations / formula come from the lists above)
  [ablation]          environments ([\"Taxi\"]), alpha (0.05),
                      planning_steps ([0,5,10,20,40]), iterations ([1,2,4,8]),
                      formulas ([\"F1\",\"F2\",\"F3\"]), base_planning_steps (10)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    SimuDice(Formula),
    DynaQ,
    OfflineQ,
}

impl Algorithm {
    pub fn uses_planning(self) -> bool {
        !matches!(self, Algorithm::OfflineQ)
    }

    /// Formula column value for result rows.
    pub fn formula(self) -> Option<Formula> {
        match self {
            Algorithm::SimuDice(f) => Some(f),
            Algorithm::DynaQ => Some(Formula::Uniform),
            Algorithm::OfflineQ => None,
        }
    }

    pub fn family(self) -> &'static str {
        match self {
            Algorithm::SimuDice(_) => "SimuDICE",
            Algorithm::DynaQ => "DynaQ",
            Algorithm::OfflineQ => "OfflineQ",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::SimuDice(formula) => write!(f, "SimuDICE-{formula}"),
            other => f.write_str(other.family()),
        }
    }
}

impl FromStr for Algorithm {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "dynaq" | "dyna-q" => Ok(Algorithm::DynaQ),
            "offlineq" | "offline-q" | "qlearning" => Ok(Algorithm::OfflineQ),
            "simudice" => Ok(Algorithm::SimuDice(Formula::F1)),
            _ => match lower.strip_prefix("simudice-") {
                Some(f) => Ok(Algorithm::SimuDice(f.parse()?)),
                None => bail!("unknown algorithm '{s}'"),
            },
        }
    }
}

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperparamOverrides {
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub replay_epochs: usize,
    pub ridge: f64,
}

impl Default for HyperparamOverrides {
    fn default() -> Self {
        let h = Hyperparams::default();
        Self { alpha: h.alpha, gamma: h.gamma, lambda: h.lambda, replay_epochs: h.replay_epochs, ridge: h.ridge }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub environments: Vec<EnvKind>,
    pub alpha: f64,
    pub planning_steps: Vec<usize>,
    pub iterations: Vec<usize>,
    pub formulas: Vec<Formula>,
    pub base_planning_steps: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            environments: vec![EnvKind::Taxi],
            alpha: 0.05,
            planning_steps: vec![0, 5, 10, 20, 40],
            iterations: vec![1, 2, 4, 8],
            formulas: vec![Formula::F1, Formula::F2, Formula::F3],
            base_planning_steps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environments: Vec<EnvKind>,
    pub epsilons: Vec<f64>,
    pub dataset_sizes: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub planning_steps_list: Vec<usize>,
    pub iterations_list: Vec<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    pub eval_episodes: usize,
    pub max_episode_steps: usize,
    pub partial_tolerance: f64,
    pub run_time_limit_s: f64,
    pub hyperparams: HyperparamOverrides,
    pub ablation: AblationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            environments: EnvKind::ALL.to_vec(),
            epsilons: vec![0.1, 0.4, 0.7],
            dataset_sizes: vec![500],
            algorithms: vec![Algorithm::SimuDice(Formula::F1), Algorithm::DynaQ, Algorithm::OfflineQ],
            planning_steps_list: vec![10, 20],
            iterations_list: vec![1],
            seeds: 20,
            master_seed: 0,
            eval_episodes: 500,
            max_episode_steps: 100,
            partial_tolerance: 0.05,
            run_time_limit_s: 60.0,
            hyperparams: HyperparamOverrides::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("environments", self.environments.is_empty()),
            ("epsilons", self.epsilons.is_empty()),
            ("dataset_sizes", self.dataset_sizes.is_empty()),
            ("algorithms", self.algorithms.is_empty()),
            ("planning_steps_list", self.planning_steps_list.is_empty()),
            ("iterations_list", self.iterations_list.is_empty()),
        ];
        for (name, empty) in lists {
            if empty {
                bail!("config list '{name}' must not be empty");
            }
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            bail!("epsilon {e} outside [0, 1]");
        }
        if self.dataset_sizes.contains(&0) {
            bail!("dataset sizes must be positive");
        }
        if self.iterations_list.contains(&0) {
            bail!("iterations must be at least 1");
        }
        if self.seeds == 0 || self.eval_episodes == 0 || self.max_episode_steps == 0 {
            bail!("seeds, eval_episodes and max_episode_steps must be positive");
        }
        self.hyperparams_for(10, 1, Formula::F1).validate()?;
        Ok(())
    }

    pub fn hyperparams_for(&self, planning_steps: usize, iterations: usize, formula: Formula) -> Hyperparams {
        let o = &self.hyperparams;
        Hyperparams {
            alpha: o.alpha,
            gamma: o.gamma,
            planning_steps,
            iterations,
            lambda: o.lambda,
            replay_epochs: o.replay_epochs,
            formula,
            ridge: o.ridge,
        }
    }
}
