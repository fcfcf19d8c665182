use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use simudice_core::algos::{
    evaluate_policy, offline_dyna_q, offline_q_baseline, run_simudice, Formula, LearnerOutput,
};
use simudice_core::dataset::{
    collect_dataset, partial_policy_target, train_partial_policy, Dataset, PartialTrainingConfig,
};
use simudice_core::envs::EnvKind;
use simudice_core::mdp::{epsilon_greedy_policy, QTable};
use simudice_core::rng::{derive_rng, derive_seed};

use crate::config::{Algorithm, ExperimentConfig};
use crate::results::{sort_rows, ResultRow};

pub fn dataset_file_name(env: EnvKind, epsilon: f64, size: usize, seed: usize) -> String {
    format!("{}_eps{}_n{}_seed{}.jsonl", env.name(), epsilon, size, seed)
}

pub fn datasets_dir(out: &Path) -> PathBuf {
    out.join("datasets")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetId {
    pub env: EnvKind,
    pub epsilon: f64,
    pub size: usize,
    pub seed: usize,
}

impl DatasetId {
    fn key(&self) -> String {
        format!("{}/eps{}/n{}", self.env.name(), self.epsilon, self.size)
    }

    fn map_key(&self) -> (EnvKind, u64, usize, usize) {
        (self.env, self.epsilon.to_bits(), self.size, self.seed)
    }

    pub fn file_name(&self) -> String {
        dataset_file_name(self.env, self.epsilon, self.size, self.seed)
    }
}

pub fn dataset_ids(config: &ExperimentConfig) -> Vec<DatasetId> {
    let mut ids = Vec::new();
    for &env in &config.environments {
        for &epsilon in &config.epsilons {
            for &size in &config.dataset_sizes {
                for seed in 0..config.seeds {
                    ids.push(DatasetId { env, epsilon, size, seed });
                }
            }
        }
    }
    ids
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialReport {
    pub env: EnvKind,
    pub target: f64,
    pub achieved: f64,
    pub within_tolerance: bool,
    pub training_steps: usize,
}

#[derive(Debug, Clone)]
pub struct BehaviorSource {
    pub report: PartialReport,
    pub q: QTable,
}

/// Trains one partial policy per environment from the master seed.
pub fn train_behavior_sources(config: &ExperimentConfig) -> Result<HashMap<EnvKind, BehaviorSource>> {
    let cfg = PartialTrainingConfig { eval_episodes: config.eval_episodes, ..Default::default() };
    config
        .environments
        .par_iter()
        .map(|&env| {
            let target = partial_policy_target(env);
            let mut rng = derive_rng(config.master_seed, &format!("partial/{}", env.name()), 0);
            let p = train_partial_policy(env, target, config.partial_tolerance, &cfg, &mut rng)?;
            let report = PartialReport {
                env,
                target,
                achieved: p.achieved,
                within_tolerance: p.within_tolerance,
                training_steps: p.training_steps,
            };
            Ok((env, BehaviorSource { report, q: p.q }))
        })
        .collect()
}

pub fn build_dataset(config: &ExperimentConfig, source: &BehaviorSource, id: &DatasetId) -> Result<Dataset> {
    let policy = epsilon_greedy_policy(&source.q, id.epsilon)?;
    let seed = derive_seed(config.master_seed, &format!("dataset/{}", id.key()), id.seed as u64);
    Ok(collect_dataset(id.env, &policy, id.size, id.epsilon, seed)?)
}

#[derive(Debug, Clone)]
pub struct CollectReport {
    pub partial: Vec<PartialReport>,
    pub files: Vec<PathBuf>,
}

pub fn cmd_collect(config: &ExperimentConfig, out: &Path) -> Result<CollectReport> {
    config.validate()?;
    let dir = datasets_dir(out);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let sources = train_behavior_sources(config)?;
    let mut partial: Vec<PartialReport> = config.environments.iter().map(|e| sources[e].report.clone()).collect();
    partial.dedup_by_key(|r| r.env);
    for r in &partial {
        if r.within_tolerance {
            info!("{}: partial policy at {:.4} (target {})", r.env, r.achieved, r.target);
        } else {
            warn!("{}: target {} unreachable, closest checkpoint {:.4}", r.env, r.target, r.achieved);
        }
    }
    let files = dataset_ids(config)
        .par_iter()
        .map(|id| {
            let d = build_dataset(config, &sources[&id.env], id)?;
            let path = dir.join(id.file_name());
            d.save(&path)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    let report_path = dir.join("partial_policies.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&partial)? + "\n")?;
    info!("wrote {} dataset files to {}", files.len(), dir.display());
    Ok(CollectReport { partial, files })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPoint {
    pub env: EnvKind,
    pub epsilon: f64,
    pub dataset_size: usize,
    pub algorithm: Algorithm,
    /// 0 for OfflineQ.
    pub planning_steps: usize,
    /// 0 for OfflineQ.
    pub iterations: usize,
}

impl RunPoint {
    pub fn key(&self) -> String {
        format!(
            "{}/eps{}/n{}/{}/ps{}/it{}",
            self.env.name(),
            self.epsilon,
            self.dataset_size,
            self.algorithm,
            self.planning_steps,
            self.iterations
        )
    }

    pub fn dataset(&self, seed: usize) -> DatasetId {
        DatasetId { env: self.env, epsilon: self.epsilon, size: self.dataset_size, seed }
    }
}

/// The config cross-product. OfflineQ ignores the planning and iteration
/// axes and contributes one point per (env, ε, size).
pub fn expand_points(config: &ExperimentConfig) -> Vec<RunPoint> {
    let mut points = Vec::new();
    for &env in &config.environments {
        for &epsilon in &config.epsilons {
            for &dataset_size in &config.dataset_sizes {
                for &algorithm in &config.algorithms {
                    let base = RunPoint { env, epsilon, dataset_size, algorithm, planning_steps: 0, iterations: 0 };
                    if !algorithm.uses_planning() {
                        points.push(base);
                        continue;
                    }
                    for &planning_steps in &config.planning_steps_list {
                        for &iterations in &config.iterations_list {
                            points.push(RunPoint { planning_steps, iterations, ..base });
                        }
                    }
                }
            }
        }
    }
    points
}

pub fn learn(config: &ExperimentConfig, point: &RunPoint, d: &Dataset, seed: usize) -> Result<LearnerOutput> {
    let formula = point.algorithm.formula().unwrap_or(Formula::Uniform);
    let h = config.hyperparams_for(point.planning_steps, point.iterations.max(1), formula);
    let mut rng = derive_rng(config.master_seed, &format!("learn/{}", point.key()), seed as u64);
    let out = match point.algorithm {
        Algorithm::SimuDice(_) => run_simudice(d, &h, &mut rng)?,
        Algorithm::DynaQ => offline_dyna_q(d, &h, &mut rng)?,
        Algorithm::OfflineQ => offline_q_baseline(d, &h, &mut rng)?,
    };
    Ok(out)
}

/// One (config point × seed) run: learn, then evaluate the greedy policy in
/// the real environment.
pub fn run_one(config: &ExperimentConfig, point: &RunPoint, d: &Dataset, seed: usize) -> Result<ResultRow> {
    let started = Instant::now();
    let limit = config.run_time_limit_s;
    let check = |stage: &str| -> Result<()> {
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed > limit {
            bail!("run {} seed {seed} exceeded the {limit} s budget during {stage} ({elapsed:.1} s)", point.key());
        }
        Ok(())
    };
    let out = learn(config, point, d, seed)?;
    check("learning")?;
    // Evaluation streams depend on the dataset only, so algorithms sharing a
    // dataset are evaluated on the same start states.
    let mut eval_rng = derive_rng(config.master_seed, &format!("eval/{}", point.dataset(seed).key()), seed as u64);
    let reward = evaluate_policy(point.env, &out.policy, config.eval_episodes, config.max_episode_steps, &mut eval_rng)?;
    check("evaluation")?;
    let last = out.diagnostics.last();
    let weights = last.and_then(|l| l.weights);
    Ok(ResultRow {
        env: point.env.name().to_string(),
        epsilon: point.epsilon,
        dataset_size: point.dataset_size,
        algorithm: point.algorithm.to_string(),
        formula: point.algorithm.formula().map(|f| f.to_string()),
        planning_steps: point.planning_steps,
        iterations: point.iterations,
        seed,
        avg_per_step_reward: reward,
        wall_time_ms: started.elapsed().as_millis() as u64,
        w_min: weights.map(|w| w.min),
        w_mean: weights.map(|w| w.mean),
        w_max: weights.map(|w| w.max),
        p_entropy: last.map(|l| l.sampling_entropy),
        q_change_norm: last.map(|l| l.q_change_norm),
    })
}

pub fn load_datasets(config: &ExperimentConfig, out: &Path) -> Result<HashMap<(EnvKind, u64, usize, usize), Dataset>> {
    let dir = datasets_dir(out);
    let ids = dataset_ids(config);
    let missing: Vec<String> =
        ids.iter().map(DatasetId::file_name).filter(|name| !dir.join(name).is_file()).collect();
    if !missing.is_empty() {
        let shown = missing.iter().take(5).cloned().collect::<Vec<_>>().join(", ");
        bail!(
            "{} dataset file(s) missing in {} (e.g. {shown}); run `simudice collect` with the same config first",
            missing.len(),
            dir.display()
        );
    }
    ids.par_iter()
        .map(|id| {
            let d = Dataset::load(&dir.join(id.file_name()))?;
            if d.env() != id.env || d.len() != id.size {
                bail!("{} does not match its name (env {}, {} records)", id.file_name(), d.env(), d.len());
            }
            Ok((id.map_key(), d))
        })
        .collect()
}

/// Runs every (point × seed) task in parallel and returns canonically sorted
/// rows.
pub fn run_sweep(config: &ExperimentConfig, out: &Path) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let datasets = load_datasets(config, out)?;
    let points = expand_points(config);
    let tasks: Vec<(RunPoint, usize)> =
        points.iter().flat_map(|p| (0..config.seeds).map(move |s| (*p, s))).collect();
    info!("running {} tasks ({} points × {} seeds)", tasks.len(), points.len(), config.seeds);
    let mut rows = tasks
        .par_iter()
        .map(|(point, seed)| {
            let d = &datasets[&point.dataset(*seed).map_key()];
            run_one(config, point, d, *seed).with_context(|| format!("run {} seed {seed}", point.key()))
        })
        .collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationKind {
    PlanningSteps,
    Formulas,
    Iterations,
}

impl AblationKind {
    pub const ALL: [AblationKind; 3] = [AblationKind::PlanningSteps, AblationKind::Formulas, AblationKind::Iterations];

    pub fn name(self) -> &'static str {
        match self {
            AblationKind::PlanningSteps => "planning-steps",
            AblationKind::Formulas => "formulas",
            AblationKind::Iterations => "iterations",
        }
    }
}

impl fmt::Display for AblationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "planning-steps" | "ps" => Ok(AblationKind::PlanningSteps),
            "formulas" => Ok(AblationKind::Formulas),
            "iterations" => Ok(AblationKind::Iterations),
            _ => bail!("unknown ablation '{s}' (planning-steps, formulas, iterations)"),
        }
    }
}

/// The sweep config for one ablation study, derived from `base`.
pub fn ablation_config(base: &ExperimentConfig, which: AblationKind) -> ExperimentConfig {
    let a = &base.ablation;
    let mut c = base.clone();
    c.environments = a.environments.clone();
    c.hyperparams.alpha = a.alpha;
    c.iterations_list = vec![1];
    c.planning_steps_list = vec![a.base_planning_steps];
    c.algorithms = vec![Algorithm::SimuDice(Formula::F1)];
    match which {
        AblationKind::PlanningSteps => c.planning_steps_list = a.planning_steps.clone(),
        AblationKind::Formulas => c.algorithms = a.formulas.iter().map(|&f| Algorithm::SimuDice(f)).collect(),
        AblationKind::Iterations => c.iterations_list = a.iterations.clone(),
    }
    c
}

pub fn ablation_dir(out: &Path, which: AblationKind) -> PathBuf {
    out.join(format!("ablate-{which}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offline_q_collapses_planning_axes() {
        let config = ExperimentConfig {
            environments: vec![EnvKind::Taxi, EnvKind::FrozenLake],
            epsilons: vec![0.1, 0.4],
            dataset_sizes: vec![100],
            algorithms: vec![Algorithm::SimuDice(Formula::F1), Algorithm::DynaQ, Algorithm::OfflineQ],
            planning_steps_list: vec![5, 10, 20],
            iterations_list: vec![1, 2],
            ..Default::default()
        };
        let points = expand_points(&config);
        assert_eq!(points.len(), 2 * 2 * (6 + 6 + 1));
        let keys: std::collections::HashSet<_> = points.iter().map(RunPoint::key).collect();
        assert_eq!(keys.len(), points.len());
    }

    #[test]
    fn ablation_configs() {
        let base = ExperimentConfig::default();
        let ps = ablation_config(&base, AblationKind::PlanningSteps);
        assert_eq!(ps.environments, vec![EnvKind::Taxi]);
        assert_eq!(ps.hyperparams.alpha, 0.05);
        assert_eq!(expand_points(&ps).len(), 3 * 5);
        let f = ablation_config(&base, AblationKind::Formulas);
        assert_eq!(expand_points(&f).len(), 3 * 3);
        assert!(expand_points(&f).iter().all(|p| p.planning_steps == 10));
        let it = ablation_config(&base, AblationKind::Iterations);
        assert_eq!(it.iterations_list, vec![1, 2, 4, 8]);
        for k in AblationKind::ALL {
            assert_eq!(k.name().parse::<AblationKind>().unwrap(), k);
        }
    }

    #[test]
    fn dataset_names() {
        assert_eq!(dataset_file_name(EnvKind::FrozenLake, 0.4, 500, 3), "FrozenLake_eps0.4_n500_seed3.jsonl");
        assert_eq!(dataset_file_name(EnvKind::Taxi, 1.0, 100, 0), "Taxi_eps1_n100_seed0.jsonl");
    }
}
