use std::path::Path;

use simudice_cli::inspect::{eval_policy, learn_from_dataset, PolicyFile};
use simudice_cli::results::read_csv;
use simudice_cli::runner::{build_dataset, dataset_ids, expand_points, run_one, train_behavior_sources};
use simudice_cli::{cmd_ablate, cmd_collect, cmd_compare, AblationKind, Algorithm, ExperimentConfig};
use simudice_core::algos::Formula;
use simudice_core::dataset::Dataset;
use simudice_core::envs::EnvKind;

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        environments: vec![EnvKind::FrozenLake, EnvKind::CliffWalking],
        epsilons: vec![0.1, 1.0],
        dataset_sizes: vec![60],
        algorithms: vec![Algorithm::SimuDice(Formula::F1), Algorithm::DynaQ, Algorithm::OfflineQ],
        planning_steps_list: vec![2, 4],
        iterations_list: vec![1],
        seeds: 2,
        eval_episodes: 20,
        ..Default::default()
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn collect_writes_one_file_per_dataset_and_is_reproducible() {
    let config = small_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let report = cmd_collect(&config, a.path()).unwrap();
    assert_eq!(report.files.len(), 2 * 2 * 2);
    assert_eq!(report.partial.len(), 2);
    cmd_collect(&config, b.path()).unwrap();
    assert_eq!(dir_bytes(&a.path().join("datasets")), dir_bytes(&b.path().join("datasets")));

    let d = Dataset::load(&a.path().join("datasets/CliffWalking_eps1_n60_seed1.jsonl")).unwrap();
    assert_eq!((d.env(), d.len(), d.behavior_epsilon()), (EnvKind::CliffWalking, 60, 1.0));
}

#[test]
fn compare_rows_cover_the_cross_product_deterministically() {
    let config = small_config();
    let dir = tempfile::tempdir().unwrap();
    cmd_collect(&config, dir.path()).unwrap();
    let out = cmd_compare(&config, dir.path()).unwrap();
    let points = expand_points(&config);
    // 2 envs × 2 ε × (2 PS SimuDICE + 2 PS DynaQ + 1 OfflineQ)
    assert_eq!(points.len(), 20);
    assert_eq!(out.rows.len(), points.len() * config.seeds);

    let text = std::fs::read_to_string(&out.csv_path).unwrap();
    assert!(text.starts_with("# schema=1\n"));
    assert_eq!(read_csv(&out.csv_path).unwrap(), out.rows);
    assert!(dir.path().join("summary.txt").is_file());

    for row in &out.rows {
        let (lo, hi) = match row.env.as_str() {
            "FrozenLake" => (0.0, 1.0),
            "CliffWalking" => (-100.0, 0.0),
            _ => (-10.0, 20.0),
        };
        assert!((lo..=hi).contains(&row.avg_per_step_reward), "{row:?}");
        match row.algorithm.as_str() {
            "OfflineQ" => assert!(row.formula.is_none() && row.q_change_norm.is_none() && row.planning_steps == 0),
            "DynaQ" => assert!(row.w_mean.is_none() && row.p_entropy.is_some()),
            _ => assert!(row.p_entropy.is_some() && row.formula.as_deref() == Some("F1")),
        }
    }

    let again = cmd_compare(&config, dir.path()).unwrap();
    let strip = |rows: &[simudice_cli::ResultRow]| {
        rows.iter().cloned().map(|mut r| {
            r.wall_time_ms = 0;
            r
        }).collect::<Vec<_>>()
    };
    assert_eq!(strip(&out.rows), strip(&again.rows));
}

#[test]
fn single_point_rerun_reproduces_its_sweep_row() {
    let config = small_config();
    let dir = tempfile::tempdir().unwrap();
    cmd_collect(&config, dir.path()).unwrap();
    let full = cmd_compare(&config, dir.path()).unwrap();

    let single = ExperimentConfig {
        environments: vec![EnvKind::CliffWalking],
        epsilons: vec![1.0],
        algorithms: vec![Algorithm::SimuDice(Formula::F1)],
        planning_steps_list: vec![4],
        ..config.clone()
    };
    let rows = cmd_compare(&single, dir.path()).unwrap().rows;
    assert_eq!(rows.len(), config.seeds);
    for r in rows {
        let m = full.rows.iter().find(|f| f.point() == r.point() && f.seed == r.seed).unwrap();
        assert_eq!(m.avg_per_step_reward, r.avg_per_step_reward);
        assert_eq!(m.q_change_norm, r.q_change_norm);
        assert_eq!(m.w_mean, r.w_mean);
    }
}

#[test]
fn in_memory_run_matches_file_based_run() {
    let config = ExperimentConfig { environments: vec![EnvKind::FrozenLake], epsilons: vec![0.4], ..small_config() };
    let dir = tempfile::tempdir().unwrap();
    cmd_collect(&config, dir.path()).unwrap();
    let rows = cmd_compare(&config, dir.path()).unwrap().rows;
    let sources = train_behavior_sources(&config).unwrap();
    let id = dataset_ids(&config)[1];
    let d = build_dataset(&config, &sources[&id.env], &id).unwrap();
    let point = expand_points(&config)[0];
    let row = run_one(&config, &point, &d, id.seed).unwrap();
    let m = rows.iter().find(|f| f.point() == row.point() && f.seed == row.seed).unwrap();
    assert_eq!(m.avg_per_step_reward, row.avg_per_step_reward);
}

#[test]
fn missing_datasets_are_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_compare(&small_config(), dir.path()).unwrap_err();
    assert!(err.to_string().contains("missing"), "{err}");
}

#[test]
fn ablation_uses_its_own_grid() {
    let mut config = small_config();
    config.ablation.environments = vec![EnvKind::FrozenLake];
    config.ablation.planning_steps = vec![0, 3];
    config.ablation.iterations = vec![1, 2];
    let dir = tempfile::tempdir().unwrap();
    cmd_collect(&config, dir.path()).unwrap();
    let ps = cmd_ablate(&config, AblationKind::PlanningSteps, dir.path()).unwrap();
    assert_eq!(ps.rows.len(), 2 * 2 * config.seeds);
    assert!(ps.csv_path.ends_with("ablate-planning-steps/results.csv"));
    let f = cmd_ablate(&config, AblationKind::Formulas, dir.path()).unwrap();
    assert_eq!(f.rows.len(), 2 * 3 * config.seeds);
    assert!(f.summary.contains("1/K"));
    let meta = std::fs::read_to_string(dir.path().join("ablate-formulas/metadata.json")).unwrap();
    assert!(meta.contains("1/K") && meta.contains("\"schema\": 1"));
    let it = cmd_ablate(&config, AblationKind::Iterations, dir.path()).unwrap();
    assert!(it.rows.iter().any(|r| r.iterations == 2));
}

#[test]
fn eval_learns_saves_and_reloads_a_policy() {
    let config = ExperimentConfig { environments: vec![EnvKind::FrozenLake], ..small_config() };
    let dir = tempfile::tempdir().unwrap();
    cmd_collect(&config, dir.path()).unwrap();
    let d = Dataset::load(&dir.path().join("datasets/FrozenLake_eps1_n60_seed0.jsonl")).unwrap();
    let file = learn_from_dataset(&config, &d, Algorithm::DynaQ, 4, 1, 0).unwrap();
    let path = dir.path().join("policy.json");
    file.save(&path).unwrap();
    let loaded = PolicyFile::load(&path).unwrap();
    assert_eq!(loaded, file);
    let report = eval_policy(&config, &loaded).unwrap();
    // deterministic env and policy: rollouts equal the exact value
    assert!((report.avg_per_step_reward - report.exact_per_step_reward).abs() < 1e-12);
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["compare.toml", "smoke.toml"] {
        let c = ExperimentConfig::load(&root.join(name)).unwrap();
        c.validate().unwrap();
    }
}

fn simudice(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_simudice")).args(args).output().unwrap()
}

#[test]
fn binary_help_lists_config_keys_and_oracle_runs() {
    let help = String::from_utf8(simudice(&["--help"]).stdout).unwrap();
    for key in ["environments", "dataset_sizes", "planning_steps_list", "master_seed", "[hyperparams]", "[ablation]"] {
        assert!(help.contains(key), "missing {key}");
    }
    let out = simudice(&["oracle", "--env", "CliffWalking", "--policy", "optimal"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("per-step reward:           -1.000000"));
    assert!(!simudice(&["oracle"]).status.success());
}

#[test]
fn binary_collect_then_compare_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml");
    let out = dir.path().to_str().unwrap();
    let common = ["--config", config.to_str().unwrap(), "--out", out, "--seeds", "3", "--env", "FrozenLake", "-q"];
    let run = |cmd: &str| {
        let mut args = vec![cmd];
        args.extend(common);
        simudice(&args)
    };
    assert!(run("collect").status.success());
    let o = run("compare");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("results.csv")).unwrap();
    // 1 env × 1 ε × 1 size × (SimuDICE + DynaQ + OfflineQ) × 3 seeds
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.env == "FrozenLake"));
}
