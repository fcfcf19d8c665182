use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use simudice_cli::config::CONFIG_KEYS_HELP;
use simudice_cli::inspect::{eval_policy, learn_from_dataset, oracle, OraclePolicy, PolicyFile};
use simudice_cli::runner::ablation_config;
use simudice_cli::{cmd_ablate, cmd_collect, cmd_compare, AblationKind, Algorithm, ExperimentConfig};
use simudice_core::dataset::Dataset;
use simudice_core::envs::EnvKind;

#[derive(Parser)]
#[command(name = "simudice", version, about = "Offline RL experiments: SimuDICE, offline Dyna-Q, offline Q-learning")]
#[command(after_long_help = CONFIG_KEYS_HELP)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (datasets/, results.csv, summary.txt)
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seeds per config point
    #[arg(long, global = true)]
    seeds: Option<usize>,
    #[arg(long, global = true)]
    master_seed: Option<u64>,
    /// Restrict to these environments (comma separated)
    #[arg(long, global = true, value_delimiter = ',')]
    env: Vec<EnvKind>,
    /// Only print warnings and errors
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train behaviour policies and write one dataset file per (env, epsilon, size, seed)
    Collect,
    /// Run the full algorithm comparison sweep
    Compare {
        /// Collect datasets first
        #[arg(long)]
        collect: bool,
    },
    /// Run an ablation study on the ablation environments
    Ablate {
        /// planning-steps, formulas, iterations or all
        which: String,
        #[arg(long)]
        collect: bool,
    },
    /// Evaluate a saved policy, or learn one from a dataset and evaluate it
    Eval {
        #[arg(long, conflicts_with_all = ["dataset", "algorithm"])]
        policy: Option<PathBuf>,
        #[arg(long, requires = "algorithm")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        algorithm: Option<Algorithm>,
        #[arg(long, default_value_t = 10)]
        planning_steps: usize,
        #[arg(long, default_value_t = 1)]
        iterations: usize,
        /// Seed index used for learning
        #[arg(long, default_value_t = 0)]
        seed: usize,
        #[arg(long)]
        save_policy: Option<PathBuf>,
    },
    /// Print exact oracle values for an environment and policy
    Oracle {
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        /// uniform, optimal, or a policy file
        #[arg(long, default_value = "optimal")]
        policy: OraclePolicy,
    },
}

fn load_config(g: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut c = match &g.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seeds {
        c.seeds = s;
    }
    if let Some(m) = g.master_seed {
        c.master_seed = m;
    }
    if !g.env.is_empty() {
        c.environments = g.env.clone();
        c.ablation.environments = g.env.clone();
    }
    c.validate()?;
    Ok(c)
}

fn print(quiet: bool, text: &str) {
    if !quiet {
        println!("{text}");
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let g = &cli.global;
    let level = if g.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let config = load_config(g)?;

    match cli.command {
        Command::Collect => {
            let report = cmd_collect(&config, &g.out)?;
            for r in &report.partial {
                let status = if r.within_tolerance { "ok" } else { "UNREACHED" };
                print(g.quiet, &format!("{}: target {} achieved {:.4} [{status}]", r.env, r.target, r.achieved));
            }
            print(g.quiet, &format!("{} dataset files", report.files.len()));
        }
        Command::Compare { collect } => {
            if collect {
                cmd_collect(&config, &g.out)?;
            }
            let out = cmd_compare(&config, &g.out)?;
            print(g.quiet, &out.summary);
            print(g.quiet, &format!("wrote {}", out.csv_path.display()));
        }
        Command::Ablate { which, collect } => {
            let kinds = if which == "all" { AblationKind::ALL.to_vec() } else { vec![which.parse()?] };
            for kind in kinds {
                if collect {
                    cmd_collect(&ablation_config(&config, kind), &g.out)?;
                }
                let out = cmd_ablate(&config, kind, &g.out)?;
                print(g.quiet, &format!("== {kind} ==\n{}", out.summary));
                print(g.quiet, &format!("wrote {}", out.csv_path.display()));
            }
        }
        Command::Eval { policy, dataset, algorithm, planning_steps, iterations, seed, save_policy } => {
            let file = match (policy, dataset, algorithm) {
                (Some(path), _, _) => PolicyFile::load(&path)?,
                (None, Some(path), Some(alg)) => {
                    let d = Dataset::load(&path)?;
                    learn_from_dataset(&config, &d, alg, planning_steps, iterations, seed)?
                }
                _ => bail!("eval needs --policy PATH or --dataset PATH --algorithm NAME"),
            };
            if let Some(path) = save_policy {
                file.save(&path)?;
            }
            println!("{}", eval_policy(&config, &file)?);
        }
        Command::Oracle { gamma, policy } => {
            let [env] = g.env[..] else {
                bail!("oracle needs exactly one --env");
            };
            println!("{}", oracle(env, gamma, &policy, config.max_episode_steps)?);
        }
    }
    Ok(())
}
