//! `gail`: train experts, sample demonstrations, run imitation learners and
//! sweeps from the command line.
//!
//! Results go to files or stdout as JSON; progress goes to stderr. On failure
//! the process prints one JSON object `{"error": kind, "message": text}` to
//! stderr and exits with status 1 (2 for usage errors).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use gail_core::envs::{canonical_name, GridConfig};
use gail_core::harness::{
    emit_plot, env_factory, evaluate, exact_match_run, gap_history_csv, read_scores_csv, run_experiment,
    sample_trajectories, train_expert, Algorithm, ExpertConfig, RunConfig,
};
use gail_core::imitation::{
    apprenticeship_train, behavioral_cloning, gail_train, write_metrics_csv, ApprenticeshipConfig, BcConfig, CostForm,
    ExpertDataset, GailConfig, IterMetrics,
};
use gail_core::irl::DualAscentConfig;
use gail_core::policy_opt::{ActionSelection, LearnerConfig, Policy, PolicyArch};
use gail_core::regularizers::CostClassKind;

#[derive(Parser)]
#[command(name = "gail", version, about = "Imitation learning by occupancy measure matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an expert policy with TRPO on the true cost.
    Expert {
        env: String,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value_t = 5000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output policy JSON.
        #[arg(long)]
        out: PathBuf,
        /// Also write per-iteration metrics CSV here.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Sample full trajectories from a policy into a JSONL dataset.
    Sample {
        env: String,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an imitation learner on a dataset.
    Imitate {
        env: String,
        #[arg(long, value_enum)]
        algo: Learner,
        #[arg(long)]
        dataset: PathBuf,
        /// Use only the first N trajectories.
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 300)]
        iters: usize,
        #[arg(long, default_value_t = 5000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hidden layer widths, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![64, 64])]
        hidden: Vec<usize>,
        /// Defaults to neg-log-one-minus-d on mountain car, log-d elsewhere.
        #[arg(long, value_enum)]
        cost_form: Option<Form>,
        /// Output directory for policy.json and metrics.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a policy's reward-unit return.
    Eval {
        env: String,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Take the most likely action instead of sampling.
        #[arg(long)]
        mode: bool,
    },
    /// Recover the gridworld expert by exact occupancy matching.
    ExactMatch {
        /// Grid size as WxH.
        #[arg(long, default_value = "5x5", value_parser = parse_grid)]
        grid: (usize, usize),
        #[arg(long, default_value_t = 0.1)]
        slip: f64,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        step: Option<f64>,
        /// Primal gap history CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a dataset-size sweep from a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a scores CSV as an SVG chart.
    Plot {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Learner {
    Bc,
    Fem,
    Gtal,
    Gail,
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    LogD,
    NegLogOneMinusD,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h: usize = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    if w == 0 || h == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((w, h))
}

fn check_env(name: &str) -> Result<()> {
    if canonical_name(name).is_none() {
        bail!("unknown environment {name:?}");
    }
    Ok(())
}

fn load_policy(path: &Path) -> Result<Policy> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Policy::from_json(&text)?)
}

fn progress(every: usize) -> impl FnMut(&IterMetrics) {
    move |m| {
        if m.iter % every == 0 {
            eprintln!("iter {} return {:.2} loss {:.4} kl {:.4}", m.iter, m.true_return, m.disc_loss, m.mean_kl);
        }
    }
}

fn print(value: serde_json::Value) {
    println!("{value}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Expert {
            env,
            iters,
            pairs,
            seed,
            out,
            metrics,
        } => {
            check_env(&env)?;
            let make = env_factory(&env, None)?;
            let mut cfg = ExpertConfig::for_env(&env);
            cfg.iters = iters.unwrap_or(cfg.iters);
            cfg.pairs_per_iter = pairs;
            cfg.seed = seed;
            let res = train_expert(&make, &cfg, &mut progress(10))?;
            std::fs::write(&out, res.policy.to_json()?)?;
            if let Some(p) = metrics {
                write_metrics_csv(&res.metrics, &p)?;
            }
            let last = res.metrics.last().map_or(f64::NAN, |m| m.true_return);
            print(json!({"policy": out, "iters": cfg.iters, "final_return": last}));
        }
        Command::Sample { env, policy, n, seed, out } => {
            check_env(&env)?;
            let source = policy.display().to_string();
            let policy = load_policy(&policy)?;
            let mut e = env_factory(&env, None)?()?;
            let ds = sample_trajectories(e.as_mut(), &policy, n, seed, &source)?;
            ds.write_jsonl(&out)?;
            let (mean, std) = ds.return_stats();
            print(json!({"dataset": out, "trajectories": ds.n_trajectories(), "pairs": ds.n_pairs(), "return_mean": mean, "return_std": std}));
        }
        Command::Imitate {
            env,
            algo,
            dataset,
            trajectories,
            lambda,
            iters,
            pairs,
            seed,
            hidden,
            cost_form,
            out,
        } => {
            check_env(&env)?;
            let make = env_factory(&env, None)?;
            let mut data = ExpertDataset::read_jsonl(&dataset)?;
            if let Some(n) = trajectories {
                data = data.take(n)?;
            }
            let arch = PolicyArch { hidden };
            let mut learner = LearnerConfig::default();
            learner.arch = arch.clone();
            learner.value.hidden = arch.hidden.clone();
            std::fs::create_dir_all(&out)?;
            let every = (iters / 10).max(1);
            let spec = make()?.spec().clone();
            let policy = match algo {
                Learner::Bc => {
                    let cfg = BcConfig { arch, seed, ..BcConfig::default() };
                    let res = behavioral_cloning(&spec, &data, &cfg)?;
                    eprintln!("bc: best epoch {}", res.best_epoch);
                    res.policy
                }
                Learner::Gail => {
                    let mut cfg = GailConfig {
                        lambda,
                        iters,
                        pairs_per_iter: pairs,
                        cost_form: match cost_form {
                            Some(Form::LogD) => CostForm::LogD,
                            Some(Form::NegLogOneMinusD) => CostForm::NegLogOneMinusD,
                            None => CostForm::for_env(&env),
                        },
                        learner,
                        seed,
                        ..GailConfig::default()
                    };
                    cfg.disc.hidden = arch.hidden.clone();
                    let res = gail_train(&make, &data, &cfg, &mut progress(every))?;
                    write_metrics_csv(&res.metrics, &out.join("metrics.csv"))?;
                    res.policy
                }
                Learner::Fem | Learner::Gtal => {
                    let kind = if matches!(algo, Learner::Fem) {
                        CostClassKind::LinearBall
                    } else {
                        CostClassKind::ConvexHull
                    };
                    let cfg = ApprenticeshipConfig {
                        iters,
                        pairs_per_iter: pairs,
                        learner,
                        seed,
                        ..ApprenticeshipConfig::default()
                    };
                    let res = apprenticeship_train(&make, &data, kind, &cfg, &mut progress(every))?;
                    write_metrics_csv(&res.metrics, &out.join("metrics.csv"))?;
                    res.policy
                }
            };
            let path = out.join("policy.json");
            std::fs::write(&path, policy.to_json()?)?;
            print(json!({"policy": path, "trajectories": data.n_trajectories()}));
        }
        Command::Eval {
            env,
            policy,
            episodes,
            seed,
            mode,
        } => {
            check_env(&env)?;
            let policy = load_policy(&policy)?;
            let mut e = env_factory(&env, None)?()?;
            let selection = if mode { ActionSelection::Mode } else { ActionSelection::Sample };
            let (mean, std) = evaluate(e.as_mut(), &policy, episodes, seed, selection)?;
            print(json!({"mean": mean, "std": std, "episodes": episodes}));
        }
        Command::ExactMatch {
            grid: (width, height),
            slip,
            gamma,
            iters,
            step,
            out,
        } => {
            let grid = GridConfig {
                width,
                height,
                slip,
                discount: gamma,
                ..GridConfig::default()
            };
            let mut dual = DualAscentConfig { step_size: step, ..DualAscentConfig::default() };
            dual.iters = iters.unwrap_or(dual.iters);
            let rep = exact_match_run(&grid, &dual)?;
            let csv = gap_history_csv(&rep.history)?;
            let summary = json!({
                "iterations": rep.iterations,
                "primal_gap": rep.primal_gap,
                "tolerance": rep.tolerance,
                "seconds": rep.seconds,
            });
            match out {
                Some(p) => {
                    std::fs::write(&p, csv)?;
                    print(summary);
                }
                None => {
                    print!("{csv}");
                    eprintln!("{summary}");
                }
            }
        }
        Command::Sweep { config, out } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = RunConfig::from_json(&text)?;
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            let dir = run_experiment(&cfg, &mut |line| eprintln!("{line}"))?;
            let algos: Vec<&str> = cfg.algorithms.iter().map(|a: &Algorithm| a.name()).collect();
            print(json!({"out_dir": dir, "algorithms": algos}));
        }
        Command::Plot { scores, out } => {
            let records = read_scores_csv(&scores)?;
            emit_plot(&records, &out)?;
            print(json!({"plot": out, "records": records.len()}));
        }
    }
    Ok(())
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    use gail_core::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::Config(_)) => "config",
        Some(E::Io(_)) => "io",
        Some(E::Json(_)) => "json",
        Some(E::Divergence { .. }) => "divergence",
        Some(E::NonConvergence { .. }) => "non_convergence",
        Some(_) => "domain",
        None if e.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "error",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"error": "usage", "message": e.to_string().trim()}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": error_kind(&e), "message": format!("{e:#}")}));
            ExitCode::FAILURE
        }
    }
}
