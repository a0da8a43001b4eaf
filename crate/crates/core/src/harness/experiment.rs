//! Sweeps over algorithms x dataset sizes x seeds.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! config.json                 resolved configuration
//! expert.json, dataset.jsonl  expert policy and demonstrations
//! references.json             random and expert evaluation returns
//! cells/<algo>-n<N>-s<seed>/  metrics.csv, policy.json, eval.json or error.txt
//! scores.csv, scores.svg      aggregated scores
//! exact-match/, tabular-gail/ tabular runs (gridworld only)
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expert::{train_expert, ExpertConfig};
use super::plot::emit_plot;
use super::{env_factory, evaluation_returns, sample_trajectories, scaled_score, ScoreRecord, DEFAULT_EVAL_EPISODES};
use crate::envs::{canonical_name, tabularize, GridConfig};
use crate::error::{Error, Result};
use crate::imitation::{
    apprenticeship_train, behavioral_cloning, gail_train, mean_std, tabular_gail_oracle_with, write_metrics_csv,
    ApprenticeshipConfig, BcConfig, CostForm, DiscriminatorConfig, ExpertDataset, GailConfig, TabularGailConfig,
    TabularGailOutcome,
};
use crate::irl::{rl_after_irl_with, DualAscentConfig};
use crate::mdp::occupancy_measure;
use crate::policy_opt::{ActionSelection, EnvFactory, LearnerConfig, Policy, PolicyArch};
use crate::regularizers::CostClassKind;
use crate::soft_rl::{soft_value_iteration, DEFAULT_MAX_ITERS, DEFAULT_TOL};

/// Evaluation episodes use this base seed in every cell.
const EVAL_SEED: u64 = 0xE7A1_5EED;
/// Seed of the random-initialization reference policy.
const RANDOM_REF_SEED: u64 = 0x0BAD_5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Bc,
    Fem,
    Gtal,
    Gail,
    ExactMatch,
    TabularGail,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Bc,
        Algorithm::Fem,
        Algorithm::Gtal,
        Algorithm::Gail,
        Algorithm::ExactMatch,
        Algorithm::TabularGail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bc => "bc",
            Algorithm::Fem => "fem",
            Algorithm::Gtal => "gtal",
            Algorithm::Gail => "gail",
            Algorithm::ExactMatch => "exact-match",
            Algorithm::TabularGail => "tabular-gail",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }

    /// Runs on the exact gridworld model rather than from samples.
    pub fn is_tabular(self) -> bool {
        matches!(self, Algorithm::ExactMatch | Algorithm::TabularGail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub env: String,
    pub algorithms: Vec<Algorithm>,
    /// Expert demonstrations; sampled from the expert when absent.
    pub dataset: Option<PathBuf>,
    /// Expert policy; trained in the run when absent.
    pub expert_policy: Option<PathBuf>,
    /// Dataset sizes to sweep; each cell uses the first `n` trajectories.
    pub trajectories: Vec<usize>,
    pub lambda: f64,
    pub iters: usize,
    pub pairs_per_iter: usize,
    pub seeds: Vec<u64>,
    /// Hidden layers of the policy, value function and discriminator.
    pub arch: PolicyArch,
    pub out_dir: PathBuf,
    pub eval_episodes: usize,
    pub dataset_seed: u64,
    pub disc: DiscriminatorConfig,
    /// Defaults per environment, see [`CostForm::for_env`].
    pub cost_form: Option<CostForm>,
    pub learner: LearnerConfig,
    pub bc: BcConfig,
    pub expert: Option<ExpertConfig>,
    pub grid: GridConfig,
    pub dual: DualAscentConfig,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "cartpole".into(),
            algorithms: vec![Algorithm::Gail],
            dataset: None,
            expert_policy: None,
            trajectories: vec![1, 4, 7, 10],
            lambda: 0.0,
            iters: 300,
            pairs_per_iter: 5000,
            seeds: vec![0, 1, 2],
            arch: PolicyArch::default(),
            out_dir: PathBuf::from("runs/default"),
            eval_episodes: DEFAULT_EVAL_EPISODES,
            dataset_seed: 12345,
            disc: DiscriminatorConfig::default(),
            cost_form: None,
            learner: LearnerConfig::default(),
            bc: BcConfig::default(),
            expert: None,
            grid: GridConfig::default(),
            dual: DualAscentConfig::default(),
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let env = canonical_name(&self.env).ok_or_else(|| Error::Config(format!("unknown environment {:?}", self.env)))?;
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        if self.algorithms.iter().any(|a| a.is_tabular()) && env != "gridworld" {
            return Err(Error::Config("exact-match and tabular-gail need the gridworld".into()));
        }
        if self.algorithms.iter().any(|a| !a.is_tabular()) {
            if self.trajectories.is_empty() || self.trajectories.contains(&0) {
                return Err(Error::Config("trajectory counts must be non-empty and positive".into()));
            }
            if self.iters == 0 || self.pairs_per_iter == 0 || self.eval_episodes == 0 {
                return Err(Error::Config("iters, pairs_per_iter and eval_episodes must be positive".into()));
            }
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Learner settings with the shared architecture applied.
    pub fn learner_config(&self) -> LearnerConfig {
        let mut l = self.learner.clone();
        l.arch = self.arch.clone();
        l.value.hidden = self.arch.hidden.clone();
        l
    }

    pub fn gail_config(&self, seed: u64) -> GailConfig {
        GailConfig {
            lambda: self.lambda,
            iters: self.iters,
            pairs_per_iter: self.pairs_per_iter,
            disc: DiscriminatorConfig {
                hidden: self.arch.hidden.clone(),
                ..self.disc.clone()
            },
            disc_steps: 1,
            cost_form: self.cost_form.unwrap_or_else(|| CostForm::for_env(&self.env)),
            learner: self.learner_config(),
            workers: self.workers,
            seed,
        }
    }

    pub fn apprenticeship_config(&self, seed: u64) -> ApprenticeshipConfig {
        ApprenticeshipConfig {
            iters: self.iters,
            pairs_per_iter: self.pairs_per_iter,
            learner: self.learner_config(),
            workers: self.workers,
            seed,
        }
    }

    pub fn bc_config(&self, seed: u64) -> BcConfig {
        BcConfig {
            arch: self.arch.clone(),
            seed,
            ..self.bc.clone()
        }
    }

    pub fn expert_config(&self) -> ExpertConfig {
        let mut e = self.expert.clone().unwrap_or_else(|| {
            let mut e = ExpertConfig::for_env(&self.env);
            e.learner = self.learner_config();
            e
        });
        e.workers = self.workers;
        e
    }
}

/// Result of exact occupancy matching on the gridworld.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactMatchReport {
    pub grid: GridConfig,
    pub iterations: usize,
    /// Final `||rho_pi - rho_E||_1`.
    pub primal_gap: f64,
    /// `1e-3 / (1 - gamma)`.
    pub tolerance: f64,
    pub seconds: f64,
    pub history: Vec<(usize, f64)>,
}

/// Recovers the soft-optimal gridworld expert from its occupancy measure by
/// dual ascent followed by soft RL.
pub fn exact_match_run(grid: &GridConfig, dual: &DualAscentConfig) -> Result<ExactMatchReport> {
    let t0 = Instant::now();
    let mdp = tabularize(grid)?;
    let cost = mdp.true_cost().ok_or_else(|| Error::InvalidMdp("gridworld without cost".into()))?;
    let expert = soft_value_iteration(&mdp, cost, DEFAULT_TOL, DEFAULT_MAX_ITERS)?.policy;
    let rho_e = occupancy_measure(&mdp, &expert)?;
    let (policy, state) = rl_after_irl_with(&mdp, &rho_e, dual)?;
    let gap = occupancy_measure(&mdp, &policy)?.l1_distance(&rho_e);
    Ok(ExactMatchReport {
        grid: grid.clone(),
        iterations: state.iterate,
        primal_gap: gap,
        tolerance: 1e-3 * mdp.total_mass(),
        seconds: t0.elapsed().as_secs_f64(),
        history: state.history,
    })
}

/// Exact GAIL against the soft-optimal gridworld expert.
pub fn tabular_gail_run(grid: &GridConfig, cfg: &TabularGailConfig) -> Result<TabularGailOutcome> {
    let mdp = tabularize(grid)?;
    let cost = mdp.true_cost().ok_or_else(|| Error::InvalidMdp("gridworld without cost".into()))?;
    let expert = soft_value_iteration(&mdp, cost, DEFAULT_TOL, DEFAULT_MAX_ITERS)?.policy;
    let rho_e = occupancy_measure(&mdp, &expert)?;
    tabular_gail_oracle_with(&mdp, &rho_e, cfg)
}

fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Serialize)]
struct GapRow {
    iterate: usize,
    primal_gap: f64,
}

/// `iterate,primal_gap` rows of a dual ascent history.
pub fn gap_history_csv(history: &[(usize, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for &(iterate, primal_gap) in history {
        w.serialize(GapRow { iterate, primal_gap }).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn scores_csv(records: &[ScoreRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct EvalRecord {
    mean: f64,
    std: f64,
    returns: Vec<f64>,
}

#[derive(Serialize)]
struct References {
    random_mean: f64,
    random_std: f64,
    expert_mean: f64,
    expert_std: f64,
    episodes: usize,
}

struct Setup {
    dataset: ExpertDataset,
    random_ref: f64,
    expert_ref: f64,
}

fn prepare(cfg: &RunConfig, make: &EnvFactory, out: &Path, log: &mut dyn FnMut(&str)) -> Result<Setup> {
    let mut env = make()?;
    let expert = match &cfg.expert_policy {
        Some(p) => Policy::from_json(&std::fs::read_to_string(p)?)?,
        None => {
            log("training expert");
            let ecfg = cfg.expert_config();
            let trained = train_expert(make, &ecfg, &mut |m| {
                if m.iter % 10 == 0 {
                    log(&format!("expert iter {} return {:.2}", m.iter, m.true_return));
                }
            })?;
            write_metrics_csv(&trained.metrics, &out.join("expert_metrics.csv"))?;
            trained.policy
        }
    };
    std::fs::write(out.join("expert.json"), expert.to_json()?)?;
    let need = *cfg.trajectories.iter().max().expect("validated non-empty");
    let dataset = match &cfg.dataset {
        Some(p) => ExpertDataset::read_jsonl(p)?,
        None => sample_trajectories(env.as_mut(), &expert, need, cfg.dataset_seed, "expert.json")?,
    };
    dataset.check_spec(env.spec())?;
    if dataset.n_trajectories() < need {
        return Err(Error::Config(format!("dataset has {} trajectories, sweep needs {need}", dataset.n_trajectories())));
    }
    dataset.write_jsonl(&out.join("dataset.jsonl"))?;
    let random = Policy::new(env.spec(), &cfg.arch, &mut ChaCha8Rng::seed_from_u64(RANDOM_REF_SEED))?;
    let r = evaluation_returns(env.as_mut(), &random, cfg.eval_episodes, EVAL_SEED, ActionSelection::Sample)?;
    let e = evaluation_returns(env.as_mut(), &expert, cfg.eval_episodes, EVAL_SEED, ActionSelection::Sample)?;
    let ((rm, rs), (em, es)) = (mean_std(&r), mean_std(&e));
    write_json(
        &References {
            random_mean: rm,
            random_std: rs,
            expert_mean: em,
            expert_std: es,
            episodes: cfg.eval_episodes,
        },
        &out.join("references.json"),
    )?;
    log(&format!("references: random {rm:.2} +- {rs:.2}, expert {em:.2} +- {es:.2}"));
    Ok(Setup {
        dataset,
        random_ref: rm,
        expert_ref: em,
    })
}

/// Trains one cell and returns its evaluation returns.
fn run_cell(
    cfg: &RunConfig,
    make: &EnvFactory,
    algo: Algorithm,
    data: &ExpertDataset,
    seed: u64,
    dir: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<Vec<f64>> {
    let mut env = make()?;
    let spec = env.spec().clone();
    let every = (cfg.iters / 10).max(1);
    let mut observe = |m: &crate::imitation::IterMetrics| {
        if m.iter % every == 0 || m.iter + 1 == cfg.iters {
            log(&format!("  iter {} return {:.2} loss {:.4} kl {:.4}", m.iter, m.true_return, m.disc_loss, m.mean_kl));
        }
    };
    let policy = match algo {
        Algorithm::Bc => {
            let out = behavioral_cloning(&spec, data, &cfg.bc_config(seed))?;
            #[derive(Serialize)]
            struct Row {
                epoch: usize,
                train_loss: f64,
                valid_loss: f64,
            }
            let rows: Vec<Row> = out
                .train_losses
                .iter()
                .zip(&out.valid_losses)
                .enumerate()
                .map(|(epoch, (t, v))| Row {
                    epoch,
                    train_loss: *t,
                    valid_loss: *v,
                })
                .collect();
            write_csv(&rows, &dir.join("bc_losses.csv"))?;
            out.policy
        }
        Algorithm::Gail => {
            let out = gail_train(make, data, &cfg.gail_config(seed), &mut observe)?;
            write_metrics_csv(&out.metrics, &dir.join("metrics.csv"))?;
            out.policy
        }
        Algorithm::Fem | Algorithm::Gtal => {
            let kind = if algo == Algorithm::Fem {
                CostClassKind::LinearBall
            } else {
                CostClassKind::ConvexHull
            };
            let out = apprenticeship_train(make, data, kind, &cfg.apprenticeship_config(seed), &mut observe)?;
            write_metrics_csv(&out.metrics, &dir.join("metrics.csv"))?;
            out.policy
        }
        Algorithm::ExactMatch | Algorithm::TabularGail => unreachable!("tabular algorithms have no cells"),
    };
    std::fs::write(dir.join("policy.json"), policy.to_json()?)?;
    let returns = evaluation_returns(env.as_mut(), &policy, cfg.eval_episodes, EVAL_SEED, ActionSelection::Sample)?;
    let (mean, std) = mean_std(&returns);
    write_json(
        &EvalRecord {
            mean,
            std,
            returns: returns.clone(),
        },
        &dir.join("eval.json"),
    )?;
    Ok(returns)
}

fn run_tabular(cfg: &RunConfig, algo: Algorithm, out: &Path, log: &mut dyn FnMut(&str)) -> Result<()> {
    #[derive(Serialize)]
    struct JsdRow {
        iter: usize,
        jsd: f64,
    }
    let dir = out.join(algo.name());
    std::fs::create_dir_all(&dir)?;
    match algo {
        Algorithm::ExactMatch => {
            let rep = exact_match_run(&cfg.grid, &cfg.dual)?;
            std::fs::write(dir.join("primal_gap.csv"), gap_history_csv(&rep.history)?)?;
            write_json(&rep, &dir.join("report.json"))?;
            log(&format!("exact-match: gap {:.3e} after {} iterations", rep.primal_gap, rep.iterations));
        }
        Algorithm::TabularGail => {
            let tcfg = TabularGailConfig {
                iters: cfg.iters,
                lambda: cfg.lambda,
                ..TabularGailConfig::default()
            };
            let res = tabular_gail_run(&cfg.grid, &tcfg)?;
            let rows: Vec<JsdRow> = res.jsd_history.iter().enumerate().map(|(iter, &jsd)| JsdRow { iter, jsd }).collect();
            write_csv(&rows, &dir.join("jsd.csv"))?;
            log(&format!(
                "tabular-gail: jsd {:.3e} -> {:.3e}",
                res.jsd_history[0],
                res.jsd_history.last().unwrap()
            ));
        }
        _ => unreachable!(),
    }
    Ok(())
}

/// Runs every configured cell. Failing cells are recorded in their
/// directory and skipped in the aggregate.
pub fn run_experiment(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<PathBuf> {
    cfg.validate()?;
    let out = cfg.out_dir.clone();
    std::fs::create_dir_all(&out)?;
    write_json(cfg, &out.join("config.json"))?;
    for &algo in cfg.algorithms.iter().filter(|a| a.is_tabular()) {
        if let Err(e) = run_tabular(cfg, algo, &out, log) {
            log(&format!("{}: failed: {e}", algo.name()));
            std::fs::write(out.join(algo.name()).join("error.txt"), format!("{e}\n"))?;
        }
    }
    let sampled: Vec<Algorithm> = cfg.algorithms.iter().copied().filter(|a| !a.is_tabular()).collect();
    if sampled.is_empty() {
        return Ok(out);
    }
    let factory = env_factory(&cfg.env, Some(cfg.grid.clone()))?;
    let setup = prepare(cfg, &factory, &out, log)?;
    let mut records = Vec::new();
    for &algo in &sampled {
        for &n in &cfg.trajectories {
            let data = setup.dataset.take(n)?;
            let mut pooled = Vec::new();
            let mut finished = 0;
            for &seed in &cfg.seeds {
                let dir = out.join("cells").join(format!("{}-n{n}-s{seed}", algo.name()));
                std::fs::create_dir_all(&dir)?;
                log(&format!("{} n={n} seed={seed}", algo.name()));
                match run_cell(cfg, &factory, algo, &data, seed, &dir, log) {
                    Ok(r) => {
                        finished += 1;
                        pooled.extend(r);
                    }
                    Err(e) => {
                        log(&format!("  failed: {e}"));
                        std::fs::write(dir.join("error.txt"), format!("{e}\n"))?;
                    }
                }
            }
            if finished == 0 {
                continue;
            }
            let (raw_mean, raw_std) = mean_std(&pooled);
            records.push(ScoreRecord {
                algorithm: algo.name().to_string(),
                trajectories: n,
                seeds: finished,
                raw_mean,
                raw_std,
                scaled: scaled_score(raw_mean, setup.random_ref, setup.expert_ref)?,
            });
        }
    }
    std::fs::write(out.join("scores.csv"), scores_csv(&records)?)?;
    if !records.is_empty() {
        emit_plot(&records, &out.join("scores.svg"))?;
    }
    Ok(out)
}
