//! Experiment runner: configuration, seeded runs, metrics persistence,
//! checkpointing, sweeps, and summary statistics.
//!
//! A run's metrics are a pure function of `(config, seed)`; wall-clock time
//! is recorded in the final CSV column and is the only field that varies
//! between identical reruns.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::envs::env_by_name;
use crate::error::{Error, Result};
use crate::nn::NetDoc;
use crate::policy::{act, GaussianPolicy, SigmaSchedule};
use crate::ppo::{
    train_iteration, Algo, AlgoParams, AlgoState, IntrinsicState, PpoConfig,
};
use crate::rng::{Rng, StreamId};
use crate::stats;

const CHECKPOINT_EVERY: u64 = 50;
/// Window used for the end-of-run performance statistic.
pub const FINAL_WINDOW: usize = 100;

/// Everything a single training run needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: String,
    pub algo: Algo,
    pub total_env_steps: u64,
    pub steps_per_iteration: u64,
    #[serde(flatten)]
    pub ppo: PpoConfig,
    pub sigma_init: f64,
    pub sigma_min: f64,
    pub reward_low: f64,
    pub reward_high: f64,
    pub c1: f64,
    pub beta: f64,
    pub n_max: usize,
    pub bonus_offset: f64,
    pub intrinsic_lr: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Per-environment defaults for the exploration schedule anchors:
/// `(sigma_init, sigma_min, reward_low, reward_high)`. The low anchor sits
/// at an untrained policy's return, the high anchor at the target return.
pub fn env_default_anchors(env: &str) -> Result<(f64, f64, f64, f64)> {
    match env {
        "pendulum" => Ok((0.6, 0.05, -1400.0, -200.0)),
        "mountaincar" => Ok((0.5, 0.05, -30.0, 90.0)),
        "pointtrap" => Ok((0.6, 0.05, -1500.0, 250.0)),
        other => Err(Error::UnknownEnv(other.to_string())),
    }
}

impl RunConfig {
    /// Defaults for an environment/algorithm pair under the given seed.
    pub fn new(env: &str, algo: Algo, seed: u64) -> Result<Self> {
        let (sigma_init, sigma_min, reward_low, reward_high) = env_default_anchors(env)?;
        Ok(RunConfig {
            env: env.to_string(),
            algo,
            total_env_steps: 200_000,
            steps_per_iteration: 4000,
            ppo: PpoConfig::default(),
            sigma_init,
            sigma_min,
            reward_low,
            reward_high,
            c1: 0.05,
            beta: 0.2,
            n_max: 16,
            bonus_offset: 0.0,
            intrinsic_lr: 1e-3,
            seed,
            out_dir: PathBuf::from(format!("runs/{env}-{}-seed{seed}", algo.name())),
        })
    }

    pub fn validate(&self) -> Result<()> {
        env_by_name(&self.env)?;
        self.ppo.validate()?;
        if self.steps_per_iteration == 0 {
            return Err(Error::Config("steps_per_iteration must be >= 1".into()));
        }
        if self.total_env_steps < self.steps_per_iteration {
            return Err(Error::Config(
                "total_env_steps must be >= steps_per_iteration".into(),
            ));
        }
        if !(self.intrinsic_lr > 0.0) {
            return Err(Error::Config("intrinsic_lr must be positive".into()));
        }
        if self.c1 < 0.0 || self.beta < 0.0 {
            return Err(Error::Config("c1 and beta must be >= 0".into()));
        }
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be >= 1".into()));
        }
        // Schedule invariants are checked by construction.
        SigmaSchedule::new(self.sigma_init, self.sigma_min, self.reward_low, self.reward_high)?;
        Ok(())
    }

    pub fn algo_params(&self) -> AlgoParams {
        AlgoParams {
            algo: self.algo,
            seed: self.seed,
            sigma_init: self.sigma_init,
            sigma_min: self.sigma_min,
            reward_low: self.reward_low,
            reward_high: self.reward_high,
            c1: self.c1,
            beta: self.beta,
            n_max: self.n_max,
            bonus_offset: self.bonus_offset,
            intrinsic_lr: self.intrinsic_lr,
        }
    }
}

/// A [`RunConfig`] with every field optional, for config files and CLI
/// overrides. Field names mirror `RunConfig` exactly.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialRunConfig {
    pub env: Option<String>,
    pub algo: Option<String>,
    pub total_env_steps: Option<u64>,
    pub steps_per_iteration: Option<u64>,
    pub clip_epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub epochs: Option<usize>,
    pub minibatch_size: Option<usize>,
    pub policy_lr: Option<f64>,
    pub value_lr: Option<f64>,
    pub kl_limit: Option<f64>,
    pub sigma_init: Option<f64>,
    pub sigma_min: Option<f64>,
    pub reward_low: Option<f64>,
    pub reward_high: Option<f64>,
    pub c1: Option<f64>,
    pub beta: Option<f64>,
    pub n_max: Option<usize>,
    pub bonus_offset: Option<f64>,
    pub intrinsic_lr: Option<f64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

macro_rules! take_some {
    ($dst:expr, $src:expr, $($field:ident),+ $(,)?) => {
        $(if $src.$field.is_some() { $dst.$field = $src.$field.clone(); })+
    };
}

impl PartialRunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    /// Later layers win: fields set in `over` replace fields here.
    pub fn overlay(&mut self, over: &PartialRunConfig) {
        take_some!(
            self, over, env, algo, total_env_steps, steps_per_iteration, clip_epsilon, gamma,
            epochs, minibatch_size, policy_lr, value_lr, kl_limit, sigma_init, sigma_min,
            reward_low, reward_high, c1, beta, n_max, bonus_offset, intrinsic_lr, seed, out_dir,
        );
    }

    /// True when the caller explicitly set an intrinsic mixing coefficient.
    pub fn sets_intrinsic_coefficients(&self) -> bool {
        self.c1.is_some() || self.beta.is_some()
    }

    /// Fill the gaps with environment defaults and produce a full config.
    pub fn resolve(&self) -> Result<RunConfig> {
        let env = self
            .env
            .clone()
            .ok_or_else(|| Error::Config("missing required field: env".into()))?;
        let algo = Algo::parse(
            self.algo
                .as_deref()
                .ok_or_else(|| Error::Config("missing required field: algo".into()))?,
        )?;
        let seed = self.seed.unwrap_or(0);
        let mut cfg = RunConfig::new(&env, algo, seed)?;
        if let Some(v) = self.total_env_steps {
            cfg.total_env_steps = v;
        }
        if let Some(v) = self.steps_per_iteration {
            cfg.steps_per_iteration = v;
        }
        if let Some(v) = self.clip_epsilon {
            cfg.ppo.clip_epsilon = v;
        }
        if let Some(v) = self.gamma {
            cfg.ppo.gamma = v;
        }
        if let Some(v) = self.epochs {
            cfg.ppo.epochs = v;
        }
        if let Some(v) = self.minibatch_size {
            cfg.ppo.minibatch_size = v;
        }
        if let Some(v) = self.policy_lr {
            cfg.ppo.policy_lr = v;
        }
        if let Some(v) = self.value_lr {
            cfg.ppo.value_lr = v;
        }
        if let Some(v) = self.kl_limit {
            cfg.ppo.kl_limit = v;
        }
        if let Some(v) = self.sigma_init {
            cfg.sigma_init = v;
        }
        if let Some(v) = self.sigma_min {
            cfg.sigma_min = v;
        }
        if let Some(v) = self.reward_low {
            cfg.reward_low = v;
        }
        if let Some(v) = self.reward_high {
            cfg.reward_high = v;
        }
        if let Some(v) = self.c1 {
            cfg.c1 = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.n_max {
            cfg.n_max = v;
        }
        if let Some(v) = self.bonus_offset {
            cfg.bonus_offset = v;
        }
        if let Some(v) = self.intrinsic_lr {
            cfg.intrinsic_lr = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sweep definition file: a list of partial run configs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SweepFile {
    pub runs: Vec<PartialRunConfig>,
    #[serde(default)]
    pub jobs: Option<usize>,
}

/// One metrics row, mirroring the CSV schema column for column.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iter: u64,
    pub steps: u64,
    pub ret_mean: f64,
    pub ret_min: f64,
    pub ret_max: f64,
    pub bonus_mean: f64,
    pub sigma: f64,
    pub epochs_run: usize,
    pub kl: f64,
    pub loss_pi: f64,
    pub loss_v: f64,
    pub loss_intrinsic: f64,
    pub seconds: f64,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str =
        "iter,steps,ret_mean,ret_min,ret_max,bonus_mean,sigma,epochs_run,kl,loss_pi,loss_v,loss_intrinsic,seconds";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.steps,
            self.ret_mean,
            self.ret_min,
            self.ret_max,
            self.bonus_mean,
            self.sigma,
            self.epochs_run,
            self.kl,
            self.loss_pi,
            self.loss_v,
            self.loss_intrinsic,
            self.seconds
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(Error::Parse(format!(
                "metrics row has {} columns, expected 13",
                fields.len()
            )));
        }
        let f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad float '{s}' in metrics row")))
        };
        let u = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad integer '{s}' in metrics row")))
        };
        Ok(MetricsRow {
            iter: u(fields[0])?,
            steps: u(fields[1])?,
            ret_mean: f(fields[2])?,
            ret_min: f(fields[3])?,
            ret_max: f(fields[4])?,
            bonus_mean: f(fields[5])?,
            sigma: f(fields[6])?,
            epochs_run: u(fields[7])? as usize,
            kl: f(fields[8])?,
            loss_pi: f(fields[9])?,
            loss_v: f(fields[10])?,
            loss_intrinsic: f(fields[11])?,
            seconds: f(fields[12])?,
        })
    }
}

// --- run checkpoint document -------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct PolicyDoc {
    pub net: NetDoc,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IntrinsicDoc {
    Curiosity {
        beta: f64,
        net: NetDoc,
    },
    Uncertainty {
        c1: f64,
        n_max: usize,
        bonus_offset: f64,
        net: NetDoc,
    },
}

/// Full training snapshot: policy (with the schedule state it acted under),
/// value net, and the intrinsic module when one is active.
#[derive(Serialize, Deserialize)]
pub struct RunCheckpoint {
    pub env: String,
    pub algo: Algo,
    pub seed: u64,
    pub iteration: u64,
    pub steps: u64,
    pub schedule: SigmaSchedule,
    pub policy: PolicyDoc,
    pub value: NetDoc,
    pub intrinsic: Option<IntrinsicDoc>,
}

fn build_checkpoint(
    cfg: &RunConfig,
    state: &AlgoState,
    iteration: u64,
    steps: u64,
) -> Result<RunCheckpoint> {
    let policy = PolicyDoc {
        net: NetDoc::from_params(&state.policy.spec, &state.policy.params)?,
        action_low: state.policy.action_low.clone(),
        action_high: state.policy.action_high.clone(),
    };
    let value = NetDoc::from_params(&state.value.spec, &state.value.params)?;
    let intrinsic = match &state.intrinsic {
        IntrinsicState::None => None,
        IntrinsicState::Curiosity { module, .. } => Some(IntrinsicDoc::Curiosity {
            beta: module.beta,
            net: NetDoc::from_params(&module.spec, &module.params)?,
        }),
        IntrinsicState::Uncertainty { module, .. } => Some(IntrinsicDoc::Uncertainty {
            c1: module.c1,
            n_max: module.n_max,
            bonus_offset: module.bonus_offset,
            net: NetDoc::from_params(&module.spec, &module.params)?,
        }),
    };
    Ok(RunCheckpoint {
        env: cfg.env.clone(),
        algo: cfg.algo,
        seed: cfg.seed,
        iteration,
        steps,
        schedule: state.schedule.clone(),
        policy,
        value,
        intrinsic,
    })
}

/// Everything a finished run left behind.
#[derive(Debug)]
pub struct RunResult {
    pub config: RunConfig,
    pub rows: Vec<MetricsRow>,
    /// Returns of every completed episode, in collection order.
    pub episode_returns: Vec<f64>,
    /// Cumulative env steps at the end of the first terminated episode.
    pub first_goal_step: Option<u64>,
    pub final_sigma: f64,
    pub wall_seconds: f64,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

impl RunResult {
    /// Mean return over the last `window` completed episodes.
    pub fn final_window_mean(&self, window: usize) -> f64 {
        let n = self.episode_returns.len();
        let tail = &self.episode_returns[n.saturating_sub(window)..];
        stats::mean(tail)
    }
}

/// Execute one training run to completion, streaming metrics to
/// `<out_dir>/metrics.csv` (flushed row by row) and writing checkpoints at
/// the end and every 50 iterations.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut env = env_by_name(&cfg.env)?;
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(
        cfg.out_dir.join("config.json"),
        serde_json::to_string_pretty(cfg)?,
    )?;

    let mut state = AlgoState::with_ppo(env.as_ref(), &cfg.algo_params(), &cfg.ppo)?;
    let metrics_path = cfg.out_dir.join("metrics.csv");
    let mut metrics = fs::File::create(&metrics_path)?;
    writeln!(metrics, "{}", MetricsRow::CSV_HEADER)?;
    metrics.flush()?;

    let mut rows = Vec::new();
    let mut episode_returns = Vec::new();
    let mut first_goal_step = None;
    let mut steps_so_far = 0u64;
    let mut iteration = 0u64;

    while steps_so_far < cfg.total_env_steps {
        let iter_start = Instant::now();
        let stats = train_iteration(
            &mut state,
            env.as_mut(),
            &cfg.ppo,
            cfg.steps_per_iteration as usize,
        )?;
        iteration += 1;
        if first_goal_step.is_none() {
            if let Some(offset) = stats.first_termination_offset {
                first_goal_step = Some(steps_so_far + offset as u64);
            }
        }
        steps_so_far += stats.transitions as u64;
        episode_returns.extend_from_slice(&stats.episode_returns);

        let row = MetricsRow {
            iter: iteration,
            steps: steps_so_far,
            ret_mean: stats.ret_mean,
            ret_min: stats.ret_min,
            ret_max: stats.ret_max,
            bonus_mean: stats.bonus_mean,
            sigma: stats.sigma,
            epochs_run: stats.epochs_run,
            kl: stats.final_kl,
            loss_pi: stats.loss_pi,
            loss_v: stats.loss_v,
            loss_intrinsic: stats.loss_intrinsic,
            seconds: iter_start.elapsed().as_secs_f64(),
        };
        writeln!(metrics, "{}", row.to_csv_line())?;
        metrics.flush()?;
        rows.push(row);

        if iteration % CHECKPOINT_EVERY == 0 {
            let doc = build_checkpoint(cfg, &state, iteration, steps_so_far)?;
            fs::write(
                cfg.out_dir.join(format!("checkpoint_iter{iteration}.json")),
                serde_json::to_string(&doc)?,
            )?;
        }
    }

    let checkpoint_path = cfg.out_dir.join("checkpoint.json");
    let doc = build_checkpoint(cfg, &state, iteration, steps_so_far)?;
    fs::write(&checkpoint_path, serde_json::to_string(&doc)?)?;

    Ok(RunResult {
        config: cfg.clone(),
        rows,
        episode_returns,
        first_goal_step,
        final_sigma: state.schedule.current_sigma,
        wall_seconds: start.elapsed().as_secs_f64(),
        metrics_path,
        checkpoint_path,
    })
}

/// Deterministic evaluation of a checkpoint: sigma = 0 rollouts, reporting
/// extrinsic episode returns.
pub struct EvalResult {
    pub mean_return: f64,
    pub returns: Vec<f64>,
}

pub fn eval_checkpoint(path: &Path, episodes: usize, seed: u64) -> Result<EvalResult> {
    if episodes == 0 {
        return Err(Error::Config("episodes must be >= 1".into()));
    }
    let text = fs::read_to_string(path)?;
    let doc: RunCheckpoint =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("checkpoint: {e}")))?;
    let mut env = env_by_name(&doc.env)?;
    let (spec, params) = doc.policy.net.into_params()?;
    let policy =
        GaussianPolicy::from_parts(spec, params, doc.policy.action_low, doc.policy.action_high)?;

    let mut rng = Rng::stream(seed, StreamId::Eval);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset(&mut rng);
        let mut total = 0.0;
        loop {
            let sample = act(&policy, &state, 0.0, &mut rng)?;
            let step = env.step(&sample.action)?;
            total += step.reward;
            state = step.next_state;
            if step.terminated || step.truncated {
                break;
            }
        }
        returns.push(total);
    }
    Ok(EvalResult {
        mean_return: stats::mean(&returns),
        returns,
    })
}

// --- sweeps -------------------------------------------------------------------

/// Outcome of one run inside a sweep.
pub struct SweepEntry {
    pub env: String,
    pub algo: Algo,
    pub sigma_init: f64,
    pub seed: u64,
    /// Final-window mean return, or the failure message.
    pub outcome: std::result::Result<f64, String>,
    pub wall_seconds: f64,
    pub first_goal_step: Option<u64>,
}

/// Aggregated row per `(env, algo, sigma_init)` setting.
pub struct SweepGroupRow {
    pub env: String,
    pub algo: Algo,
    pub sigma_init: f64,
    pub runs: usize,
    pub failures: usize,
    pub mean_final: f64,
    pub var_final: f64,
    pub total_seconds: f64,
}

pub struct SweepSummary {
    pub entries: Vec<SweepEntry>,
    pub groups: Vec<SweepGroupRow>,
}

impl SweepSummary {
    pub const CSV_HEADER: &'static str =
        "env,algo,sigma_init,runs,failures,mean_final,var_final,total_seconds";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for g in &self.groups {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                g.env,
                g.algo,
                g.sigma_init,
                g.runs,
                g.failures,
                g.mean_final,
                g.var_final,
                g.total_seconds
            ));
        }
        out
    }
}

/// Run every config (up to `jobs` in parallel, each run fully isolated) and
/// aggregate final-window statistics per `(env, algo, sigma_init)` group.
/// Individual failures are recorded and do not stop the sweep.
pub fn sweep(configs: &[RunConfig], jobs: usize) -> Result<SweepSummary> {
    if configs.is_empty() {
        return Err(Error::Config("sweep needs at least one run".into()));
    }
    let jobs = jobs.max(1).min(configs.len());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SweepEntry>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let cfg = &configs[i];
                let started = Instant::now();
                let entry = match run(cfg) {
                    Ok(result) => SweepEntry {
                        env: cfg.env.clone(),
                        algo: cfg.algo,
                        sigma_init: cfg.sigma_init,
                        seed: cfg.seed,
                        outcome: Ok(result.final_window_mean(FINAL_WINDOW)),
                        wall_seconds: result.wall_seconds,
                        first_goal_step: result.first_goal_step,
                    },
                    Err(e) => SweepEntry {
                        env: cfg.env.clone(),
                        algo: cfg.algo,
                        sigma_init: cfg.sigma_init,
                        seed: cfg.seed,
                        outcome: Err(e.to_string()),
                        wall_seconds: started.elapsed().as_secs_f64(),
                        first_goal_step: None,
                    },
                };
                slots.lock().expect("sweep slot lock")[i] = Some(entry);
            });
        }
    });

    let entries: Vec<SweepEntry> = slots
        .into_inner()
        .expect("sweep slots")
        .into_iter()
        .map(|e| e.expect("every sweep slot filled"))
        .collect();

    // Group in first-appearance order.
    let mut groups: Vec<SweepGroupRow> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        let key = (&entry.env, entry.algo, entry.sigma_init);
        match groups
            .iter()
            .position(|g| (&g.env, g.algo, g.sigma_init) == key)
        {
            Some(gi) => members[gi].push(i),
            None => {
                groups.push(SweepGroupRow {
                    env: entry.env.clone(),
                    algo: entry.algo,
                    sigma_init: entry.sigma_init,
                    runs: 0,
                    failures: 0,
                    mean_final: 0.0,
                    var_final: 0.0,
                    total_seconds: 0.0,
                });
                members.push(vec![i]);
            }
        }
    }
    for (g, idxs) in groups.iter_mut().zip(&members) {
        let finals: Vec<f64> = idxs
            .iter()
            .filter_map(|&i| entries[i].outcome.as_ref().ok().copied())
            .collect();
        g.runs = idxs.len();
        g.failures = idxs.len() - finals.len();
        g.mean_final = stats::mean(&finals);
        g.var_final = stats::population_variance(&finals);
        g.total_seconds = idxs.iter().map(|&i| entries[i].wall_seconds).sum();
    }

    Ok(SweepSummary { entries, groups })
}

/// One run per sigma_init setting; emits the per-iteration return and sigma
/// traces alongside the run result.
pub struct SigmaCurve {
    pub sigma_init: f64,
    pub returns: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub result: RunResult,
}

pub fn sigma_sweep(base: &RunConfig, sigma_inits: &[f64]) -> Result<Vec<SigmaCurve>> {
    if sigma_inits.is_empty() {
        return Err(Error::Config("sigma_sweep needs at least one setting".into()));
    }
    for &s in sigma_inits {
        if s < base.sigma_min {
            return Err(Error::Config(format!(
                "sigma_init {s} is below sigma_min {}",
                base.sigma_min
            )));
        }
    }
    let mut curves = Vec::with_capacity(sigma_inits.len());
    for &sigma_init in sigma_inits {
        let mut cfg = base.clone();
        cfg.sigma_init = sigma_init;
        cfg.out_dir = base.out_dir.join(format!("sigma_{sigma_init}"));
        let result = run(&cfg)?;
        curves.push(SigmaCurve {
            sigma_init,
            returns: result.rows.iter().map(|r| r.ret_mean).collect(),
            sigmas: result.rows.iter().map(|r| r.sigma).collect(),
            result,
        });
    }
    Ok(curves)
}

/// Metrics file with the wall-clock column stripped; the determinism
/// comparisons use this because `seconds` is the one column real time is
/// allowed to vary.
pub fn metrics_without_seconds(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        match line.rfind(',') {
            Some(pos) => out.push_str(&line[..pos]),
            None => out.push_str(line),
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "ppox-harness-{}-{tag}",
            std::process::id()
        ));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    fn tiny_config(env: &str, algo: Algo, seed: u64, tag: &str) -> RunConfig {
        let mut cfg = RunConfig::new(env, algo, seed).unwrap();
        cfg.total_env_steps = 400;
        cfg.steps_per_iteration = 400;
        cfg.ppo.epochs = 4;
        cfg.out_dir = temp_dir(tag).join(format!("{env}-{algo}-{seed}"));
        cfg
    }

    #[test]
    fn single_iteration_run_writes_one_row() {
        let cfg = tiny_config("pendulum", Algo::Ppo, 1, "onerow");
        let result = run(&cfg).unwrap();
        assert_eq!(result.rows.len(), 1);
        let text = fs::read_to_string(&result.metrics_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], MetricsRow::CSV_HEADER);
        assert!(result.checkpoint_path.exists());
        assert!(cfg.out_dir.join("config.json").exists());
        let _ = fs::remove_dir_all(cfg.out_dir.parent().unwrap());
    }

    #[test]
    fn reruns_are_identical_apart_from_wall_clock() {
        let mut a = tiny_config("pendulum", Algo::IemPpo, 7, "rerun");
        a.total_env_steps = 800;
        let mut b = a.clone();
        b.out_dir = a.out_dir.with_extension("second");
        let ra = run(&a).unwrap();
        let rb = run(&b).unwrap();
        let ma = metrics_without_seconds(&ra.metrics_path).unwrap();
        let mb = metrics_without_seconds(&rb.metrics_path).unwrap();
        assert_eq!(ma, mb);
        let _ = fs::remove_dir_all(a.out_dir.parent().unwrap());
    }

    #[test]
    fn metrics_schema_is_stable() {
        let cfg = tiny_config("mountaincar", Algo::IcmPpo, 3, "schema");
        let result = run(&cfg).unwrap();
        let text = fs::read_to_string(&result.metrics_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), MetricsRow::CSV_HEADER);
        let mut prev_steps = 0;
        for line in lines {
            let row = MetricsRow::parse_csv_line(line).unwrap();
            assert!(row.steps > prev_steps, "steps must increase");
            prev_steps = row.steps;
        }
        let _ = fs::remove_dir_all(cfg.out_dir.parent().unwrap());
    }

    #[test]
    fn eval_reads_back_a_checkpoint() {
        let cfg = tiny_config("pendulum", Algo::Ppo, 5, "eval");
        let result = run(&cfg).unwrap();
        let eval = eval_checkpoint(&result.checkpoint_path, 3, 0).unwrap();
        assert_eq!(eval.returns.len(), 3);
        assert!(eval.mean_return.is_finite());
        // Deterministic rollouts: same seed, same returns.
        let again = eval_checkpoint(&result.checkpoint_path, 3, 0).unwrap();
        assert_eq!(eval.returns, again.returns);
        let _ = fs::remove_dir_all(cfg.out_dir.parent().unwrap());
    }

    #[test]
    fn sweep_of_one_run_matches_that_run() {
        let cfg = tiny_config("pendulum", Algo::Ppo, 11, "sweep1");
        let direct = run(&cfg).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.out_dir = cfg.out_dir.with_extension("again");
        let summary = sweep(&[cfg2], 1).unwrap();
        assert_eq!(summary.groups.len(), 1);
        let g = &summary.groups[0];
        assert_eq!(g.runs, 1);
        assert_eq!(g.failures, 0);
        assert_eq!(g.mean_final, direct.final_window_mean(FINAL_WINDOW));
        assert_eq!(g.var_final, 0.0);
        let _ = fs::remove_dir_all(cfg.out_dir.parent().unwrap());
    }

    #[test]
    fn sweep_with_identical_seeds_has_zero_variance() {
        let base = tiny_config("pendulum", Algo::Ppo, 2, "sweepvar");
        let mut c1 = base.clone();
        c1.out_dir = base.out_dir.join("a");
        let mut c2 = base.clone();
        c2.out_dir = base.out_dir.join("b");
        let summary = sweep(&[c1, c2], 2).unwrap();
        assert_eq!(summary.groups.len(), 1);
        assert_eq!(summary.groups[0].runs, 2);
        assert_eq!(summary.groups[0].var_final, 0.0);
        let _ = fs::remove_dir_all(base.out_dir.parent().unwrap());
    }

    /// Executed sweep: per-(env, algo) rows each aggregating its seeds.
    #[test]
    fn sweep_table_has_one_row_per_algo() {
        let root = temp_dir("sweeptable");
        let mut configs = Vec::new();
        for algo in [Algo::Ppo, Algo::IemPpo] {
            for seed in 0..3u64 {
                let mut cfg = RunConfig::new("mountaincar", algo, seed).unwrap();
                cfg.total_env_steps = 999;
                cfg.steps_per_iteration = 999;
                cfg.ppo.epochs = 2;
                cfg.out_dir = root.join(format!("{algo}-{seed}"));
                configs.push(cfg);
            }
        }
        let summary = sweep(&configs, 2).unwrap();
        assert_eq!(summary.groups.len(), 2);
        for group in &summary.groups {
            assert_eq!(group.runs, 3);
            assert_eq!(group.failures, 0);
            assert!(group.var_final.is_finite());
            assert!(group.total_seconds > 0.0);
        }
        let _ = fs::remove_dir_all(&root);
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let good = tiny_config("pendulum", Algo::Ppo, 2, "sweepfail");
        let mut bad = good.clone();
        bad.out_dir = good.out_dir.join("bad");
        bad.sigma_init = 0.9; // differs from good, forms its own group
        bad.total_env_steps = 100; // < steps_per_iteration: invalid
        let summary = sweep(&[bad, good.clone()], 2).unwrap();
        assert_eq!(summary.entries.len(), 2);
        assert!(summary.entries[0].outcome.is_err());
        assert!(summary.entries[1].outcome.is_ok());
        let failed_group = summary
            .groups
            .iter()
            .find(|g| g.sigma_init == 0.9)
            .unwrap();
        assert_eq!(failed_group.failures, 1);
        let _ = fs::remove_dir_all(good.out_dir.parent().unwrap());
    }

    #[test]
    fn sigma_sweep_traces_never_increase() {
        let mut base = tiny_config("pendulum", Algo::Ppo, 6, "sigsweep");
        base.total_env_steps = 1200;
        // Easy anchors: even untrained returns sit far above reward_high
        // relative to the narrow span, so the EMA crosses it within a couple
        // of episodes and the schedule converges to sigma_min in-run.
        base.reward_low = -1_000_000.0;
        base.reward_high = -990_000.0;
        let curves = sigma_sweep(&base, &[0.6, 0.4]).unwrap();
        assert_eq!(curves.len(), 2);
        for curve in &curves {
            for pair in curve.sigmas.windows(2) {
                assert!(pair[1] <= pair[0]);
            }
            assert_eq!(curve.result.final_sigma, base.sigma_min);
        }
        let _ = fs::remove_dir_all(base.out_dir.parent().unwrap());
    }

    #[test]
    fn sigma_sweep_of_one_setting_degenerates_to_run() {
        let base = tiny_config("pendulum", Algo::Ppo, 8, "sigone");
        let curves = sigma_sweep(&base, &[0.6]).unwrap();
        assert_eq!(curves.len(), 1);
        assert_eq!(curves[0].returns.len(), curves[0].result.rows.len());
        let _ = fs::remove_dir_all(base.out_dir.parent().unwrap());
    }

    #[test]
    fn invalid_config_fails_before_any_training() {
        let mut cfg = tiny_config("pendulum", Algo::Ppo, 0, "invalid");
        cfg.total_env_steps = 10; // below steps_per_iteration
        let err = run(&cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(!cfg.out_dir.exists(), "no output for invalid configs");
    }

    #[test]
    fn partial_config_overlay_and_resolve() {
        let mut file = PartialRunConfig::from_json(
            r#"{"env": "pendulum", "algo": "iem-ppo", "sigma_init": 0.8, "c1": 0.1}"#,
        )
        .unwrap();
        let flags = PartialRunConfig {
            seed: Some(9),
            sigma_init: Some(0.7),
            ..Default::default()
        };
        file.overlay(&flags);
        let cfg = file.resolve().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.sigma_init, 0.7); // flag beat file
        assert_eq!(cfg.c1, 0.1);
        assert_eq!(cfg.algo, Algo::IemPpo);
        // Env defaults filled the anchors.
        assert_eq!(cfg.reward_low, -1400.0);
        assert!(file.sets_intrinsic_coefficients());
    }

    #[test]
    fn partial_config_rejects_unknown_fields() {
        let err = PartialRunConfig::from_json(r#"{"env": "pendulum", "sigmaa": 1.0}"#);
        assert!(err.is_err());
    }

    #[test]
    fn metrics_row_round_trips_through_csv() {
        let row = MetricsRow {
            iter: 3,
            steps: 12000,
            ret_mean: -153.25,
            ret_min: -301.5,
            ret_max: -20.125,
            bonus_mean: 0.0625,
            sigma: 0.55,
            epochs_run: 12,
            kl: 0.0161,
            loss_pi: -0.002,
            loss_v: 88.5,
            loss_intrinsic: 1.75,
            seconds: 0.5,
        };
        let parsed = MetricsRow::parse_csv_line(&row.to_csv_line()).unwrap();
        assert_eq!(parsed, row);
    }
}
