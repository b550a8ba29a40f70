//! The PPO optimization step: clipped surrogate policy loss, value-function
//! regression, multi-epoch minibatch updates with KL early stopping, and the
//! per-iteration training driver that ties collection, targets, updates, and
//! the sigma schedule together.

use serde::{Deserialize, Serialize};

use crate::envs::Env;
use crate::error::{Error, Result};
use crate::intrinsic::{
    icm_bonus, icm_update, iem_bonus, iem_pairs, iem_update, CuriosityModule, UncertaintyModule,
};
use crate::nn::{
    adam_step, forward_into, AdamState, MlpSpec, MlpWorkspace, ParamSet,
};
use crate::policy::{log_prob, GaussianPolicy, SigmaSchedule};
use crate::rng::{Rng, StreamId, StreamSet};
use crate::rollout::{build_batch, collect, Batch, Trajectory};

/// PPO hyperparameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub kl_limit: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_epsilon: 0.2,
            gamma: 0.99,
            epochs: 80,
            minibatch_size: 64,
            policy_lr: 3e-4,
            value_lr: 1e-3,
            kl_limit: 0.015,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::Config("clip_epsilon must be in (0, 1)".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must be in (0, 1]".into()));
        }
        if self.epochs == 0 || self.minibatch_size == 0 {
            return Err(Error::Config("epochs and minibatch_size must be >= 1".into()));
        }
        if !(self.policy_lr > 0.0 && self.value_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.kl_limit > 0.0) {
            return Err(Error::Config("kl_limit must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-sample term of the clipped surrogate, to be maximized:
/// `min(ratio * adv, clamp(ratio, 1 - eps, 1 + eps) * adv)`.
pub fn clip_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    (ratio * advantage).min(clipped)
}

/// State-value network `V(s)`.
#[derive(Clone, Debug)]
pub struct ValueFunction {
    pub spec: MlpSpec,
    pub params: ParamSet,
}

impl ValueFunction {
    /// Two tanh layers of 64 onto a scalar output.
    pub fn new(state_dim: usize, rng: &mut Rng) -> Result<Self> {
        let spec = MlpSpec::tanh_net(state_dim, vec![64, 64], 1)?;
        let params = ParamSet::glorot(&spec, rng);
        Ok(ValueFunction { spec, params })
    }

    pub fn from_parts(spec: MlpSpec, params: ParamSet) -> Result<Self> {
        if spec.output_dim != 1 {
            return Err(Error::Config("value net must have a scalar output".into()));
        }
        if spec.hidden_dims.is_empty() {
            return Err(Error::Config("value network needs hidden layers".into()));
        }
        params.validate(&spec)?;
        Ok(ValueFunction { spec, params })
    }

    pub fn predict(&self, state: &[f64]) -> f64 {
        crate::nn::mlp_forward(&self.spec, &self.params, state)
            .map(|out| out[0])
            .unwrap_or(f64::NAN)
    }
}

/// Outcome of one multi-epoch policy update.
#[derive(Clone, Copy, Debug)]
pub struct PolicyUpdate {
    /// Epochs actually run before the KL constraint (or the budget) stopped.
    pub epochs_run: usize,
    /// KL estimate after the last epoch run.
    pub final_kl: f64,
    /// Mean surrogate loss (negative clip objective) over all minibatches.
    pub mean_loss: f64,
}

fn check_batch(batch: &Batch, action_dim: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("batch".into()));
    }
    let n = batch.len();
    if batch.actions.len() != n
        || batch.log_probs_old.len() != n
        || batch.returns.len() != n
        || batch.advantages.len() != n
    {
        return Err(Error::shape("batch arrays", n, batch.actions.len()));
    }
    if batch.actions[0].len() != action_dim {
        return Err(Error::shape("batch action", action_dim, batch.actions[0].len()));
    }
    Ok(())
}

/// Mean KL estimate `E[log pi_old - log pi_new]` over the whole batch.
fn batch_kl(
    policy: &GaussianPolicy,
    batch: &Batch,
    sigma_vec: &[f64],
    ws: &mut MlpWorkspace,
    mean_buf: &mut Vec<f64>,
) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..batch.len() {
        forward_into(&policy.spec, &policy.params, &batch.states[i], ws)?;
        mean_buf.clear();
        mean_buf.extend_from_slice(ws.output());
        let lp_new = log_prob(mean_buf, sigma_vec, &batch.actions[i])?;
        total += batch.log_probs_old[i] - lp_new;
    }
    Ok(total / batch.len() as f64)
}

/// Derivative of the per-sample clip objective with respect to the new log
/// probability. Zero exactly where clipping has removed the incentive.
fn clip_objective_dlogp(ratio: f64, advantage: f64, lo: f64, hi: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(lo, hi) * advantage;
    if unclipped <= clipped || (ratio >= lo && ratio <= hi) {
        advantage * ratio
    } else {
        0.0
    }
}

/// Multi-epoch minibatch ascent on the clipped surrogate.
///
/// Log-probabilities are recomputed under the current parameters with the
/// *acting* sigma; sigma itself is schedule-driven and receives no gradient.
/// After each epoch the batch KL is estimated and the update stops early
/// once it exceeds `cfg.kl_limit`.
pub fn policy_update(
    policy: &mut GaussianPolicy,
    batch: &Batch,
    sigma: f64,
    cfg: &PpoConfig,
    adam: &mut AdamState,
    shuffle_rng: &mut Rng,
) -> Result<PolicyUpdate> {
    check_batch(batch, policy.action_dim())?;
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("policy update needs sigma > 0, got {sigma}")));
    }
    let n = batch.len();
    let action_dim = policy.action_dim();
    let sigma_vec = vec![sigma; action_dim];
    let inv_var = 1.0 / (sigma * sigma);
    let (lo, hi) = (1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);

    let mut ws = MlpWorkspace::for_spec(&policy.spec);
    let mut grads = ParamSet::zeros(&policy.spec);
    let mut mean_buf = Vec::with_capacity(action_dim);
    let mut out_grad = vec![0.0; action_dim];
    let mut indices: Vec<usize> = (0..n).collect();

    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let mut epochs_run = 0;
    let mut final_kl = 0.0;

    for epoch in 1..=cfg.epochs {
        shuffle_rng.shuffle(&mut indices);
        for (mb_index, chunk) in indices.chunks(cfg.minibatch_size).enumerate() {
            grads.reset_to_zero();
            let inv_m = 1.0 / chunk.len() as f64;
            let mut objective = 0.0;
            for &i in chunk {
                forward_into(&policy.spec, &policy.params, &batch.states[i], &mut ws)?;
                mean_buf.clear();
                mean_buf.extend_from_slice(ws.output());
                let lp_new = log_prob(&mean_buf, &sigma_vec, &batch.actions[i])?;
                let ratio = (lp_new - batch.log_probs_old[i]).exp();
                let advantage = batch.advantages[i];
                objective += clip_objective(ratio, advantage, cfg.clip_epsilon);
                let coef = clip_objective_dlogp(ratio, advantage, lo, hi);
                // Descent on the negative objective, averaged over the
                // minibatch; d(logp)/d(mean_j) = (a_j - mean_j) / sigma^2.
                for j in 0..action_dim {
                    out_grad[j] =
                        -coef * (batch.actions[i][j] - mean_buf[j]) * inv_var * inv_m;
                }
                crate::nn::backward_into(
                    &policy.spec,
                    &policy.params,
                    &mut ws,
                    &out_grad,
                    1.0,
                    &mut grads,
                    None,
                )?;
            }
            let mb_loss = -objective * inv_m;
            if !mb_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "policy loss at epoch {epoch}, minibatch {mb_index}"
                )));
            }
            loss_sum += mb_loss;
            loss_count += 1;
            adam_step(&mut policy.params, &grads, adam)?;
        }
        epochs_run = epoch;
        final_kl = batch_kl(policy, batch, &sigma_vec, &mut ws, &mut mean_buf)?;
        if final_kl > cfg.kl_limit {
            break;
        }
    }

    Ok(PolicyUpdate {
        epochs_run,
        final_kl,
        mean_loss: loss_sum / loss_count.max(1) as f64,
    })
}

/// Mean gradient (ascent direction) of the clipped surrogate over a whole
/// batch, without touching the parameters. Used to cross-check the update
/// against an independent route.
pub fn policy_surrogate_gradient(
    policy: &GaussianPolicy,
    batch: &Batch,
    sigma: f64,
    epsilon: f64,
) -> Result<(ParamSet, f64)> {
    check_batch(batch, policy.action_dim())?;
    let action_dim = policy.action_dim();
    let sigma_vec = vec![sigma; action_dim];
    let inv_var = 1.0 / (sigma * sigma);
    let (lo, hi) = (1.0 - epsilon, 1.0 + epsilon);
    let inv_n = 1.0 / batch.len() as f64;

    let mut ws = MlpWorkspace::for_spec(&policy.spec);
    let mut grads = ParamSet::zeros(&policy.spec);
    let mut mean_buf = Vec::with_capacity(action_dim);
    let mut out_grad = vec![0.0; action_dim];
    let mut objective = 0.0;
    for i in 0..batch.len() {
        forward_into(&policy.spec, &policy.params, &batch.states[i], &mut ws)?;
        mean_buf.clear();
        mean_buf.extend_from_slice(ws.output());
        let lp_new = log_prob(&mean_buf, &sigma_vec, &batch.actions[i])?;
        let ratio = (lp_new - batch.log_probs_old[i]).exp();
        let advantage = batch.advantages[i];
        objective += clip_objective(ratio, advantage, epsilon) * inv_n;
        let coef = clip_objective_dlogp(ratio, advantage, lo, hi);
        for j in 0..action_dim {
            out_grad[j] = coef * (batch.actions[i][j] - mean_buf[j]) * inv_var * inv_n;
        }
        crate::nn::backward_into(
            &policy.spec,
            &policy.params,
            &mut ws,
            &out_grad,
            1.0,
            &mut grads,
            None,
        )?;
    }
    Ok((grads, objective))
}

/// Multi-epoch minibatch regression of `V(s)` onto the reward-to-go targets.
/// Returns the mean squared-error loss over all minibatches processed.
pub fn value_update(
    value: &mut ValueFunction,
    states: &[Vec<f64>],
    returns: &[f64],
    cfg: &PpoConfig,
    adam: &mut AdamState,
    shuffle_rng: &mut Rng,
) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::Empty("value batch".into()));
    }
    if states.len() != returns.len() {
        return Err(Error::shape("value targets", states.len(), returns.len()));
    }
    let mut ws = MlpWorkspace::for_spec(&value.spec);
    let mut grads = ParamSet::zeros(&value.spec);
    let mut indices: Vec<usize> = (0..states.len()).collect();
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;

    for epoch in 1..=cfg.epochs {
        shuffle_rng.shuffle(&mut indices);
        for (mb_index, chunk) in indices.chunks(cfg.minibatch_size).enumerate() {
            grads.reset_to_zero();
            let inv_m = 1.0 / chunk.len() as f64;
            let mut mb_loss = 0.0;
            for &i in chunk {
                forward_into(&value.spec, &value.params, &states[i], &mut ws)?;
                let residual = ws.output()[0] - returns[i];
                mb_loss += residual * residual * inv_m;
                let out_grad = [2.0 * residual * inv_m];
                crate::nn::backward_into(
                    &value.spec,
                    &value.params,
                    &mut ws,
                    &out_grad,
                    1.0,
                    &mut grads,
                    None,
                )?;
            }
            if !mb_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "value loss at epoch {epoch}, minibatch {mb_index}"
                )));
            }
            loss_sum += mb_loss;
            loss_count += 1;
            adam_step(&mut value.params, &grads, adam)?;
        }
    }
    Ok(loss_sum / loss_count.max(1) as f64)
}

/// Which exploration bonus, if any, is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algo {
    #[serde(rename = "ppo")]
    Ppo,
    #[serde(rename = "icm-ppo")]
    IcmPpo,
    #[serde(rename = "iem-ppo")]
    IemPpo,
}

impl Algo {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ppo" => Ok(Algo::Ppo),
            "icm-ppo" => Ok(Algo::IcmPpo),
            "iem-ppo" => Ok(Algo::IemPpo),
            other => Err(Error::UnknownAlgo(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Ppo => "ppo",
            Algo::IcmPpo => "icm-ppo",
            Algo::IemPpo => "iem-ppo",
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The intrinsic module carried by a training run.
///
/// A zero mixing coefficient disables the module outright: the bonus would
/// be identically zero, so skipping its updates keeps the run's draws and
/// metrics exactly those of plain PPO.
pub enum IntrinsicState {
    None,
    Curiosity {
        module: CuriosityModule,
        adam: AdamState,
    },
    Uncertainty {
        module: UncertaintyModule,
        adam: AdamState,
        n_max: usize,
    },
}

/// Everything the training loop owns for one run.
pub struct AlgoState {
    pub policy: GaussianPolicy,
    pub policy_adam: AdamState,
    pub value: ValueFunction,
    pub value_adam: AdamState,
    pub schedule: SigmaSchedule,
    pub intrinsic: IntrinsicState,
    pub streams: StreamSet,
    pub iteration: u64,
}

/// Algorithm-level settings used to build an [`AlgoState`].
#[derive(Clone, Debug)]
pub struct AlgoParams {
    pub algo: Algo,
    pub seed: u64,
    pub sigma_init: f64,
    pub sigma_min: f64,
    pub reward_low: f64,
    pub reward_high: f64,
    pub c1: f64,
    pub beta: f64,
    pub n_max: usize,
    pub bonus_offset: f64,
    pub intrinsic_lr: f64,
}

impl AlgoState {
    pub fn new(env: &dyn Env, params: &AlgoParams) -> Result<Self> {
        let cfg = PpoConfig::default();
        AlgoState::with_ppo(env, params, &cfg)
    }

    pub fn with_ppo(env: &dyn Env, params: &AlgoParams, ppo: &PpoConfig) -> Result<Self> {
        let schedule = SigmaSchedule::new(
            params.sigma_init,
            params.sigma_min,
            params.reward_low,
            params.reward_high,
        )?;
        let mut policy_rng = Rng::stream(params.seed, StreamId::PolicyInit);
        let policy = GaussianPolicy::new(
            env.state_dim(),
            env.action_dim(),
            env.action_low().to_vec(),
            env.action_high().to_vec(),
            &mut policy_rng,
        )?;
        let mut value_rng = Rng::stream(params.seed, StreamId::ValueInit);
        let value = ValueFunction::new(env.state_dim(), &mut value_rng)?;
        let policy_adam = AdamState::new(&policy.spec, ppo.policy_lr);
        let value_adam = AdamState::new(&value.spec, ppo.value_lr);

        let mut intrinsic_rng = Rng::stream(params.seed, StreamId::IntrinsicInit);
        let intrinsic = match params.algo {
            Algo::Ppo => IntrinsicState::None,
            Algo::IcmPpo if params.beta == 0.0 => IntrinsicState::None,
            Algo::IemPpo if params.c1 == 0.0 => IntrinsicState::None,
            Algo::IcmPpo => {
                let module = CuriosityModule::new(
                    env.state_dim(),
                    env.action_dim(),
                    params.beta,
                    &mut intrinsic_rng,
                )?;
                let adam = AdamState::new(&module.spec, params.intrinsic_lr);
                IntrinsicState::Curiosity { module, adam }
            }
            Algo::IemPpo => {
                let module = UncertaintyModule::new(
                    env.state_dim(),
                    params.c1,
                    params.n_max,
                    params.bonus_offset,
                    &mut intrinsic_rng,
                )?;
                let adam = AdamState::new(&module.spec, params.intrinsic_lr);
                IntrinsicState::Uncertainty {
                    module,
                    adam,
                    n_max: params.n_max,
                }
            }
        };

        Ok(AlgoState {
            policy,
            policy_adam,
            value,
            value_adam,
            schedule,
            intrinsic,
            streams: StreamSet::new(params.seed),
            iteration: 0,
        })
    }
}

/// What one training iteration produced, before the harness adds wall-clock
/// and cumulative bookkeeping.
#[derive(Clone, Debug)]
pub struct IterationStats {
    pub transitions: usize,
    pub episode_returns: Vec<f64>,
    pub ret_mean: f64,
    pub ret_min: f64,
    pub ret_max: f64,
    pub bonus_mean: f64,
    pub sigma: f64,
    pub epochs_run: usize,
    pub final_kl: f64,
    pub loss_pi: f64,
    pub loss_v: f64,
    pub loss_intrinsic: f64,
    /// Transition offset (within this iteration) at the end of the first
    /// episode that terminated, if any did.
    pub first_termination_offset: Option<usize>,
}

/// One outer-loop iteration: collect, build targets, update policy and value
/// (and the intrinsic module when active), then fold episode returns into
/// the sigma schedule.
pub fn train_iteration(
    state: &mut AlgoState,
    env: &mut dyn Env,
    cfg: &PpoConfig,
    steps_per_iteration: usize,
) -> Result<IterationStats> {
    cfg.validate()?;
    let sigma = state.schedule.current_sigma;

    let trajectories = {
        let hook: Option<Box<crate::rollout::BonusFn<'_>>> = match &state.intrinsic {
            IntrinsicState::None => None,
            IntrinsicState::Curiosity { module, .. } => Some(Box::new(
                move |s: &[f64], a: &[f64], n: &[f64]| {
                    icm_bonus(module, s, a, n).expect("curiosity dims fixed at construction")
                },
            )),
            IntrinsicState::Uncertainty { module, .. } => Some(Box::new(
                move |s: &[f64], _a: &[f64], n: &[f64]| {
                    iem_bonus(module, s, n).expect("uncertainty dims fixed at construction")
                },
            )),
        };
        collect(
            &state.policy,
            sigma,
            env,
            steps_per_iteration,
            hook.as_deref(),
            &mut state.streams.env,
            &mut state.streams.noise,
        )?
    };

    let value = &state.value;
    let batch = build_batch(&trajectories, cfg.gamma, |s| value.predict(s), true)?;

    let update = policy_update(
        &mut state.policy,
        &batch,
        sigma,
        cfg,
        &mut state.policy_adam,
        &mut state.streams.shuffle,
    )
    .map_err(|e| at_iteration(e, state.iteration))?;

    let loss_v = value_update(
        &mut state.value,
        &batch.states,
        &batch.returns,
        cfg,
        &mut state.value_adam,
        &mut state.streams.shuffle,
    )
    .map_err(|e| at_iteration(e, state.iteration))?;

    let loss_intrinsic = match &mut state.intrinsic {
        IntrinsicState::None => 0.0,
        IntrinsicState::Curiosity { module, adam } => {
            let refs: Vec<&crate::rollout::Transition> = trajectories
                .iter()
                .flat_map(|t| t.transitions.iter())
                .collect();
            icm_update(module, &refs, adam, &mut state.streams.shuffle)
                .map_err(|e| at_iteration(e, state.iteration))?
        }
        IntrinsicState::Uncertainty { module, adam, n_max } => {
            let pairs = iem_pairs(&trajectories, *n_max, &mut state.streams.pairs);
            iem_update(module, &pairs, adam, &mut state.streams.shuffle)
                .map_err(|e| at_iteration(e, state.iteration))?
        }
    };

    for traj in &trajectories {
        state.schedule.update(traj.episode_return);
    }
    state.iteration += 1;

    let episode_returns: Vec<f64> = trajectories.iter().map(|t| t.episode_return).collect();
    let transitions: usize = trajectories.iter().map(Trajectory::len).sum();
    let bonus_sum: f64 = trajectories
        .iter()
        .flat_map(|t| &t.transitions)
        .map(|t| t.intrinsic_reward)
        .sum();
    let mut first_termination_offset = None;
    let mut offset = 0usize;
    for traj in &trajectories {
        offset += traj.len();
        let terminated = traj.transitions.last().map(|t| t.terminated).unwrap_or(false);
        if terminated && first_termination_offset.is_none() {
            first_termination_offset = Some(offset);
        }
    }

    Ok(IterationStats {
        transitions,
        ret_mean: mean_of(&episode_returns),
        ret_min: episode_returns.iter().cloned().fold(f64::INFINITY, f64::min),
        ret_max: episode_returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        episode_returns,
        bonus_mean: bonus_sum / transitions as f64,
        sigma,
        epochs_run: update.epochs_run,
        final_kl: update.final_kl,
        loss_pi: update.mean_loss,
        loss_v,
        loss_intrinsic,
        first_termination_offset,
    })
}

fn at_iteration(e: Error, iteration: u64) -> Error {
    match e {
        Error::NonFinite(what) => Error::NonFinite(format!("{what} (iteration {iteration})")),
        other => other,
    }
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}
