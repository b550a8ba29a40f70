//! Diagonal-Gaussian stochastic policy over continuous actions.
//!
//! The policy network maps states to action means; the exploration scale
//! sigma comes from a reward-indexed [`SigmaSchedule`] rather than a learned
//! head, and only ever shrinks over a run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, MlpSpec, ParamSet};
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_6;

/// Policy mean network plus per-dimension action clamp bounds.
#[derive(Clone, Debug)]
pub struct GaussianPolicy {
    pub spec: MlpSpec,
    pub params: ParamSet,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl GaussianPolicy {
    /// Two tanh layers of 64, Glorot-initialized from `rng`.
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        rng: &mut Rng,
    ) -> Result<Self> {
        let spec = MlpSpec::tanh_net(state_dim, vec![64, 64], action_dim)?;
        let params = ParamSet::glorot(&spec, rng);
        GaussianPolicy::from_parts(spec, params, action_low, action_high)
    }

    pub fn from_parts(
        spec: MlpSpec,
        params: ParamSet,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
    ) -> Result<Self> {
        if spec.hidden_dims.is_empty() {
            return Err(Error::Config("policy network needs hidden layers".into()));
        }
        if action_low.len() != spec.output_dim || action_high.len() != spec.output_dim {
            return Err(Error::shape("action bounds", spec.output_dim, action_low.len()));
        }
        if action_low.iter().zip(&action_high).any(|(l, h)| l >= h) {
            return Err(Error::Config("action_low must be < action_high".into()));
        }
        params.validate(&spec)?;
        Ok(GaussianPolicy {
            spec,
            params,
            action_low,
            action_high,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.spec.output_dim
    }

    /// Network mean for one state.
    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>> {
        nn::mlp_forward(&self.spec, &self.params, state)
    }
}

/// One sampled action with its likelihood under the sampling distribution.
///
/// `action` is the clamped vector the environment executes; `raw_action` is
/// the unclamped Gaussian draw the likelihood belongs to. Training works on
/// the raw sample so that recomputed log-probabilities stay consistent with
/// the recorded ones (at unchanged parameters the ratio is exactly 1, even
/// when the executed action sat on a bound).
#[derive(Clone, Debug)]
pub struct ActionSample {
    pub action: Vec<f64>,
    pub raw_action: Vec<f64>,
    pub log_prob: f64,
    pub mean: Vec<f64>,
}

/// Sample `mean + N(0, sigma^2)` per dimension, clamp to the action bounds
/// for execution, and report the log-likelihood of the *unclamped* draw.
///
/// `sigma == 0` is the deterministic evaluation mode: the action is exactly
/// the network mean, no draws are consumed, and `log_prob` is reported as 0
/// (it has no density interpretation there).
pub fn act(
    policy: &GaussianPolicy,
    state: &[f64],
    sigma: f64,
    rng: &mut Rng,
) -> Result<ActionSample> {
    if !state.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("state passed to act".into()));
    }
    if sigma < 0.0 {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    let mean = policy.mean(state)?;
    let clamp_to_bounds = |xs: &[f64]| -> Vec<f64> {
        xs.iter()
            .zip(policy.action_low.iter().zip(&policy.action_high))
            .map(|(x, (lo, hi))| x.clamp(*lo, *hi))
            .collect()
    };
    if sigma == 0.0 {
        return Ok(ActionSample {
            action: clamp_to_bounds(&mean),
            raw_action: mean.clone(),
            log_prob: 0.0,
            mean,
        });
    }

    let raw_action: Vec<f64> = mean.iter().map(|m| m + sigma * rng.normal()).collect();
    let sigma_vec = vec![sigma; mean.len()];
    let log_prob = log_prob(&mean, &sigma_vec, &raw_action)?;
    Ok(ActionSample {
        action: clamp_to_bounds(&raw_action),
        raw_action,
        log_prob,
        mean,
    })
}

/// Diagonal-Gaussian log-density:
/// `sum_i -1/2 * (((a_i - mu_i) / sigma_i)^2 + 2 ln sigma_i + ln 2pi)`.
pub fn log_prob(mean: &[f64], sigma: &[f64], action: &[f64]) -> Result<f64> {
    if sigma.len() != mean.len() || action.len() != mean.len() {
        return Err(Error::shape("log_prob lengths", mean.len(), action.len()));
    }
    let mut total = 0.0;
    for ((m, s), a) in mean.iter().zip(sigma).zip(action) {
        if *s <= 0.0 {
            return Err(Error::Domain(format!("sigma must be > 0, got {s}")));
        }
        let z = (a - m) / s;
        total += -0.5 * (z * z + 2.0 * s.ln() + LN_2PI);
    }
    Ok(total)
}

/// Reward-indexed exploration scale.
///
/// The running reward is an exponential moving average of episode returns
/// (decay 0.99). Sigma interpolates linearly from `sigma_init` at
/// `reward_low` down to `sigma_min` at `reward_high`, and is ratcheted so it
/// never rises again even if returns slump.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SigmaSchedule {
    pub sigma_init: f64,
    pub sigma_min: f64,
    pub reward_low: f64,
    pub reward_high: f64,
    pub running_reward: f64,
    pub current_sigma: f64,
}

const REWARD_EMA_DECAY: f64 = 0.99;

impl SigmaSchedule {
    pub fn new(sigma_init: f64, sigma_min: f64, reward_low: f64, reward_high: f64) -> Result<Self> {
        if !(sigma_min > 0.0) || !(sigma_init >= sigma_min) {
            return Err(Error::Config(format!(
                "need sigma_init >= sigma_min > 0, got init {sigma_init}, min {sigma_min}"
            )));
        }
        if !(reward_high > reward_low) {
            return Err(Error::Config(format!(
                "need reward_high > reward_low, got low {reward_low}, high {reward_high}"
            )));
        }
        Ok(SigmaSchedule {
            sigma_init,
            sigma_min,
            reward_low,
            reward_high,
            running_reward: reward_low,
            current_sigma: sigma_init,
        })
    }

    /// Fold one finished episode's return into the schedule.
    pub fn update(&mut self, latest_episode_return: f64) {
        self.running_reward =
            REWARD_EMA_DECAY * self.running_reward + (1.0 - REWARD_EMA_DECAY) * latest_episode_return;
        let span = self.reward_high - self.reward_low;
        let progress = ((self.running_reward - self.reward_low) / span).clamp(0.0, 1.0);
        // Saturate exactly at the anchors so a converged schedule reports
        // sigma_min itself, not a rounding neighbor.
        let candidate = if progress >= 1.0 {
            self.sigma_min
        } else {
            self.sigma_init + (self.sigma_min - self.sigma_init) * progress
        };
        self.current_sigma = self.current_sigma.min(candidate);
    }
}
