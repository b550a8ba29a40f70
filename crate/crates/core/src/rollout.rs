//! Trajectory collection and training-target construction.
//!
//! Collection always runs whole episodes. Targets are Monte-Carlo
//! reward-to-go with the time-limit bootstrap: a truncated episode's tail is
//! valued by the value network instead of the zero a terminated tail gets.

use crate::envs::Env;
use crate::error::{Error, Result};
use crate::policy::{act, GaussianPolicy};
use crate::rng::Rng;

/// One environment transition as recorded during collection.
///
/// `action` is the raw policy sample the recorded likelihood belongs to;
/// the environment executed its clamped projection onto the action bounds.
#[derive(Clone, Debug)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub extrinsic_reward: f64,
    /// Exploration bonus granted at collection time; 0 when no module is on.
    pub intrinsic_reward: f64,
    pub log_prob_old: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub next_state: Vec<f64>,
}

/// One whole episode.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// Sum of extrinsic rewards only; this is the performance index the
    /// sigma schedule and metrics key on.
    pub episode_return: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Flattened training arrays for one update.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs_old: Vec<f64>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Per-transition exploration bonus hook: `(state, action, next_state) -> bonus`.
pub type BonusFn<'a> = dyn Fn(&[f64], &[f64], &[f64]) -> f64 + 'a;

/// Run whole episodes until at least `min_steps` transitions are collected.
///
/// Log-probabilities are recorded from the acting policy at the given sigma;
/// the bonus hook, when present, is invoked once per transition.
pub fn collect(
    policy: &GaussianPolicy,
    sigma: f64,
    env: &mut dyn Env,
    min_steps: usize,
    bonus: Option<&BonusFn>,
    env_rng: &mut Rng,
    noise_rng: &mut Rng,
) -> Result<Vec<Trajectory>> {
    if min_steps == 0 {
        return Err(Error::Config("min_steps must be >= 1".into()));
    }
    let mut trajectories = Vec::new();
    let mut total = 0usize;
    while total < min_steps {
        let mut state = env.reset(env_rng);
        let mut transitions = Vec::with_capacity(env.max_episode_steps());
        let mut episode_return = 0.0;
        loop {
            let sample = act(policy, &state, sigma, noise_rng)?;
            let step = env.step(&sample.action)?;
            let intrinsic = bonus
                .map(|f| f(&state, &sample.raw_action, &step.next_state))
                .unwrap_or(0.0);
            episode_return += step.reward;
            let done = step.terminated || step.truncated;
            transitions.push(Transition {
                state,
                action: sample.raw_action,
                extrinsic_reward: step.reward,
                intrinsic_reward: intrinsic,
                log_prob_old: sample.log_prob,
                terminated: step.terminated,
                truncated: step.truncated,
                next_state: step.next_state.clone(),
            });
            state = step.next_state;
            if done {
                break;
            }
        }
        total += transitions.len();
        trajectories.push(Trajectory {
            transitions,
            episode_return,
        });
    }
    Ok(trajectories)
}

/// Discounted reward-to-go over one episode, mixing extrinsic and intrinsic
/// rewards per step.
///
/// The recursion seeds from the tail: zero when the episode terminated,
/// `value_fn(final next_state)` when it was cut by the time limit.
pub fn reward_to_go<F>(traj: &Trajectory, gamma: f64, value_fn: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut out = vec![0.0; traj.len()];
    let Some(last) = traj.transitions.last() else {
        return out;
    };
    let mut acc = if last.terminated {
        0.0
    } else if last.truncated {
        value_fn(&last.next_state)
    } else {
        0.0
    };
    for (slot, t) in out.iter_mut().zip(traj.transitions.iter()).rev() {
        acc = t.extrinsic_reward + t.intrinsic_reward + gamma * acc;
        *slot = acc;
    }
    out
}

/// Baseline-subtracted advantages, optionally normalized to zero mean and
/// unit population standard deviation (with a small guard for degenerate
/// constant batches).
pub fn advantages(returns: &[f64], values: &[f64], normalize: bool) -> Result<Vec<f64>> {
    if returns.is_empty() {
        return Err(Error::Empty("advantages".into()));
    }
    if values.len() != returns.len() {
        return Err(Error::shape("advantage values", returns.len(), values.len()));
    }
    if normalize && returns.len() < 2 {
        return Err(Error::Config(
            "normalization needs at least 2 samples".into(),
        ));
    }
    let mut raw: Vec<f64> = returns.iter().zip(values).map(|(r, v)| r - v).collect();
    if normalize {
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let var = raw.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        let denom = var.sqrt() + 1e-8;
        for a in &mut raw {
            *a = (*a - mean) / denom;
        }
    }
    Ok(raw)
}

/// Assemble the flat training batch for one iteration: per-episode
/// reward-to-go, value baselines, and batch-normalized advantages.
pub fn build_batch<F>(
    trajectories: &[Trajectory],
    gamma: f64,
    value_fn: F,
    normalize: bool,
) -> Result<Batch>
where
    F: Fn(&[f64]) -> f64,
{
    let total: usize = trajectories.iter().map(Trajectory::len).sum();
    if total == 0 {
        return Err(Error::Empty("batch".into()));
    }
    let mut states = Vec::with_capacity(total);
    let mut actions = Vec::with_capacity(total);
    let mut log_probs_old = Vec::with_capacity(total);
    let mut returns = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    for traj in trajectories {
        let rtg = reward_to_go(traj, gamma, &value_fn);
        for (t, r) in traj.transitions.iter().zip(rtg) {
            states.push(t.state.clone());
            actions.push(t.action.clone());
            log_probs_old.push(t.log_prob_old);
            returns.push(r);
            values.push(value_fn(&t.state));
        }
    }
    let advantages = advantages(&returns, &values, normalize)?;
    Ok(Batch {
        states,
        actions,
        log_probs_old,
        returns,
        advantages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::PendulumEnv;
    use crate::nn::{MlpSpec, ParamSet};
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn test_policy() -> GaussianPolicy {
        let spec = MlpSpec::tanh_net(3, vec![8], 1).unwrap();
        let params = ParamSet::glorot(&spec, &mut Rng::seeded(2));
        GaussianPolicy::from_parts(spec, params, vec![-2.0], vec![2.0]).unwrap()
    }

    fn make_traj(rewards: &[f64], terminated: bool, truncated: bool) -> Trajectory {
        let transitions: Vec<Transition> = rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| Transition {
                state: vec![i as f64],
                action: vec![0.0],
                extrinsic_reward: r,
                intrinsic_reward: 0.0,
                log_prob_old: -1.0,
                terminated: terminated && i == rewards.len() - 1,
                truncated: truncated && i == rewards.len() - 1,
                next_state: vec![i as f64 + 1.0],
            })
            .collect();
        Trajectory {
            episode_return: rewards.iter().sum(),
            transitions,
        }
    }

    #[test]
    fn collect_runs_whole_episodes() {
        let policy = test_policy();
        let mut env = PendulumEnv::new();
        let trajs = collect(
            &policy,
            0.4,
            &mut env,
            1,
            None,
            &mut Rng::seeded(1),
            &mut Rng::seeded(2),
        )
        .unwrap();
        assert_eq!(trajs.len(), 1);
        assert_eq!(trajs[0].len(), 200);
        assert!(trajs[0].transitions.last().unwrap().truncated);
        // Only the final transition carries a done flag.
        assert!(trajs[0].transitions[..199]
            .iter()
            .all(|t| !t.terminated && !t.truncated));
    }

    #[test]
    fn collect_without_hook_leaves_bonuses_zero() {
        let policy = test_policy();
        let mut env = PendulumEnv::new();
        let trajs = collect(
            &policy,
            0.4,
            &mut env,
            150,
            None,
            &mut Rng::seeded(3),
            &mut Rng::seeded(4),
        )
        .unwrap();
        assert!(trajs
            .iter()
            .flat_map(|t| &t.transitions)
            .all(|t| t.intrinsic_reward == 0.0));
    }

    #[test]
    fn collect_is_deterministic_under_a_fixed_seed() {
        let policy = test_policy();
        let run = || {
            let mut env = PendulumEnv::new();
            collect(
                &policy,
                0.4,
                &mut env,
                250,
                None,
                &mut Rng::seeded(10),
                &mut Rng::seeded(11),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), b.len());
        for (ta, tb) in a.iter().zip(&b) {
            assert_eq!(ta.episode_return, tb.episode_return);
            for (x, y) in ta.transitions.iter().zip(&tb.transitions) {
                assert_eq!(x.state, y.state);
                assert_eq!(x.action, y.action);
                assert_eq!(x.log_prob_old, y.log_prob_old);
            }
        }
    }

    #[test]
    fn collect_invokes_the_bonus_hook() {
        let policy = test_policy();
        let mut env = PendulumEnv::new();
        let hook = |_s: &[f64], _a: &[f64], _n: &[f64]| 0.25;
        let trajs = collect(
            &policy,
            0.4,
            &mut env,
            1,
            Some(&hook),
            &mut Rng::seeded(5),
            &mut Rng::seeded(6),
        )
        .unwrap();
        assert!(trajs[0].transitions.iter().all(|t| t.intrinsic_reward == 0.25));
    }

    #[test]
    fn reward_to_go_hand_recursion() {
        let traj = make_traj(&[1.0, 1.0, 1.0], true, false);
        let rtg = reward_to_go(&traj, 0.5, |_| 99.0);
        assert_eq!(rtg, vec![1.75, 1.5, 1.0]);
    }

    #[test]
    fn reward_to_go_bootstraps_truncated_tails() {
        let traj = make_traj(&[1.0], false, true);
        let rtg = reward_to_go(&traj, 0.99, |_| 2.0);
        assert!((rtg[0] - 2.98).abs() < 1e-12);
    }

    #[test]
    fn reward_to_go_discounts_backwards() {
        let traj = make_traj(&[0.0, 0.0, 1.0], true, false);
        let rtg = reward_to_go(&traj, 0.99, |_| 0.0);
        assert!((rtg[0] - 0.9801).abs() < 1e-12);
        assert!((rtg[1] - 0.99).abs() < 1e-12);
        assert_eq!(rtg[2], 1.0);
    }

    #[test]
    fn advantages_subtract_the_baseline() {
        let adv = advantages(&[2.0, 3.0], &[1.0, 1.0], false).unwrap();
        assert_eq!(adv, vec![1.0, 2.0]);
    }

    #[test]
    fn advantages_normalize_to_unit_scale() {
        let adv = advantages(&[2.0, 3.0], &[1.0, 1.0], true).unwrap();
        assert!((adv[0] - -1.0).abs() < 1e-7);
        assert!((adv[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn constant_advantages_normalize_to_zero() {
        let adv = advantages(&[5.0, 5.0, 5.0], &[0.0, 0.0, 0.0], true).unwrap();
        assert_eq!(adv, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn advantages_reject_empty_and_mismatched_input() {
        assert!(matches!(advantages(&[], &[], false), Err(Error::Empty(_))));
        assert!(advantages(&[1.0], &[1.0, 2.0], false).is_err());
        assert!(advantages(&[1.0], &[1.0], true).is_err());
    }

    #[test]
    fn zero_gamma_returns_rewards_as_is() {
        let traj = make_traj(&[3.0, -1.0, 2.0], false, true);
        let rtg = reward_to_go(&traj, 0.0, |_| 7.0);
        assert_eq!(rtg, vec![3.0, -1.0, 2.0]);
    }

    #[test]
    fn episode_recursions_do_not_mix() {
        let a = make_traj(&[1.0, 2.0], true, false);
        let b = make_traj(&[5.0, -1.0, 0.5], false, true);
        let value = |_: &[f64]| 1.5;
        let ab = build_batch(&[a.clone(), b.clone()], 0.9, value, false).unwrap();
        let ba = build_batch(&[b, a], 0.9, value, false).unwrap();
        // Permuting episode order permutes, never changes, per-episode values.
        assert_eq!(ab.returns[..2], ba.returns[3..]);
        assert_eq!(ab.returns[2..], ba.returns[..3]);
    }

    proptest! {
        #[test]
        fn prop_normalized_batch_has_zero_mean_unit_std(
            returns in proptest::collection::vec(-100.0_f64..100.0, 2..200),
        ) {
            let values = vec![0.0; returns.len()];
            let adv = advantages(&returns, &values, true).unwrap();
            let n = adv.len() as f64;
            let mean = adv.iter().sum::<f64>() / n;
            let std = (adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            // Degenerate constant batches collapse to zero instead.
            let spread = returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - returns.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread > 1e-6 {
                prop_assert!((std - 1.0).abs() < 1e-6, "std {std}");
            }
        }
    }
}
