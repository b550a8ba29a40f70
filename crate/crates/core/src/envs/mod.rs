//! Deterministic, seedable continuous-control environments.
//!
//! Three desk-scale tasks behind one interface: a swing-up pendulum (dense
//! reward, fixed horizon), a continuous mountain car (hard exploration,
//! sparse goal), and a 2-D point mass with a decoy reward pocket (local
//! optimum trap). Dynamics are pure `f64` arithmetic; randomness enters only
//! through `reset`, so a seed plus an action sequence fixes the trajectory
//! bit for bit.

mod mountain_car;
mod pendulum;
mod point_trap;

pub use mountain_car::MountainCarEnv;
pub use pendulum::PendulumEnv;
pub use point_trap::PointTrapEnv;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Outcome of one environment step.
///
/// `terminated` marks environmental absorption (goal or failure);
/// `truncated` marks the time limit. The two are kept apart because
/// truncated tails get bootstrapped with the value network while terminated
/// tails are worth exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Behavioral contract shared by all environments.
pub trait Env {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn action_low(&self) -> &[f64];
    fn action_high(&self) -> &[f64];
    /// Declared per-dimension state ranges; emitted states stay inside them.
    fn state_low(&self) -> &[f64];
    fn state_high(&self) -> &[f64];
    fn max_episode_steps(&self) -> usize;
    fn name(&self) -> &'static str;

    /// Start a new episode; draws come only from `rng`.
    fn reset(&mut self, rng: &mut Rng) -> Vec<f64>;

    /// Advance one step. Stepping a finished episode is an error.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

/// Look up an environment by its CLI name.
pub fn env_by_name(name: &str) -> Result<Box<dyn Env>> {
    match name {
        "pendulum" => Ok(Box::new(PendulumEnv::new())),
        "mountaincar" => Ok(Box::new(MountainCarEnv::new())),
        "pointtrap" => Ok(Box::new(PointTrapEnv::new())),
        other => Err(Error::UnknownEnv(other.to_string())),
    }
}

/// Names accepted by [`env_by_name`].
pub const ENV_NAMES: [&str; 3] = ["pendulum", "mountaincar", "pointtrap"];

pub(crate) fn check_action(len: usize, expected: usize) -> Result<()> {
    if len != expected {
        return Err(Error::shape("action", expected, len));
    }
    Ok(())
}
