//! Torque-limited pendulum swing-up with a fixed 200-step horizon.

use std::f64::consts::PI;

use super::{check_action, Env, StepResult};
use crate::error::{Error, Result};
use crate::rng::Rng;

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const MAX_STEPS: usize = 200;

/// Observation is `(cos theta, sin theta, theta_dot)`; the episode never
/// terminates and truncates after 200 steps.
pub struct PendulumEnv {
    theta: f64,
    theta_dot: f64,
    steps: usize,
    needs_reset: bool,
    action_low: [f64; 1],
    action_high: [f64; 1],
    state_low: [f64; 3],
    state_high: [f64; 3],
}

impl PendulumEnv {
    pub fn new() -> Self {
        PendulumEnv {
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            needs_reset: true,
            action_low: [-MAX_TORQUE],
            action_high: [MAX_TORQUE],
            state_low: [-1.0, -1.0, -MAX_SPEED],
            state_high: [1.0, 1.0, MAX_SPEED],
        }
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    #[cfg(test)]
    pub(crate) fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps = 0;
        self.needs_reset = false;
    }
}

impl Default for PendulumEnv {
    fn default() -> Self {
        PendulumEnv::new()
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub(crate) fn wrap_angle(theta: f64) -> f64 {
    PI - (PI - theta).rem_euclid(2.0 * PI)
}

impl Env for PendulumEnv {
    fn state_dim(&self) -> usize {
        3
    }
    fn action_dim(&self) -> usize {
        1
    }
    fn action_low(&self) -> &[f64] {
        &self.action_low
    }
    fn action_high(&self) -> &[f64] {
        &self.action_high
    }
    fn state_low(&self) -> &[f64] {
        &self.state_low
    }
    fn state_high(&self) -> &[f64] {
        &self.state_high
    }
    fn max_episode_steps(&self) -> usize {
        MAX_STEPS
    }
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.theta = rng.uniform_in(-PI, PI);
        self.theta_dot = rng.uniform_in(-1.0, 1.0);
        self.steps = 0;
        self.needs_reset = false;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.needs_reset {
            return Err(Error::EpisodeOver);
        }
        check_action(action.len(), 1)?;
        let torque = action[0].clamp(-MAX_TORQUE, MAX_TORQUE);

        // Cost is charged on the pre-step state, so the upright fixed point
        // with zero torque costs exactly zero.
        let angle = wrap_angle(self.theta);
        let reward =
            -(angle * angle + 0.1 * self.theta_dot * self.theta_dot + 0.001 * torque * torque);

        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * self.theta.sin()
            + 3.0 / (MASS * LENGTH * LENGTH) * torque;
        self.theta_dot = (self.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += self.theta_dot * DT;

        self.steps += 1;
        let truncated = self.steps >= MAX_STEPS;
        self.needs_reset = truncated;
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            terminated: false,
            truncated,
        })
    }
}
