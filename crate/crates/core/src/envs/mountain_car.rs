//! Continuous-force mountain car: an underpowered cart must rock between
//! two slopes to reach the right-hand hilltop. The only positive reward is
//! the +100 goal bonus, which makes it a hard-exploration task.

use super::{check_action, Env, StepResult};
use crate::error::{Error, Result};
use crate::rng::Rng;

const MIN_POSITION: f64 = -1.2;
const MAX_POSITION: f64 = 0.6;
const MAX_SPEED: f64 = 0.07;
const GOAL_POSITION: f64 = 0.45;
const FORCE_SCALE: f64 = 0.0015;
const GRAVITY_SCALE: f64 = 0.0025;
const GOAL_BONUS: f64 = 100.0;
const MAX_STEPS: usize = 999;

pub struct MountainCarEnv {
    position: f64,
    velocity: f64,
    steps: usize,
    needs_reset: bool,
    action_low: [f64; 1],
    action_high: [f64; 1],
    state_low: [f64; 2],
    state_high: [f64; 2],
}

impl MountainCarEnv {
    pub fn new() -> Self {
        MountainCarEnv {
            position: 0.0,
            velocity: 0.0,
            steps: 0,
            needs_reset: true,
            action_low: [-1.0],
            action_high: [1.0],
            state_low: [MIN_POSITION, -MAX_SPEED],
            state_high: [MAX_POSITION, MAX_SPEED],
        }
    }

    #[cfg(test)]
    pub(crate) fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
        self.steps = 0;
        self.needs_reset = false;
    }
}

impl Default for MountainCarEnv {
    fn default() -> Self {
        MountainCarEnv::new()
    }
}

impl Env for MountainCarEnv {
    fn state_dim(&self) -> usize {
        2
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
        "mountaincar"
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.position = rng.uniform_in(-0.6, -0.4);
        self.velocity = 0.0;
        self.steps = 0;
        self.needs_reset = false;
        vec![self.position, self.velocity]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.needs_reset {
            return Err(Error::EpisodeOver);
        }
        check_action(action.len(), 1)?;
        let force = action[0].clamp(-1.0, 1.0);

        self.velocity += FORCE_SCALE * force - GRAVITY_SCALE * (3.0 * self.position).cos();
        self.velocity = self.velocity.clamp(-MAX_SPEED, MAX_SPEED);
        self.position += self.velocity;
        self.position = self.position.clamp(MIN_POSITION, MAX_POSITION);
        // Inelastic left wall.
        if self.position <= MIN_POSITION && self.velocity < 0.0 {
            self.velocity = 0.0;
        }

        let terminated = self.position >= GOAL_POSITION;
        let mut reward = -0.1 * force * force;
        if terminated {
            reward += GOAL_BONUS;
        }

        self.steps += 1;
        let truncated = !terminated && self.steps >= MAX_STEPS;
        self.needs_reset = terminated || truncated;
        Ok(StepResult {
            next_state: vec![self.position, self.velocity],
            reward,
            terminated,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gravity_alone_pulls_the_cart() {
        let mut env = MountainCarEnv::new();
        env.set_state(-0.5, 0.0);
        let step = env.step(&[0.0]).unwrap();
        let expected_v = -GRAVITY_SCALE * (-1.5_f64).cos();
        assert!((step.next_state[1] - expected_v).abs() < 1e-15);
        assert!((step.next_state[0] - (-0.5 + expected_v)).abs() < 1e-15);
    }

    #[test]
    fn reaching_the_goal_terminates_with_the_bonus() {
        let mut env = MountainCarEnv::new();
        env.set_state(0.44, MAX_SPEED);
        let step = env.step(&[1.0]).unwrap();
        assert!(step.terminated);
        assert!(!step.truncated);
        assert!((step.reward - (GOAL_BONUS - 0.1)).abs() < 1e-12);
    }

    /// Oracle: direct 999-step simulation showing full throttle from rest
    /// stalls below the goal; the car has to rock to get out.
    #[test]
    fn constant_full_throttle_never_reaches_the_goal() {
        let mut env = MountainCarEnv::new();
        env.set_state(-0.5, 0.0);
        let mut last = None;
        for _ in 0..MAX_STEPS {
            let step = env.step(&[1.0]).unwrap();
            assert!(!step.terminated, "goal should be unreachable this way");
            assert!(step.next_state[0] < GOAL_POSITION);
            last = Some(step);
        }
        assert!(last.unwrap().truncated);
    }

    #[test]
    fn left_wall_is_inelastic() {
        let mut env = MountainCarEnv::new();
        // Full leftward speed just shy of the wall: hits it this step.
        env.set_state(MIN_POSITION + 0.01, -MAX_SPEED);
        let step = env.step(&[-1.0]).unwrap();
        assert_eq!(step.next_state, vec![MIN_POSITION, 0.0]);
    }
}
