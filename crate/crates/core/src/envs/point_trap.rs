//! 2-D point mass with a decoy reward pocket between start and goal.
//!
//! Per-step reward is the negative distance to the goal at (5, 0), plus a
//! +2 shaping bump while sitting inside a decoy disk at (1.5, 0). Loitering
//! in the decoy beats every transit state further than 1.5 from the goal, so
//! greedy controllers park there instead of collecting the +500 goal bonus —
//! a built-in local optimum for exploration experiments.

use super::{check_action, Env, StepResult};
use crate::error::{Error, Result};
use crate::rng::Rng;

const GOAL: [f64; 2] = [5.0, 0.0];
const DECOY: [f64; 2] = [1.5, 0.0];
const GOAL_RADIUS: f64 = 0.5;
const DECOY_RADIUS: f64 = 0.5;
const DECOY_BONUS: f64 = 2.0;
const GOAL_BONUS: f64 = 500.0;
const DT: f64 = 0.1;
const MAX_SPEED: f64 = 1.0;
const ARENA: f64 = 10.0;
const MAX_STEPS: usize = 300;

pub struct PointTrapEnv {
    pos: [f64; 2],
    vel: [f64; 2],
    steps: usize,
    needs_reset: bool,
    action_low: [f64; 2],
    action_high: [f64; 2],
    state_low: [f64; 4],
    state_high: [f64; 4],
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl PointTrapEnv {
    pub fn new() -> Self {
        PointTrapEnv {
            pos: [0.0, 0.0],
            vel: [0.0, 0.0],
            steps: 0,
            needs_reset: true,
            action_low: [-1.0, -1.0],
            action_high: [1.0, 1.0],
            state_low: [-ARENA, -ARENA, -MAX_SPEED, -MAX_SPEED],
            state_high: [ARENA, ARENA, MAX_SPEED, MAX_SPEED],
        }
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }

    /// Reward granted for occupying `pos`, before any goal bonus.
    pub(crate) fn occupancy_reward(pos: [f64; 2]) -> f64 {
        let mut r = -dist(pos, GOAL);
        if dist(pos, DECOY) <= DECOY_RADIUS {
            r += DECOY_BONUS;
        }
        r
    }

    pub(crate) fn in_goal(pos: [f64; 2]) -> bool {
        dist(pos, GOAL) <= GOAL_RADIUS
    }

    #[cfg(test)]
    pub(crate) fn set_state(&mut self, pos: [f64; 2], vel: [f64; 2]) {
        self.pos = pos;
        self.vel = vel;
        self.steps = 0;
        self.needs_reset = false;
    }

    #[cfg(test)]
    pub(crate) fn position(&self) -> [f64; 2] {
        self.pos
    }
}

impl Default for PointTrapEnv {
    fn default() -> Self {
        PointTrapEnv::new()
    }
}

impl Env for PointTrapEnv {
    fn state_dim(&self) -> usize {
        4
    }
    fn action_dim(&self) -> usize {
        2
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
        "pointtrap"
    }

    fn reset(&mut self, _rng: &mut Rng) -> Vec<f64> {
        self.pos = [0.0, 0.0];
        self.vel = [0.0, 0.0];
        self.steps = 0;
        self.needs_reset = false;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.needs_reset {
            return Err(Error::EpisodeOver);
        }
        check_action(action.len(), 2)?;

        let mut reward = Self::occupancy_reward(self.pos);

        for d in 0..2 {
            let accel = action[d].clamp(-1.0, 1.0);
            self.vel[d] = (self.vel[d] + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
            self.pos[d] += self.vel[d] * DT;
            // Inelastic arena walls.
            if self.pos[d] <= -ARENA {
                self.pos[d] = -ARENA;
                self.vel[d] = 0.0;
            } else if self.pos[d] >= ARENA {
                self.pos[d] = ARENA;
                self.vel[d] = 0.0;
            }
        }

        let terminated = Self::in_goal(self.pos);
        if terminated {
            reward += GOAL_BONUS;
        }
        self.steps += 1;
        let truncated = !terminated && self.steps >= MAX_STEPS;
        self.needs_reset = terminated || truncated;
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            terminated,
            truncated,
        })
    }
}
