//! Continuous-control reinforcement learning with PPO and two intrinsic
//! exploration bonuses, self-contained at desk scale.
//!
//! The crate bundles:
//!
//! * [`nn`] — small dense tanh networks with exact reverse-mode gradients,
//!   Adam, and bit-exact parameter checkpoints;
//! * [`policy`] — a diagonal-Gaussian policy whose exploration scale follows
//!   a reward-indexed, monotonically shrinking schedule;
//! * [`envs`] — three seedable physics environments (pendulum, continuous
//!   mountain car, point-mass decoy trap);
//! * [`rollout`] — whole-episode collection and Monte-Carlo reward-to-go
//!   targets with time-limit bootstrapping;
//! * [`ppo`] — the clipped-surrogate update with KL early stopping, plus the
//!   per-iteration training driver;
//! * [`intrinsic`] — the curiosity (forward-model) and step-count
//!   uncertainty bonus modules, and a tabular count-bonus oracle;
//! * [`harness`] — seeded runs, CSV metrics, checkpoints, sweeps.
//!
//! Every run is a pure function of its configuration and seed: reruns
//! produce identical metrics apart from the wall-clock column.

pub mod envs;
mod error;
pub mod harness;
pub mod intrinsic;
pub mod nn;
pub mod policy;
pub mod ppo;
pub mod rng;
pub mod rollout;
pub mod stats;

pub use envs::{env_by_name, Env, StepResult};
pub use error::{Error, Result};
pub use harness::{
    eval_checkpoint, run, sigma_sweep, sweep, MetricsRow, PartialRunConfig, RunConfig, RunResult,
    SweepFile, SweepSummary,
};
pub use intrinsic::{CountTable, CuriosityModule, UncertaintyModule};
pub use nn::{AdamState, MlpSpec, ParamSet};
pub use policy::{GaussianPolicy, SigmaSchedule};
pub use ppo::{Algo, AlgoParams, AlgoState, PpoConfig};
pub use rng::Rng;
pub use rollout::{Batch, Trajectory, Transition};
