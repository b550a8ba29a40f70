//! Exploration bonus generators.
//!
//! Two learned modules and one tabular oracle:
//!
//! * [`CuriosityModule`] — forward dynamics model; the bonus is the scaled
//!   squared prediction error of the next state.
//! * [`UncertaintyModule`] — step-count estimator; trained to predict how
//!   many environment steps separate two states, it scores each one-step
//!   transition by its predicted step count. Transitions that look many
//!   steps wide are rare or hard, and get encouraged.
//! * [`CountTable`] — discretized visit counts with the classic
//!   `sqrt(1 / N(s))` optimism bonus, kept as an independent yardstick for
//!   validating the learned uncertainty signal.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::{
    adam_step, backward_into, forward_into, AdamState, MlpSpec, MlpWorkspace, ParamSet,
};
use crate::rng::Rng;
use crate::rollout::{Trajectory, Transition};

const UPDATE_MINIBATCH: usize = 64;

/// Forward dynamics model `f(s, a) ~ s'` with one hidden layer of 32.
#[derive(Clone, Debug)]
pub struct CuriosityModule {
    pub spec: MlpSpec,
    pub params: ParamSet,
    /// Mixing weight between prediction error and extrinsic reward.
    pub beta: f64,
}

impl CuriosityModule {
    pub fn new(state_dim: usize, action_dim: usize, beta: f64, rng: &mut Rng) -> Result<Self> {
        if beta < 0.0 {
            return Err(Error::Config("beta must be >= 0".into()));
        }
        let spec = MlpSpec::tanh_net(state_dim + action_dim, vec![32], state_dim)?;
        let params = ParamSet::glorot(&spec, rng);
        Ok(CuriosityModule { spec, params, beta })
    }

    fn state_dim(&self) -> usize {
        self.spec.output_dim
    }

    fn action_dim(&self) -> usize {
        self.spec.input_dim - self.spec.output_dim
    }
}

/// Curiosity bonus: `beta * ||f(s, a) - s'||^2`.
pub fn icm_bonus(
    module: &CuriosityModule,
    state: &[f64],
    action: &[f64],
    next_state: &[f64],
) -> Result<f64> {
    if state.len() != module.state_dim() || next_state.len() != module.state_dim() {
        return Err(Error::shape("curiosity state", module.state_dim(), state.len()));
    }
    if action.len() != module.action_dim() {
        return Err(Error::shape("curiosity action", module.action_dim(), action.len()));
    }
    let mut input = Vec::with_capacity(module.spec.input_dim);
    input.extend_from_slice(state);
    input.extend_from_slice(action);
    let predicted = crate::nn::mlp_forward(&module.spec, &module.params, &input)?;
    let err: f64 = predicted
        .iter()
        .zip(next_state)
        .map(|(p, s)| (p - s) * (p - s))
        .sum();
    Ok(module.beta * err)
}

/// One Adam epoch of forward-model regression over shuffled minibatches.
/// Returns the mean squared prediction error seen during the pass.
pub fn icm_update(
    module: &mut CuriosityModule,
    transitions: &[&Transition],
    adam: &mut AdamState,
    shuffle_rng: &mut Rng,
) -> Result<f64> {
    if transitions.is_empty() {
        return Err(Error::Empty("curiosity update".into()));
    }
    let mut ws = MlpWorkspace::for_spec(&module.spec);
    let mut grads = ParamSet::zeros(&module.spec);
    let mut input = vec![0.0; module.spec.input_dim];
    let mut out_grad = vec![0.0; module.spec.output_dim];
    let mut indices: Vec<usize> = (0..transitions.len()).collect();
    shuffle_rng.shuffle(&mut indices);

    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    for chunk in indices.chunks(UPDATE_MINIBATCH) {
        grads.reset_to_zero();
        let inv_m = 1.0 / chunk.len() as f64;
        let mut mb_loss = 0.0;
        for &i in chunk {
            let t = transitions[i];
            input[..t.state.len()].copy_from_slice(&t.state);
            input[t.state.len()..].copy_from_slice(&t.action);
            forward_into(&module.spec, &module.params, &input, &mut ws)?;
            let mut sample_loss = 0.0;
            for (j, (p, s)) in ws.output().iter().zip(&t.next_state).enumerate() {
                let diff = p - s;
                sample_loss += diff * diff;
                out_grad[j] = 2.0 * diff * inv_m;
            }
            mb_loss += sample_loss * inv_m;
            backward_into(&module.spec, &module.params, &mut ws, &out_grad, 1.0, &mut grads, None)?;
        }
        if !mb_loss.is_finite() {
            return Err(Error::NonFinite("curiosity loss".into()));
        }
        loss_sum += mb_loss;
        loss_count += 1;
        adam_step(&mut module.params, &grads, adam)?;
    }
    Ok(loss_sum / loss_count as f64)
}

/// Step-count estimator `N(s_t, s_{t+n}) ~ n` with two hidden layers of 64.
#[derive(Clone, Debug)]
pub struct UncertaintyModule {
    pub spec: MlpSpec,
    pub params: ParamSet,
    /// Mixing weight between the step-count bonus and extrinsic reward.
    pub c1: f64,
    /// Predictions are clamped to `[0, n_max]` before pricing.
    pub n_max: usize,
    /// Optional subtraction of the one-step floor from the priced bonus.
    pub bonus_offset: f64,
    /// Optional affine input map onto `[-1, 1]` per dimension; off by
    /// default, the raw state pair feeds the network directly.
    pub input_bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl UncertaintyModule {
    pub fn new(
        state_dim: usize,
        c1: f64,
        n_max: usize,
        bonus_offset: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if c1 < 0.0 {
            return Err(Error::Config("c1 must be >= 0".into()));
        }
        if n_max == 0 {
            return Err(Error::Config("n_max must be >= 1".into()));
        }
        let spec = MlpSpec::tanh_net(2 * state_dim, vec![64, 64], 1)?;
        let params = ParamSet::glorot(&spec, rng);
        Ok(UncertaintyModule {
            spec,
            params,
            c1,
            n_max,
            bonus_offset,
            input_bounds: None,
        })
    }

    /// Standardize network inputs by the given per-dimension state bounds.
    pub fn with_input_standardization(mut self, low: &[f64], high: &[f64]) -> Result<Self> {
        let dim = self.state_dim();
        if low.len() != dim || high.len() != dim {
            return Err(Error::shape("standardization bounds", dim, low.len()));
        }
        if low.iter().zip(high).any(|(l, h)| l >= h) {
            return Err(Error::Config("standardization needs low < high".into()));
        }
        self.input_bounds = Some((low.to_vec(), high.to_vec()));
        Ok(self)
    }

    fn state_dim(&self) -> usize {
        self.spec.input_dim / 2
    }

    fn fill_input(&self, from: &[f64], to: &[f64], input: &mut [f64]) {
        let dim = from.len();
        input[..dim].copy_from_slice(from);
        input[dim..].copy_from_slice(to);
        if let Some((low, high)) = &self.input_bounds {
            for (d, x) in input.iter_mut().enumerate() {
                let (lo, hi) = (low[d % dim], high[d % dim]);
                *x = 2.0 * (*x - lo) / (hi - lo) - 1.0;
            }
        }
    }

    /// Raw step-count prediction for a state pair, before clamping.
    pub fn predict(&self, from: &[f64], to: &[f64]) -> Result<f64> {
        if from.len() != self.state_dim() || to.len() != self.state_dim() {
            return Err(Error::shape("uncertainty state", self.state_dim(), from.len()));
        }
        let mut input = vec![0.0; self.spec.input_dim];
        self.fill_input(from, to, &mut input);
        Ok(crate::nn::mlp_forward(&self.spec, &self.params, &input)?[0])
    }
}

/// Uncertainty bonus for one observed transition:
/// `c1 * max(0, clamp(N(s, s'), 0, n_max) - bonus_offset)`.
pub fn iem_bonus(module: &UncertaintyModule, state: &[f64], next_state: &[f64]) -> Result<f64> {
    let estimate = module.predict(state, next_state)?;
    let clamped = estimate.clamp(0.0, module.n_max as f64);
    Ok(module.c1 * (clamped - module.bonus_offset).max(0.0))
}

/// One training example for the step-count estimator.
#[derive(Clone, Debug)]
pub struct StatePair {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    /// True number of environment steps between the two states.
    pub gap: usize,
}

/// Sample training pairs from whole trajectories.
///
/// For each start index with at least one successor in the same episode, one
/// pair is emitted with the gap drawn uniformly from `1..=min(n_max,
/// remaining)`. Pairs never cross episode boundaries.
pub fn iem_pairs(trajectories: &[Trajectory], n_max: usize, rng: &mut Rng) -> Vec<StatePair> {
    let mut pairs = Vec::new();
    for traj in trajectories {
        let len = traj.len();
        for start in 0..len.saturating_sub(1) {
            let widest = n_max.min(len - 1 - start);
            let gap = 1 + rng.below(widest);
            pairs.push(StatePair {
                from: traj.transitions[start].state.clone(),
                to: traj.transitions[start + gap].state.clone(),
                gap,
            });
        }
    }
    pairs
}

/// One Adam epoch of step-count regression over shuffled minibatches.
/// Returns the mean squared error seen during the pass.
pub fn iem_update(
    module: &mut UncertaintyModule,
    pairs: &[StatePair],
    adam: &mut AdamState,
    shuffle_rng: &mut Rng,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("uncertainty update".into()));
    }
    let mut ws = MlpWorkspace::for_spec(&module.spec);
    let mut grads = ParamSet::zeros(&module.spec);
    let mut input = vec![0.0; module.spec.input_dim];
    let mut indices: Vec<usize> = (0..pairs.len()).collect();
    shuffle_rng.shuffle(&mut indices);

    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    for chunk in indices.chunks(UPDATE_MINIBATCH) {
        grads.reset_to_zero();
        let inv_m = 1.0 / chunk.len() as f64;
        let mut mb_loss = 0.0;
        for &i in chunk {
            let pair = &pairs[i];
            module.fill_input(&pair.from, &pair.to, &mut input);
            forward_into(&module.spec, &module.params, &input, &mut ws)?;
            let residual = ws.output()[0] - pair.gap as f64;
            mb_loss += residual * residual * inv_m;
            let out_grad = [2.0 * residual * inv_m];
            backward_into(&module.spec, &module.params, &mut ws, &out_grad, 1.0, &mut grads, None)?;
        }
        if !mb_loss.is_finite() {
            return Err(Error::NonFinite("uncertainty loss".into()));
        }
        loss_sum += mb_loss;
        loss_count += 1;
        adam_step(&mut module.params, &grads, adam)?;
    }
    Ok(loss_sum / loss_count as f64)
}

/// Visit counts over a uniform per-dimension discretization of the state
/// space. Used as the tabular oracle the learned uncertainty signal is
/// checked against.
#[derive(Clone, Debug)]
pub struct CountTable {
    lows: Vec<f64>,
    highs: Vec<f64>,
    bins_per_dim: usize,
    counts: BTreeMap<Vec<u32>, u64>,
    total: u64,
}

impl CountTable {
    /// Ten uniform bins per dimension over the given bounds.
    pub fn new(lows: &[f64], highs: &[f64]) -> Result<Self> {
        Self::with_bins(lows, highs, 10)
    }

    pub fn with_bins(lows: &[f64], highs: &[f64], bins_per_dim: usize) -> Result<Self> {
        if lows.len() != highs.len() || lows.is_empty() {
            return Err(Error::shape("count table bounds", lows.len(), highs.len()));
        }
        if bins_per_dim == 0 {
            return Err(Error::Config("bins_per_dim must be >= 1".into()));
        }
        if lows.iter().zip(highs).any(|(l, h)| l >= h) {
            return Err(Error::Config("count table needs low < high per dim".into()));
        }
        Ok(CountTable {
            lows: lows.to_vec(),
            highs: highs.to_vec(),
            bins_per_dim,
            counts: BTreeMap::new(),
            total: 0,
        })
    }

    /// Cell index of a state; out-of-range values land in the edge bins.
    pub fn cell_of(&self, state: &[f64]) -> Vec<u32> {
        state
            .iter()
            .zip(self.lows.iter().zip(&self.highs))
            .map(|(x, (lo, hi))| {
                let frac = (x - lo) / (hi - lo);
                let bin = (frac * self.bins_per_dim as f64).floor();
                (bin.clamp(0.0, (self.bins_per_dim - 1) as f64)) as u32
            })
            .collect()
    }

    pub fn record(&mut self, state: &[f64]) {
        let cell = self.cell_of(state);
        *self.counts.entry(cell).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn count(&self, state: &[f64]) -> u64 {
        self.counts.get(&self.cell_of(state)).copied().unwrap_or(0)
    }

    pub fn total_visits(&self) -> u64 {
        self.total
    }

    /// Visited cells and their counts, in deterministic cell order.
    pub fn cells(&self) -> impl Iterator<Item = (&Vec<u32>, u64)> {
        self.counts.iter().map(|(cell, &n)| (cell, n))
    }
}

/// Tabular optimism bonus `sqrt(1 / N(s))`, with unvisited cells priced at
/// the cap of 1.
pub fn count_bonus(table: &CountTable, state: &[f64]) -> f64 {
    match table.count(state) {
        0 => 1.0,
        n => (1.0 / n as f64).sqrt(),
    }
}
