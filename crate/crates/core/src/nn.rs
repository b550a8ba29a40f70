//! Dense feed-forward networks with exact reverse-mode gradients, Adam, and
//! portable parameter checkpoints.
//!
//! A network is an [`MlpSpec`] (shape and activations) plus a [`ParamSet`]
//! (values); all functions take both explicitly. Gradients flow sample by
//! sample through a reusable [`MlpWorkspace`], which keeps training loops
//! allocation-free. All math is in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Element-wise activation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn forward(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Shape of a dense network: input, hidden widths, output.
///
/// `hidden_dims` may be empty, giving a single affine layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    /// Tanh-hidden, identity-output network; the shape every net here uses.
    pub fn tanh_net(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        let spec = MlpSpec {
            input_dim,
            hidden_dims,
            output_dim,
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Identity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("network dims must be >= 1".into()));
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("hidden dims must be >= 1".into()));
        }
        Ok(())
    }

    /// `(in, out)` of each affine layer, in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    fn activation_of_layer(&self, layer: usize, n_layers: usize) -> Activation {
        if layer + 1 == n_layers {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(i, o)| i * o + o)
            .sum()
    }
}

/// One affine layer; weights are row-major with shape `(out, in)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// All parameters of one network, layer by layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub layers: Vec<Layer>,
}

impl ParamSet {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let layers = spec
            .layer_dims()
            .iter()
            .map(|&(i, o)| Layer {
                weights: vec![0.0; i * o],
                biases: vec![0.0; o],
            })
            .collect();
        ParamSet { layers }
    }

    /// Glorot-uniform weights (`limit = sqrt(6 / (fan_in + fan_out))`), zero
    /// biases. Suits tanh layers and is fully determined by the stream.
    pub fn glorot(spec: &MlpSpec, rng: &mut Rng) -> Self {
        let layers = spec
            .layer_dims()
            .iter()
            .map(|&(fan_in, fan_out)| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.uniform_in(-limit, limit))
                    .collect();
                Layer {
                    weights,
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        ParamSet { layers }
    }

    /// Check layer shapes against `spec` and that every entry is finite.
    pub fn validate(&self, spec: &MlpSpec) -> Result<()> {
        self.check_shapes(spec)?;
        for (l, layer) in self.layers.iter().enumerate() {
            if !layer.weights.iter().all(|w| w.is_finite()) {
                return Err(Error::NonFinite(format!("layer {l} weights")));
            }
            if !layer.biases.iter().all(|b| b.is_finite()) {
                return Err(Error::NonFinite(format!("layer {l} biases")));
            }
        }
        Ok(())
    }

    fn check_shapes(&self, spec: &MlpSpec) -> Result<()> {
        let dims = spec.layer_dims();
        if self.layers.len() != dims.len() {
            return Err(Error::shape("layer count", dims.len(), self.layers.len()));
        }
        for (l, (layer, &(fan_in, fan_out))) in self.layers.iter().zip(&dims).enumerate() {
            if layer.weights.len() != fan_in * fan_out {
                return Err(Error::shape(
                    format!("layer {l} weights"),
                    fan_in * fan_out,
                    layer.weights.len(),
                ));
            }
            if layer.biases.len() != fan_out {
                return Err(Error::shape(
                    format!("layer {l} biases"),
                    fan_out,
                    layer.biases.len(),
                ));
            }
        }
        Ok(())
    }

    /// Set every entry to zero, keeping shapes.
    pub fn reset_to_zero(&mut self) {
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
    }
}

/// Reusable buffers for one network's forward and backward passes.
#[derive(Clone, Debug)]
pub struct MlpWorkspace {
    /// `acts[0]` is the input; `acts[l + 1]` is the post-activation output of
    /// layer `l`.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl MlpWorkspace {
    pub fn for_spec(spec: &MlpSpec) -> Self {
        let mut acts = Vec::with_capacity(spec.hidden_dims.len() + 2);
        acts.push(vec![0.0; spec.input_dim]);
        for &(_, out) in &spec.layer_dims() {
            acts.push(vec![0.0; out]);
        }
        let widest = acts.iter().map(Vec::len).max().unwrap_or(0);
        MlpWorkspace {
            acts,
            delta: vec![0.0; widest],
            delta_prev: vec![0.0; widest],
        }
    }

    /// Output of the most recent `forward_into` call.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("workspace has layers")
    }
}

/// Forward pass into a caller-owned workspace.
pub fn forward_into(
    spec: &MlpSpec,
    params: &ParamSet,
    input: &[f64],
    ws: &mut MlpWorkspace,
) -> Result<()> {
    params.check_shapes(spec)?;
    if input.len() != spec.input_dim {
        return Err(Error::shape("input", spec.input_dim, input.len()));
    }
    ws.acts[0].copy_from_slice(input);
    let n_layers = params.layers.len();
    for (l, layer) in params.layers.iter().enumerate() {
        let activation = spec.activation_of_layer(l, n_layers);
        let (before, after) = ws.acts.split_at_mut(l + 1);
        let x = &before[l];
        let y = &mut after[0];
        let fan_in = x.len();
        for (o, out) in y.iter_mut().enumerate() {
            let row = &layer.weights[o * fan_in..(o + 1) * fan_in];
            let mut sum = layer.biases[o];
            for (w, xi) in row.iter().zip(x.iter()) {
                sum += w * xi;
            }
            *out = activation.forward(sum);
        }
    }
    Ok(())
}

/// Forward pass; returns a fresh output vector.
///
/// Deterministic: identical inputs give bit-identical outputs.
pub fn mlp_forward(spec: &MlpSpec, params: &ParamSet, input: &[f64]) -> Result<Vec<f64>> {
    let mut ws = MlpWorkspace::for_spec(spec);
    forward_into(spec, params, input, &mut ws)?;
    Ok(ws.output().to_vec())
}

/// Backward pass over a workspace already filled by [`forward_into`] for the
/// same `(spec, params)`.
///
/// Accumulates (`+=`) the gradients of `scale * (output . output_grad)` into
/// `grad_accum`; `input_grad`, when given, is overwritten.
pub fn backward_into(
    spec: &MlpSpec,
    params: &ParamSet,
    ws: &mut MlpWorkspace,
    output_grad: &[f64],
    scale: f64,
    grad_accum: &mut ParamSet,
    mut input_grad: Option<&mut Vec<f64>>,
) -> Result<()> {
    if output_grad.len() != spec.output_dim {
        return Err(Error::shape("output_grad", spec.output_dim, output_grad.len()));
    }
    grad_accum.check_shapes(spec)?;
    let n_layers = params.layers.len();

    // delta holds dL/d(pre-activation) of the layer being processed.
    {
        let top = ws.acts.last().expect("acts");
        let act = spec.activation_of_layer(n_layers - 1, n_layers);
        for (d, (g, y)) in ws.delta.iter_mut().zip(output_grad.iter().zip(top.iter())) {
            *d = scale * g * act.grad_from_output(*y);
        }
    }

    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        let grads = &mut grad_accum.layers[l];
        let x = &ws.acts[l];
        let fan_in = x.len();
        let fan_out = grads.biases.len();

        ws.delta_prev[..fan_in].iter_mut().for_each(|d| *d = 0.0);
        for o in 0..fan_out {
            let d = ws.delta[o];
            grads.biases[o] += d;
            let row = o * fan_in;
            let w_row = &layer.weights[row..row + fan_in];
            let g_row = &mut grads.weights[row..row + fan_in];
            for i in 0..fan_in {
                g_row[i] += d * x[i];
                ws.delta_prev[i] += w_row[i] * d;
            }
        }

        if l > 0 {
            // Fold the previous layer's activation derivative in now so the
            // next round can treat delta as a pre-activation gradient.
            let act = spec.activation_of_layer(l - 1, n_layers);
            let y = &ws.acts[l];
            for i in 0..fan_in {
                ws.delta[i] = ws.delta_prev[i] * act.grad_from_output(y[i]);
            }
        } else if let Some(out) = input_grad.as_deref_mut() {
            out.clear();
            out.extend_from_slice(&ws.delta_prev[..fan_in]);
        }
    }
    Ok(())
}

/// Exact reverse-mode gradients of `(output . output_grad)` with respect to
/// every parameter and the input.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &ParamSet,
    input: &[f64],
    output_grad: &[f64],
) -> Result<(ParamSet, Vec<f64>)> {
    let mut ws = MlpWorkspace::for_spec(spec);
    forward_into(spec, params, input, &mut ws)?;
    let mut grads = ParamSet::zeros(spec);
    let mut input_grad = Vec::with_capacity(spec.input_dim);
    backward_into(spec, params, &mut ws, output_grad, 1.0, &mut grads, Some(&mut input_grad))?;
    Ok((grads, input_grad))
}

/// Adam optimizer state for one [`ParamSet`].
#[derive(Clone, Debug)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: ParamSet,
    pub second_moment: ParamSet,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(spec: &MlpSpec, learning_rate: f64) -> Self {
        AdamState {
            step_count: 0,
            first_moment: ParamSet::zeros(spec),
            second_moment: ParamSet::zeros(spec),
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam descent step.
///
/// Callers wanting ascent negate the gradient. Rejects non-finite gradients,
/// naming the offending array.
pub fn adam_step(params: &mut ParamSet, grads: &ParamSet, state: &mut AdamState) -> Result<()> {
    for (l, layer) in grads.layers.iter().enumerate() {
        if !layer.weights.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient for layer {l} weights")));
        }
        if !layer.biases.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient for layer {l} biases")));
        }
    }
    if params.layers.len() != grads.layers.len() {
        return Err(Error::shape("adam gradient layer count", params.layers.len(), grads.layers.len()));
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let correction1 = 1.0 - state.beta1.powi(t);
    let correction2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);

    for l in 0..params.layers.len() {
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        update(
            &mut params.layers[l].weights,
            &grads.layers[l].weights,
            &mut state.first_moment.layers[l].weights,
            &mut state.second_moment.layers[l].weights,
        );
        update(
            &mut params.layers[l].biases,
            &grads.layers[l].biases,
            &mut state.first_moment.layers[l].biases,
            &mut state.second_moment.layers[l].biases,
        );
    }
    Ok(())
}

// --- checkpoint document ----------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    w: Vec<String>,
    b: Vec<String>,
}

/// Serialized form of one network: shape plus hex-encoded IEEE-754 floats.
/// The hex bit patterns are authoritative, making round trips bit-identical.
#[derive(Serialize, Deserialize)]
pub struct NetDoc {
    spec: MlpSpec,
    layers: Vec<LayerDoc>,
}

fn f64_to_hex(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn f64_from_hex(s: &str) -> Result<f64> {
    let bits = u64::from_str_radix(s, 16)
        .map_err(|_| Error::Parse(format!("bad hex float '{s}'")))?;
    Ok(f64::from_bits(bits))
}

impl NetDoc {
    pub fn from_params(spec: &MlpSpec, params: &ParamSet) -> Result<Self> {
        params.validate(spec)?;
        let layers = params
            .layers
            .iter()
            .map(|layer| LayerDoc {
                w: layer.weights.iter().copied().map(f64_to_hex).collect(),
                b: layer.biases.iter().copied().map(f64_to_hex).collect(),
            })
            .collect();
        Ok(NetDoc {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn into_params(self) -> Result<(MlpSpec, ParamSet)> {
        self.spec.validate().map_err(|e| Error::Parse(e.to_string()))?;
        let dims = self.spec.layer_dims();
        if self.layers.len() != dims.len() {
            return Err(Error::Parse(format!(
                "checkpoint has {} layers, spec wants {}",
                self.layers.len(),
                dims.len()
            )));
        }
        let mut layers = Vec::with_capacity(dims.len());
        for (l, (doc, &(fan_in, fan_out))) in self.layers.into_iter().zip(&dims).enumerate() {
            if doc.w.len() != fan_in * fan_out || doc.b.len() != fan_out {
                return Err(Error::Parse(format!(
                    "layer {l} arrays do not match spec dims {fan_in}x{fan_out}"
                )));
            }
            let weights = doc.w.iter().map(|s| f64_from_hex(s)).collect::<Result<_>>()?;
            let biases = doc.b.iter().map(|s| f64_from_hex(s)).collect::<Result<_>>()?;
            layers.push(Layer { weights, biases });
        }
        Ok((self.spec, ParamSet { layers }))
    }
}

/// Serialize parameters to the portable checkpoint text.
pub fn save_params(params: &ParamSet, spec: &MlpSpec) -> Result<String> {
    let doc = NetDoc::from_params(spec, params)?;
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Inverse of [`save_params`]; validates the document against its own spec.
pub fn load_params(text: &str) -> Result<(MlpSpec, ParamSet)> {
    let doc: NetDoc =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("checkpoint: {e}")))?;
    doc.into_params()
}
