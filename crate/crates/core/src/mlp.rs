//! From-scratch multilayer perceptron: six ReLU hidden layers with identity
//! skip connections and inverted dropout, a linear scalar output, L1 loss,
//! hand-derived backpropagation, Adam, and early-stopped mini-batch training.
//!
//! All arithmetic is f64 so the finite-difference gradient checks in the
//! test suite can run tight tolerances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::dataset::Samples;
use crate::seeds;
use crate::Result;

/// Network shape description.
///
/// Hidden layer indices are 1-based in `dropout_after` and `skip_spans`.
/// A span `(s, t)` adds the recorded output of hidden layer `s` to the
/// post-ReLU activation of hidden layer `t` (before `t`'s dropout, if any),
/// so chained spans such as 1→3→5 accumulate. Both ends of a span must have
/// equal width; the connection carries no parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub dropout_rate: f64,
    /// Hidden layers whose output passes through dropout (1-based).
    pub dropout_after: Vec<usize>,
    /// Identity residual connections between hidden layers (1-based, from < to).
    pub skip_spans: Vec<(usize, usize)>,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            input_dim: 4,
            hidden_widths: vec![64; 6],
            dropout_rate: 0.2,
            dropout_after: vec![2, 4],
            skip_spans: vec![(1, 3), (3, 5)],
        }
    }
}

impl Architecture {
    pub fn n_hidden(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Layer dimensions including input and the scalar output:
    /// `[input_dim, w1, ..., w6, 1]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.n_hidden() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_widths);
        dims.push(1);
        dims
    }

    /// Structural invariants of the surrogate network: six hidden layers,
    /// equal-width skips, dropout rate in [0, 1).
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be > 0".to_string()));
        }
        if self.hidden_widths.len() != 6 {
            return Err(Error::config(format!(
                "architecture requires exactly 6 hidden layers, got {}",
                self.hidden_widths.len()
            )));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::config("hidden widths must be > 0".to_string()));
        }
        if !(self.dropout_rate >= 0.0 && self.dropout_rate < 1.0) {
            return Err(Error::config(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        let n = self.n_hidden();
        for &d in &self.dropout_after {
            if d == 0 || d > n {
                return Err(Error::config(format!(
                    "dropout_after index {d} outside 1..={n}"
                )));
            }
        }
        for &(from, to) in &self.skip_spans {
            if from == 0 || to == 0 || from >= to || to > n {
                return Err(Error::config(format!(
                    "skip span ({from}, {to}) must satisfy 1 <= from < to <= {n}"
                )));
            }
            if self.hidden_widths[from - 1] != self.hidden_widths[to - 1] {
                return Err(Error::config(format!(
                    "skip span ({from}, {to}) connects unequal widths {} and {}",
                    self.hidden_widths[from - 1],
                    self.hidden_widths[to - 1]
                )));
            }
        }
        Ok(())
    }

    /// Spans terminating at 1-based hidden layer `to`.
    fn spans_into(&self, to: usize) -> impl Iterator<Item = usize> + '_ {
        self.skip_spans
            .iter()
            .filter(move |&&(_, t)| t == to)
            .map(|&(s, _)| s)
    }

    fn has_dropout_at(&self, layer: usize) -> bool {
        self.dropout_rate > 0.0 && self.dropout_after.contains(&layer)
    }
}

/// Weights (`fan_out × fan_in`, row-major) and biases of one linear layer.
/// Doubles as gradient and Adam-moment storage, which share the shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        LayerParams {
            weights: vec![0.0; fan_in * fan_out],
            bias: vec![0.0; fan_out],
        }
    }
}

/// All parameters θ of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParameters {
    pub arch: Architecture,
    /// Hidden layers first, linear output layer last.
    pub layers: Vec<LayerParams>,
}

impl NetworkParameters {
    /// Checks that every layer's shape matches the architecture and every
    /// value is finite. Error messages carry the offending field path.
    pub fn validate_shapes(&self) -> Result<()> {
        let dims = self.arch.dims();
        if self.layers.len() + 1 != dims.len() {
            return Err(Error::model(
                "layers",
                format!(
                    "expected {} layers, got {}",
                    dims.len() - 1,
                    self.layers.len()
                ),
            ));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            if layer.weights.len() != fan_in * fan_out {
                return Err(Error::model(
                    format!("layers[{l}].weights"),
                    format!(
                        "expected {} values ({fan_out}x{fan_in}), got {}",
                        fan_in * fan_out,
                        layer.weights.len()
                    ),
                ));
            }
            if layer.bias.len() != fan_out {
                return Err(Error::model(
                    format!("layers[{l}].bias"),
                    format!("expected {} values, got {}", fan_out, layer.bias.len()),
                ));
            }
            if layer
                .weights
                .iter()
                .chain(&layer.bias)
                .any(|v| !v.is_finite())
            {
                return Err(Error::model(
                    format!("layers[{l}]"),
                    "contains a non-finite value".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Total scalar parameter count: Σ (fan_in + 1)·fan_out over linear layers.
pub fn param_count(arch: &Architecture) -> usize {
    let dims = arch.dims();
    dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// Glorot-uniform initialization: weights drawn from
/// ±√(6 / (fan_in + fan_out)), biases zero. Deterministic given `seed`.
pub fn init_network(arch: &Architecture, seed: u64) -> Result<NetworkParameters> {
    arch.validate()?;
    let mut rng = seeds::rng_from(seed);
    let dims = arch.dims();
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| limit * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            LayerParams {
                weights,
                bias: vec![0.0; fan_out],
            }
        })
        .collect();
    Ok(NetworkParameters {
        arch: arch.clone(),
        layers,
    })
}

/// Per-sample inverted-dropout multipliers: `Some` only for hidden layers
/// configured with dropout; kept units carry `1/keep_prob`, dropped units 0.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    pub factors: Vec<Option<Vec<f64>>>,
}

/// Samples one dropout mask for the given architecture.
pub fn sample_mask(arch: &Architecture, rng: &mut impl Rng) -> DropoutMask {
    let keep = 1.0 - arch.dropout_rate;
    let factors = (1..=arch.n_hidden())
        .map(|layer| {
            if arch.has_dropout_at(layer) {
                let width = arch.hidden_widths[layer - 1];
                Some(
                    (0..width)
                        .map(|_| {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect(),
                )
            } else {
                None
            }
        })
        .collect();
    DropoutMask { factors }
}

/// Scratch buffers for one forward/backward pass, reused across samples.
struct Workspace {
    /// Pre-activations per hidden layer.
    zs: Vec<Vec<f64>>,
    /// Recorded output per hidden layer (post ReLU, skip addition, dropout).
    outputs: Vec<Vec<f64>>,
    /// Gradient w.r.t. each hidden layer output during backprop.
    g_out: Vec<Vec<f64>>,
    /// Gradient w.r.t. the current layer's input.
    g_prev: Vec<f64>,
}

impl Workspace {
    fn new(arch: &Architecture) -> Self {
        let make = || {
            arch.hidden_widths
                .iter()
                .map(|&w| vec![0.0; w])
                .collect::<Vec<_>>()
        };
        let max_fan_in = arch.dims().iter().copied().max().unwrap_or(1);
        Workspace {
            zs: make(),
            outputs: make(),
            g_out: make(),
            g_prev: vec![0.0; max_fan_in],
        }
    }
}

fn linear(layer: &LayerParams, input: &[f64], out: &mut [f64]) {
    let fan_in = input.len();
    for (o, out_v) in out.iter_mut().enumerate() {
        let row = &layer.weights[o * fan_in..(o + 1) * fan_in];
        let mut acc = layer.bias[o];
        for (w, x) in row.iter().zip(input) {
            acc += w * x;
        }
        *out_v = acc;
    }
}

/// Forward pass writing intermediate values into `ws`; returns the scalar
/// output. `mask = None` is eval mode.
fn forward_into(
    params: &NetworkParameters,
    x: &[f64],
    mask: Option<&DropoutMask>,
    ws: &mut Workspace,
) -> f64 {
    let arch = &params.arch;
    let n_hidden = arch.n_hidden();
    for layer in 1..=n_hidden {
        let idx = layer - 1;
        if idx == 0 {
            linear(&params.layers[0], x, &mut ws.zs[0]);
        } else {
            let (outputs_before, _) = ws.outputs.split_at(idx);
            linear(
                &params.layers[idx],
                &outputs_before[idx - 1],
                &mut ws.zs[idx],
            );
        }
        let width = arch.hidden_widths[idx];
        for u in 0..width {
            ws.outputs[idx][u] = ws.zs[idx][u].max(0.0);
        }
        for src in arch.spans_into(layer) {
            let (lo, hi) = ws.outputs.split_at_mut(idx);
            let src_out = &lo[src - 1];
            let dst = &mut hi[0];
            for u in 0..width {
                dst[u] += src_out[u];
            }
        }
        if let Some(m) = mask {
            if let Some(factors) = &m.factors[idx] {
                for (o, f) in ws.outputs[idx].iter_mut().zip(factors) {
                    *o *= f;
                }
            }
        }
    }
    let out_layer = &params.layers[n_hidden];
    let last = &ws.outputs[n_hidden - 1];
    let mut acc = out_layer.bias[0];
    for (w, v) in out_layer.weights.iter().zip(last) {
        acc += w * v;
    }
    acc
}

fn check_input(arch: &Architecture, x: &[f64]) -> Result<()> {
    if x.len() != arch.input_dim {
        return Err(Error::domain(format!(
            "input length {} does not match input_dim {}",
            x.len(),
            arch.input_dim
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(
            "input contains a non-finite value".to_string(),
        ));
    }
    Ok(())
}

/// Deterministic eval-mode forward pass (no dropout).
pub fn forward_eval(params: &NetworkParameters, x: &[f64]) -> Result<f64> {
    check_input(&params.arch, x)?;
    let mut ws = Workspace::new(&params.arch);
    Ok(forward_into(params, x, None, &mut ws))
}

/// Train-mode forward pass with a dropout mask sampled from `seed`.
pub fn forward_train(params: &NetworkParameters, x: &[f64], seed: u64) -> Result<f64> {
    check_input(&params.arch, x)?;
    let mut rng = seeds::rng_from(seed);
    let mask = sample_mask(&params.arch, &mut rng);
    let mut ws = Workspace::new(&params.arch);
    Ok(forward_into(params, x, Some(&mask), &mut ws))
}

/// Train-mode forward pass under an explicit mask (the same mask a backward
/// pass will reuse).
pub fn forward_with_mask(
    params: &NetworkParameters,
    x: &[f64],
    mask: &DropoutMask,
) -> Result<f64> {
    check_input(&params.arch, x)?;
    let mut ws = Workspace::new(&params.arch);
    Ok(forward_into(params, x, Some(mask), &mut ws))
}

/// Mean absolute error.
pub fn l1_loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::domain(format!(
            "length mismatch: {} predictions vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::domain("l1 loss of empty vectors".to_string()));
    }
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Gradients of the batch L1 loss w.r.t. every parameter. Shapes mirror
/// [`NetworkParameters::layers`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros(arch: &Architecture) -> Self {
        let dims = arch.dims();
        Gradients {
            layers: dims
                .windows(2)
                .map(|w| LayerParams::zeros(w[0], w[1]))
                .collect(),
        }
    }
}

/// Exact reverse-mode gradients of the mean L1 loss over a batch.
///
/// `masks`, when given, must hold one dropout mask per sample; the same mask
/// is used for the forward evaluation and its backward sweep (train mode).
/// `masks = None` differentiates the eval-mode network. The subgradient of
/// |r| at r = 0 is taken as 0. Returns the batch loss alongside the
/// gradients.
pub fn backward(
    params: &NetworkParameters,
    inputs: &[&[f64]],
    targets: &[f64],
    masks: Option<&[DropoutMask]>,
) -> Result<(f64, Gradients)> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::domain(format!(
            "batch must be non-empty with matching lengths, got {} inputs / {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if let Some(ms) = masks {
        if ms.len() != inputs.len() {
            return Err(Error::domain(format!(
                "expected {} dropout masks, got {}",
                inputs.len(),
                ms.len()
            )));
        }
    }
    let arch = &params.arch;
    let n_hidden = arch.n_hidden();
    let n = inputs.len() as f64;
    let mut grads = Gradients::zeros(arch);
    let mut ws = Workspace::new(arch);
    let mut loss = 0.0;

    for (s, (&x, &y)) in inputs.iter().zip(targets).enumerate() {
        let mask = masks.map(|ms| &ms[s]);
        let pred = forward_into(params, x, mask, &mut ws);
        let residual = pred - y;
        loss += residual.abs();
        // d(mean |r|)/d pred, with subgradient 0 at r = 0
        let delta = if residual > 0.0 {
            1.0 / n
        } else if residual < 0.0 {
            -1.0 / n
        } else {
            continue;
        };

        // output layer
        let out_layer = &params.layers[n_hidden];
        let g_out_layer = &mut grads.layers[n_hidden];
        let last = &ws.outputs[n_hidden - 1];
        for (gw, v) in g_out_layer.weights.iter_mut().zip(last) {
            *gw += delta * v;
        }
        g_out_layer.bias[0] += delta;
        for g in ws.g_out.iter_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for (g, w) in ws.g_out[n_hidden - 1].iter_mut().zip(&out_layer.weights) {
            *g = delta * w;
        }

        // hidden layers, last to first
        for layer in (1..=n_hidden).rev() {
            let idx = layer - 1;
            let width = arch.hidden_widths[idx];
            // back through dropout
            if let Some(m) = mask {
                if let Some(factors) = &m.factors[idx] {
                    for (g, f) in ws.g_out[idx].iter_mut().zip(factors) {
                        *g *= f;
                    }
                }
            }
            // g_out[idx] now holds the gradient w.r.t. relu(z) + skips:
            // skip sources receive it directly, the linear path is gated
            // by ReLU'.
            for src in arch.spans_into(layer) {
                let (lo, hi) = ws.g_out.split_at_mut(idx);
                let g_here = &hi[0];
                let g_src = &mut lo[src - 1];
                for u in 0..width {
                    g_src[u] += g_here[u];
                }
            }
            let layer_params = &params.layers[idx];
            let layer_grads = &mut grads.layers[idx];
            let fan_in = if idx == 0 {
                arch.input_dim
            } else {
                arch.hidden_widths[idx - 1]
            };
            let input: &[f64] = if idx == 0 { x } else { &ws.outputs[idx - 1] };
            let g_prev = &mut ws.g_prev[..fan_in];
            g_prev.iter_mut().for_each(|g| *g = 0.0);
            for u in 0..width {
                let gated = if ws.zs[idx][u] > 0.0 {
                    ws.g_out[idx][u]
                } else {
                    0.0
                };
                if gated != 0.0 {
                    let row = &layer_params.weights[u * fan_in..(u + 1) * fan_in];
                    let g_row = &mut layer_grads.weights[u * fan_in..(u + 1) * fan_in];
                    for i in 0..fan_in {
                        g_row[i] += gated * input[i];
                        g_prev[i] += gated * row[i];
                    }
                    layer_grads.bias[u] += gated;
                }
            }
            if idx > 0 {
                for (g, v) in ws.g_out[idx - 1].iter_mut().zip(g_prev.iter()) {
                    *g += v;
                }
            }
        }
    }
    Ok((loss / n, grads))
}

/// Adam optimizer state: first/second moments with the same shapes as θ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first_moment: Vec<LayerParams>,
    pub second_moment: Vec<LayerParams>,
}

impl AdamState {
    pub fn new(arch: &Architecture, learning_rate: f64) -> Self {
        let zeros = || Gradients::zeros(arch).layers;
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut NetworkParameters, grads: &Gradients) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (l, layer) in params.layers.iter_mut().enumerate() {
        let g = &grads.layers[l];
        let m = &mut state.first_moment[l];
        let v = &mut state.second_moment[l];
        update_slice(
            &mut layer.weights,
            &g.weights,
            &mut m.weights,
            &mut v.weights,
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        );
        update_slice(
            &mut layer.bias,
            &g.bias,
            &mut m.bias,
            &mut v.bias,
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..theta.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
}

/// Training hyperparameters. Early stopping restores the weights of the
/// best validation epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before training stops.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 128,
            max_epochs: 2000,
            patience: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::config(
                "batch_size, max_epochs and patience must all be > 0".to_string(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch loss record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Loss history of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Index into `epochs` whose weights were returned.
    pub best_epoch: usize,
}

fn mean_eval_loss(params: &NetworkParameters, data: &Samples, ws: &mut Workspace) -> f64 {
    let mut total = 0.0;
    for i in 0..data.len() {
        let pred = forward_into(params, data.row(i), None, ws);
        total += (pred - data.targets[i]).abs();
    }
    total / data.len() as f64
}

/// Mini-batch Adam on L1 loss with per-epoch validation and early stopping.
///
/// Returns the parameters of the best validation epoch plus the full loss
/// history. Deterministic given `config.seed`.
pub fn train(
    arch: &Architecture,
    train_data: &Samples,
    val_data: &Samples,
    config: &TrainConfig,
) -> Result<(NetworkParameters, TrainHistory)> {
    arch.validate()?;
    config.validate()?;
    if train_data.is_empty() {
        return Err(Error::config("training set is empty".to_string()));
    }
    if val_data.is_empty() {
        return Err(Error::config("validation set is empty".to_string()));
    }
    if train_data.dim != arch.input_dim || val_data.dim != arch.input_dim {
        return Err(Error::config(format!(
            "data dimension {} does not match architecture input_dim {}",
            train_data.dim, arch.input_dim
        )));
    }

    let mut params = init_network(arch, seeds::derive_seed(config.seed, "init"))?;
    let mut adam = AdamState::new(arch, config.learning_rate);
    let mut shuffle_rng = seeds::derive_rng(config.seed, "shuffle");
    let mut dropout_rng = seeds::derive_rng(config.seed, "dropout");
    let uses_dropout = arch.dropout_rate > 0.0 && !arch.dropout_after.is_empty();

    let n = train_data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut ws = Workspace::new(arch);
    let mut history = Vec::new();
    let mut best: Option<(f64, NetworkParameters, usize)> = None;
    let mut epochs_since_best = 0usize;

    for epoch in 0..config.max_epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let inputs: Vec<&[f64]> = batch.iter().map(|&i| train_data.row(i)).collect();
            let targets: Vec<f64> = batch.iter().map(|&i| train_data.targets[i]).collect();
            let masks: Option<Vec<DropoutMask>> = uses_dropout.then(|| {
                batch
                    .iter()
                    .map(|_| sample_mask(arch, &mut dropout_rng))
                    .collect()
            });
            let (batch_loss, grads) = backward(&params, &inputs, &targets, masks.as_deref())?;
            if !batch_loss.is_finite() {
                return Err(Error::Training {
                    member: 0,
                    epoch,
                    message: format!("non-finite training loss {batch_loss}"),
                });
            }
            epoch_loss += batch_loss * batch.len() as f64;
            adam_step(&mut adam, &mut params, &grads);
        }
        let train_loss = epoch_loss / n as f64;
        let val_loss = mean_eval_loss(&params, val_data, &mut ws);
        if !val_loss.is_finite() {
            return Err(Error::Training {
                member: 0,
                epoch,
                message: format!("non-finite validation loss {val_loss}"),
            });
        }
        history.push(EpochStats {
            train_loss,
            val_loss,
        });
        let improved = best.as_ref().is_none_or(|(b, _, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, params.clone(), epoch));
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= config.patience {
                break;
            }
        }
    }
    let (_, best_params, best_epoch) = best.expect("at least one epoch ran");
    Ok((
        best_params,
        TrainHistory {
            epochs: history,
            best_epoch,
        },
    ))
}
