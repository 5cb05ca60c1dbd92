//! Minimal neural-network core: dense, convolutional and transposed
//! convolutional layers with exact reverse-mode gradients.
//!
//! Activations are stored batch-major: a [`Batch`] holds `len` samples of
//! `width` values each. Convolutional layers read each sample as a
//! channel-major `C x H x W` block.

mod conv;
mod optim;

pub use conv::ConvGeometry;
pub use optim::{optimizer_step, OptState, Optimizer};

use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{config, input, Result};
use crate::rng;

/// Sigmoid inputs are clamped to this range before exponentiation.
pub const SIGMOID_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
            Activation::None => v,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::None => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    let v = v.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-v).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    Dense { inputs: usize, outputs: usize },
    Conv2d(ConvGeometry),
    ConvTranspose2d(ConvGeometry),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Dense { inputs, outputs },
            activation,
        }
    }

    pub fn conv(geometry: ConvGeometry, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Conv2d(geometry),
            activation,
        }
    }

    pub fn conv_transpose(geometry: ConvGeometry, activation: Activation) -> Self {
        Self {
            kind: LayerKind::ConvTranspose2d(geometry),
            activation,
        }
    }

    pub fn input_size(&self) -> usize {
        match self.kind {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv2d(g) => g.in_channels * g.in_h * g.in_w,
            LayerKind::ConvTranspose2d(g) => g.in_channels * g.in_h * g.in_w,
        }
    }

    pub fn output_size(&self) -> usize {
        match self.kind {
            LayerKind::Dense { outputs, .. } => outputs,
            LayerKind::Conv2d(g) => {
                let (h, w) = g.conv_output_hw();
                g.out_channels * h * w
            }
            LayerKind::ConvTranspose2d(g) => {
                let (h, w) = g.transpose_output_hw();
                g.out_channels * h * w
            }
        }
    }

    fn weight_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { inputs, outputs } => inputs * outputs,
            LayerKind::Conv2d(g) | LayerKind::ConvTranspose2d(g) => {
                g.in_channels * g.out_channels * g.kernel * g.kernel
            }
        }
    }

    fn bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { outputs, .. } => outputs,
            LayerKind::Conv2d(g) | LayerKind::ConvTranspose2d(g) => g.out_channels,
        }
    }

    fn fans(&self) -> (usize, usize) {
        match self.kind {
            LayerKind::Dense { inputs, outputs } => (inputs, outputs),
            LayerKind::Conv2d(g) | LayerKind::ConvTranspose2d(g) => {
                let area = g.kernel * g.kernel;
                (g.in_channels * area, g.out_channels * area)
            }
        }
    }
}

/// Checks a layer stack: non-empty, every layer well formed, adjacent sizes
/// agree, and sigmoid only on the final (probability) layer.
pub fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(config("network needs at least one layer"));
    }
    for (j, spec) in specs.iter().enumerate() {
        match spec.kind {
            LayerKind::Dense { inputs, outputs } => {
                if inputs == 0 || outputs == 0 {
                    return Err(config(format!("layer {j}: dense sizes must be positive")));
                }
            }
            LayerKind::Conv2d(g) => g
                .validate(false)
                .map_err(|e| config(format!("layer {j}: {e}")))?,
            LayerKind::ConvTranspose2d(g) => g
                .validate(true)
                .map_err(|e| config(format!("layer {j}: {e}")))?,
        }
        if spec.activation == Activation::Sigmoid && j + 1 != specs.len() {
            return Err(config(format!(
                "layer {j}: sigmoid is only allowed on the probability output layer"
            )));
        }
        if let Some(next) = specs.get(j + 1) {
            if spec.output_size() != next.input_size() {
                return Err(config(format!(
                    "layer {j} produces {} values but layer {} expects {}",
                    spec.output_size(),
                    j + 1,
                    next.input_size()
                )));
            }
        }
    }
    Ok(())
}

/// Weights and biases of one layer, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub spec: LayerSpec,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub layers: Vec<LayerParams>,
}

/// Gradient buffers mirroring a [`NetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &NetParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: vec![0.0; l.weight.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Adds `other` into `self` in place.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight
                .iter_mut()
                .zip(&b.weight)
                .for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }
}

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
pub fn init_params(specs: &[LayerSpec], seed: u64) -> Result<NetParams> {
    validate_specs(specs)?;
    let mut rng = rng::seeded(seed);
    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        let (fan_in, fan_out) = spec.fans();
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let weight = (0..spec.weight_len())
            .map(|_| dist.sample(&mut rng))
            .collect();
        layers.push(LayerParams {
            spec: *spec,
            weight,
            bias: vec![0.0; spec.bias_len()],
        });
    }
    Ok(NetParams { layers })
}

impl NetParams {
    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        validate_specs(specs)?;
        Ok(Self {
            layers: specs
                .iter()
                .map(|spec| LayerParams {
                    spec: *spec,
                    weight: vec![0.0; spec.weight_len()],
                    bias: vec![0.0; spec.bias_len()],
                })
                .collect(),
        })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].spec.input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers
            .last()
            .map(|l| l.spec.output_size())
            .unwrap_or(0)
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Checks flat buffer lengths against the owning specs.
    pub fn check_shapes(&self) -> Result<()> {
        validate_specs(&self.specs())?;
        for (j, l) in self.layers.iter().enumerate() {
            if l.weight.len() != l.spec.weight_len() || l.bias.len() != l.spec.bias_len() {
                return Err(input(format!(
                    "layer {j}: parameter buffers do not match spec"
                )));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }
}

/// A batch of equally sized samples, stored sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Batch {
    pub fn new(len: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != len * width {
            return Err(input(format!(
                "batch buffer holds {} values, expected {len} x {width}",
                data.len()
            )));
        }
        Ok(Self { len, width, data })
    }

    pub fn zeros(len: usize, width: usize) -> Self {
        Self {
            len,
            width,
            data: vec![0.0; len * width],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * width);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(input(format!(
                    "row {i} has {} values, expected {width}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            len: rows.len(),
            width,
            data,
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.width.max(1)).take(self.len)
    }

    /// Horizontal concatenation: each output row is `[a_row, b_row]`.
    pub fn concat_columns(a: &Batch, b: &Batch) -> Result<Batch> {
        if a.len != b.len {
            return Err(input("cannot concatenate batches of different lengths"));
        }
        let width = a.width + b.width;
        let mut data = Vec::with_capacity(a.len * width);
        for i in 0..a.len {
            data.extend_from_slice(a.row(i));
            data.extend_from_slice(b.row(i));
        }
        Ok(Batch {
            len: a.len,
            width,
            data,
        })
    }

    /// Splits columns at `at`, inverse of [`Batch::concat_columns`].
    pub fn split_columns(&self, at: usize) -> (Batch, Batch) {
        let mut left = Batch::zeros(self.len, at);
        let mut right = Batch::zeros(self.len, self.width - at);
        for i in 0..self.len {
            let r = self.row(i);
            left.row_mut(i).copy_from_slice(&r[..at]);
            right.row_mut(i).copy_from_slice(&r[at..]);
        }
        (left, right)
    }
}

/// All activations of a forward pass; `activations[0]` is the input and
/// `activations[j + 1]` the output of layer `j`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<Batch>,
}

impl Trace {
    pub fn output(&self) -> &Batch {
        self.activations
            .last()
            .expect("trace holds at least the input")
    }
}

pub fn forward(params: &NetParams, input_batch: &Batch) -> Result<Trace> {
    if input_batch.width != params.input_size() {
        return Err(input(format!(
            "network expects {} input values, got {}",
            params.input_size(),
            input_batch.width
        )));
    }
    let mut activations = Vec::with_capacity(params.layers.len() + 1);
    activations.push(input_batch.clone());
    for layer in &params.layers {
        let x = activations.last().expect("non-empty");
        let mut out = Batch::zeros(x.len, layer.spec.output_size());
        match layer.spec.kind {
            LayerKind::Dense { inputs, outputs } => {
                for s in 0..x.len {
                    let xi = x.row(s);
                    let yo = out.row_mut(s);
                    for o in 0..outputs {
                        let w = &layer.weight[o * inputs..(o + 1) * inputs];
                        yo[o] = layer.bias[o] + dot(w, xi);
                    }
                }
            }
            LayerKind::Conv2d(g) => {
                for s in 0..x.len {
                    conv::conv_forward(&g, &layer.weight, &layer.bias, x.row(s), out.row_mut(s));
                }
            }
            LayerKind::ConvTranspose2d(g) => {
                for s in 0..x.len {
                    conv::conv_transpose_forward(
                        &g,
                        &layer.weight,
                        &layer.bias,
                        x.row(s),
                        out.row_mut(s),
                    );
                }
            }
        }
        let act = layer.spec.activation;
        if act != Activation::None {
            out.data.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        activations.push(out);
    }
    Ok(Trace { activations })
}

/// Convenience wrapper returning only the final output.
pub fn predict(params: &NetParams, input_batch: &Batch) -> Result<Batch> {
    let mut trace = forward(params, input_batch)?;
    Ok(trace.activations.pop().expect("non-empty"))
}

/// Reverse-mode pass. `out_grad` is dL/d(output) for every sample; returns
/// parameter gradients summed over the batch and dL/d(input).
pub fn backprop(params: &NetParams, trace: &Trace, out_grad: &Batch) -> Result<(Gradients, Batch)> {
    if trace.activations.len() != params.layers.len() + 1 {
        return Err(input("trace does not belong to this network"));
    }
    for (j, layer) in params.layers.iter().enumerate() {
        if trace.activations[j].width != layer.spec.input_size()
            || trace.activations[j + 1].width != layer.spec.output_size()
        {
            return Err(input(format!("trace shape mismatch at layer {j}")));
        }
    }
    let out = trace.output();
    if out_grad.len != out.len || out_grad.width != out.width {
        return Err(input("output gradient shape does not match the trace"));
    }

    let mut grads = Gradients::zeros_like(params);
    let mut delta = out_grad.clone();
    for (j, layer) in params.layers.iter().enumerate().rev() {
        let x = &trace.activations[j];
        let y = &trace.activations[j + 1];
        let act = layer.spec.activation;
        if act != Activation::None {
            delta
                .data
                .iter_mut()
                .zip(&y.data)
                .for_each(|(d, &o)| *d *= act.derivative_from_output(o));
        }
        let g = &mut grads.layers[j];
        let mut dx = Batch::zeros(x.len, x.width);
        match layer.spec.kind {
            LayerKind::Dense { inputs, outputs } => {
                for s in 0..x.len {
                    let xi = x.row(s);
                    let di = delta.row(s);
                    let dxi = dx.row_mut(s);
                    for o in 0..outputs {
                        let d = di[o];
                        if d == 0.0 {
                            continue;
                        }
                        g.bias[o] += d;
                        let w = &layer.weight[o * inputs..(o + 1) * inputs];
                        let gw = &mut g.weight[o * inputs..(o + 1) * inputs];
                        for k in 0..inputs {
                            gw[k] += d * xi[k];
                            dxi[k] += d * w[k];
                        }
                    }
                }
            }
            LayerKind::Conv2d(geo) => {
                for s in 0..x.len {
                    conv::conv_backward(
                        &geo,
                        &layer.weight,
                        x.row(s),
                        delta.row(s),
                        &mut g.weight,
                        &mut g.bias,
                        dx.row_mut(s),
                    );
                }
            }
            LayerKind::ConvTranspose2d(geo) => {
                for s in 0..x.len {
                    conv::conv_transpose_backward(
                        &geo,
                        &layer.weight,
                        x.row(s),
                        delta.row(s),
                        &mut g.weight,
                        &mut g.bias,
                        dx.row_mut(s),
                    );
                }
            }
        }
        delta = dx;
    }
    Ok((grads, delta))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
