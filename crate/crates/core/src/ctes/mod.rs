//! The conditional generator/discriminator pair, the weighted three-pair
//! objective, its training loop and synthesis.
//!
//! The generator maps `(z, x)` through a hidden stack and a decoder; the
//! discriminator encodes `y` and scores it jointly with `x`. Both work on
//! z-scored data and share the normalization statistics of their training
//! set.

mod loss;
mod train;

pub use loss::{discriminator_loss, generator_loss, toy_minimax_oracle, MinimaxOracle, PROB_CLAMP};
pub use train::{
    sample_mismatch, synthesize, synthesize_for, train_ctes, train_ctes_monitored, IterationRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{config, input, Result};
use crate::ndnet::{
    self, Activation, Batch, ConvGeometry, Gradients, LayerSpec, NetParams, Optimizer, Trace,
};

/// Network family used for the generator decoder and discriminator encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Convolutional for square images whose side is a multiple of 16,
    /// dense otherwise.
    Auto,
    Mlp,
    Conv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the `(x, ŷ)` pair against the `(x̂, y)` pair.
    pub beta: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub z_dim: usize,
    pub hidden: usize,
    pub optimizer: Optimizer,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    /// Standard deviation of the characteristic perturbation at synthesis.
    pub jitter: f64,
    pub architecture: Architecture,
    /// Smooth synthesized images with the 3x3 mean filter.
    pub low_pass: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            batch_size: 50,
            iterations: 1000,
            z_dim: 8,
            hidden: 64,
            optimizer: Optimizer::default(),
            convergence_window: 50,
            convergence_tol: 1e-4,
            jitter: 0.0,
            architecture: Architecture::Auto,
            low_pass: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(config(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.batch_size < 2 {
            return Err(config("batch_size must be at least 2"));
        }
        if self.iterations == 0 {
            return Err(config("iterations must be at least 1"));
        }
        if self.z_dim == 0 || self.hidden == 0 {
            return Err(config("z_dim and hidden must be positive"));
        }
        if self.convergence_window == 0 {
            return Err(config("convergence_window must be positive"));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(config("convergence_tol must be non-negative"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(config("jitter must be finite and non-negative"));
        }
        let lr = self.optimizer.learning_rate();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(config("learning rate must be positive"));
        }
        Ok(())
    }

    /// Logs a warning when the mismatch pair outweighs the synthesized pair.
    pub fn warn_if_weak_beta(&self) {
        if self.beta <= 0.5 {
            log::warn!(
                "beta = {} <= 0.5: the trained distribution does not dominate the mixture",
                self.beta
            );
        }
    }
}

/// Per-feature z-score statistics fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_std: Vec<f64>,
}

fn mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows.first().map(Vec::len).unwrap_or(0);
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in rows {
        var.iter_mut()
            .zip(r.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

impl Normalization {
    /// Constant features get a unit scale.
    pub fn fit(x: &[Vec<f64>], y: &[Vec<f64>]) -> Self {
        let (x_mean, x_std) = mean_std(x);
        let (y_mean, y_std) = mean_std(y);
        Self {
            x_mean,
            x_std,
            y_mean,
            y_std,
        }
    }

    /// Identity statistics for `m` characteristics and `n` expression values.
    pub fn identity(m: usize, n: usize) -> Self {
        Self {
            x_mean: vec![0.0; m],
            x_std: vec![1.0; m],
            y_mean: vec![0.0; n],
            y_std: vec![1.0; n],
        }
    }

    pub fn normalize_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.x_mean.iter().zip(&self.x_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn normalize_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.y_mean.iter().zip(&self.y_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn denormalize_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.y_mean.iter().zip(&self.y_std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub hidden: NetParams,
    pub decoder: NetParams,
    pub z_dim: usize,
    pub norm: Normalization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_shape: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorModel {
    pub encoder: NetParams,
    pub head: NetParams,
    pub norm: Normalization,
}

/// Loss values of one iteration in the maximized (log-likelihood) sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtesModel {
    pub generator: GeneratorModel,
    pub discriminator: DiscriminatorModel,
    pub config: TrainConfig,
    pub loss_trace: Vec<LossRecord>,
    pub converged: bool,
}

impl CtesModel {
    pub fn char_dim(&self) -> usize {
        self.generator.norm.x_mean.len()
    }

    pub fn expr_dim(&self) -> usize {
        self.generator.norm.y_mean.len()
    }
}

/// Layer lists for the four networks.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpecs {
    pub hidden: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
    pub encoder: Vec<LayerSpec>,
    pub head: Vec<LayerSpec>,
}

const CONV_CHANNELS: [usize; 5] = [1, 8, 16, 32, 64];

fn conv_side(image_shape: Option<(usize, usize)>) -> Option<usize> {
    match image_shape {
        Some((h, w)) if h == w && h >= 16 && h % 16 == 0 => Some(h),
        _ => None,
    }
}

/// Builds the layer lists for characteristic dimension `m` and expression
/// dimension `n`.
pub fn build_specs(
    arch: Architecture,
    m: usize,
    n: usize,
    image_shape: Option<(usize, usize)>,
    z_dim: usize,
    hidden: usize,
) -> Result<NetworkSpecs> {
    if m == 0 || n == 0 {
        return Err(input(
            "characteristics and expressions need at least one column",
        ));
    }
    let side = match arch {
        Architecture::Mlp => None,
        Architecture::Auto => conv_side(image_shape),
        Architecture::Conv => Some(conv_side(image_shape).ok_or_else(|| {
            config("convolutional architecture needs square images with a side divisible by 16")
        })?),
    };
    let Some(side) = side else {
        return Ok(NetworkSpecs {
            hidden: vec![
                LayerSpec::dense(z_dim + m, hidden, Activation::Relu),
                LayerSpec::dense(hidden, hidden, Activation::Relu),
            ],
            decoder: vec![LayerSpec::dense(hidden, n, Activation::None)],
            encoder: vec![LayerSpec::dense(n, hidden, Activation::Relu)],
            head: vec![
                LayerSpec::dense(m + hidden, hidden, Activation::Relu),
                LayerSpec::dense(hidden, 1, Activation::Sigmoid),
            ],
        });
    };
    let base = side / 16;
    let code = CONV_CHANNELS[4] * base * base;
    let geometry = |inc: usize, outc: usize, hw: usize| ConvGeometry {
        in_channels: inc,
        out_channels: outc,
        kernel: 4,
        stride: 2,
        padding: 1,
        in_h: hw,
        in_w: hw,
    };
    let encoder = (0..4)
        .map(|j| {
            LayerSpec::conv(
                geometry(CONV_CHANNELS[j], CONV_CHANNELS[j + 1], side >> j),
                Activation::Relu,
            )
        })
        .collect();
    let decoder = (0..4)
        .map(|j| {
            let act = if j == 3 {
                Activation::None
            } else {
                Activation::Relu
            };
            LayerSpec::conv_transpose(
                geometry(CONV_CHANNELS[4 - j], CONV_CHANNELS[3 - j], base << j),
                act,
            )
        })
        .collect();
    Ok(NetworkSpecs {
        hidden: vec![
            LayerSpec::dense(z_dim + m, hidden, Activation::Relu),
            LayerSpec::dense(hidden, code, Activation::Relu),
        ],
        decoder,
        encoder,
        head: vec![
            LayerSpec::dense(m + code, hidden, Activation::Relu),
            LayerSpec::dense(hidden, 1, Activation::Sigmoid),
        ],
    })
}

pub(crate) struct GenPass {
    hidden: Trace,
    decoder: Trace,
}

impl GenPass {
    pub(crate) fn output(&self) -> &Batch {
        self.decoder.output()
    }
}

pub(crate) struct DiscPass {
    encoder: Trace,
    head: Trace,
}

impl DiscPass {
    pub(crate) fn scores(&self) -> &[f64] {
        &self.head.output().data
    }
}

impl GeneratorModel {
    /// Forward pass on normalized inputs.
    pub(crate) fn pass(&self, z: &Batch, xn: &Batch) -> Result<GenPass> {
        let inputs = Batch::concat_columns(z, xn)?;
        let hidden = ndnet::forward(&self.hidden, &inputs)?;
        let decoder = ndnet::forward(&self.decoder, hidden.output())?;
        Ok(GenPass { hidden, decoder })
    }

    /// Gradients of the hidden stack and decoder for `dy` = dL/dŷ.
    pub(crate) fn backward(&self, pass: &GenPass, dy: &Batch) -> Result<(Gradients, Gradients)> {
        let (g_dec, d_code) = ndnet::backprop(&self.decoder, &pass.decoder, dy)?;
        let (g_hidden, _) = ndnet::backprop(&self.hidden, &pass.hidden, &d_code)?;
        Ok((g_hidden, g_dec))
    }
}

impl DiscriminatorModel {
    pub(crate) fn pass(&self, xn: &Batch, yn: &Batch) -> Result<DiscPass> {
        let encoder = ndnet::forward(&self.encoder, yn)?;
        let joint = Batch::concat_columns(xn, encoder.output())?;
        let head = ndnet::forward(&self.head, &joint)?;
        Ok(DiscPass { encoder, head })
    }

    /// Encoder and head gradients plus dL/dy for per-sample `dscore`.
    pub(crate) fn backward(
        &self,
        pass: &DiscPass,
        dscore: &Batch,
    ) -> Result<(Gradients, Gradients, Batch)> {
        let (g_head, d_joint) = ndnet::backprop(&self.head, &pass.head, dscore)?;
        let m = pass.head.activations[0].width - pass.encoder.output().width;
        let (_, d_code) = d_joint.split_columns(m);
        let (g_enc, dy) = ndnet::backprop(&self.encoder, &pass.encoder, &d_code)?;
        Ok((g_enc, g_head, dy))
    }
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(input(format!(
            "{what} has {got} entries, expected {expected}"
        )));
    }
    Ok(())
}

/// `ŷ = φ(h1(z, x))` in data scale.
pub fn generator_forward(gen: &GeneratorModel, z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_len("noise vector", z.len(), gen.z_dim)?;
    check_len("characteristic vector", x.len(), gen.norm.x_mean.len())?;
    let zb = Batch::new(1, z.len(), z.to_vec())?;
    let xb = Batch::new(1, x.len(), gen.norm.normalize_x(x))?;
    let pass = gen.pass(&zb, &xb)?;
    Ok(gen.norm.denormalize_y(pass.output().row(0)))
}

/// `D(x, y) = h2(x, ϕ(y))`, a score in (0, 1).
pub fn discriminator_forward(disc: &DiscriminatorModel, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("characteristic vector", x.len(), disc.norm.x_mean.len())?;
    check_len("expression vector", y.len(), disc.norm.y_mean.len())?;
    let xb = Batch::new(1, x.len(), disc.norm.normalize_x(x))?;
    let yb = Batch::new(1, y.len(), disc.norm.normalize_y(y))?;
    Ok(disc.pass(&xb, &yb)?.scores()[0])
}
