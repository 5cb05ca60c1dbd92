//! Validation classifiers behind one interface: the random forest for vector
//! expressions and a small convolutional network for image expressions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{config, input, Result};
use crate::forest::{fit_forest, predict_forest, Forest, ForestConfig};
use crate::ndnet::{
    self, init_params, optimizer_step, Activation, Batch, ConvGeometry, LayerSpec, NetParams,
    OptState, Optimizer,
};
use crate::rng::{self, derive_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvClassifierConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for ConvClassifierConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            hidden: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassifierConfig {
    Forest(ForestConfig),
    Conv(ConvClassifierConfig),
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig::Forest(ForestConfig::default())
    }
}

impl ClassifierConfig {
    pub fn seed(&self) -> u64 {
        match self {
            ClassifierConfig::Forest(f) => f.seed,
            ClassifierConfig::Conv(c) => c.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ClassifierConfig::Forest(f) => f.seed = seed,
            ClassifierConfig::Conv(c) => c.seed = seed,
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierConfig::Forest(f) => f.validate(),
            ClassifierConfig::Conv(c) => {
                if c.epochs == 0 || c.batch_size == 0 || c.hidden == 0 {
                    return Err(config(
                        "conv classifier epochs, batch_size and hidden must be positive",
                    ));
                }
                if !(c.learning_rate > 0.0 && c.learning_rate.is_finite()) {
                    return Err(config("conv classifier learning rate must be positive"));
                }
                Ok(())
            }
        }
    }
}

/// Four stride-2 convolutions, a hidden dense layer and one logit per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvClassifier {
    pub net: NetParams,
    pub classes: Vec<usize>,
    pub pixel_mean: f64,
    pub pixel_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Forest(Forest),
    Conv(ConvClassifier),
}

impl Classifier {
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>> {
        match self {
            Classifier::Forest(f) => predict_forest(f, x),
            Classifier::Conv(c) => c.predict(x),
        }
    }
}

/// Fits the configured classifier. `image_shape` is required by the conv
/// network and ignored by the forest.
pub fn fit_classifier(
    cfg: &ClassifierConfig,
    x: &[Vec<f64>],
    labels: &[usize],
    image_shape: Option<(usize, usize)>,
) -> Result<Classifier> {
    cfg.validate()?;
    match cfg {
        ClassifierConfig::Forest(f) => Ok(Classifier::Forest(fit_forest(x, labels, f)?)),
        ClassifierConfig::Conv(c) => {
            let shape = image_shape
                .ok_or_else(|| config("conv classifier needs image-shaped expressions"))?;
            Ok(Classifier::Conv(fit_conv_classifier(c, x, labels, shape)?))
        }
    }
}

fn conv_specs(side: usize, hidden: usize, classes: usize) -> Vec<LayerSpec> {
    let channels = [1, 8, 16, 32, 64];
    let mut specs: Vec<LayerSpec> = (0..4)
        .map(|j| {
            LayerSpec::conv(
                ConvGeometry {
                    in_channels: channels[j],
                    out_channels: channels[j + 1],
                    kernel: 4,
                    stride: 2,
                    padding: 1,
                    in_h: side >> j,
                    in_w: side >> j,
                },
                Activation::Relu,
            )
        })
        .collect();
    let code = 64 * (side / 16) * (side / 16);
    specs.push(LayerSpec::dense(code, hidden, Activation::Relu));
    specs.push(LayerSpec::dense(hidden, classes, Activation::None));
    specs
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    logits.iter_mut().for_each(|v| *v /= total);
}

fn fit_conv_classifier(
    cfg: &ConvClassifierConfig,
    x: &[Vec<f64>],
    labels: &[usize],
    (h, w): (usize, usize),
) -> Result<ConvClassifier> {
    if h != w || h < 16 || h % 16 != 0 {
        return Err(config(
            "conv classifier needs square images with a side divisible by 16",
        ));
    }
    if x.len() != labels.len() || x.is_empty() {
        return Err(input("classifier inputs must be non-empty and aligned"));
    }
    if x.iter().any(|r| r.len() != h * w) {
        return Err(input(format!("expected {h}x{w} images")));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(input("classifier needs at least two classes"));
    }
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("present"))
        .collect();
    let count = (x.len() * h * w) as f64;
    let pixel_mean = x.iter().flatten().sum::<f64>() / count;
    let var = x
        .iter()
        .flatten()
        .map(|v| (v - pixel_mean).powi(2))
        .sum::<f64>()
        / count;
    let pixel_std = if var > 1e-24 { var.sqrt() } else { 1.0 };

    let mut net = init_params(
        &conv_specs(h, cfg.hidden, classes.len()),
        derive_seed(cfg.seed, &["init"]),
    )?;
    let mut state = OptState::new(Optimizer::adam(cfg.learning_rate), &net);
    let mut rng = rng::seeded(derive_seed(cfg.seed, &["shuffle"]));
    let mut order: Vec<usize> = (0..x.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = Batch::zeros(chunk.len(), h * w);
            for (k, &i) in chunk.iter().enumerate() {
                batch
                    .row_mut(k)
                    .iter_mut()
                    .zip(&x[i])
                    .for_each(|(b, v)| *b = (v - pixel_mean) / pixel_std);
            }
            let trace = ndnet::forward(&net, &batch)?;
            let mut grad = trace.output().clone();
            let scale = 1.0 / chunk.len() as f64;
            for (k, &i) in chunk.iter().enumerate() {
                let row = grad.row_mut(k);
                softmax_in_place(row);
                row[targets[i]] -= 1.0;
                row.iter_mut().for_each(|g| *g *= scale);
            }
            let (g, _) = ndnet::backprop(&net, &trace, &grad)?;
            optimizer_step(&mut net, &g, &mut state)?;
        }
    }
    Ok(ConvClassifier {
        net,
        classes,
        pixel_mean,
        pixel_std,
    })
}

impl ConvClassifier {
    /// Arg-max class; ties go to the lower label.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<usize>> {
        let width = self.net.input_size();
        if let Some(r) = x.iter().find(|r| r.len() != width) {
            return Err(input(format!(
                "classifier expects {width} values, got {}",
                r.len()
            )));
        }
        let mut out = Vec::with_capacity(x.len());
        for chunk in x.chunks(256) {
            let mut batch = Batch::zeros(chunk.len(), width);
            for (k, r) in chunk.iter().enumerate() {
                batch
                    .row_mut(k)
                    .iter_mut()
                    .zip(r)
                    .for_each(|(b, v)| *b = (v - self.pixel_mean) / self.pixel_std);
            }
            let logits = ndnet::predict(&self.net, &batch)?;
            for row in logits.rows() {
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                out.push(self.classes[best]);
            }
        }
        Ok(out)
    }
}
