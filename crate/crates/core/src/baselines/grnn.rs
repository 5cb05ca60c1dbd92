use serde::{Deserialize, Serialize};

use crate::error::{config, input, Result};

/// General regression neural network: a Gaussian-kernel weighted average of
/// the stored training targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrnnModel {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub bandwidth: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of all pairwise Euclidean distances; falls back to 1 when every
/// distance is zero.
pub fn median_pairwise_distance(x: &[Vec<f64>]) -> f64 {
    let mut d = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            d.push(squared_distance(&x[i], &x[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let med = if d.len() % 2 == 0 {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

impl GrnnModel {
    /// `bandwidth = None` picks the median pairwise characteristic distance.
    pub fn fit(inputs: &[Vec<f64>], targets: &[Vec<f64>], bandwidth: Option<f64>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(input("GRNN needs at least one row-aligned training pair"));
        }
        let bandwidth = bandwidth.unwrap_or_else(|| median_pairwise_distance(inputs));
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(config(format!(
                "GRNN bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self {
            inputs: inputs.to_vec(),
            targets: targets.to_vec(),
            bandwidth,
        })
    }
}

/// `y = sum_i y_i w_i / sum_i w_i` with `w_i = exp(-|x - x_i|^2 / (2 b^2))`.
/// When every weight underflows the nearest neighbour's target is returned.
pub fn grnn_predict(model: &GrnnModel, x: &[f64]) -> Result<Vec<f64>> {
    let dim = model.inputs[0].len();
    if x.len() != dim {
        return Err(input(format!(
            "GRNN expects {dim} characteristics, got {}",
            x.len()
        )));
    }
    let denom = 2.0 * model.bandwidth * model.bandwidth;
    let out_dim = model.targets[0].len();
    let mut acc = vec![0.0; out_dim];
    let mut total = 0.0;
    let mut nearest = (f64::INFINITY, 0usize);
    for (i, (xi, yi)) in model.inputs.iter().zip(&model.targets).enumerate() {
        let d2 = squared_distance(x, xi);
        if d2 < nearest.0 {
            nearest = (d2, i);
        }
        let w = (-d2 / denom).exp();
        if w > 0.0 {
            total += w;
            acc.iter_mut().zip(yi).for_each(|(a, y)| *a += w * y);
        }
    }
    if total == 0.0 {
        return Ok(model.targets[nearest.1].clone());
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}
