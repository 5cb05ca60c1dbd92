use serde::{Deserialize, Serialize};

use super::{Gradients, NetParams};
use crate::error::{input, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Optimizer {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    Sgd {
        lr: f64,
    },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam(1e-3)
    }
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            Optimizer::Adam { lr, .. } | Optimizer::Sgd { lr } => lr,
        }
    }
}

/// Per-parameter moment buffers plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub optimizer: Optimizer,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptState {
    pub fn new(optimizer: Optimizer, params: &NetParams) -> Self {
        let buffers = || -> Vec<Vec<f64>> {
            params
                .layers
                .iter()
                .flat_map(|l| [vec![0.0; l.weight.len()], vec![0.0; l.bias.len()]])
                .collect()
        };
        let needs_moments = matches!(optimizer, Optimizer::Adam { .. });
        Self {
            optimizer,
            step: 0,
            first: if needs_moments { buffers() } else { Vec::new() },
            second: if needs_moments { buffers() } else { Vec::new() },
        }
    }
}

/// Applies one update. Nothing is modified when a gradient is non-finite.
pub fn optimizer_step(
    params: &mut NetParams,
    grads: &Gradients,
    state: &mut OptState,
) -> Result<()> {
    if grads.layers.len() != params.layers.len()
        || grads
            .layers
            .iter()
            .zip(&params.layers)
            .any(|(g, p)| g.weight.len() != p.weight.len() || g.bias.len() != p.bias.len())
    {
        return Err(input("gradient shapes do not match parameters"));
    }
    if !grads.all_finite() {
        return Err(Error::TrainingFault(format!(
            "non-finite gradient at optimizer step {}",
            state.step + 1
        )));
    }
    state.step += 1;
    match state.optimizer {
        Optimizer::Sgd { lr } => {
            for (p, g) in params.layers.iter_mut().zip(&grads.layers) {
                p.weight
                    .iter_mut()
                    .zip(&g.weight)
                    .for_each(|(w, d)| *w -= lr * d);
                p.bias
                    .iter_mut()
                    .zip(&g.bias)
                    .for_each(|(w, d)| *w -= lr * d);
            }
        }
        Optimizer::Adam {
            lr,
            beta1,
            beta2,
            eps,
        } => {
            let t = state.step as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            let slots = params
                .layers
                .iter_mut()
                .zip(&grads.layers)
                .flat_map(|(p, g)| [(&mut p.weight, &g.weight), (&mut p.bias, &g.bias)]);
            for ((values, grad), (m, v)) in
                slots.zip(state.first.iter_mut().zip(state.second.iter_mut()))
            {
                for i in 0..values.len() {
                    let gi = grad[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                    let mh = m[i] / c1;
                    let vh = v[i] / c2;
                    values[i] -= lr * mh / (vh.sqrt() + eps);
                }
            }
        }
    }
    if !params.all_finite() {
        return Err(Error::TrainingFault(format!(
            "parameters became non-finite at optimizer step {}",
            state.step
        )));
    }
    Ok(())
}
