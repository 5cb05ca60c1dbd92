//! Finite-difference gradient checks shared by the gradient tests and the
//! acceptance suite.

use ctes::ndnet::{
    backprop, forward, init_params, predict, Activation, Batch, ConvGeometry, LayerSpec, NetParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

pub fn random_batch(rng: &mut ChaCha8Rng, len: usize, width: usize) -> Batch {
    Batch::new(
        len,
        width,
        (0..len * width)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}

/// L = sum_k c_k * out_k, so dL/d(out) = c.
pub fn objective(params: &NetParams, x: &Batch, c: &[f64]) -> f64 {
    predict(params, x)
        .unwrap()
        .data
        .iter()
        .zip(c)
        .map(|(a, b)| a * b)
        .sum()
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1.0)
}

/// Max relative error over all parameters and all input entries.
pub fn max_gradient_error(specs: &[LayerSpec], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = init_params(specs, seed).unwrap();
    for l in &mut params.layers {
        for b in &mut l.bias {
            *b = rng.random_range(-0.2..0.2);
        }
    }
    let x = random_batch(&mut rng, 2, specs[0].input_size());
    let out_width = specs.last().unwrap().output_size();
    let c: Vec<f64> = (0..2 * out_width)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();

    let trace = forward(&params, &x).unwrap();
    let (grads, dx) = backprop(
        &params,
        &trace,
        &Batch::new(2, out_width, c.clone()).unwrap(),
    )
    .unwrap();

    let mut worst: f64 = 0.0;
    for j in 0..params.layers.len() {
        for which in 0..2 {
            let n = if which == 0 {
                params.layers[j].weight.len()
            } else {
                params.layers[j].bias.len()
            };
            for i in 0..n {
                let analytic = if which == 0 {
                    grads.layers[j].weight[i]
                } else {
                    grads.layers[j].bias[i]
                };
                let mut plus = params.clone();
                let mut minus = params.clone();
                if which == 0 {
                    plus.layers[j].weight[i] += FD_STEP;
                    minus.layers[j].weight[i] -= FD_STEP;
                } else {
                    plus.layers[j].bias[i] += FD_STEP;
                    minus.layers[j].bias[i] -= FD_STEP;
                }
                let numeric =
                    (objective(&plus, &x, &c) - objective(&minus, &x, &c)) / (2.0 * FD_STEP);
                worst = worst.max(rel_err(analytic, numeric));
            }
        }
    }
    for i in 0..x.data.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp.data[i] += FD_STEP;
        xm.data[i] -= FD_STEP;
        let numeric = (objective(&params, &xp, &c) - objective(&params, &xm, &c)) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(dx.data[i], numeric));
    }
    worst
}

pub fn geometry(
    in_c: usize,
    out_c: usize,
    k: usize,
    s: usize,
    p: usize,
    h: usize,
    w: usize,
) -> ConvGeometry {
    ConvGeometry {
        in_channels: in_c,
        out_channels: out_c,
        kernel: k,
        stride: s,
        padding: p,
        in_h: h,
        in_w: w,
    }
}

pub fn random_dense_specs(rng: &mut ChaCha8Rng) -> Vec<LayerSpec> {
    let depth = rng.random_range(1..4);
    let mut width = rng.random_range(1..6);
    let mut specs = Vec::new();
    for j in 0..depth {
        let next = rng.random_range(1..6);
        let act = if j + 1 == depth {
            [Activation::Sigmoid, Activation::None][rng.random_range(0..2)]
        } else {
            [Activation::Relu, Activation::None][rng.random_range(0..2)]
        };
        specs.push(LayerSpec::dense(width, next, act));
        width = next;
    }
    specs
}

pub fn random_conv_specs(rng: &mut ChaCha8Rng) -> Vec<LayerSpec> {
    let in_c = rng.random_range(1..3);
    let mid = rng.random_range(1..4);
    let side = rng.random_range(4..7);
    let k = rng.random_range(2..4);
    let s = rng.random_range(1..3);
    let p = rng.random_range(0..2);
    let g1 = geometry(in_c, mid, k, s, p, side, side);
    let (h, w) = g1.conv_output_hw();
    let g2 = geometry(mid, rng.random_range(1..3), k, s, p.min(k - 1), h, w);
    let conv = LayerSpec::conv(g1, Activation::Relu);
    let up = LayerSpec::conv_transpose(g2, Activation::None);
    let head = LayerSpec::dense(up.output_size(), 1, Activation::Sigmoid);
    vec![conv, up, head]
}

/// Worst relative error over `instances` random networks, alternating dense
/// and convolutional stacks.
pub fn gradient_suite(seed: u64, instances: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..instances {
        let specs = if trial % 2 == 0 {
            random_dense_specs(&mut rng)
        } else {
            random_conv_specs(&mut rng)
        };
        worst = worst.max(max_gradient_error(
            &specs,
            seed.wrapping_mul(31).wrapping_add(trial),
        ));
    }
    worst
}
