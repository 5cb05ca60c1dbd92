//! Analytic gradients against central finite differences, and the
//! convolution kernels against independent nested-loop references.

mod support;

use ctes::ndnet::{
    backprop, forward, init_params, predict, Activation, Batch, ConvGeometry, LayerSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::gradcheck::{
    geometry, max_gradient_error, random_batch, random_conv_specs, random_dense_specs,
};

#[test]
fn dense_and_conv_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let specs = if trial % 2 == 0 {
            random_dense_specs(&mut rng)
        } else {
            random_conv_specs(&mut rng)
        };
        let err = max_gradient_error(&specs, 1000 + trial);
        assert!(
            err <= 1e-5,
            "trial {trial}: relative error {err:e} for {specs:?}"
        );
        worst = worst.max(err);
    }
    eprintln!("worst relative gradient error over 100 instances: {worst:e}");
}

/// Zero-pads explicitly, then slides the kernel.
fn reference_conv(g: &ConvGeometry, w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let (ph, pw) = (g.in_h + 2 * g.padding, g.in_w + 2 * g.padding);
    let mut padded = vec![0.0; g.in_channels * ph * pw];
    for c in 0..g.in_channels {
        for r in 0..g.in_h {
            for q in 0..g.in_w {
                padded[(c * ph + r + g.padding) * pw + q + g.padding] =
                    x[(c * g.in_h + r) * g.in_w + q];
            }
        }
    }
    let oh = (ph - g.kernel) / g.stride + 1;
    let ow = (pw - g.kernel) / g.stride + 1;
    let k = g.kernel;
    let mut out = vec![0.0; g.out_channels * oh * ow];
    for o in 0..g.out_channels {
        for r in 0..oh {
            for q in 0..ow {
                let mut acc = b[o];
                for c in 0..g.in_channels {
                    for i in 0..k {
                        for j in 0..k {
                            acc += w[((o * g.in_channels + c) * k + i) * k + j]
                                * padded[(c * ph + r * g.stride + i) * pw + q * g.stride + j];
                        }
                    }
                }
                out[(o * oh + r) * ow + q] = acc;
            }
        }
    }
    out
}

/// Transposed convolution as stride-dilation plus a flipped-kernel convolution.
fn reference_conv_transpose(g: &ConvGeometry, w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let k = g.kernel;
    let dil_h = (g.in_h - 1) * g.stride + 1;
    let dil_w = (g.in_w - 1) * g.stride + 1;
    let pad = k - 1 - g.padding;
    let (ph, pw) = (dil_h + 2 * pad, dil_w + 2 * pad);
    let mut grid = vec![0.0; g.in_channels * ph * pw];
    for c in 0..g.in_channels {
        for r in 0..g.in_h {
            for q in 0..g.in_w {
                grid[(c * ph + pad + r * g.stride) * pw + pad + q * g.stride] =
                    x[(c * g.in_h + r) * g.in_w + q];
            }
        }
    }
    let oh = ph - k + 1;
    let ow = pw - k + 1;
    let mut out = vec![0.0; g.out_channels * oh * ow];
    for o in 0..g.out_channels {
        for r in 0..oh {
            for q in 0..ow {
                let mut acc = b[o];
                for c in 0..g.in_channels {
                    for i in 0..k {
                        for j in 0..k {
                            let wf =
                                w[((c * g.out_channels + o) * k + (k - 1 - i)) * k + (k - 1 - j)];
                            acc += wf * grid[(c * ph + r + i) * pw + q + j];
                        }
                    }
                }
                out[(o * oh + r) * ow + q] = acc;
            }
        }
    }
    out
}

#[test]
fn conv_forward_matches_reference_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..40 {
        let k = rng.random_range(1..4);
        let g = geometry(
            rng.random_range(1..4),
            rng.random_range(1..4),
            k,
            rng.random_range(1..3),
            rng.random_range(0..k),
            rng.random_range(k..8),
            rng.random_range(k..8),
        );
        let spec = LayerSpec::conv(g, Activation::None);
        let mut p = init_params(&[spec], trial).unwrap();
        p.layers[0]
            .bias
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-1.0..1.0));
        let x = random_batch(&mut rng, 1, spec.input_size());
        let got = predict(&p, &x).unwrap();
        let want = reference_conv(&g, &p.layers[0].weight, &p.layers[0].bias, &x.data);
        assert_eq!(got.data.len(), want.len());
        for (a, b) in got.data.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12, "trial {trial}: {a} vs {b}");
        }
    }
}

#[test]
fn conv_transpose_forward_matches_dilated_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..40 {
        let k = rng.random_range(2..5);
        let g = geometry(
            rng.random_range(1..4),
            rng.random_range(1..4),
            k,
            rng.random_range(1..3),
            rng.random_range(0..k),
            rng.random_range(1..5),
            rng.random_range(1..5),
        );
        let spec = LayerSpec::conv_transpose(g, Activation::None);
        if spec.output_size() == 0 {
            continue;
        }
        let mut p = init_params(&[spec], trial).unwrap();
        p.layers[0]
            .bias
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-1.0..1.0));
        let x = random_batch(&mut rng, 1, spec.input_size());
        let got = predict(&p, &x).unwrap();
        let want = reference_conv_transpose(&g, &p.layers[0].weight, &p.layers[0].bias, &x.data);
        assert_eq!(got.data.len(), want.len(), "trial {trial}");
        for (a, b) in got.data.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12, "trial {trial}: {a} vs {b}");
        }
    }
}

#[test]
fn conv_weight_gradient_matches_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..20 {
        let g = geometry(2, 3, 3, 2, 1, 7, 6);
        let spec = LayerSpec::conv(g, Activation::None);
        let p = init_params(&[spec], trial).unwrap();
        let x = random_batch(&mut rng, 1, spec.input_size());
        let delta = random_batch(&mut rng, 1, spec.output_size());
        let trace = forward(&p, &x).unwrap();
        let (grads, _) = backprop(&p, &trace, &delta).unwrap();

        let (oh, ow) = g.conv_output_hw();
        let k = g.kernel;
        let padded_at = |c: usize, r: isize, q: isize| -> f64 {
            if r < 0 || q < 0 || r >= g.in_h as isize || q >= g.in_w as isize {
                0.0
            } else {
                x.data[(c * g.in_h + r as usize) * g.in_w + q as usize]
            }
        };
        for o in 0..g.out_channels {
            for c in 0..g.in_channels {
                for i in 0..k {
                    for j in 0..k {
                        let mut want = 0.0;
                        for r in 0..oh {
                            for q in 0..ow {
                                let xr = (r * g.stride + i) as isize - g.padding as isize;
                                let xq = (q * g.stride + j) as isize - g.padding as isize;
                                want += delta.data[(o * oh + r) * ow + q] * padded_at(c, xr, xq);
                            }
                        }
                        let got = grads.layers[0].weight[((o * g.in_channels + c) * k + i) * k + j];
                        assert!((got - want).abs() <= 1e-10);
                    }
                }
            }
            let bias_want: f64 = delta.data[o * oh * ow..(o + 1) * oh * ow].iter().sum();
            assert!((grads.layers[0].bias[o] - bias_want).abs() <= 1e-10);
        }
    }
}

#[test]
fn shapes_survive_forward_and_backprop() {
    let specs = random_conv_specs(&mut ChaCha8Rng::seed_from_u64(3));
    let p = init_params(&specs, 3).unwrap();
    let before = p.specs();
    let x = Batch::zeros(3, specs[0].input_size());
    let trace = forward(&p, &x).unwrap();
    let (g, dx) = backprop(&p, &trace, &Batch::zeros(3, 1)).unwrap();
    assert_eq!(p.specs(), before);
    assert_eq!(dx.width, x.width);
    for (gl, pl) in g.layers.iter().zip(&p.layers) {
        assert_eq!(gl.weight.len(), pl.weight.len());
        assert_eq!(gl.bias.len(), pl.bias.len());
    }
}
