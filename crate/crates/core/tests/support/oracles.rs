//! Independent reference computations used by the integration tests and the
//! acceptance suite.

use ctes::baselines::Method;
use ctes::classifier::ClassifierConfig;
use ctes::ctes::toy_minimax_oracle;
use ctes::datagen::{
    expression_transform, gen_multivariate_dataset, GpSampler, PairedDataset, SimConfig,
};
use ctes::ensemble::{inverse_validation_scores, select_top_h};
use ctes::eval::{
    identify_group_experiment, EvalSettings, MethodRunner, MethodSettings, ValidationReport,
};
use ctes::rng::{derive_seed, seeded};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LOG4: f64 = std::f64::consts::LN_2 * 2.0;

fn random_pmf(rng: &mut ChaCha8Rng, n: usize, allow_zeros: bool) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n)
        .map(|_| {
            if allow_zeros && rng.random_bool(0.2) {
                0.0
            } else {
                rng.random_range(0.01..1.0)
            }
        })
        .collect();
    if p.iter().all(|&v| v == 0.0) {
        p[0] = 1.0;
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// `sum_i q_i log(q_i / m_i)` with the `0 log 0 = 0` convention.
fn kl(q: &[f64], m: &[f64]) -> f64 {
    q.iter()
        .zip(m)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub struct MinimaxSummary {
    /// Smallest `V + log 4` over unconstrained triples.
    pub min_margin: f64,
    /// Largest `|V + log 4|` over triples built to satisfy the mixture identity.
    pub max_equality_gap: f64,
    /// Unconstrained triples whose margin fell within the equality tolerance.
    pub spurious_equalities: usize,
    /// Largest disagreement with `-log 4 + 2 JS(p_data, mixture)`.
    pub max_js_disagreement: f64,
}

/// Half the triples are drawn freely, half are built so that
/// `beta p_g + (1 - beta) p' = p_data`.
pub fn minimax_suite(seed: u64, triples: usize) -> MinimaxSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = MinimaxSummary {
        min_margin: f64::INFINITY,
        max_equality_gap: 0.0,
        spurious_equalities: 0,
        max_js_disagreement: 0.0,
    };
    for t in 0..triples {
        let n = rng.random_range(2..7);
        let beta = rng.random_range(0.05..1.0);
        let p_g = random_pmf(&mut rng, n, true);
        let p_prime = random_pmf(&mut rng, n, true);
        if t % 2 == 0 {
            let p_data: Vec<f64> = p_g
                .iter()
                .zip(&p_prime)
                .map(|(g, q)| beta * g + (1.0 - beta) * q)
                .collect();
            let total: f64 = p_data.iter().sum();
            let p_data: Vec<f64> = p_data.iter().map(|v| v / total).collect();
            let o = toy_minimax_oracle(&p_data, &p_g, &p_prime, beta).unwrap();
            s.max_equality_gap = s.max_equality_gap.max((o.value + LOG4).abs());
        } else {
            let p_data = random_pmf(&mut rng, n, true);
            let o = toy_minimax_oracle(&p_data, &p_g, &p_prime, beta).unwrap();
            let margin = o.value + LOG4;
            s.min_margin = s.min_margin.min(margin);
            if margin.abs() <= 1e-9 {
                s.spurious_equalities += 1;
            }
            let mix: Vec<f64> = p_g
                .iter()
                .zip(&p_prime)
                .map(|(g, q)| beta * g + (1.0 - beta) * q)
                .collect();
            let mid: Vec<f64> = p_data
                .iter()
                .zip(&mix)
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let js = 0.5 * kl(&p_data, &mid) + 0.5 * kl(&mix, &mid);
            s.max_js_disagreement = s
                .max_js_disagreement
                .max((o.value - (-LOG4 + 2.0 * js)).abs());
        }
    }
    s
}

/// Term-by-term evaluation of the six expression coordinates without noise.
pub fn direct_expression(x1: f64, x2: f64) -> [f64; 6] {
    let gauss = (-(x1 * x1) - x2 * x2).exp();
    let mut y = [0.0; 6];
    let mut factorial = 1.0;
    for m in 1..=3 {
        if m > 1 {
            factorial *= (m - 1) as f64;
        }
        let power = (m - 1) as i32;
        y[m - 1] = 2f64.powi(power) / factorial * (x1 * x2).powi(power) * gauss;
    }
    y[3] = x1 * x1;
    y[4] = x2 * x2;
    y[5] = x1 * x2;
    y
}

#[derive(Debug, Clone, Copy)]
pub struct TransformSummary {
    pub max_abs_error: f64,
    /// Largest relative residual of `y4 y5 = y6^2`.
    pub max_square_identity: f64,
    /// Largest relative residual of `y2 = 2 y6 y1`.
    pub max_product_identity: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn transform_suite(seed: u64, pairs: usize) -> TransformSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = TransformSummary {
        max_abs_error: 0.0,
        max_square_identity: 0.0,
        max_product_identity: 0.0,
    };
    for _ in 0..pairs {
        let x1 = rng.random_range(-1.5..1.5);
        let x2 = rng.random_range(-1.5..1.5);
        let got = expression_transform(x1, x2, &[0.0; 6]);
        let want = direct_expression(x1, x2);
        for (a, b) in got.iter().zip(&want) {
            s.max_abs_error = s.max_abs_error.max((a - b).abs());
        }
        s.max_square_identity = s
            .max_square_identity
            .max(rel(got[3] * got[4], got[5] * got[5]));
        s.max_product_identity = s
            .max_product_identity
            .max(rel(got[1], 2.0 * got[5] * got[0]));
    }
    s
}

#[derive(Debug, Clone, Copy)]
pub struct GpSummary {
    pub adjacent_correlation: f64,
    pub expected_correlation: f64,
    /// `||C_empirical - K||_F / ||K||_F` against the dense pixel kernel.
    pub covariance_error: f64,
    pub mean_sq_adjacent_diff: f64,
}

fn dense_kernel(side: usize, l: f64) -> Vec<f64> {
    let n = side * side;
    let mut k = vec![0.0; n * n];
    for p in 0..n {
        for q in 0..n {
            let (dr, dc) = (
                (p / side) as f64 - (q / side) as f64,
                (p % side) as f64 - (q % side) as f64,
            );
            k[p * n + q] = (-(dr * dr + dc * dc) / (2.0 * l)).exp();
        }
    }
    k
}

pub fn gp_suite(side: usize, l: f64, draws: usize, seed: u64) -> GpSummary {
    let sampler = GpSampler::new(side, side, l).unwrap();
    let mut rng = seeded(seed);
    let n = side * side;
    let mut cov = vec![0.0; n * n];
    let (mut cross, mut sq_a, mut sq_b, mut diff) = (0.0, 0.0, 0.0, 0.0);
    let mut pairs = 0usize;
    for _ in 0..draws {
        let y = sampler.sample(&mut rng);
        for p in 0..n {
            for q in 0..n {
                cov[p * n + q] += y[p] * y[q];
            }
        }
        for r in 0..side {
            for c in 0..side {
                let here = y[r * side + c];
                let mut neighbours = Vec::with_capacity(2);
                if c + 1 < side {
                    neighbours.push(y[r * side + c + 1]);
                }
                if r + 1 < side {
                    neighbours.push(y[(r + 1) * side + c]);
                }
                for v in neighbours {
                    cross += here * v;
                    sq_a += here * here;
                    sq_b += v * v;
                    diff += (here - v).powi(2);
                    pairs += 1;
                }
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= draws as f64);
    let k = dense_kernel(side, l);
    let num: f64 = cov
        .iter()
        .zip(&k)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = k.iter().map(|b| b * b).sum::<f64>().sqrt();
    GpSummary {
        adjacent_correlation: cross / (sq_a * sq_b).sqrt(),
        expected_correlation: (-1.0 / (2.0 * l)).exp(),
        covariance_error: num / den,
        mean_sq_adjacent_diff: diff / pairs as f64,
    }
}

fn normal_rows(rng: &mut ChaCha8Rng, rows: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..dim)
                .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect::<Vec<f64>>()
        })
        .collect()
}

/// Three synthetic members against standard-normal real data: members 0 and
/// 2 emit a tighter cloud around the real centre, member 1 emits the constant
/// 100 in every coordinate. Returns the inverse-validation scores and the
/// top-2 selection.
pub fn degenerate_member_run(seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 6;
    let rows = 200;
    let real = normal_rows(&mut rng, rows, dim, 1.0);
    let batches = vec![
        normal_rows(&mut rng, rows, dim, 0.5),
        vec![vec![100.0; dim]; rows],
        normal_rows(&mut rng, rows, dim, 0.5),
    ];
    let scores =
        inverse_validation_scores(&batches, &real, &ClassifierConfig::default(), None, seed)
            .unwrap();
    let selected = select_top_h(&scores, 2).unwrap();
    (scores, selected)
}

/// Brute-force nearest neighbour target; ties go to the earliest row.
pub fn nearest_target(inputs: &[Vec<f64>], targets: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, row) in inputs.iter().enumerate() {
        let d: f64 = row.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    targets[best].clone()
}

/// Ordinary least squares with intercept via the normal equations, solved by
/// Gauss-Jordan elimination with partial pivoting. Returns `(m + 1) x n`
/// coefficients, intercept first.
pub fn normal_equation_fit(x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = x[0].len() + 1;
    let n = y[0].len();
    let design: Vec<Vec<f64>> = x
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect();
    let mut a = vec![vec![0.0; m + n]; m];
    for (d, t) in design.iter().zip(y) {
        for i in 0..m {
            for j in 0..m {
                a[i][j] += d[i] * d[j];
            }
            for j in 0..n {
                a[i][m + j] += d[i] * t[j];
            }
        }
    }
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let lead = a[col][col];
        a[col].iter_mut().for_each(|v| *v /= lead);
        for r in 0..m {
            if r != col {
                let f = a[r][col];
                let pivot_row = a[col].clone();
                a[r].iter_mut()
                    .zip(&pivot_row)
                    .for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    a.iter().map(|row| row[m..].to_vec()).collect()
}

pub fn apply_linear(coef: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let n = coef[0].len();
    (0..n)
        .map(|j| {
            coef[0][j]
                + x.iter()
                    .enumerate()
                    .map(|(i, v)| v * coef[i + 1][j])
                    .sum::<f64>()
        })
        .collect()
}

/// Gaussian blobs centred on a line with `separation` between neighbours.
pub fn blobs(
    classes: usize,
    per_class: usize,
    separation: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        for _ in 0..per_class {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            x.push(vec![c as f64 * separation + a, b]);
            labels.push(c);
        }
    }
    (x, labels)
}

/// The multivariate benchmark with default sizes.
pub fn multivariate(sigma: f64, seed: u64) -> PairedDataset {
    gen_multivariate_dataset(&SimConfig {
        sigma,
        seed,
        ..SimConfig::default()
    })
    .unwrap()
}

/// One group-identification run of the selective ensemble at the default
/// settings on a freshly drawn dataset.
pub fn ensemble_identify(sigma: f64, group: usize, trial: usize, master: u64) -> ValidationReport {
    let tag = format!("{sigma}");
    let t = trial.to_string();
    let ds = multivariate(sigma, derive_seed(master, &["data", &tag, &t]));
    let runner = MethodRunner {
        method: Method::SeCtes,
        settings: MethodSettings::default(),
    };
    let g = group.to_string();
    let mut report = identify_group_experiment(
        &ds,
        group,
        &runner,
        &EvalSettings::default(),
        derive_seed(master, &["run", &tag, &g, &t]),
    )
    .unwrap();
    report.sigma = Some(sigma);
    report.trial = trial;
    report
}
