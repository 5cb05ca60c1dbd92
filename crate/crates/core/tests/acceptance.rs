//! Acceptance suite: one PASS/FAIL line per criterion. Soft criteria report
//! but never fail the run.

mod support;

use std::fs;
use std::path::Path;
use std::time::Instant;

use ctes::baselines::{grnn_predict, pls_fit, pls_predict, GrnnModel, Method};
use ctes::ctes::synthesize;
use ctes::ensemble::{ensemble_synthesize, train_se_ctes, EnsembleConfig};
use ctes::eval::{risk_difference_eval, EvalSettings, MethodRunner, MethodSettings, Synthesizer};
use ctes::forest::{fit_forest, predict_forest, ForestConfig};
use ctes::rng::seeded;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::gradcheck::gradient_suite;
use support::oracles::{
    apply_linear, blobs, degenerate_member_run, ensemble_identify, gp_suite, minimax_suite,
    multivariate, nearest_target, normal_equation_fit, transform_suite,
};

const MASTER_SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Easy regime: A1 >= 0.90 and A2 >= 0.99 in at least 2 of 3 trials.
fn easy_regime(a1: &[f64], a2: &[f64]) -> Outcome {
    let good = a1
        .iter()
        .zip(a2)
        .filter(|(x, y)| **x >= 0.90 && **y >= 0.99)
        .count();
    outcome(
        good >= 2,
        format!(
            "{good}/3 trials meet A1>=0.90, A2>=0.99; A1 {} A2 {}",
            fmt_list(a1),
            fmt_list(a2)
        ),
    )
}

fn difficulty_trend(easy_a1: &[f64], hard_a1: &[f64]) -> Outcome {
    let (e, h) = (mean(easy_a1), mean(hard_a1));
    outcome(
        e > h,
        format!("mean A1 {e:.3} at sigma 0.01 vs {h:.3} at sigma 0.09"),
    )
}

fn group_ordering(g4: &[f64], g2: &[f64]) -> Outcome {
    let (a, b) = (mean(g4), mean(g2));
    outcome(
        a > b,
        format!("mean A1 {a:.3} for group 4 vs {b:.3} for group 2 at sigma 0.05"),
    )
}

fn minimax() -> Outcome {
    let s = minimax_suite(MASTER_SEED, 1000);
    outcome(
        s.min_margin >= -1e-9 && s.max_equality_gap <= 1e-9 && s.spurious_equalities == 0,
        format!(
            "min V+log4 {:.3e} on free triples, max |V+log4| {:.3e} on mixture-matched triples, {} spurious equalities",
            s.min_margin, s.max_equality_gap, s.spurious_equalities
        ),
    )
}

fn mixture_mean() -> Outcome {
    let ds = multivariate(0.01, MASTER_SEED);
    let ens = match train_se_ctes(
        &ds,
        &EnsembleConfig {
            seed: MASTER_SEED,
            ..EnsembleConfig::default()
        },
    ) {
        Ok(e) => e,
        Err(e) => return outcome(false, format!("ensemble training failed: {e}")),
    };
    let x = ds.characteristics[ds.group_indices(3)[0]].clone();
    let draws = 10_000;
    let pooled =
        ensemble_synthesize(&ens, std::slice::from_ref(&x), draws, &mut seeded(1)).unwrap();
    let members: Vec<Vec<Vec<f64>>> = ens
        .selected_models()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            synthesize(m, &x, draws, &mut seeded(10 + i as u64), m.config.jitter).unwrap()
        })
        .collect();
    let stats = |rows: &[Vec<f64>], j: usize| {
        let n = rows.len() as f64;
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, var / n)
    };
    let h = members.len() as f64;
    let mut worst: f64 = 0.0;
    for j in 0..ds.expr_dim() {
        let (pm, pse2) = stats(&pooled, j);
        let (sum_m, sum_se2) = members
            .iter()
            .map(|m| stats(m, j))
            .fold((0.0, 0.0), |a, (m, s)| (a.0 + m, a.1 + s));
        let se = (pse2 + sum_se2 / (h * h)).sqrt();
        let z = if se > 0.0 {
            (pm - sum_m / h).abs() / se
        } else {
            (pm - sum_m / h).abs() * f64::INFINITY
        };
        worst = worst.max(if z.is_nan() { 0.0 } else { z });
    }
    outcome(
        worst <= 3.0,
        format!(
            "selected {:?}, worst feature deviation {worst:.2} standard errors",
            ens.selected
        ),
    )
}

fn gradients() -> Outcome {
    let worst = gradient_suite(MASTER_SEED, 100);
    outcome(
        worst <= 1e-5,
        format!("max relative error {worst:.3e} over 100 dense and convolutional instances"),
    )
}

fn baselines() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let truth: Vec<Vec<f64>> = (0..=3)
        .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let x: Vec<Vec<f64>> = (0..100)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<Vec<f64>> = x.iter().map(|r| apply_linear(&truth, r)).collect();
    let pls = pls_fit(&x, &y, 3).unwrap();
    let ols = normal_equation_fit(&x, &y);
    let mut pls_err: f64 = 0.0;
    for _ in 0..200 {
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        for (a, b) in pls_predict(&pls, &q)
            .unwrap()
            .iter()
            .zip(apply_linear(&ols, &q))
        {
            pls_err = pls_err.max((a - b).abs());
        }
    }

    let inputs: Vec<Vec<f64>> = (0..80)
        .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let targets: Vec<Vec<f64>> = (0..80)
        .map(|_| (0..3).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();
    let grnn = GrnnModel::fit(&inputs, &targets, Some(1e-6)).unwrap();
    let grnn_mismatches = (0..500)
        .filter(|_| {
            let q: Vec<f64> = (0..2).map(|_| rng.random_range(-1.2..1.2)).collect();
            grnn_predict(&grnn, &q).unwrap() != nearest_target(&inputs, &targets, &q)
        })
        .count();

    let (tx, ty) = blobs(3, 200, 6.0, MASTER_SEED);
    let (vx, vy) = blobs(3, 200, 6.0, MASTER_SEED + 1);
    let forest = fit_forest(
        &tx,
        &ty,
        &ForestConfig {
            seed: MASTER_SEED,
            ..ForestConfig::default()
        },
    )
    .unwrap();
    let pred = predict_forest(&forest, &vx).unwrap();
    let acc = pred.iter().zip(&vy).filter(|(a, b)| a == b).count() as f64 / vy.len() as f64;

    outcome(
        pls_err <= 1e-6 && grnn_mismatches == 0 && acc >= 0.95,
        format!("PLS vs normal equations {pls_err:.2e}; GRNN nearest-neighbour mismatches {grnn_mismatches}/500; forest held-out accuracy {acc:.3}"),
    )
}

fn gp_fidelity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (l, seed) in [(1.0, MASTER_SEED), (5.0, MASTER_SEED + 1)] {
        let s = gp_suite(8, l, 10_000, seed);
        pass &= (s.adjacent_correlation - s.expected_correlation).abs() <= 0.03
            && s.covariance_error <= 0.1;
        parts.push(format!(
            "l={l}: corr {:.4} (kernel {:.4}), cov rel err {:.4}",
            s.adjacent_correlation, s.expected_correlation, s.covariance_error
        ));
    }
    outcome(pass, parts.join("; "))
}

fn transform() -> Outcome {
    let s = transform_suite(MASTER_SEED, 1000);
    outcome(
        s.max_abs_error <= 1e-12
            && s.max_square_identity <= 1e-15
            && s.max_product_identity <= 1e-15,
        format!(
            "max deviation {:.2e}; relative residuals y4*y5-y6^2 {:.2e}, y2-2*y6*y1 {:.2e}",
            s.max_abs_error, s.max_square_identity, s.max_product_identity
        ),
    )
}

fn selection() -> Outcome {
    let mut hits = 0;
    let mut excluded = true;
    for seed in 0..10 {
        let (scores, selected) = degenerate_member_run(MASTER_SEED + seed);
        if scores[1] < scores[0] && scores[1] < scores[2] {
            hits += 1;
        }
        excluded &= !selected.contains(&1);
    }
    outcome(
        hits >= 9 && excluded,
        format!("degenerate member strictly lowest in {hits}/10 runs, excluded from top-2 in every run: {excluded}"),
    )
}

const BENCH_CONFIG: &str = r#"{
  "sigmas": [0.01, 0.05],
  "groups": [2, 4],
  "trials": 2,
  "simulation": {"samples_per_group": 40},
  "train": {"iterations": 100},
  "forest": {"trees": 30},
  "beta_grid": [0.5, 0.9]
}"#;

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map(|d| {
            d.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        fs::read(&p).unwrap_or_default(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    fs::write(&cfg, BENCH_CONFIG).unwrap();
    let seed = MASTER_SEED.to_string();
    let mut runs = Vec::new();
    for (name, workers) in [("first", "1"), ("second", "1"), ("parallel", "4")] {
        let out = dir.path().join(name);
        let code = ctes::cli::run([
            "ctes",
            "bench",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            &seed,
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        if !matches!(code, Ok(0)) {
            return outcome(
                false,
                format!("bench with {workers} worker(s) ended with {code:?}"),
            );
        }
        runs.push(csv_bytes(&out));
    }
    let same = !runs[0].is_empty() && runs[0] == runs[1] && runs[0] == runs[2];
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    outcome(
        same,
        format!(
            "{} report CSVs {:?} byte-identical across 2 runs and workers 1/4: {same}",
            names.len(),
            names
        ),
    )
}

fn risk_pipeline() -> Outcome {
    struct Replay(ctes::datagen::PairedDataset);
    impl Synthesizer for Replay {
        fn name(&self) -> String {
            "replay".into()
        }
        fn fit_synthesize(
            &self,
            _: &ctes::datagen::PairedDataset,
            xs: &[Vec<f64>],
            _: u64,
        ) -> ctes::Result<Vec<Vec<f64>>> {
            Ok(xs
                .iter()
                .map(|x| {
                    self.0.expressions[self.0.characteristics.iter().position(|c| c == x).unwrap()]
                        .clone()
                })
                .collect())
        }
    }
    let base = multivariate(0.05, MASTER_SEED);
    let outcomes = base
        .expressions
        .iter()
        .map(|y| u8::from(y[0] > 0.5))
        .collect();
    let ds = base.with_outcomes(outcomes).unwrap();
    let settings = EvalSettings::default();
    let zero = risk_difference_eval(&ds, 3, &Replay(ds.clone()), &settings, MASTER_SEED).unwrap();
    let pls = MethodRunner {
        method: Method::Pls,
        settings: MethodSettings::default(),
    };
    let real = risk_difference_eval(&ds, 3, &pls, &settings, MASTER_SEED).unwrap();
    outcome(
        zero.mean_abs_diff == 0.0 && (0.0..=1.0).contains(&real.mean_abs_diff),
        format!(
            "replayed expressions give mean |r_a - r_s| {}; PLS gives {:.4} (std {:.4})",
            zero.mean_abs_diff, real.mean_abs_diff, real.std_abs_diff
        ),
    )
}

fn main() {
    let started = Instant::now();
    let mut hard_failures = 0;
    let mut report = |id: &str, name: &str, soft: bool, o: Outcome| {
        let status = match (o.pass, soft) {
            (true, _) => "PASS",
            (false, true) => "FAIL (soft)",
            (false, false) => "FAIL",
        };
        if !o.pass && !soft {
            hard_failures += 1;
        }
        println!("{status} [{id}] {name}: {}", o.detail);
    };

    let trials = 3;
    let easy: Vec<_> = (0..trials)
        .map(|t| ensemble_identify(0.01, 4, t, MASTER_SEED))
        .collect();
    let easy_a1: Vec<f64> = easy.iter().map(|r| r.a1).collect();
    let easy_a2: Vec<f64> = easy.iter().map(|r| r.a2).collect();
    report(
        "1",
        "easy-regime reproduction",
        false,
        easy_regime(&easy_a1, &easy_a2),
    );

    let hard_a1: Vec<f64> = (0..trials)
        .map(|t| ensemble_identify(0.09, 4, t, MASTER_SEED).a1)
        .collect();
    report(
        "2",
        "difficulty trend",
        false,
        difficulty_trend(&easy_a1, &hard_a1),
    );

    let g4: Vec<f64> = (0..5)
        .map(|t| ensemble_identify(0.05, 4, t, MASTER_SEED).a1)
        .collect();
    let g2: Vec<f64> = (0..5)
        .map(|t| ensemble_identify(0.05, 2, t, MASTER_SEED).a1)
        .collect();
    report(
        "3",
        "group-difficulty ordering",
        true,
        group_ordering(&g4, &g2),
    );

    report("4", "minimax value bound", false, minimax());
    report("5", "mixture-mean property", false, mixture_mean());
    report("6", "gradient suite", false, gradients());
    report("7", "baseline oracles", false, baselines());
    report("8", "GP generator fidelity", false, gp_fidelity());
    report("9", "expression transform exactness", false, transform());
    report("10", "selection sanity", false, selection());
    report("11", "end-to-end determinism", false, determinism());
    report("risk", "risk-difference pipeline", false, risk_pipeline());

    println!(
        "acceptance finished in {:.1}s with {hard_failures} hard failure(s)",
        started.elapsed().as_secs_f64()
    );
    if hard_failures > 0 {
        std::process::exit(1);
    }
}
