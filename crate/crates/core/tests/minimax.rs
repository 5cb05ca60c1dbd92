mod support;

use ctes::ctes::toy_minimax_oracle;
use proptest::prelude::*;
use support::oracles::{minimax_suite, LOG4};

fn normalize(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

#[test]
fn value_at_the_optimum_is_bounded_below_by_minus_log_four() {
    let s = minimax_suite(17, 1000);
    assert!(s.min_margin >= -1e-9, "min margin {}", s.min_margin);
    assert!(
        s.max_equality_gap <= 1e-9,
        "equality gap {}",
        s.max_equality_gap
    );
    assert_eq!(s.spurious_equalities, 0);
    assert!(
        s.max_js_disagreement <= 1e-12,
        "js disagreement {}",
        s.max_js_disagreement
    );
}

#[test]
fn hand_computed_cases() {
    let o = toy_minimax_oracle(&[1.0, 0.0], &[0.0, 1.0], &[0.5, 0.5], 1.0).unwrap();
    assert_eq!(o.optimal_discriminator, vec![1.0, 0.0]);
    assert_eq!(o.value, 0.0);

    let p = [0.25, 0.75];
    let o = toy_minimax_oracle(&p, &p, &p, 0.3).unwrap();
    assert!(o
        .optimal_discriminator
        .iter()
        .all(|&d| (d - 0.5).abs() < 1e-15));
    assert!((o.value + LOG4).abs() < 1e-12);

    // p_g = [0, 1], p_data = [0.4, 0.6], beta = 0.5 forces p' = [0.8, 0.2].
    let o = toy_minimax_oracle(&[0.4, 0.6], &[0.0, 1.0], &[0.8, 0.2], 0.5).unwrap();
    assert!((o.value + LOG4).abs() < 1e-12);
}

proptest! {
    #[test]
    fn any_triple_respects_the_bound(
        raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 2..8),
        beta in 0.0f64..=1.0,
    ) {
        let pick = |k: usize| -> Vec<f64> {
            raw.iter().map(|t| [t.0, t.1, t.2][k] + 1e-3).collect()
        };
        let (d, g, q) = (normalize(&pick(0)), normalize(&pick(1)), normalize(&pick(2)));
        let o = toy_minimax_oracle(&d, &g, &q, beta).unwrap();
        prop_assert!(o.value >= -LOG4 - 1e-9);
        for &s in &o.optimal_discriminator {
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
