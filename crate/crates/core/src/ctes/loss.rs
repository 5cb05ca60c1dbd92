use crate::error::{config, input, Result};

/// Scores are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `log D(x,y) + β log(1 - D(x,ŷ)) + (1 - β) log(1 - D(x̂,y))`.
pub fn discriminator_loss(d_real: f64, d_fake_y: f64, d_fake_x: f64, beta: f64) -> f64 {
    let real = clamp_prob(d_real).ln();
    let fake_y = (1.0 - clamp_prob(d_fake_y)).ln();
    let fake_x = (1.0 - clamp_prob(d_fake_x)).ln();
    real + beta * fake_y + (1.0 - beta) * fake_x
}

/// `log D(x, ŷ)`.
pub fn generator_loss(d_fake_y: f64) -> f64 {
    clamp_prob(d_fake_y).ln()
}

/// Optimal discriminator and the value it attains on a finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxOracle {
    /// `NaN` at points carrying no mass under any distribution.
    pub optimal_discriminator: Vec<f64>,
    pub value: f64,
}

fn x_log_y(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn check_pmf(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(input(format!("{name} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(input(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

/// `D* = p_data / (p_data + β p_g + (1 - β) p')` and
/// `V = Σ p_data log D* + Σ (β p_g + (1 - β) p') log(1 - D*)`.
pub fn toy_minimax_oracle(
    p_data: &[f64],
    p_g: &[f64],
    p_prime: &[f64],
    beta: f64,
) -> Result<MinimaxOracle> {
    if p_data.len() != p_g.len() || p_data.len() != p_prime.len() {
        return Err(input("distributions must share one support"));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(config(format!("beta must lie in [0, 1], got {beta}")));
    }
    check_pmf("p_data", p_data)?;
    check_pmf("p_g", p_g)?;
    check_pmf("p_prime", p_prime)?;
    let mut d_star = Vec::with_capacity(p_data.len());
    let mut value = 0.0;
    for ((&pd, &pg), &pp) in p_data.iter().zip(p_g).zip(p_prime) {
        let mix = beta * pg + (1.0 - beta) * pp;
        let total = pd + mix;
        if total == 0.0 {
            d_star.push(f64::NAN);
            continue;
        }
        let d = pd / total;
        d_star.push(d);
        value += x_log_y(pd, d) + x_log_y(mix, mix / total);
    }
    Ok(MinimaxOracle {
        optimal_discriminator: d_star,
        value,
    })
}
