use serde::{Deserialize, Serialize};

use super::PairedDataset;
use crate::error::{config, Result};
use crate::rng;

/// How the small additive noise enters the six expression coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// One fresh draw per output coordinate.
    #[default]
    PerCoordinate,
    /// One draw shared by all six coordinates of a sample.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub sigma: f64,
    pub samples_per_group: usize,
    pub groups: usize,
    pub noise_std: f64,
    pub noise_mode: NoiseMode,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sigma: 0.01,
            samples_per_group: 200,
            groups: 5,
            noise_std: 0.005,
            noise_mode: NoiseMode::PerCoordinate,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(config(format!(
                "sigma must lie in (0, 1), got {}",
                self.sigma
            )));
        }
        if self.samples_per_group == 0 || self.groups == 0 {
            return Err(config("samples per group and group count must be positive"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(config("noise std must be non-negative"));
        }
        Ok(())
    }
}

/// Six expression coordinates from `(x1, x2)`; coordinate `m` uses `eps[m]`
/// for both inputs.
pub fn expression_transform(x1: f64, x2: f64, eps: &[f64; 6]) -> [f64; 6] {
    let mut y = [0.0; 6];
    // Taylor terms of the Gaussian kernel at the origin: 2^(m-1)/(m-1)! (a b)^(m-1) e^(-a^2-b^2)
    for (m, slot) in y.iter_mut().take(3).enumerate() {
        let a = x1 + eps[m];
        let b = x2 + eps[m];
        // 2^0/0!, 2^1/1!, 2^2/2!
        let coeff = [1.0, 2.0, 2.0][m];
        *slot = coeff * (a * b).powi(m as i32) * (-a * a - b * b).exp();
    }
    y[3] = (x1 + eps[3]).powi(2);
    y[4] = (x2 + eps[4]).powi(2);
    y[5] = (x1 + eps[5]) * (x2 + eps[5]);
    y
}

/// Groups `i = 1..=groups` with `x1, x2 ~ N(0.2 i, sigma^2)`.
pub fn gen_multivariate_dataset(cfg: &SimConfig) -> Result<PairedDataset> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);
    let n = cfg.groups * cfg.samples_per_group;
    let mut characteristics = Vec::with_capacity(n);
    let mut expressions = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for group in 1..=cfg.groups {
        let mean = 0.2 * group as f64;
        for _ in 0..cfg.samples_per_group {
            let x1 = mean + cfg.sigma * rng::standard_normal(&mut rng);
            let x2 = mean + cfg.sigma * rng::standard_normal(&mut rng);
            let mut eps = [0.0; 6];
            match cfg.noise_mode {
                NoiseMode::PerCoordinate => {
                    for e in &mut eps {
                        *e = cfg.noise_std * rng::standard_normal(&mut rng);
                    }
                }
                NoiseMode::Shared => eps = [cfg.noise_std * rng::standard_normal(&mut rng); 6],
            }
            characteristics.push(vec![x1, x2]);
            expressions.push(expression_transform(x1, x2, &eps).to_vec());
            groups.push(group);
        }
    }
    PairedDataset::new(characteristics, expressions, groups, cfg.groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_maps_to_unit_first_coordinate() {
        assert_eq!(
            expression_transform(0.0, 0.0, &[0.0; 6]),
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn known_point() {
        let y = expression_transform(0.2, 0.2, &[0.0; 6]);
        let want = [0.923116, 0.073849, 0.002954, 0.04, 0.04, 0.04];
        for (a, b) in y.iter().zip(want) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn each_coordinate_uses_its_own_noise() {
        let base = expression_transform(0.3, 0.5, &[0.0; 6]);
        let mut eps = [0.0; 6];
        eps[4] = 0.01;
        let y = expression_transform(0.3, 0.5, &eps);
        for m in 0..6 {
            if m == 4 {
                assert_eq!(y[m], 0.51 * 0.51);
            } else {
                assert_eq!(y[m], base[m]);
            }
        }
    }

    #[test]
    fn default_dimensions() {
        let ds = gen_multivariate_dataset(&SimConfig::default()).unwrap();
        assert_eq!(ds.len(), 1000);
        assert_eq!(ds.char_dim(), 2);
        assert_eq!(ds.expr_dim(), 6);
        assert_eq!(ds.group_count, 5);
        assert!(ds.groups.iter().all(|&g| (1..=5).contains(&g)));
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = SimConfig {
            seed: 4,
            ..Default::default()
        };
        assert_eq!(
            gen_multivariate_dataset(&cfg).unwrap(),
            gen_multivariate_dataset(&cfg).unwrap()
        );
        let other = SimConfig {
            seed: 5,
            ..Default::default()
        };
        assert_ne!(
            gen_multivariate_dataset(&cfg).unwrap(),
            gen_multivariate_dataset(&other).unwrap()
        );
    }

    #[test]
    fn rejects_bad_sigma() {
        for sigma in [0.0, -0.1, 1.0] {
            assert!(gen_multivariate_dataset(&SimConfig {
                sigma,
                ..Default::default()
            })
            .is_err());
        }
    }
}
