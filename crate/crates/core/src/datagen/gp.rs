use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::PairedDataset;
use crate::error::{config, Error, Result};
use crate::rng::{self, Rng};

const CHOLESKY_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpSimConfig {
    /// Grid side length; images are `side x side`.
    pub side: usize,
    pub images_per_category: usize,
    pub categories: usize,
    /// Length scale per category; empty means `l_i = i`.
    pub length_scales: Vec<f64>,
    pub characteristic_dim: usize,
    pub seed: u64,
}

impl Default for GpSimConfig {
    fn default() -> Self {
        Self {
            side: 16,
            images_per_category: 128,
            categories: 5,
            length_scales: Vec::new(),
            characteristic_dim: 64,
            seed: 0,
        }
    }
}

impl GpSimConfig {
    pub fn paper_scale() -> Self {
        Self {
            side: 64,
            ..Self::default()
        }
    }

    pub fn length_scale(&self, category: usize) -> f64 {
        self.length_scales
            .get(category.wrapping_sub(1))
            .copied()
            .unwrap_or(category as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < 2 {
            return Err(config("GP grid side must be at least 2"));
        }
        if self.categories == 0 || self.images_per_category == 0 || self.characteristic_dim == 0 {
            return Err(config(
                "GP category, image and characteristic counts must be positive",
            ));
        }
        for c in 1..=self.categories {
            let l = self.length_scale(c);
            if !(l > 0.0 && l.is_finite()) {
                return Err(config(format!(
                    "length scale for category {c} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Zero-mean field on an `h x w` pixel grid with separable covariance
/// `exp(-((r - r')^2 + (c - c')^2) / (2 l))`, sampled as `L_r Z L_c^T`.
#[derive(Debug, Clone)]
pub struct GpSampler {
    rows: DMatrix<f64>,
    cols: DMatrix<f64>,
}

impl GpSampler {
    pub fn new(h: usize, w: usize, length_scale: f64) -> Result<Self> {
        Ok(Self {
            rows: rbf_cholesky(h, length_scale)?,
            cols: rbf_cholesky(w, length_scale)?,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.nrows(), self.cols.nrows())
    }

    /// One field, row-major.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let (h, w) = self.shape();
        let mut z = DMatrix::<f64>::zeros(h, w);
        // fill row-major so the draw order does not depend on storage layout
        for r in 0..h {
            for c in 0..w {
                z[(r, c)] = rng::standard_normal(rng);
            }
        }
        let y = &self.rows * z * self.cols.transpose();
        let mut out = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                out.push(y[(r, c)]);
            }
        }
        out
    }
}

fn rbf_cholesky(n: usize, length_scale: f64) -> Result<DMatrix<f64>> {
    let k = DMatrix::from_fn(n, n, |i, j| {
        let d = i as f64 - j as f64;
        (-d * d / (2.0 * length_scale)).exp() + if i == j { CHOLESKY_JITTER } else { 0.0 }
    });
    k.cholesky().map(|c| c.l()).ok_or_else(|| {
        Error::Sampling(format!(
            "kernel factor for {n} points with l={length_scale} is not positive definite"
        ))
    })
}

/// One field for `category` (length scale `l_category`).
pub fn gp_sample(cfg: &GpSimConfig, category: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    cfg.validate()?;
    if category == 0 || category > cfg.categories {
        return Err(config(format!(
            "category {category} outside 1..={}",
            cfg.categories
        )));
    }
    Ok(GpSampler::new(cfg.side, cfg.side, cfg.length_scale(category))?.sample(rng))
}

/// Fields per category plus characteristics `v_q ~ N(20 l_i + q/10, 1)`.
pub fn gen_scalar_to_matrix_dataset(cfg: &GpSimConfig) -> Result<PairedDataset> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);
    let n = cfg.categories * cfg.images_per_category;
    let mut characteristics = Vec::with_capacity(n);
    let mut expressions = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for category in 1..=cfg.categories {
        let l = cfg.length_scale(category);
        let sampler = GpSampler::new(cfg.side, cfg.side, l)?;
        for _ in 0..cfg.images_per_category {
            expressions.push(sampler.sample(&mut rng));
            characteristics.push(
                (1..=cfg.characteristic_dim)
                    .map(|q| 20.0 * l + q as f64 / 10.0 + rng::standard_normal(&mut rng))
                    .collect(),
            );
            groups.push(category);
        }
    }
    PairedDataset::new(characteristics, expressions, groups, cfg.categories)?
        .with_image_shape(cfg.side, cfg.side)
}
