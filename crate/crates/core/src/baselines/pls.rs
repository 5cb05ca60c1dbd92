use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config, input, Result};

const NIPALS_TOL: f64 = 1e-12;
const NIPALS_MAX_ITER: usize = 500;

/// Partial least squares regression fitted by NIPALS deflation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlsModel {
    pub components: usize,
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
    /// `m x A` weights, loadings and `n x A` response loadings.
    pub weights: Vec<Vec<f64>>,
    pub x_loadings: Vec<Vec<f64>>,
    pub y_loadings: Vec<Vec<f64>>,
    /// `m x n` regression coefficients on centered data.
    pub coefficients: Vec<Vec<f64>>,
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.ncols(), |j, _| m.column(j).mean())
}

pub fn pls_fit(x: &[Vec<f64>], y: &[Vec<f64>], components: usize) -> Result<PlsModel> {
    if components == 0 {
        return Err(config("PLS needs at least one component"));
    }
    if x.len() != y.len() || x.is_empty() {
        return Err(input("PLS inputs must be non-empty and row-aligned"));
    }
    let mut xm = to_matrix(x);
    let mut ym = to_matrix(y);
    let (n, m) = xm.shape();
    if m == 0 || ym.ncols() == 0 {
        return Err(input("PLS inputs need at least one column"));
    }
    if components > m.min(n.saturating_sub(1)) {
        return Err(config(format!(
            "{components} components exceed min(N - 1, m) = {}",
            m.min(n.saturating_sub(1))
        )));
    }
    let x_mean = column_means(&xm);
    let y_mean = column_means(&ym);
    for mut row in xm.row_iter_mut() {
        row -= x_mean.transpose();
    }
    for mut row in ym.row_iter_mut() {
        row -= y_mean.transpose();
    }
    if xm.iter().all(|v| v.abs() < f64::EPSILON) {
        return Err(input("X has zero variance"));
    }

    let x_scale = xm.norm();
    let mut w_cols = Vec::new();
    let mut p_cols = Vec::new();
    let mut q_cols = Vec::new();
    for a in 0..components {
        if xm.norm() <= 1e-12 * x_scale {
            log::debug!("PLS stopped after {a} components: X fully explained");
            break;
        }
        // start from the response column with the largest variance
        let start = (0..ym.ncols())
            .max_by(|&i, &j| {
                ym.column(i)
                    .norm_squared()
                    .total_cmp(&ym.column(j).norm_squared())
            })
            .unwrap_or(0);
        let mut u: DVector<f64> = ym.column(start).into_owned();
        if u.norm_squared() == 0.0 {
            u = xm.column(0).into_owned();
        }
        let mut t_old = DVector::<f64>::zeros(n);
        let (mut w, mut t) = (DVector::zeros(m), DVector::zeros(n));
        for _ in 0..NIPALS_MAX_ITER {
            w = xm.transpose() * &u;
            let wn = w.norm();
            if wn == 0.0 {
                break;
            }
            w /= wn;
            t = &xm * &w;
            let tt = t.norm_squared();
            let q = ym.transpose() * &t / tt;
            let qq = q.norm_squared();
            if qq == 0.0 {
                break;
            }
            u = &ym * &q / qq;
            let delta = (&t - &t_old).norm();
            if delta <= NIPALS_TOL * t.norm().max(1.0) {
                break;
            }
            t_old.copy_from(&t);
        }
        let tt = t.norm_squared();
        if tt == 0.0 {
            break;
        }
        let p = xm.transpose() * &t / tt;
        let c = ym.transpose() * &t / tt;
        xm -= &t * p.transpose();
        ym -= &t * c.transpose();
        w_cols.push(w);
        p_cols.push(p);
        q_cols.push(c);
    }
    if w_cols.is_empty() {
        return Err(input("PLS could not extract any component"));
    }
    let w = DMatrix::from_columns(&w_cols);
    let p = DMatrix::from_columns(&p_cols);
    let q = DMatrix::from_columns(&q_cols);
    let ptw = p.transpose() * &w;
    let inv = ptw
        .try_inverse()
        .ok_or_else(|| input("PLS loading matrix is singular"))?;
    let b = &w * inv * q.transpose();

    let rows = |mat: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..mat.nrows())
            .map(|i| mat.row(i).iter().copied().collect())
            .collect()
    };
    Ok(PlsModel {
        components: w_cols.len(),
        x_mean: x_mean.iter().copied().collect(),
        y_mean: y_mean.iter().copied().collect(),
        weights: rows(&w),
        x_loadings: rows(&p),
        y_loadings: rows(&q),
        coefficients: rows(&b),
    })
}

/// `y = y_mean + (x - x_mean) B`.
pub fn pls_predict(model: &PlsModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.x_mean.len() {
        return Err(input(format!(
            "PLS model expects {} characteristics, got {}",
            model.x_mean.len(),
            x.len()
        )));
    }
    let mut y = model.y_mean.clone();
    for (j, (&xj, &mj)) in x.iter().zip(&model.x_mean).enumerate() {
        let d = xj - mj;
        for (yk, bk) in y.iter_mut().zip(&model.coefficients[j]) {
            *yk += d * bk;
        }
    }
    Ok(y)
}
