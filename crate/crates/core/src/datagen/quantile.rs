use crate::error::{config, input, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub labels: Vec<usize>,
    /// The `bins - 1` interior edges, non-decreasing.
    pub edges: Vec<f64>,
    /// Set when some bins coincide because the column has too few distinct values.
    pub degenerate: bool,
}

/// Maps each value to one of `bins` quantile intervals. Edges sit at the
/// `j / bins` empirical quantiles (linear interpolation between order
/// statistics); a value equal to an edge goes to the lower bin.
pub fn quantile_discretize(column: &[f64], bins: usize) -> Result<Discretized> {
    if column.is_empty() {
        return Err(input("cannot discretize an empty column"));
    }
    if bins < 2 {
        return Err(config("quantile discretization needs at least 2 bins"));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(input("column contains non-finite values"));
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = (sorted.len() - 1) as f64;
    let edges: Vec<f64> = (1..bins)
        .map(|j| {
            let pos = last * j as f64 / bins as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        })
        .collect();

    let mut distinct = sorted.clone();
    distinct.dedup();
    let degenerate = distinct.len() < bins || edges.windows(2).any(|w| w[0] == w[1]);
    if degenerate {
        log::warn!(
            "column has {} distinct values for {bins} quantile bins; some bins are empty",
            distinct.len()
        );
    }

    let labels = column
        .iter()
        .map(|&v| edges.partition_point(|&e| e < v))
        .collect();
    Ok(Discretized {
        labels,
        edges,
        degenerate,
    })
}
