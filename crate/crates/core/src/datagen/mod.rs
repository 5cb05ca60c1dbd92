//! Synthetic benchmark generators, the paired dataset container, quantile
//! discretization, the 3x3 smoothing filter and CSV ingestion.

mod csv_io;
mod filter;
mod gp;
mod multivariate;
mod quantile;

pub use csv_io::{format_float, read_dataset, write_dataset};
pub use filter::low_pass_filter;
pub use gp::{gen_scalar_to_matrix_dataset, gp_sample, GpSampler, GpSimConfig};
pub use multivariate::{expression_transform, gen_multivariate_dataset, NoiseMode, SimConfig};
pub use quantile::{quantile_discretize, Discretized};

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// `N` row-aligned (characteristic, expression) pairs with group labels in
/// `1..=groups`. Image expressions are stored flattened row-major with their
/// shape in `image_shape`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDataset {
    pub characteristics: Vec<Vec<f64>>,
    pub expressions: Vec<Vec<f64>>,
    pub groups: Vec<usize>,
    pub group_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_shape: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<u8>>,
}

impl PairedDataset {
    pub fn new(
        characteristics: Vec<Vec<f64>>,
        expressions: Vec<Vec<f64>>,
        groups: Vec<usize>,
        group_count: usize,
    ) -> Result<Self> {
        let ds = Self {
            characteristics,
            expressions,
            groups,
            group_count,
            image_shape: None,
            outcomes: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_image_shape(mut self, h: usize, w: usize) -> Result<Self> {
        self.image_shape = Some((h, w));
        self.validate()?;
        Ok(self)
    }

    pub fn with_outcomes(mut self, outcomes: Vec<u8>) -> Result<Self> {
        self.outcomes = Some(outcomes);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.characteristics.len();
        if self.expressions.len() != n || self.groups.len() != n {
            return Err(input(format!(
                "dataset rows are not aligned: {} characteristics, {} expressions, {} labels",
                n,
                self.expressions.len(),
                self.groups.len()
            )));
        }
        let m = self.char_dim();
        let e = self.expr_dim();
        if self.characteristics.iter().any(|r| r.len() != m) {
            return Err(input("characteristic rows have differing lengths"));
        }
        if self.expressions.iter().any(|r| r.len() != e) {
            return Err(input("expression rows have differing lengths"));
        }
        if let Some(&g) = self
            .groups
            .iter()
            .find(|&&g| g == 0 || g > self.group_count)
        {
            return Err(input(format!(
                "group label {g} outside 1..={}",
                self.group_count
            )));
        }
        if let Some((h, w)) = self.image_shape {
            if h * w != e {
                return Err(input(format!(
                    "image shape {h}x{w} does not match {e} expression values"
                )));
            }
        }
        if let Some(o) = &self.outcomes {
            if o.len() != n || o.iter().any(|&v| v > 1) {
                return Err(input("outcome column must be binary and row-aligned"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.characteristics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.characteristics.is_empty()
    }

    pub fn char_dim(&self) -> usize {
        self.characteristics.first().map(Vec::len).unwrap_or(0)
    }

    pub fn expr_dim(&self) -> usize {
        self.expressions.first().map(Vec::len).unwrap_or(0)
    }

    pub fn group_indices(&self, group: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.groups[i] == group)
            .collect()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> PairedDataset {
        PairedDataset {
            characteristics: indices
                .iter()
                .map(|&i| self.characteristics[i].clone())
                .collect(),
            expressions: indices
                .iter()
                .map(|&i| self.expressions[i].clone())
                .collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
            group_count: self.group_count,
            image_shape: self.image_shape,
            outcomes: self
                .outcomes
                .as_ref()
                .map(|o| indices.iter().map(|&i| o[i]).collect()),
        }
    }

    pub fn without_group(&self, group: usize) -> PairedDataset {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.groups[i] != group)
            .collect();
        self.subset(&keep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_misaligned_rows_and_bad_labels() {
        assert!(PairedDataset::new(vec![vec![1.0]], vec![], vec![1], 1).is_err());
        assert!(PairedDataset::new(vec![vec![1.0]], vec![vec![2.0]], vec![0], 1).is_err());
        assert!(PairedDataset::new(vec![vec![1.0]], vec![vec![2.0]], vec![2], 1).is_err());
        let ok = PairedDataset::new(
            vec![vec![1.0], vec![3.0]],
            vec![vec![2.0], vec![4.0]],
            vec![1, 2],
            2,
        )
        .unwrap();
        assert_eq!(ok.without_group(1).characteristics, vec![vec![3.0]]);
        assert!(ok.clone().with_outcomes(vec![0, 2]).is_err());
        assert!(ok.with_image_shape(2, 2).is_err());
    }
}
