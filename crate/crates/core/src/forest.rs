//! CART random-forest classifier used for inverse validation and for the
//! group-identification experiments.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, input, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRule {
    /// floor(sqrt(d)), at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl FeatureRule {
    fn resolve(self, dim: usize) -> usize {
        let n = match self {
            FeatureRule::Sqrt => (dim as f64).sqrt().floor() as usize,
            FeatureRule::All => dim,
            FeatureRule::Count(n) => n,
        };
        n.clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub features: FeatureRule,
    /// Per-class stratified bootstrap; when false every tree sees all rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 0,
            min_samples_split: 2,
            features: FeatureRule::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(config("forest needs at least one tree"));
        }
        if self.min_samples_split < 2 {
            return Err(config("min samples per split must be at least 2"));
        }
        Ok(())
    }
}

/// Gini impurity `1 - sum (n_c / N)^2`.
pub fn gini(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(input("gini impurity of an empty node"));
    }
    Ok(gini_unchecked(counts, total))
}

fn gini_unchecked(counts: &[usize], total: usize) -> f64 {
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Class index (not label) of the leaf majority for `x`; ties go low.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { counts } => return argmax_low(counts),
            }
        }
    }
}

fn argmax_low(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    /// Sorted distinct class labels; trees vote by index into this list.
    pub classes: Vec<usize>,
    pub dim: usize,
}

pub fn fit_forest(x: &[Vec<f64>], labels: &[usize], cfg: &ForestConfig) -> Result<Forest> {
    cfg.validate()?;
    if x.len() != labels.len() {
        return Err(input("feature rows and labels are not aligned"));
    }
    if x.len() < 2 {
        return Err(input("forest needs at least two samples"));
    }
    let dim = x[0].len();
    if dim == 0 || x.iter().any(|r| r.len() != dim) {
        return Err(input("feature rows must share a positive dimension"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(input("features must be finite"));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(input("forest needs at least two classes"));
    }
    let y: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    let by_class: Vec<Vec<usize>> = (0..classes.len())
        .map(|c| (0..y.len()).filter(|&i| y[i] == c).collect())
        .collect();

    let builder = TreeBuilder {
        x,
        y: &y,
        n_classes: classes.len(),
        mtry: cfg.features.resolve(dim),
        max_depth: cfg.max_depth,
        min_split: cfg.min_samples_split,
    };
    let trees = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::seeded(rng::derive_seed(cfg.seed, &["tree", &t.to_string()]));
            let rows: Vec<usize> = if cfg.bootstrap {
                by_class
                    .iter()
                    .flat_map(|members| {
                        (0..members.len())
                            .map(|_| members[rng.random_range(0..members.len())])
                            .collect::<Vec<_>>()
                    })
                    .collect()
            } else {
                (0..x.len()).collect()
            };
            builder.build(rows, &mut rng)
        })
        .collect();
    Ok(Forest {
        trees,
        classes,
        dim,
    })
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    mtry: usize,
    max_depth: usize,
    min_split: usize,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl TreeBuilder<'_> {
    fn build(&self, rows: Vec<usize>, rng: &mut Rng) -> Tree {
        let mut nodes = Vec::new();
        self.grow(rows, 0, rng, &mut nodes);
        Tree { nodes }
    }

    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        counts
    }

    fn grow(&self, rows: Vec<usize>, depth: usize, rng: &mut Rng, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let counts = self.counts(&rows);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.max_depth > 0 && depth >= self.max_depth;
        if pure || depth_capped || rows.len() < self.min_split {
            nodes.push(Node::Leaf { counts });
            return id;
        }
        let Some(split) = self.best_split(&rows, rng) else {
            nodes.push(Node::Leaf { counts });
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x[r][split.feature] <= split.threshold);
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());
        nodes.push(Node::Leaf { counts: Vec::new() }); // placeholder
        let left = self.grow(left_rows, depth + 1, rng, nodes);
        let right = self.grow(right_rows, depth + 1, rng, nodes);
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    /// Best Gini split over a random feature subset. When none of the sampled
    /// features can separate the rows, the remaining features are tried in
    /// the same shuffled order.
    fn best_split(&self, rows: &[usize], rng: &mut Rng) -> Option<SplitChoice> {
        let dim = self.x[0].len();
        let mut features: Vec<usize> = (0..dim).collect();
        features.shuffle(rng);
        let mut best: Option<SplitChoice> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x[r][f], self.y[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[sorted.len() - 1].0 {
                continue;
            }
            let total = sorted.len();
            let mut left = vec![0usize; self.n_classes];
            let mut right = vec![0usize; self.n_classes];
            for &(_, c) in &sorted {
                right[c] += 1;
            }
            for i in 0..total - 1 {
                let c = sorted[i].1;
                left[c] += 1;
                right[c] -= 1;
                let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
                if lo == hi {
                    continue;
                }
                let nl = i + 1;
                let nr = total - nl;
                let impurity = (nl as f64 * gini_unchecked(&left, nl)
                    + nr as f64 * gini_unchecked(&right, nr))
                    / total as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid > lo && mid < hi { mid } else { lo };
                    best = Some(SplitChoice {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

impl Forest {
    fn check_dim(&self, x: &[Vec<f64>]) -> Result<()> {
        if let Some(r) = x.iter().find(|r| r.len() != self.dim) {
            return Err(input(format!(
                "forest expects {} features, got {}",
                self.dim,
                r.len()
            )));
        }
        Ok(())
    }

    /// Per-class tree vote counts for one sample.
    pub fn votes(&self, x: &[f64]) -> Vec<usize> {
        let mut votes = vec![0; self.classes.len()];
        for t in &self.trees {
            votes[t.predict_index(x)] += 1;
        }
        votes
    }

    /// Fraction of trees voting for each class.
    pub fn vote_fractions(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        let n = self.trees.len() as f64;
        Ok(x.iter()
            .map(|r| self.votes(r).iter().map(|&v| v as f64 / n).collect())
            .collect())
    }

    /// Fraction of trees voting for `label` (0 when the label is unknown).
    pub fn class_probability(&self, x: &[Vec<f64>], label: usize) -> Result<Vec<f64>> {
        let fractions = self.vote_fractions(x)?;
        Ok(match self.classes.binary_search(&label) {
            Ok(c) => fractions.iter().map(|f| f[c]).collect(),
            Err(_) => vec![0.0; x.len()],
        })
    }
}

/// Majority vote across trees; ties go to the lower class label.
pub fn predict_forest(forest: &Forest, x: &[Vec<f64>]) -> Result<Vec<usize>> {
    forest.check_dim(x)?;
    Ok(x.iter()
        .map(|r| forest.classes[argmax_low(&forest.votes(r))])
        .collect())
}
