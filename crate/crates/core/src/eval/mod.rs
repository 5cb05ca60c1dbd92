//! Classification-based validation: identify one group from synthesized
//! expressions, the A1/A2 accuracies, the risk-difference evaluation on
//! tabular data with binary outcomes, and multi-trial aggregation.

mod methods;

pub use methods::{fit_method, variant_train_config, FittedModel, MethodSettings};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::baselines::Method;
use crate::classifier::{fit_classifier, ClassifierConfig};
use crate::datagen::PairedDataset;
use crate::error::{config, input, Error, Result};
use crate::forest::{fit_forest, ForestConfig};
use crate::rng::{self, derive_seed};

/// Anything that can be fitted on training pairs and then produce one
/// expression per characteristic row.
pub trait Synthesizer: Sync {
    fn name(&self) -> String;
    fn fit_synthesize(
        &self,
        train: &PairedDataset,
        xs: &[Vec<f64>],
        seed: u64,
    ) -> Result<Vec<Vec<f64>>>;
}

/// A benchmark method with its settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRunner {
    pub method: Method,
    pub settings: MethodSettings,
}

impl Synthesizer for MethodRunner {
    fn name(&self) -> String {
        self.method.name().to_string()
    }

    fn fit_synthesize(
        &self,
        train: &PairedDataset,
        xs: &[Vec<f64>],
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        let model = fit_method(
            self.method,
            &self.settings,
            train,
            derive_seed(seed, &["fit"]),
        )?;
        let mut r = rng::seeded(derive_seed(seed, &["synthesize"]));
        model.synthesize_for(xs, &mut r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// `A1 = TP / (TP + FP)` and `A2 = TN / (TN + FN)`.
pub fn compute_a_metrics(c: &ConfusionCounts) -> Result<(f64, f64)> {
    if c.tp + c.fp == 0 {
        return Err(Error::UndefinedMetric(
            "A1 has an empty denominator (TP + FP = 0)".into(),
        ));
    }
    if c.tn + c.fn_ == 0 {
        return Err(Error::UndefinedMetric(
            "A2 has an empty denominator (TN + FN = 0)".into(),
        ));
    }
    Ok((
        c.tp as f64 / (c.tp + c.fp) as f64,
        c.tn as f64 / (c.tn + c.fn_) as f64,
    ))
}

/// Row indices of each group's halves; entry `g - 1` belongs to group `g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSplit {
    pub train: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
}

/// Seeded 50/50 split of every group; an odd extra row goes to training.
/// Each half keeps ascending row order.
pub fn split_train_test(dataset: &PairedDataset, seed: u64) -> Result<GroupSplit> {
    let mut train = Vec::with_capacity(dataset.group_count);
    let mut test = Vec::with_capacity(dataset.group_count);
    for g in 1..=dataset.group_count {
        let mut rows = dataset.group_indices(g);
        if rows.len() < 2 {
            return Err(input(format!(
                "group {g} has {} rows, need at least 2",
                rows.len()
            )));
        }
        let mut r = rng::seeded(derive_seed(seed, &["split", &g.to_string()]));
        rows.shuffle(&mut r);
        let cut = rows.len().div_ceil(2);
        let mut a = rows[..cut].to_vec();
        let mut b = rows[cut..].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        train.push(a);
        test.push(b);
    }
    Ok(GroupSplit { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub classifier: ClassifierConfig,
    /// Independent fits whose synthesized batches are merged per trial.
    pub replicates: usize,
    /// Subsample merged replicates back to the group size.
    pub subsample_replicates: bool,
    /// Forest used by the risk-difference evaluation.
    pub risk_forest: ForestConfig,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            classifier: ClassifierConfig::default(),
            replicates: 1,
            subsample_replicates: true,
            risk_forest: ForestConfig::default(),
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(config("replicates must be at least 1"));
        }
        self.classifier.validate()?;
        self.risk_forest.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub method: String,
    pub sigma: Option<f64>,
    pub group: usize,
    pub trial: usize,
    pub confusion: ConfusionCounts,
    pub a1: f64,
    pub a2: f64,
}

fn synthesize_group(
    dataset: &PairedDataset,
    group: usize,
    synth: &dyn Synthesizer,
    settings: &EvalSettings,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let train = dataset.without_group(group);
    let xs: Vec<Vec<f64>> = dataset
        .group_indices(group)
        .iter()
        .map(|&i| dataset.characteristics[i].clone())
        .collect();
    let mut merged = Vec::with_capacity(xs.len() * settings.replicates);
    for rep in 0..settings.replicates {
        let batch = synth.fit_synthesize(
            &train,
            &xs,
            derive_seed(seed, &["replicate", &rep.to_string()]),
        )?;
        if batch.len() != xs.len() {
            return Err(input(format!(
                "{} returned {} rows for {} characteristics",
                synth.name(),
                batch.len(),
                xs.len()
            )));
        }
        merged.extend(batch);
    }
    if settings.replicates > 1 && settings.subsample_replicates {
        let mut r = rng::seeded(derive_seed(seed, &["subsample"]));
        let mut keep = index::sample(&mut r, merged.len(), xs.len()).into_vec();
        keep.sort_unstable();
        merged = keep.into_iter().map(|i| merged[i].clone()).collect();
    }
    Ok(merged)
}

/// Fits `synth` on every group but `group`, synthesizes that group's
/// expressions from its characteristics, trains the validation classifier
/// on the synthesized rows (labelled `group`) plus the other groups'
/// training halves, and classifies all of the group's real rows together
/// with the other groups' test halves.
pub fn identify_group_experiment(
    dataset: &PairedDataset,
    group: usize,
    synth: &dyn Synthesizer,
    settings: &EvalSettings,
    seed: u64,
) -> Result<ValidationReport> {
    settings.validate()?;
    if dataset.group_count < 2 {
        return Err(input("need at least two groups"));
    }
    if group == 0 || group > dataset.group_count {
        return Err(input(format!(
            "group {group} outside 1..={}",
            dataset.group_count
        )));
    }
    let split = split_train_test(dataset, derive_seed(seed, &["split"]))?;
    let fakes = synthesize_group(dataset, group, synth, settings, seed)?;

    let mut features = fakes;
    let mut labels = vec![group; features.len()];
    for g in (1..=dataset.group_count).filter(|&g| g != group) {
        for &i in &split.train[g - 1] {
            features.push(dataset.expressions[i].clone());
            labels.push(g);
        }
    }
    let clf_cfg = settings
        .classifier
        .with_seed(derive_seed(seed, &["classifier"]));
    let clf = fit_classifier(&clf_cfg, &features, &labels, dataset.image_shape)?;

    let own: Vec<Vec<f64>> = dataset
        .group_indices(group)
        .iter()
        .map(|&i| dataset.expressions[i].clone())
        .collect();
    let others: Vec<Vec<f64>> = (1..=dataset.group_count)
        .filter(|&g| g != group)
        .flat_map(|g| {
            split.test[g - 1]
                .iter()
                .map(|&i| dataset.expressions[i].clone())
        })
        .collect();
    let own_pred = clf.predict(&own)?;
    let other_pred = clf.predict(&others)?;
    let tp = own_pred.iter().filter(|&&p| p == group).count();
    let fn_ = other_pred.iter().filter(|&&p| p == group).count();
    let confusion = ConfusionCounts {
        tp,
        fp: own.len() - tp,
        fn_,
        tn: others.len() - fn_,
    };
    let (a1, a2) = compute_a_metrics(&confusion)?;
    Ok(ValidationReport {
        method: synth.name(),
        sigma: None,
        group,
        trial: 0,
        confusion,
        a1,
        a2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEvalReport {
    pub method: String,
    pub group: usize,
    pub participants: usize,
    pub mean_abs_diff: f64,
    pub std_abs_diff: f64,
}

fn joined(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().chain(y).copied().collect()
}

/// Mean and sample standard deviation of `|r_a - r_s|` over the group's
/// participants. `r_s` comes from a forest on all actual participants;
/// `r_a` from the same forest settings after replacing the group's
/// expressions with synthesized ones. Both forests score the group's actual
/// `(x, y)` rows and report the vote fraction for outcome 1.
pub fn risk_difference_eval(
    dataset: &PairedDataset,
    group: usize,
    synth: &dyn Synthesizer,
    settings: &EvalSettings,
    seed: u64,
) -> Result<RiskEvalReport> {
    settings.validate()?;
    let outcomes = dataset
        .outcomes
        .as_ref()
        .ok_or_else(|| input("risk evaluation needs a binary outcome column"))?;
    let rows = dataset.group_indices(group);
    if rows.is_empty() {
        return Err(input(format!("group {group} has no rows")));
    }
    let fakes = synthesize_group(dataset, group, synth, settings, seed)?;
    let forest_cfg = ForestConfig {
        seed: derive_seed(seed, &["risk-forest"]),
        ..settings.risk_forest.clone()
    };
    let labels: Vec<usize> = outcomes.iter().map(|&o| o as usize).collect();
    let actual: Vec<Vec<f64>> = (0..dataset.len())
        .map(|i| joined(&dataset.characteristics[i], &dataset.expressions[i]))
        .collect();
    let mut replaced = actual.clone();
    for (&i, y) in rows.iter().zip(&fakes) {
        replaced[i] = joined(&dataset.characteristics[i], y);
    }
    let probe: Vec<Vec<f64>> = rows.iter().map(|&i| actual[i].clone()).collect();
    let r_s = fit_forest(&actual, &labels, &forest_cfg)?.class_probability(&probe, 1)?;
    let r_a = fit_forest(&replaced, &labels, &forest_cfg)?.class_probability(&probe, 1)?;
    let diffs: Vec<f64> = r_a.iter().zip(&r_s).map(|(a, s)| (a - s).abs()).collect();
    let (mean, std) = mean_and_sample_std(&diffs);
    Ok(RiskEvalReport {
        method: synth.name(),
        group,
        participants: diffs.len(),
        mean_abs_diff: mean,
        std_abs_diff: std,
    })
}

/// Mean and `n - 1` standard deviation; the deviation is 0 for one value.
pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One aggregated row per (method, sigma, group).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub sigma: Option<f64>,
    pub group: usize,
    pub trials: usize,
    pub a1: f64,
    pub a1_std: f64,
    pub a2: f64,
    pub a2_std: f64,
    /// Set when only one report was available, so both deviations are 0.
    pub single_report: bool,
}

/// Groups reports by (method, sigma, group) in first-appearance order.
pub fn aggregate_trials(reports: &[ValidationReport]) -> Result<Vec<SummaryRow>> {
    if reports.is_empty() {
        return Err(input("nothing to aggregate"));
    }
    let mut keys: Vec<(String, Option<f64>, usize)> = Vec::new();
    for r in reports {
        let key = (r.method.clone(), r.sigma, r.group);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    Ok(keys
        .into_iter()
        .map(|(method, sigma, group)| {
            let members: Vec<&ValidationReport> = reports
                .iter()
                .filter(|r| r.method == method && r.sigma == sigma && r.group == group)
                .collect();
            let a1: Vec<f64> = members.iter().map(|r| r.a1).collect();
            let a2: Vec<f64> = members.iter().map(|r| r.a2).collect();
            let (a1_mean, a1_std) = mean_and_sample_std(&a1);
            let (a2_mean, a2_std) = mean_and_sample_std(&a2);
            SummaryRow {
                method,
                sigma,
                group,
                trials: members.len(),
                a1: a1_mean,
                a1_std,
                a2: a2_mean,
                a2_std,
                single_report: members.len() == 1,
            }
        })
        .collect())
}
