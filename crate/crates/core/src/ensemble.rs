//! Selective ensembling: train `k` models, score each by inverse validation
//! against its peers, keep the best `h` and synthesize from their uniform
//! mixture.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{fit_classifier, ClassifierConfig};
use crate::ctes::{synthesize_for, train_ctes, CtesModel, TrainConfig};
use crate::datagen::PairedDataset;
use crate::error::{config, input, Error, Result};
use crate::rng::{self, derive_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub k: usize,
    pub h: usize,
    pub train: TrainConfig,
    pub classifier: ClassifierConfig,
    /// Fake rows per member for scoring; `None` means one per training row.
    pub fakes_per_member: Option<usize>,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            k: 5,
            h: 2,
            train: TrainConfig::default(),
            classifier: ClassifierConfig::default(),
            fakes_per_member: None,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(config("h must be at least 1"));
        }
        if self.k <= 2 * self.h {
            return Err(config(format!(
                "k must be larger than 2h (k = {}, h = {})",
                self.k, self.h
            )));
        }
        if self.fakes_per_member == Some(0) {
            return Err(config("fakes_per_member must be positive"));
        }
        self.train.validate()?;
        self.classifier.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    /// `None` marks a member whose training diverged.
    pub models: Vec<Option<CtesModel>>,
    pub scores: Vec<f64>,
    /// Ascending member indices of the kept models.
    pub selected: Vec<usize>,
    pub diagnostics: Vec<Option<String>>,
}

impl EnsembleModel {
    pub fn selected_models(&self) -> Vec<&CtesModel> {
        self.selected
            .iter()
            .filter_map(|&i| self.models.get(i).and_then(Option::as_ref))
            .collect()
    }
}

/// Indices of the `h` largest scores, ties toward the lower index, sorted
/// ascending.
pub fn select_top_h(scores: &[f64], h: usize) -> Result<Vec<usize>> {
    if h > scores.len() {
        return Err(config(format!(
            "cannot keep {h} of {} models",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut top = order[..h].to_vec();
    top.sort_unstable();
    Ok(top)
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// For each member `i`, fits a classifier on the other members' fakes
/// (category 0) against `real` (category 1) and returns the fraction of
/// member `i`'s fakes assigned to category 0.
///
/// Peer fakes are sorted before fitting and every classifier uses the same
/// seed, so the scores do not depend on the order members are presented in.
pub fn inverse_validation_scores(
    fake_batches: &[Vec<Vec<f64>>],
    real: &[Vec<f64>],
    classifier: &ClassifierConfig,
    image_shape: Option<(usize, usize)>,
    seed: u64,
) -> Result<Vec<f64>> {
    if fake_batches.len() < 2 {
        return Err(Error::Ensemble(
            "inverse validation needs at least two models".into(),
        ));
    }
    if real.is_empty() || fake_batches.iter().any(Vec::is_empty) {
        return Err(input("inverse validation batches must be non-empty"));
    }
    let dim = real[0].len();
    if real
        .iter()
        .chain(fake_batches.iter().flatten())
        .any(|r| r.len() != dim)
    {
        return Err(input("all expressions must share one dimension"));
    }
    let clf_cfg = classifier.with_seed(derive_seed(seed, &["inverse-classifier"]));
    (0..fake_batches.len())
        .into_par_iter()
        .map(|i| {
            let mut peers: Vec<Vec<f64>> = fake_batches
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .flat_map(|(_, b)| b.iter().cloned())
                .collect();
            peers.sort_by(|a, b| lexicographic(a, b));
            let labels: Vec<usize> = std::iter::repeat_n(0, peers.len())
                .chain(std::iter::repeat_n(1, real.len()))
                .collect();
            peers.extend(real.iter().cloned());
            let clf = fit_classifier(&clf_cfg, &peers, &labels, image_shape)?;
            let predicted = clf.predict(&fake_batches[i])?;
            Ok(predicted.iter().filter(|&&c| c == 0).count() as f64 / predicted.len() as f64)
        })
        .collect()
}

/// Trains `k` members with derived seeds, scores them and keeps the top `h`.
/// A diverged member scores 0 and is never selected.
pub fn train_se_ctes(dataset: &PairedDataset, cfg: &EnsembleConfig) -> Result<EnsembleModel> {
    cfg.validate()?;
    let outcomes: Vec<Result<CtesModel>> = (0..cfg.k)
        .into_par_iter()
        .map(|i| {
            let member = TrainConfig {
                seed: derive_seed(cfg.seed, &["member", &i.to_string()]),
                ..cfg.train.clone()
            };
            train_ctes(dataset, &member)
        })
        .collect();
    let mut models = Vec::with_capacity(cfg.k);
    let mut diagnostics = Vec::with_capacity(cfg.k);
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(m) => {
                models.push(Some(m));
                diagnostics.push(None);
            }
            Err(e @ (Error::Diverged { .. } | Error::TrainingFault(_))) => {
                log::warn!("ensemble member {i} failed: {e}");
                models.push(None);
                diagnostics.push(Some(e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    let finished: Vec<usize> = (0..cfg.k).filter(|&i| models[i].is_some()).collect();
    if finished.len() < cfg.h.max(2) {
        return Err(Error::Ensemble(format!(
            "only {} of {} members finished training, need at least {}",
            finished.len(),
            cfg.k,
            cfg.h.max(2)
        )));
    }

    let count = cfg.fakes_per_member.unwrap_or(dataset.len());
    let xs: Vec<Vec<f64>> = (0..count)
        .map(|r| dataset.characteristics[r % dataset.len()].clone())
        .collect();
    let fakes: Vec<Vec<Vec<f64>>> = finished
        .par_iter()
        .map(|&i| {
            let model = models[i].as_ref().expect("finished member");
            let mut r = rng::seeded(derive_seed(cfg.seed, &["fakes", &i.to_string()]));
            synthesize_for(model, &xs, &mut r, model.config.jitter)
        })
        .collect::<Result<_>>()?;
    let finished_scores = inverse_validation_scores(
        &fakes,
        &dataset.expressions,
        &cfg.classifier,
        dataset.image_shape,
        cfg.seed,
    )?;
    let mut scores = vec![0.0; cfg.k];
    for (&i, &s) in finished.iter().zip(&finished_scores) {
        scores[i] = s;
    }
    let selected: Vec<usize> = select_top_h(&finished_scores, cfg.h)?
        .into_iter()
        .map(|j| finished[j])
        .collect();
    log::info!("ensemble scores {scores:?}, selected {selected:?}");
    Ok(EnsembleModel {
        models,
        scores,
        selected,
        diagnostics,
    })
}

/// Uniform mixture over the selected members: output row `r` comes from
/// selected member `r mod h` conditioned on `xs[r mod |xs|]`. Rows are
/// returned grouped by member, so each member contributes `floor(total / h)`
/// rows and the first `total mod h` members one more.
pub fn ensemble_synthesize(
    ens: &EnsembleModel,
    xs: &[Vec<f64>],
    total: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    let members = ens.selected_models();
    if members.is_empty() {
        return Err(Error::Ensemble(
            "no selected members to synthesize from".into(),
        ));
    }
    if members.len() != ens.selected.len() {
        return Err(Error::Ensemble(
            "a selected member has no trained model".into(),
        ));
    }
    if xs.is_empty() {
        return Err(input("need at least one characteristic vector"));
    }
    let h = members.len();
    if total < h {
        return Err(input(format!(
            "total {total} is smaller than the {h} selected members"
        )));
    }
    let mut out = Vec::with_capacity(total);
    for (t, model) in members.iter().enumerate() {
        let rows: Vec<Vec<f64>> = (t..total)
            .step_by(h)
            .map(|r| xs[r % xs.len()].clone())
            .collect();
        out.extend(synthesize_for(model, &rows, rng, model.config.jitter)?);
    }
    Ok(out)
}
