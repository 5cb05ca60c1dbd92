use serde::{Deserialize, Serialize};

use crate::baselines::{
    grnn_predict, pls_fit, pls_predict, variant_config, GrnnModel, Method, PlsModel,
};
use crate::classifier::ClassifierConfig;
use crate::ctes::{synthesize_for, train_ctes, CtesModel, TrainConfig};
use crate::datagen::PairedDataset;
use crate::ensemble::{ensemble_synthesize, train_se_ctes, EnsembleConfig, EnsembleModel};
use crate::error::Result;
use crate::rng::Rng;

/// Settings shared by every method; variants override only `beta` and the
/// ensemble shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSettings {
    pub train: TrainConfig,
    pub k: usize,
    pub h: usize,
    pub inverse_classifier: ClassifierConfig,
    /// `None` uses `min(m, 2)`.
    pub pls_components: Option<usize>,
    /// `None` uses the median pairwise characteristic distance.
    pub grnn_bandwidth: Option<f64>,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            k: 5,
            h: 2,
            inverse_classifier: ClassifierConfig::default(),
            pls_components: None,
            grnn_bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Pls(PlsModel),
    Grnn(GrnnModel),
    Ctes(CtesModel),
    Ensemble(EnsembleModel),
}

/// Trainer settings for an adversarial variant with the given seed.
pub fn variant_train_config(
    method: Method,
    settings: &MethodSettings,
    seed: u64,
) -> Result<TrainConfig> {
    let v = variant_config(method.name())?;
    Ok(TrainConfig {
        beta: v.beta,
        seed,
        ..settings.train.clone()
    })
}

pub fn fit_method(
    method: Method,
    settings: &MethodSettings,
    train: &PairedDataset,
    seed: u64,
) -> Result<FittedModel> {
    Ok(match method {
        Method::Pls => {
            let components = settings.pls_components.unwrap_or_else(|| {
                train
                    .char_dim()
                    .min(2)
                    .min(train.len().saturating_sub(1))
                    .max(1)
            });
            FittedModel::Pls(pls_fit(
                &train.characteristics,
                &train.expressions,
                components,
            )?)
        }
        Method::Grnn => FittedModel::Grnn(GrnnModel::fit(
            &train.characteristics,
            &train.expressions,
            settings.grnn_bandwidth,
        )?),
        Method::Cgan | Method::GanCls | Method::Ctes => FittedModel::Ctes(train_ctes(
            train,
            &variant_train_config(method, settings, seed)?,
        )?),
        Method::SeCtes => FittedModel::Ensemble(train_se_ctes(
            train,
            &EnsembleConfig {
                k: settings.k,
                h: settings.h,
                train: TrainConfig {
                    beta: variant_config(method.name())?.beta,
                    ..settings.train.clone()
                },
                classifier: settings.inverse_classifier.clone(),
                fakes_per_member: None,
                seed,
            },
        )?),
    })
}

impl FittedModel {
    pub fn method_label(&self) -> &'static str {
        match self {
            FittedModel::Pls(_) => "pls",
            FittedModel::Grnn(_) => "grnn",
            FittedModel::Ctes(_) => "ctes",
            FittedModel::Ensemble(_) => "se-ctes",
        }
    }

    /// `(characteristic, expression)` dimensions the model was fitted on.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            FittedModel::Pls(m) => (m.x_mean.len(), m.y_mean.len()),
            FittedModel::Grnn(m) => (m.inputs[0].len(), m.targets[0].len()),
            FittedModel::Ctes(m) => (m.char_dim(), m.expr_dim()),
            FittedModel::Ensemble(e) => e
                .models
                .iter()
                .flatten()
                .next()
                .map(|m| (m.char_dim(), m.expr_dim()))
                .unwrap_or((0, 0)),
        }
    }

    /// One expression per characteristic row. The regressors repeat their
    /// deterministic prediction; ensemble rows are grouped by member.
    pub fn synthesize_for(&self, xs: &[Vec<f64>], rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        match self {
            FittedModel::Pls(m) => xs.iter().map(|x| pls_predict(m, x)).collect(),
            FittedModel::Grnn(m) => xs.iter().map(|x| grnn_predict(m, x)).collect(),
            FittedModel::Ctes(m) => synthesize_for(m, xs, rng, m.config.jitter),
            FittedModel::Ensemble(e) => ensemble_synthesize(e, xs, xs.len(), rng),
        }
    }
}
