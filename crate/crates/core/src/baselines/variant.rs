use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Every method the harness can benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pls,
    Grnn,
    Cgan,
    GanCls,
    Ctes,
    SeCtes,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Pls,
        Method::Grnn,
        Method::Cgan,
        Method::GanCls,
        Method::Ctes,
        Method::SeCtes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pls => "pls",
            Method::Grnn => "grnn",
            Method::Cgan => "cgan",
            Method::GanCls => "gan-cls",
            Method::Ctes => "ctes",
            Method::SeCtes => "se-ctes",
        }
    }

    /// True for the methods trained by the adversarial trainer.
    pub fn is_adversarial(self) -> bool {
        !matches!(self, Method::Pls | Method::Grnn)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                config(format!(
                    "unknown method `{s}` (expected pls, grnn, cgan, gan-cls, ctes or se-ctes)"
                ))
            })
    }
}

/// Trainer settings that distinguish the adversarial variants. Everything
/// else is shared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantSettings {
    pub beta: f64,
    /// `None` trains a single model.
    pub ensemble: Option<(usize, usize)>,
}

pub fn variant_config(name: &str) -> Result<VariantSettings> {
    let method: Method = name.parse()?;
    match method {
        Method::Cgan => Ok(VariantSettings {
            beta: 1.0,
            ensemble: None,
        }),
        Method::GanCls => Ok(VariantSettings {
            beta: 0.5,
            ensemble: None,
        }),
        Method::Ctes => Ok(VariantSettings {
            beta: 0.9,
            ensemble: None,
        }),
        Method::SeCtes => Ok(VariantSettings {
            beta: 0.9,
            ensemble: Some((5, 2)),
        }),
        Method::Pls | Method::Grnn => {
            Err(config(format!("`{name}` is not an adversarial variant")))
        }
    }
}
