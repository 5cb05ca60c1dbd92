use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{FittedModel, MethodSettings};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A fitted method with the settings and seed that produced it. Floats are
/// written in shortest round-trip form, so loading restores every bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub method: String,
    pub seed: u64,
    pub settings: MethodSettings,
    pub model: FittedModel,
}

impl ModelFile {
    pub fn new(method: &str, seed: u64, settings: MethodSettings, model: FittedModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            method: method.to_string(),
            seed,
            settings,
            model,
        }
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

pub fn model_to_string(file: &ModelFile) -> Result<String> {
    serde_json::to_string_pretty(file).map_err(parse_error)
}

pub fn model_from_str(text: &str) -> Result<ModelFile> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_error)?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Parse {
            line: 1,
            column: 1,
            message: "missing numeric `format_version`".into(),
        })?;
    if found != u64::from(MODEL_FORMAT_VERSION) {
        return Err(Error::Version {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: MODEL_FORMAT_VERSION,
        });
    }
    serde_json::from_str(text).map_err(parse_error)
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(file)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    model_from_str(&std::fs::read_to_string(path)?)
}
