use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ml::{LinearConfig, LinearModel, Vocabulary};

pub const MODEL_FORMAT_VERSION: &str = "1.0";

/// On-disk form of a trained bag-of-words model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: String,
    pub vocabulary: Vocabulary,
    pub weights: Vec<f64>,
    pub config: LinearConfig,
}

impl ModelFile {
    pub fn new(vocabulary: &Vocabulary, model: &LinearModel<f64>) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION.to_owned(),
            vocabulary: vocabulary.clone(),
            weights: model.weights.clone(),
            config: model.config.clone(),
        }
    }

    pub fn into_parts(self) -> Result<(Vocabulary, LinearModel<f64>)> {
        if self.format_version.split('.').next() != MODEL_FORMAT_VERSION.split('.').next() {
            return Err(Error::UnsupportedVersion(self.format_version));
        }
        if self.weights.len() != self.vocabulary.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.vocabulary.len() + 1,
                found: self.weights.len(),
            });
        }
        let model = LinearModel {
            weights: self.weights,
            config: self.config,
            loss_trace: Vec::new(),
        };
        Ok((self.vocabulary, model))
    }
}

pub fn save_model(
    path: impl AsRef<Path>,
    vocabulary: &Vocabulary,
    model: &LinearModel<f64>,
) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&ModelFile::new(vocabulary, model))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(Vocabulary, LinearModel<f64>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str::<ModelFile>(&text)?.into_parts()
}
