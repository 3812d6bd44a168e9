//! Named stage construction for declarative pipelines.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::attributes::SpeakerMix;
use crate::diversity::UserConvoDiversity;
use crate::error::{Error, Result};
use crate::fighting_words::{FightingWords, FwConfig, Prior};
use crate::filter::parse_filter;
use crate::hyperconvo::HyperConvo;
use crate::ml::{Classifier, Forecaster, Level, LinearConfig, VocabConfig};
use crate::politeness::{PolitenessLexicon, PolitenessStrategies};
use crate::text::{MergeConsecutive, TextCleaner, Tokenizer};
use crate::transform::{Pipeline, Transformer};

pub const STAGE_NAMES: [&str; 10] = [
    "text_clean",
    "tokenize",
    "merge_consecutive",
    "politeness",
    "hyperconvo",
    "diversity",
    "fighting_words",
    "mixed_attribute",
    "classifier",
    "forecaster",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub name: String,
    #[serde(default = "empty_params")]
    pub params: serde_json::Value,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl StageSpec {
    pub fn new(name: impl Into<String>) -> Self {
        StageSpec {
            name: name.into(),
            params: empty_params(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextCleanParams {
    #[serde(default)]
    overwrite_text: bool,
    #[serde(default = "yes")]
    tokenize: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolitenessParams {
    #[serde(default)]
    lexicon: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiversityParams {
    #[serde(default = "one")]
    min_tokens_per_convo: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FightingWordsParams {
    class1: String,
    class2: String,
    #[serde(default = "ten")]
    top_k: usize,
    #[serde(default = "one")]
    ngram_max: usize,
    #[serde(default = "one_u64")]
    min_count: u64,
    #[serde(default = "default_alpha")]
    alpha: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixParams {
    #[serde(default = "gender")]
    speaker_key: String,
    #[serde(default = "m_and_f")]
    required_values: Vec<String>,
    #[serde(default = "mixed")]
    output_key: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierParams {
    level: Level,
    label_key: String,
    #[serde(default)]
    vocab: VocabConfig,
    #[serde(default)]
    model: LinearConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ForecasterParams {
    label_key: String,
    #[serde(default)]
    vocab: VocabConfig,
    #[serde(default = "Forecaster::default_config")]
    model: LinearConfig,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn one_u64() -> u64 {
    1
}
fn ten() -> usize {
    10
}
fn default_alpha() -> f64 {
    0.01
}
fn gender() -> String {
    "gender".into()
}
fn m_and_f() -> Vec<String> {
    vec!["M".into(), "F".into()]
}
fn mixed() -> String {
    "mixed".into()
}

fn params<T: DeserializeOwned>(spec: &StageSpec) -> Result<T> {
    let value = if spec.params.is_null() {
        empty_params()
    } else {
        spec.params.clone()
    };
    serde_json::from_value(value)
        .map_err(|e| Error::InvalidConfig(format!("stage {:?}: {e}", spec.name)))
}

/// Build the transformer named by `spec`. Relative paths in parameters
/// resolve against `base_dir`.
pub fn build_stage(spec: &StageSpec, base_dir: &Path) -> Result<Box<dyn Transformer>> {
    Ok(match spec.name.as_str() {
        "text_clean" => {
            let p: TextCleanParams = params(spec)?;
            Box::new(TextCleaner {
                overwrite_text: p.overwrite_text,
                tokenize: p.tokenize,
            })
        }
        "tokenize" => {
            params::<NoParams>(spec)?;
            Box::new(Tokenizer)
        }
        "merge_consecutive" => {
            params::<NoParams>(spec)?;
            Box::new(MergeConsecutive)
        }
        "politeness" => {
            let p: PolitenessParams = params(spec)?;
            match p.lexicon {
                Some(path) => Box::new(PolitenessStrategies::new(PolitenessLexicon::from_file(
                    base_dir.join(path),
                )?)),
                None => Box::new(PolitenessStrategies::default()),
            }
        }
        "hyperconvo" => {
            params::<NoParams>(spec)?;
            Box::new(HyperConvo)
        }
        "diversity" => {
            let p: DiversityParams = params(spec)?;
            Box::new(UserConvoDiversity {
                min_tokens_per_convo: p.min_tokens_per_convo,
                ..UserConvoDiversity::default()
            })
        }
        "fighting_words" => {
            let p: FightingWordsParams = params(spec)?;
            let config = FwConfig {
                ngram_max: p.ngram_max,
                min_count: p.min_count,
                prior: Prior::Uniform(p.alpha),
            };
            Box::new(
                FightingWords::new(parse_filter(&p.class1)?, parse_filter(&p.class2)?)
                    .with_config(config, p.top_k),
            )
        }
        "mixed_attribute" => {
            let p: MixParams = params(spec)?;
            Box::new(SpeakerMix {
                speaker_key: p.speaker_key,
                required_values: p.required_values,
                output_key: p.output_key,
            })
        }
        "classifier" => {
            let p: ClassifierParams = params(spec)?;
            Box::new(Classifier::new(p.level, p.label_key).with_config(p.vocab, p.model))
        }
        "forecaster" => {
            let p: ForecasterParams = params(spec)?;
            Box::new(Forecaster::new(p.label_key).with_config(p.vocab, p.model))
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown stage {other:?}; known stages: {}",
                STAGE_NAMES.join(", ")
            )))
        }
    })
}

/// Build every stage, naming the offending stage index on failure.
pub fn build_pipeline(specs: &[StageSpec], base_dir: &Path) -> Result<Pipeline> {
    let stages = specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            build_stage(s, base_dir).map_err(|e| Error::Stage {
                stage: i,
                name: s.name.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Pipeline::new(stages)
}
