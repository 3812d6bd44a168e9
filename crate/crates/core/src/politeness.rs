//! Lexical politeness-strategy counts per utterance.
//!
//! The strategy inventory, its order, and every marker phrase come from a
//! versioned lexicon file (`data/politeness_lexicon.txt`, compiled in).

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::meta::MetaValue;
use crate::model::{Corpus, Utterance, UtteranceRef};
use crate::text::{annotated_tokens, is_punct_token};
use crate::transform::{select_all, SummaryTable, Transformer, UtterancePredicate};

pub const POLITENESS_KEY: &str = "politeness_strategies";

pub const BUILTIN_LEXICON: &str = include_str!("../data/politeness_lexicon.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    Anywhere,
    /// At the first word of any sentence.
    Initial,
    /// At the first word of the utterance.
    First,
    NonInitial,
}

impl MatchMode {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "anywhere" => MatchMode::Anywhere,
            "initial" => MatchMode::Initial,
            "first" => MatchMode::First,
            "non_initial" => MatchMode::NonInitial,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub name: String,
    pub mode: MatchMode,
    pub phrases: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolitenessLexicon {
    strategies: Vec<Strategy>,
}

impl PolitenessLexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON).expect("bundled lexicon parses")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: &str| Error::MalformedRecord {
            file: "politeness lexicon".into(),
            line: line as u64,
            reason: reason.into(),
        };
        let mut strategies: Vec<Strategy> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let (name, mode) = header
                    .split_once(' ')
                    .ok_or_else(|| bad(i + 1, "header needs a strategy name and a mode"))?;
                let mode = MatchMode::parse(mode.trim())
                    .ok_or_else(|| bad(i + 1, "unknown match mode"))?;
                if strategies.iter().any(|s| s.name == name) {
                    return Err(bad(i + 1, "duplicate strategy"));
                }
                strategies.push(Strategy {
                    name: name.to_owned(),
                    mode,
                    phrases: Vec::new(),
                });
            } else {
                let current = strategies
                    .last_mut()
                    .ok_or_else(|| bad(i + 1, "entry before any section header"))?;
                current.phrases.push(
                    line.to_lowercase()
                        .split_whitespace()
                        .map(str::to_owned)
                        .collect(),
                );
            }
        }
        if strategies.is_empty() {
            return Err(bad(0, "no strategies defined"));
        }
        Ok(PolitenessLexicon { strategies })
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.strategies.iter().map(|s| s.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    /// Count every strategy over tokenized sentences.
    pub fn extract(&self, sentences: &[Vec<String>]) -> PolitenessVector {
        let lowered: Vec<Vec<String>> = sentences
            .iter()
            .map(|s| s.iter().map(|t| t.to_lowercase()).collect())
            .collect();
        let first_word = |s: &[String]| s.iter().position(|t| !is_punct_token(t));
        let opening = lowered.iter().position(|s| first_word(s).is_some());

        let counts = self
            .strategies
            .iter()
            .map(|strategy| {
                let mut n = 0u64;
                for (si, sent) in lowered.iter().enumerate() {
                    let initial = first_word(sent);
                    for phrase in &strategy.phrases {
                        if phrase.is_empty() || phrase.len() > sent.len() {
                            continue;
                        }
                        for start in 0..=sent.len() - phrase.len() {
                            let at_initial = Some(start) == initial;
                            let eligible = match strategy.mode {
                                MatchMode::Anywhere => true,
                                MatchMode::Initial => at_initial,
                                MatchMode::First => at_initial && Some(si) == opening,
                                MatchMode::NonInitial => !at_initial,
                            };
                            if eligible && sent[start..start + phrase.len()] == phrase[..] {
                                n += 1;
                            }
                        }
                    }
                }
                (strategy.name.clone(), n)
            })
            .collect();
        PolitenessVector { counts }
    }

    pub fn zero_vector(&self) -> PolitenessVector {
        PolitenessVector {
            counts: self.names().map(|n| (n.to_owned(), 0)).collect(),
        }
    }
}

/// Strategy counts in lexicon order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolitenessVector {
    pub counts: Vec<(String, u64)>,
}

impl PolitenessVector {
    pub fn get(&self, name: &str) -> Option<u64> {
        self.counts.iter().find(|(n, _)| n == name).map(|(_, c)| *c)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn to_meta(&self) -> MetaValue {
        MetaValue::Map(
            self.counts
                .iter()
                .map(|(n, c)| (n.clone(), MetaValue::Int(*c as i64)))
                .collect(),
        )
    }
}

pub fn extract_strategies(
    lexicon: &PolitenessLexicon,
    utt: &Utterance,
) -> Result<PolitenessVector> {
    Ok(lexicon.extract(&annotated_tokens(utt)?))
}

fn stored_count(utt: &Utterance, strategy: &str) -> Result<f64> {
    utt.meta
        .get(POLITENESS_KEY)
        .and_then(MetaValue::as_map)
        .and_then(|m| m.get(strategy))
        .and_then(MetaValue::as_f64)
        .ok_or_else(|| Error::MissingAnnotation {
            key: POLITENESS_KEY.to_owned(),
            object: format!("utterance {:?}", utt.id),
        })
}

/// Mean count of every strategy over the selected utterances.
pub fn summarize_politeness(
    lexicon: &PolitenessLexicon,
    corpus: &Corpus,
    selector: &dyn Fn(&UtteranceRef<'_>) -> bool,
) -> Result<SummaryTable> {
    let selected: Vec<&Utterance> = corpus
        .utterance_refs()
        .filter(|r| selector(r))
        .map(|r| r.utt)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut table = SummaryTable::new("strategy", &["mean"]);
    for name in lexicon.names() {
        let total = selected
            .iter()
            .map(|u| stored_count(u, name))
            .sum::<Result<f64>>()?;
        table.push_row(name, vec![(total / selected.len() as f64).into()]);
    }
    Ok(table)
}

/// Annotates every tokenized utterance with its strategy counts.
#[derive(Clone)]
pub struct PolitenessStrategies {
    lexicon: Arc<PolitenessLexicon>,
    selector: UtterancePredicate,
}

impl Default for PolitenessStrategies {
    fn default() -> Self {
        Self::new(PolitenessLexicon::builtin())
    }
}

impl PolitenessStrategies {
    pub fn new(lexicon: PolitenessLexicon) -> Self {
        PolitenessStrategies {
            lexicon: Arc::new(lexicon),
            selector: select_all(),
        }
    }

    /// Restrict `summarize` to a subset of utterances.
    pub fn summarize_over(mut self, selector: UtterancePredicate) -> Self {
        self.selector = selector;
        self
    }

    pub fn lexicon(&self) -> &PolitenessLexicon {
        &self.lexicon
    }
}

impl Transformer for PolitenessStrategies {
    fn name(&self) -> &str {
        "politeness"
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        for u in corpus.utterances_mut() {
            let v = extract_strategies(&self.lexicon, u)?;
            let owner = format!("utterance {:?}", u.id);
            u.meta.annotate(POLITENESS_KEY, v.to_meta(), &owner);
        }
        Ok(corpus)
    }

    fn summarize(&self, corpus: &Corpus) -> Result<SummaryTable> {
        summarize_politeness(&self.lexicon, corpus, self.selector.as_ref())
    }
}
