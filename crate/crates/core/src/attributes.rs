//! Conversation-level flags derived from speaker metadata.

use std::collections::BTreeSet;

use crate::error::Result;
use crate::meta::MetaValue;
use crate::model::Corpus;
use crate::transform::{SummaryTable, Transformer};

/// Marks a conversation as mixed when its speakers cover every value in
/// `required_values` under `speaker_key`. With no required values a
/// conversation is mixed when its speakers show at least two distinct
/// values. Speakers without the key are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerMix {
    pub speaker_key: String,
    pub required_values: Vec<String>,
    pub output_key: String,
}

impl Default for SpeakerMix {
    fn default() -> Self {
        SpeakerMix {
            speaker_key: "gender".into(),
            required_values: vec!["M".into(), "F".into()],
            output_key: "mixed".into(),
        }
    }
}

impl SpeakerMix {
    pub fn values(&self, corpus: &Corpus, conversation_id: &str) -> Result<BTreeSet<String>> {
        Ok(corpus
            .conversation_speakers(conversation_id)?
            .into_iter()
            .filter_map(|s| corpus.speaker(s))
            .filter_map(|s| s.meta.get(&self.speaker_key).map(MetaValue::render))
            .collect())
    }

    pub fn is_mixed(&self, corpus: &Corpus, conversation_id: &str) -> Result<bool> {
        let values = self.values(corpus, conversation_id)?;
        Ok(if self.required_values.is_empty() {
            values.len() >= 2
        } else {
            self.required_values.iter().all(|v| values.contains(v))
        })
    }
}

impl Transformer for SpeakerMix {
    fn name(&self) -> &str {
        "mixed_attribute"
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        let flags: Vec<(String, bool)> = corpus
            .conversations()
            .map(|c| Ok((c.id().to_owned(), self.is_mixed(corpus, c.id())?)))
            .collect::<Result<_>>()?;
        for (cid, mixed) in flags {
            let owner = format!("conversation {cid:?}");
            corpus
                .conversation_mut(&cid)
                .expect("conversation exists")
                .meta
                .annotate(&self.output_key, mixed, &owner);
        }
        Ok(corpus)
    }

    fn summarize(&self, corpus: &Corpus) -> Result<SummaryTable> {
        let mut t = SummaryTable::new("conversation", &[&self.output_key, "values"]);
        for c in corpus.conversations() {
            let values: Vec<String> = self.values(corpus, c.id())?.into_iter().collect();
            t.push_row(
                c.id(),
                vec![
                    self.is_mixed(corpus, c.id())?.into(),
                    values.join("|").into(),
                ],
            );
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::MetaTable;
    use crate::model::{CorpusBuilder, Speaker, Utterance};

    fn speaker(id: &str, gender: Option<&str>) -> Speaker {
        let mut m = MetaTable::new();
        if let Some(g) = gender {
            m.insert("gender", g);
        }
        Speaker::new(id).with_meta(m)
    }

    #[test]
    fn flags_mixed_conversations() {
        let mut c = CorpusBuilder::new()
            .speakers(vec![
                speaker("a", Some("M")),
                speaker("b", Some("F")),
                speaker("c", Some("M")),
                speaker("d", None),
            ])
            .build(vec![
                Utterance::new("1", "a", "x", "hi"),
                Utterance::new("2", "b", "x", "hi").reply_to("1"),
                Utterance::new("3", "a", "y", "hi"),
                Utterance::new("4", "c", "y", "hi").reply_to("3"),
                Utterance::new("5", "d", "y", "hi").reply_to("4"),
            ])
            .unwrap();
        SpeakerMix::default().transform(&mut c).unwrap();
        assert_eq!(
            c.conversation("x").unwrap().meta.get("mixed"),
            Some(&MetaValue::Bool(true))
        );
        assert_eq!(
            c.conversation("y").unwrap().meta.get("mixed"),
            Some(&MetaValue::Bool(false))
        );

        let any = SpeakerMix {
            required_values: vec![],
            ..SpeakerMix::default()
        };
        assert!(any.is_mixed(&c, "x").unwrap());
        assert!(!any.is_mixed(&c, "y").unwrap());
    }
}
