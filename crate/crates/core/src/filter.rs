//! `key=value` selection expressions over utterances.
//!
//! An expression is a comma-separated conjunction of tests. A key may carry
//! a scope prefix (`utt.`, `convo.`, `speaker.`); an unscoped key is looked
//! up in the utterance, then its conversation, then its speaker, and the
//! first table holding the key decides. Values compare against the rendered
//! metadata value, so `mixed=true` matches a boolean and `n=3` an integer.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::meta::MetaValue;
use crate::model::UtteranceRef;
use crate::transform::UtterancePredicate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Utterance,
    Conversation,
    Speaker,
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Test {
    pub scope: Scope,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    pub tests: Vec<Test>,
}

impl Filter {
    pub fn parse(expr: &str) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidFilter {
            expr: expr.to_owned(),
            reason: reason.to_owned(),
        };
        let mut tests = Vec::new();
        for part in expr.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(bad("empty test"));
            }
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| bad("expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            let (scope, key) = if let Some(k) = key.strip_prefix("utt.") {
                (Scope::Utterance, k)
            } else if let Some(k) = key.strip_prefix("convo.") {
                (Scope::Conversation, k)
            } else if let Some(k) = key.strip_prefix("speaker.") {
                (Scope::Speaker, k)
            } else {
                (Scope::Any, key)
            };
            if key.is_empty() {
                return Err(bad("empty key"));
            }
            tests.push(Test {
                scope,
                key: key.to_owned(),
                value: value.to_owned(),
            });
        }
        Ok(Filter { tests })
    }

    fn lookup<'a>(r: &UtteranceRef<'a>, scope: Scope, key: &str) -> Option<&'a MetaValue> {
        let utt = || r.utt.meta.get(key);
        let convo = || r.conversation().and_then(|c| c.meta.get(key));
        let speaker = || r.speaker().and_then(|s| s.meta.get(key));
        match scope {
            Scope::Utterance => utt(),
            Scope::Conversation => convo(),
            Scope::Speaker => speaker(),
            Scope::Any => utt().or_else(convo).or_else(speaker),
        }
    }

    pub fn matches(&self, r: &UtteranceRef<'_>) -> bool {
        self.tests
            .iter()
            .all(|t| Self::lookup(r, t.scope, &t.key).is_some_and(|v| v.render() == t.value))
    }

    pub fn into_predicate(self) -> UtterancePredicate {
        Arc::new(move |r| self.matches(r))
    }
}

/// Parse an expression straight into an utterance predicate.
pub fn parse_filter(expr: &str) -> Result<UtterancePredicate> {
    Ok(Filter::parse(expr)?.into_predicate())
}
