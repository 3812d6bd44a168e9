//! The corpus hierarchy: speakers own utterances, utterances form one reply
//! tree per conversation, and a corpus holds all three plus its own metadata.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::meta::MetaTable;

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker_id: String,
    pub conversation_id: String,
    /// Parent utterance; `None` marks the conversation root.
    pub reply_to: Option<String>,
    /// Unix seconds.
    pub timestamp: Option<i64>,
    pub text: String,
    pub meta: MetaTable,
}

impl Utterance {
    pub fn new(
        id: impl Into<String>,
        speaker_id: impl Into<String>,
        conversation_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        Utterance {
            id: id.into(),
            speaker_id: speaker_id.into(),
            conversation_id: conversation_id.into(),
            reply_to: None,
            timestamp: None,
            text: text.into(),
            meta: MetaTable::new(),
        }
    }

    pub fn reply_to(mut self, parent: impl Into<String>) -> Self {
        self.reply_to = Some(parent.into());
        self
    }

    pub fn at(mut self, timestamp: i64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn with_meta(mut self, meta: MetaTable) -> Self {
        self.meta = meta;
        self
    }

    pub fn is_root(&self) -> bool {
        self.reply_to.is_none()
    }

    /// Chronological sort key: ascending timestamp, missing timestamps last,
    /// id as the tie-break.
    pub fn chrono_cmp(&self, other: &Utterance) -> Ordering {
        let key = |u: &Utterance| (u.timestamp.is_none(), u.timestamp.unwrap_or(0));
        key(self)
            .cmp(&key(other))
            .then_with(|| self.id.cmp(&other.id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Speaker {
    pub id: String,
    pub meta: MetaTable,
}

impl Speaker {
    pub fn new(id: impl Into<String>) -> Self {
        Speaker {
            id: id.into(),
            meta: MetaTable::new(),
        }
    }

    pub fn with_meta(mut self, meta: MetaTable) -> Self {
        self.meta = meta;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    id: String,
    utterance_ids: BTreeSet<String>,
    pub meta: MetaTable,
}

impl Conversation {
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Member utterance ids in id order.
    pub fn utterance_ids(&self) -> impl Iterator<Item = &str> {
        self.utterance_ids.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.utterance_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterance_ids.is_empty()
    }

    pub fn contains(&self, utterance_id: &str) -> bool {
        self.utterance_ids.contains(utterance_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraversalOrder {
    Bfs,
    DfsPreorder,
    DfsPostorder,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    speakers: BTreeMap<String, Speaker>,
    conversations: BTreeMap<String, Conversation>,
    utterances: BTreeMap<String, Utterance>,
    pub meta: MetaTable,
}

/// Build a corpus from utterances, auto-creating unlisted speakers.
pub fn build_corpus(utterances: Vec<Utterance>, speakers: Option<Vec<Speaker>>) -> Result<Corpus> {
    CorpusBuilder::new()
        .speakers(speakers.unwrap_or_default())
        .build(utterances)
}

#[derive(Debug, Clone, Default)]
pub struct CorpusBuilder {
    speakers: Vec<Speaker>,
    conversation_meta: BTreeMap<String, MetaTable>,
    corpus_meta: MetaTable,
    strict: bool,
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reject utterances whose speaker is not listed instead of creating it.
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn speakers(mut self, speakers: Vec<Speaker>) -> Self {
        self.speakers = speakers;
        self
    }

    pub fn conversation_meta(
        mut self,
        conversation_id: impl Into<String>,
        meta: MetaTable,
    ) -> Self {
        self.conversation_meta.insert(conversation_id.into(), meta);
        self
    }

    pub fn corpus_meta(mut self, meta: MetaTable) -> Self {
        self.corpus_meta = meta;
        self
    }

    pub fn build(self, utterances: Vec<Utterance>) -> Result<Corpus> {
        let corpus = self.build_unchecked(utterances)?;
        if let Some(v) = corpus.check_integrity().violations.into_iter().next() {
            return Err(v.into());
        }
        Ok(corpus)
    }

    /// Like `build` but skips the tree checks, so a broken corpus can be
    /// inspected with `Corpus::check_integrity`. Id and speaker errors are
    /// still reported.
    pub fn build_unchecked(self, utterances: Vec<Utterance>) -> Result<Corpus> {
        let mut corpus = Corpus {
            meta: self.corpus_meta,
            ..Corpus::default()
        };
        for s in self.speakers {
            if s.id.is_empty() {
                return Err(Error::EmptyId("speaker"));
            }
            if corpus.speakers.contains_key(&s.id) {
                return Err(Error::DuplicateId(s.id));
            }
            corpus.speakers.insert(s.id.clone(), s);
        }
        for u in utterances {
            if u.id.is_empty() {
                return Err(Error::EmptyId("utterance"));
            }
            if u.conversation_id.is_empty() {
                return Err(Error::EmptyId("conversation"));
            }
            if u.speaker_id.is_empty() {
                return Err(Error::EmptyId("speaker"));
            }
            if corpus.utterances.contains_key(&u.id) {
                return Err(Error::DuplicateId(u.id));
            }
            if !corpus.speakers.contains_key(&u.speaker_id) {
                if self.strict {
                    return Err(Error::UnknownSpeaker(u.speaker_id));
                }
                corpus
                    .speakers
                    .insert(u.speaker_id.clone(), Speaker::new(u.speaker_id.clone()));
            }
            corpus
                .conversations
                .entry(u.conversation_id.clone())
                .or_insert_with(|| Conversation {
                    id: u.conversation_id.clone(),
                    utterance_ids: BTreeSet::new(),
                    meta: MetaTable::new(),
                })
                .utterance_ids
                .insert(u.id.clone());
            corpus.utterances.insert(u.id.clone(), u);
        }
        for (cid, meta) in self.conversation_meta {
            match corpus.conversations.get_mut(&cid) {
                Some(c) => c.meta = meta,
                None => return Err(Error::UnknownConversation(cid)),
            }
        }
        Ok(corpus)
    }
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn speakers(&self) -> impl Iterator<Item = &Speaker> {
        self.speakers.values()
    }

    pub fn conversations(&self) -> impl Iterator<Item = &Conversation> {
        self.conversations.values()
    }

    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> {
        self.utterances.values()
    }

    pub fn utterance_refs(&self) -> impl Iterator<Item = UtteranceRef<'_>> {
        self.utterances
            .values()
            .map(move |utt| UtteranceRef { corpus: self, utt })
    }

    pub fn speaker(&self, id: &str) -> Option<&Speaker> {
        self.speakers.get(id)
    }

    pub fn conversation(&self, id: &str) -> Option<&Conversation> {
        self.conversations.get(id)
    }

    pub fn utterance(&self, id: &str) -> Option<&Utterance> {
        self.utterances.get(id)
    }

    pub fn speaker_mut(&mut self, id: &str) -> Option<&mut Speaker> {
        self.speakers.get_mut(id)
    }

    pub fn conversation_mut(&mut self, id: &str) -> Option<&mut Conversation> {
        self.conversations.get_mut(id)
    }

    /// Mutable access to one utterance. Structural edits made through this
    /// handle are not re-validated; run [`Corpus::check_integrity`] afterwards.
    pub fn utterance_mut(&mut self, id: &str) -> Option<&mut Utterance> {
        self.utterances.get_mut(id)
    }

    pub fn utterances_mut(&mut self) -> impl Iterator<Item = &mut Utterance> {
        self.utterances.values_mut()
    }

    pub fn speakers_mut(&mut self) -> impl Iterator<Item = &mut Speaker> {
        self.speakers.values_mut()
    }

    pub fn conversations_mut(&mut self) -> impl Iterator<Item = &mut Conversation> {
        self.conversations.values_mut()
    }

    pub fn utterance_ref(&self, id: &str) -> Option<UtteranceRef<'_>> {
        self.utterances
            .get(id)
            .map(|utt| UtteranceRef { corpus: self, utt })
    }

    pub fn speaker_count(&self) -> usize {
        self.speakers.len()
    }

    pub fn conversation_count(&self) -> usize {
        self.conversations.len()
    }

    pub fn utterance_count(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty() && self.speakers.is_empty()
    }

    /// Utterances of a conversation in id order.
    pub fn conversation_utterances(&self, conversation_id: &str) -> Result<Vec<&Utterance>> {
        let convo = self
            .conversation(conversation_id)
            .ok_or_else(|| Error::UnknownConversation(conversation_id.to_owned()))?;
        Ok(convo
            .utterance_ids
            .iter()
            .filter_map(|id| self.utterances.get(id))
            .collect())
    }

    /// Distinct speakers taking part in a conversation.
    pub fn conversation_speakers(&self, conversation_id: &str) -> Result<BTreeSet<&str>> {
        Ok(self
            .conversation_utterances(conversation_id)?
            .into_iter()
            .map(|u| u.speaker_id.as_str())
            .collect())
    }

    pub fn root(&self, conversation_id: &str) -> Result<&Utterance> {
        let roots: Vec<&Utterance> = self
            .conversation_utterances(conversation_id)?
            .into_iter()
            .filter(|u| u.is_root())
            .collect();
        match roots.as_slice() {
            [root] => Ok(root),
            [] => Err(Error::NoRoot(conversation_id.to_owned())),
            many => Err(Error::MultipleRoots {
                conversation: conversation_id.to_owned(),
                roots: many.iter().map(|u| u.id.clone()).collect(),
            }),
        }
    }

    /// Direct replies to an utterance in chronological order.
    pub fn children(&self, utterance_id: &str) -> Result<Vec<&Utterance>> {
        let utt = self
            .utterance(utterance_id)
            .ok_or_else(|| Error::UnknownUtterance(utterance_id.to_owned()))?;
        let mut kids: Vec<&Utterance> = self
            .conversation_utterances(&utt.conversation_id)?
            .into_iter()
            .filter(|u| u.reply_to.as_deref() == Some(utterance_id))
            .collect();
        kids.sort_by(|a, b| a.chrono_cmp(b));
        Ok(kids)
    }

    fn child_index<'a>(members: &[&'a Utterance]) -> HashMap<&'a str, Vec<&'a Utterance>> {
        let mut index: HashMap<&str, Vec<&Utterance>> = HashMap::new();
        for u in members {
            if let Some(p) = u.reply_to.as_deref() {
                index.entry(p).or_default().push(u);
            }
        }
        for kids in index.values_mut() {
            kids.sort_by(|a, b| a.chrono_cmp(b));
        }
        index
    }

    /// Every utterance of a conversation exactly once, siblings visited in
    /// chronological order.
    pub fn traverse(
        &self,
        conversation_id: &str,
        order: TraversalOrder,
    ) -> Result<Vec<&Utterance>> {
        let members = self.conversation_utterances(conversation_id)?;
        let root = self.root(conversation_id)?;
        let index = Self::child_index(&members);
        let kids = |u: &Utterance| index.get(u.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let mut out = Vec::with_capacity(members.len());
        match order {
            TraversalOrder::Bfs => {
                let mut queue = VecDeque::from([root]);
                while let Some(u) = queue.pop_front() {
                    out.push(u);
                    queue.extend(kids(u).iter().copied());
                }
            }
            TraversalOrder::DfsPreorder => {
                let mut stack = vec![root];
                while let Some(u) = stack.pop() {
                    out.push(u);
                    stack.extend(kids(u).iter().rev().copied());
                }
            }
            TraversalOrder::DfsPostorder => {
                // (node, children already expanded)
                let mut stack = vec![(root, false)];
                while let Some((u, expanded)) = stack.pop() {
                    if expanded {
                        out.push(u);
                    } else {
                        stack.push((u, true));
                        stack.extend(kids(u).iter().rev().map(|k| (*k, false)));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Height of the reply tree counted in utterances (a lone root has depth 1).
    pub fn depth(&self, conversation_id: &str) -> Result<usize> {
        let members = self.conversation_utterances(conversation_id)?;
        let root = self.root(conversation_id)?;
        let index = Self::child_index(&members);
        let mut best = 0;
        let mut stack = vec![(root, 1usize)];
        while let Some((u, d)) = stack.pop() {
            best = best.max(d);
            if let Some(kids) = index.get(u.id.as_str()) {
                stack.extend(kids.iter().map(|k| (*k, d + 1)));
            }
        }
        Ok(best)
    }

    /// All utterances by a speaker across conversations, oldest first.
    pub fn speaker_history(&self, speaker_id: &str) -> Result<Vec<&Utterance>> {
        if !self.speakers.contains_key(speaker_id) {
            return Err(Error::UnknownSpeaker(speaker_id.to_owned()));
        }
        let mut history: Vec<&Utterance> = self
            .utterances
            .values()
            .filter(|u| u.speaker_id == speaker_id)
            .collect();
        history.sort_by(|a, b| a.chrono_cmp(b));
        Ok(history)
    }

    /// Conversations a speaker took part in, in id order.
    pub fn speaker_conversations(&self, speaker_id: &str) -> Result<BTreeSet<&str>> {
        Ok(self
            .speaker_history(speaker_id)?
            .into_iter()
            .map(|u| u.conversation_id.as_str())
            .collect())
    }

    /// Remove an utterance and its conversation membership. Callers re-parent
    /// its children first.
    pub(crate) fn detach_utterance(&mut self, id: &str) -> Option<Utterance> {
        let utt = self.utterances.remove(id)?;
        if let Some(c) = self.conversations.get_mut(&utt.conversation_id) {
            c.utterance_ids.remove(id);
        }
        Some(utt)
    }

    /// Validate every structural invariant without mutating anything.
    pub fn check_integrity(&self) -> IntegrityReport {
        let mut out = Vec::new();
        let mut push = |code, ids: Vec<&str>| {
            out.push(Violation {
                code,
                ids: ids.into_iter().map(str::to_owned).collect(),
            })
        };

        check_meta(&self.meta, &["<corpus>"], &mut push);
        for (key, s) in &self.speakers {
            if s.id.is_empty() {
                push(ViolationCode::EmptyId, vec!["speaker"]);
            }
            if *key != s.id {
                push(ViolationCode::KeyMismatch, vec![key, &s.id]);
            }
            check_meta(&s.meta, &[&s.id], &mut push);
        }
        for (key, c) in &self.conversations {
            if c.id.is_empty() {
                push(ViolationCode::EmptyId, vec!["conversation"]);
            }
            if *key != c.id {
                push(ViolationCode::KeyMismatch, vec![key, &c.id]);
            }
            if c.utterance_ids.is_empty() {
                push(ViolationCode::EmptyConversation, vec![&c.id]);
            }
            for uid in &c.utterance_ids {
                match self.utterances.get(uid) {
                    Some(u) if u.conversation_id == c.id => {}
                    _ => push(ViolationCode::MembershipMismatch, vec![&c.id, uid]),
                }
            }
            check_meta(&c.meta, &[&c.id], &mut push);
        }
        for (key, u) in &self.utterances {
            if u.id.is_empty() {
                push(ViolationCode::EmptyId, vec!["utterance"]);
            }
            if *key != u.id {
                push(ViolationCode::KeyMismatch, vec![key, &u.id]);
            }
            if !self.speakers.contains_key(&u.speaker_id) {
                push(ViolationCode::MissingSpeaker, vec![&u.id, &u.speaker_id]);
            }
            match self.conversations.get(&u.conversation_id) {
                None => push(
                    ViolationCode::MissingConversation,
                    vec![&u.id, &u.conversation_id],
                ),
                Some(c) if !c.utterance_ids.contains(&u.id) => {
                    push(ViolationCode::MembershipMismatch, vec![&c.id, &u.id])
                }
                Some(_) => {}
            }
            if let Some(target) = &u.reply_to {
                match self.utterances.get(target) {
                    None => push(ViolationCode::DanglingReply, vec![&u.id, target]),
                    Some(p) if p.conversation_id != u.conversation_id => {
                        push(ViolationCode::CrossConversationReply, vec![&u.id, target])
                    }
                    Some(_) => {}
                }
            }
            check_meta(&u.meta, &[&u.id], &mut push);
        }

        for c in self.conversations.values() {
            let members: Vec<&Utterance> = c
                .utterance_ids
                .iter()
                .filter_map(|id| self.utterances.get(id))
                .filter(|u| u.conversation_id == c.id)
                .collect();
            if members.is_empty() {
                continue;
            }
            let roots: Vec<&str> = members
                .iter()
                .filter(|u| u.is_root())
                .map(|u| u.id.as_str())
                .collect();
            match roots.len() {
                0 => {
                    push(ViolationCode::NoRoot, vec![&c.id]);
                    continue;
                }
                1 => {}
                _ => push(
                    ViolationCode::MultipleRoots,
                    [c.id.as_str()]
                        .into_iter()
                        .chain(roots.iter().copied())
                        .collect(),
                ),
            }
            let index = Self::child_index(&members);
            let mut seen: HashSet<&str> = HashSet::new();
            let mut stack = roots.clone();
            while let Some(id) = stack.pop() {
                if seen.insert(id) {
                    if let Some(kids) = index.get(id) {
                        stack.extend(kids.iter().map(|k| k.id.as_str()));
                    }
                }
            }
            // Members with an in-conversation parent that never reach a root
            // sit on (or hang off) a reply cycle.
            let stuck: Vec<&str> = members
                .iter()
                .filter(|u| !seen.contains(u.id.as_str()))
                .filter(|u| {
                    u.reply_to
                        .as_ref()
                        .and_then(|p| self.utterances.get(p))
                        .is_some_and(|p| p.conversation_id == c.id)
                })
                .map(|u| u.id.as_str())
                .collect();
            if !stuck.is_empty() {
                push(
                    ViolationCode::Cycle,
                    [c.id.as_str()].into_iter().chain(stuck).collect(),
                );
            }
        }
        IntegrityReport { violations: out }
    }
}

fn check_meta(meta: &MetaTable, owner: &[&str], push: &mut impl FnMut(ViolationCode, Vec<&str>)) {
    if meta.contains_key("") {
        push(ViolationCode::EmptyMetaKey, owner.to_vec());
    }
    if meta.iter().any(|(_, v)| !v.is_finite()) {
        push(ViolationCode::NonFiniteMeta, owner.to_vec());
    }
}

/// Borrowed utterance together with the corpus it lives in, so selectors can
/// navigate to its conversation and speaker.
#[derive(Debug, Clone, Copy)]
pub struct UtteranceRef<'a> {
    pub corpus: &'a Corpus,
    pub utt: &'a Utterance,
}

impl<'a> UtteranceRef<'a> {
    pub fn conversation(&self) -> Option<&'a Conversation> {
        self.corpus.conversation(&self.utt.conversation_id)
    }

    pub fn speaker(&self) -> Option<&'a Speaker> {
        self.corpus.speaker(&self.utt.speaker_id)
    }

    pub fn parent(&self) -> Option<&'a Utterance> {
        self.utt
            .reply_to
            .as_deref()
            .and_then(|p| self.corpus.utterance(p))
    }
}

impl Deref for UtteranceRef<'_> {
    type Target = Utterance;

    fn deref(&self) -> &Utterance {
        self.utt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    EmptyId,
    KeyMismatch,
    EmptyMetaKey,
    NonFiniteMeta,
    MissingSpeaker,
    MissingConversation,
    MembershipMismatch,
    EmptyConversation,
    DanglingReply,
    CrossConversationReply,
    NoRoot,
    MultipleRoots,
    Cycle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub ids: Vec<String>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.code)?;
        if !self.ids.is_empty() {
            write!(f, ": {}", self.ids.join(" "))?;
        }
        Ok(())
    }
}

impl From<Violation> for Error {
    fn from(v: Violation) -> Self {
        let mut ids = v.ids.into_iter();
        let mut next = || ids.next().unwrap_or_default();
        match v.code {
            ViolationCode::DanglingReply => Error::DanglingReply {
                utterance: next(),
                target: next(),
            },
            ViolationCode::CrossConversationReply => Error::CrossConversationReply {
                utterance: next(),
                target: next(),
            },
            ViolationCode::NoRoot => Error::NoRoot(next()),
            ViolationCode::MultipleRoots => Error::MultipleRoots {
                conversation: next(),
                roots: ids.collect(),
            },
            ViolationCode::Cycle => Error::CycleDetected {
                conversation: next(),
                ids: ids.collect(),
            },
            ViolationCode::EmptyConversation => Error::EmptyConversation(next()),
            ViolationCode::MissingSpeaker => {
                next();
                Error::UnknownSpeaker(next())
            }
            ViolationCode::MissingConversation => {
                next();
                Error::UnknownConversation(next())
            }
            _ => Error::IntegrityViolation(vec![Violation {
                code: v.code,
                ids: std::iter::once(next()).chain(ids).collect(),
            }]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntegrityReport {
    pub violations: Vec<Violation>,
}

impl IntegrityReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TraversalOrder::*;

    fn ids(v: &[&Utterance]) -> Vec<String> {
        v.iter().map(|u| u.id.clone()).collect()
    }

    fn chain() -> Corpus {
        build_corpus(
            vec![
                Utterance::new("u0", "A", "c0", "hi"),
                Utterance::new("u1", "B", "c0", "hey").reply_to("u0"),
                Utterance::new("u2", "A", "c0", "yo").reply_to("u1"),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn minimal_corpus() {
        let c = build_corpus(vec![Utterance::new("u0", "s", "c0", "x")], None).unwrap();
        assert_eq!(c.conversation_count(), 1);
        assert_eq!(c.speaker_count(), 1);
        assert_eq!(c.root("c0").unwrap().id, "u0");
    }

    #[test]
    fn chain_traversals_agree() {
        let c = chain();
        assert_eq!(c.depth("c0").unwrap(), 3);
        for order in [Bfs, DfsPreorder] {
            assert_eq!(ids(&c.traverse("c0", order).unwrap()), ["u0", "u1", "u2"]);
        }
        assert_eq!(
            ids(&c.traverse("c0", DfsPostorder).unwrap()),
            ["u2", "u1", "u0"]
        );
    }

    #[test]
    fn siblings_follow_timestamps() {
        let c = build_corpus(
            vec![
                Utterance::new("u0", "A", "c", ""),
                Utterance::new("u1", "B", "c", "").reply_to("u0").at(5),
                Utterance::new("u2", "C", "c", "").reply_to("u0").at(3),
            ],
            None,
        )
        .unwrap();
        assert_eq!(ids(&c.traverse("c", Bfs).unwrap()), ["u0", "u2", "u1"]);
    }

    #[test]
    fn postorder_of_small_tree() {
        let c = build_corpus(
            vec![
                Utterance::new("u0", "A", "c", ""),
                Utterance::new("u1", "B", "c", "").reply_to("u0").at(1),
                Utterance::new("u2", "C", "c", "").reply_to("u0").at(2),
                Utterance::new("u3", "C", "c", "").reply_to("u1").at(3),
            ],
            None,
        )
        .unwrap();
        assert_eq!(
            ids(&c.traverse("c", DfsPostorder).unwrap()),
            ["u3", "u1", "u2", "u0"]
        );
        assert_eq!(
            ids(&c.traverse("c", DfsPreorder).unwrap()),
            ["u0", "u1", "u3", "u2"]
        );
        assert_eq!(
            ids(&c.traverse("c", Bfs).unwrap()),
            ["u0", "u1", "u2", "u3"]
        );
    }

    #[test]
    fn missing_timestamps_sort_last() {
        let c = build_corpus(
            vec![
                Utterance::new("u0", "A", "c", ""),
                Utterance::new("a", "B", "c", "").reply_to("u0"),
                Utterance::new("b", "B", "c", "").reply_to("u0").at(100),
            ],
            None,
        )
        .unwrap();
        assert_eq!(ids(&c.traverse("c", Bfs).unwrap()), ["u0", "b", "a"]);
        assert_eq!(ids(&c.speaker_history("B").unwrap()), ["b", "a"]);
    }

    #[test]
    fn unknown_conversation() {
        assert!(matches!(
            chain().traverse("nope", Bfs),
            Err(Error::UnknownConversation(_))
        ));
    }

    #[test]
    fn speaker_history_orders() {
        let c = build_corpus(
            vec![
                Utterance::new("u_a", "s", "c1", "").at(10),
                Utterance::new("u_b", "s", "c2", "").at(2),
                Utterance::new("b", "t", "c3", "").at(5),
                Utterance::new("a", "t", "c4", "").at(5),
            ],
            Some(vec![Speaker::new("lurker")]),
        )
        .unwrap();
        assert!(c.speaker_history("lurker").unwrap().is_empty());
        assert_eq!(ids(&c.speaker_history("s").unwrap()), ["u_b", "u_a"]);
        assert_eq!(ids(&c.speaker_history("t").unwrap()), ["a", "b"]);
        assert!(matches!(
            c.speaker_history("ghost"),
            Err(Error::UnknownSpeaker(_))
        ));
    }

    #[test]
    fn dangling_reply_rejected() {
        let err = build_corpus(
            vec![
                Utterance::new("u0", "A", "c0", ""),
                Utterance::new("u1", "A", "c0", "").reply_to("u9"),
            ],
            None,
        )
        .unwrap_err();
        match err {
            Error::DanglingReply { utterance, target } => {
                assert_eq!((utterance.as_str(), target.as_str()), ("u1", "u9"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn build_errors() {
        let dup = build_corpus(
            vec![
                Utterance::new("u", "A", "c", ""),
                Utterance::new("u", "A", "c", ""),
            ],
            None,
        );
        assert!(matches!(dup, Err(Error::DuplicateId(id)) if id == "u"));

        let cross = build_corpus(
            vec![
                Utterance::new("a", "A", "c1", ""),
                Utterance::new("b", "A", "c2", ""),
                Utterance::new("x", "A", "c2", "").reply_to("a"),
            ],
            None,
        );
        assert!(matches!(cross, Err(Error::CrossConversationReply { .. })));

        let two_roots = build_corpus(
            vec![
                Utterance::new("a", "A", "c", ""),
                Utterance::new("b", "A", "c", ""),
            ],
            None,
        );
        assert!(matches!(two_roots, Err(Error::MultipleRoots { .. })));

        let loop_only = build_corpus(
            vec![
                Utterance::new("a", "A", "c", "").reply_to("b"),
                Utterance::new("b", "A", "c", "").reply_to("a"),
            ],
            None,
        );
        assert!(matches!(loop_only, Err(Error::NoRoot(c)) if c == "c"));

        let cycle = build_corpus(
            vec![
                Utterance::new("r", "A", "c", ""),
                Utterance::new("a", "A", "c", "").reply_to("b"),
                Utterance::new("b", "A", "c", "").reply_to("a"),
            ],
            None,
        );
        assert!(matches!(cycle, Err(Error::CycleDetected { ids, .. }) if ids == ["a", "b"]));

        let strict = CorpusBuilder::new()
            .strict(true)
            .build(vec![Utterance::new("u", "ghost", "c", "")]);
        assert!(matches!(strict, Err(Error::UnknownSpeaker(s)) if s == "ghost"));
    }

    #[test]
    fn integrity_after_manual_mutation() {
        let mut c = chain();
        assert!(c.check_integrity().is_empty());
        c.utterance_mut("u1").unwrap().speaker_id = "nobody".into();
        assert_eq!(c.check_integrity().codes(), [ViolationCode::MissingSpeaker]);

        let mut c = chain();
        c.utterance_mut("u2").unwrap().reply_to = None;
        assert_eq!(c.check_integrity().codes(), [ViolationCode::MultipleRoots]);
    }

    #[test]
    fn utterance_ref_navigates() {
        let c = chain();
        let r = c.utterance_ref("u1").unwrap();
        assert_eq!(r.conversation().unwrap().id(), "c0");
        assert_eq!(r.speaker().unwrap().id, "B");
        assert_eq!(r.parent().unwrap().id, "u0");
        assert_eq!(ids(&c.children("u0").unwrap()), ["u1"]);
    }
}
