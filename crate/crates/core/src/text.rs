//! Text preprocessing: web-text cleaning, rule-based tokenization, and the
//! structural merge of consecutive same-speaker utterances.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::meta::{MetaTable, MetaValue};
use crate::model::{Corpus, TraversalOrder, Utterance};
use crate::transform::{SummaryTable, Transformer};

pub const CLEAN_TEXT_KEY: &str = "clean_text";
pub const TOKENS_KEY: &str = "tokens";

pub const URL_SENTINEL: &str = "<url>";
pub const EMAIL_SENTINEL: &str = "<email>";

/// Words whose trailing period does not end a sentence.
pub const ABBREVIATIONS: [&str; 8] = ["mr.", "mrs.", "dr.", "st.", "vs.", "e.g.", "i.e.", "etc."];

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"</?[A-Za-z!][^<>]*>").unwrap());
static URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)\b(?:https?://|ftp://|www\.)[^\s<>"]*[^\s<>"'.,;:!?)\]]"#).unwrap()
});
static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b[a-z0-9._%+-]+@[a-z0-9.-]+\.[a-z]{2,}\b").unwrap());

fn is_sentinel(s: &str) -> bool {
    s == URL_SENTINEL || s == EMAIL_SENTINEL
}

fn strip_markup(s: &str) -> String {
    let mut cur = s.to_owned();
    // Decoded entities can spell new tags ("&lt;b&gt;"), so iterate.
    for _ in 0..8 {
        let stripped = TAG.replace_all(&cur, |c: &Captures| {
            let m = &c[0];
            if is_sentinel(m) {
                m.to_owned()
            } else {
                " ".to_owned()
            }
        });
        let decoded = html_escape::decode_html_entities(&stripped).into_owned();
        if decoded == cur {
            break;
        }
        cur = decoded;
    }
    cur
}

fn replace_links(s: &str) -> String {
    let s = URL.replace_all(s, |c: &Captures| {
        let m = c.get(0).expect("whole match");
        // "user@www.host.org" is an address, not a link
        if s[..m.start()].ends_with('@') {
            m.as_str().to_owned()
        } else {
            URL_SENTINEL.to_owned()
        }
    });
    EMAIL.replace_all(&s, EMAIL_SENTINEL).into_owned()
}

fn is_pictographic(c: char) -> bool {
    matches!(c as u32,
        0x2190..=0x2BFF      // arrows, math operators, technical, dingbats, misc symbols
        | 0x1F000..=0x1FAFF  // emoji and pictographs
        | 0xFE00..=0xFE0F    // variation selectors
        | 0x200B..=0x200F    // zero-width and direction marks
        | 0xE000..=0xF8FF    // private use
        | 0xE0000..=0xE007F) // tags
}

fn to_ascii(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.nfkc() {
        if c.is_ascii() {
            if !c.is_ascii_control() || c.is_ascii_whitespace() {
                out.push(c);
            }
        } else if c.is_whitespace() {
            out.push(' ');
        } else if !is_pictographic(c) {
            if let Some(t) = deunicode::deunicode_char(c) {
                out.extend(t.trim().chars().filter(|c| c.is_ascii_graphic()));
            }
        }
    }
    out
}

fn clean_once(raw: &str) -> String {
    let s = strip_markup(raw);
    let s = replace_links(&s);
    let s = to_ascii(&s);
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Convert dirty web text to clean single-spaced ASCII.
///
/// Passes: strip tags and decode entities; replace URLs and email addresses
/// with `<url>` / `<email>`; NFKC-normalize and transliterate to ASCII,
/// dropping emoji and other pictographs; collapse whitespace. The passes are
/// repeated until the output is stable, so the function is idempotent.
pub fn clean_text(raw: &str) -> String {
    let mut cur = clean_once(raw);
    for _ in 0..4 {
        let next = clean_once(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// True for tokens made only of punctuation/symbol characters.
pub fn is_punct_token(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(is_punct)
}

fn abbreviation_prefix(rest: &str) -> Option<usize> {
    ABBREVIATIONS.iter().find_map(|a| {
        let head = rest.get(..a.len())?;
        let tail = &rest[a.len()..];
        (head.eq_ignore_ascii_case(a) && tail.chars().all(is_punct)).then_some(a.len())
    })
}

/// Sentences of tokens. Sentences end at `.`, `!` or `?` before whitespace
/// (or end of text) unless the word is a listed abbreviation; leading and
/// trailing punctuation become single-character tokens. Case is preserved.
pub fn tokenize(text: &str) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut current: Vec<String> = Vec::new();
    for chunk in text.split_whitespace() {
        let mut start = 0;
        while let Some(c) = chunk[start..].chars().next() {
            let rest = &chunk[start..];
            if !is_punct(c) || rest.starts_with(URL_SENTINEL) || rest.starts_with(EMAIL_SENTINEL) {
                break;
            }
            current.push(c.to_string());
            start += c.len_utf8();
        }
        let rest = &chunk[start..];
        let (core, trail, abbrev) = match abbreviation_prefix(rest) {
            Some(n) => (&rest[..n], &rest[n..], true),
            None => {
                let mut end = rest.len();
                while let Some(c) = rest[..end].chars().next_back() {
                    if !is_punct(c) || is_sentinel_suffix(&rest[..end]) {
                        break;
                    }
                    end -= c.len_utf8();
                }
                (&rest[..end], &rest[end..], false)
            }
        };
        if !core.is_empty() {
            current.push(core.to_owned());
        }
        current.extend(trail.chars().map(String::from));
        let ends = chunk.ends_with(['.', '!', '?']) && !(abbrev && trail.is_empty());
        if ends && !current.is_empty() {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

fn is_sentinel_suffix(s: &str) -> bool {
    s.ends_with(URL_SENTINEL) || s.ends_with(EMAIL_SENTINEL)
}

pub fn tokens_to_meta(sentences: &[Vec<String>]) -> MetaValue {
    MetaValue::List(
        sentences
            .iter()
            .map(|s| MetaValue::List(s.iter().map(|t| MetaValue::from(t.as_str())).collect()))
            .collect(),
    )
}

/// Read a `tokens` annotation back into sentences.
pub fn tokens_from_meta(v: &MetaValue) -> Option<Vec<Vec<String>>> {
    v.as_list()?
        .iter()
        .map(|s| {
            s.as_list()?
                .iter()
                .map(|t| t.as_str().map(str::to_owned))
                .collect::<Option<Vec<_>>>()
        })
        .collect()
}

/// Tokens stored on an utterance, or `MissingAnnotation`.
pub fn annotated_tokens(utt: &Utterance) -> Result<Vec<Vec<String>>> {
    utt.meta
        .get(TOKENS_KEY)
        .and_then(tokens_from_meta)
        .ok_or_else(|| Error::MissingAnnotation {
            key: TOKENS_KEY.to_owned(),
            object: format!("utterance {:?}", utt.id),
        })
}

/// Lowercased word tokens (punctuation dropped) per sentence.
pub fn words(sentences: &[Vec<String>]) -> Vec<Vec<String>> {
    sentences
        .iter()
        .map(|s| {
            s.iter()
                .filter(|t| !is_punct_token(t))
                .map(|t| t.to_lowercase())
                .collect()
        })
        .collect()
}

/// Word sentences from the `tokens` annotation, tokenizing the cleaned (or
/// raw) text on the fly when the annotation is absent.
pub fn words_or_tokenize(utt: &Utterance) -> Vec<Vec<String>> {
    let sentences = utt
        .meta
        .get(TOKENS_KEY)
        .and_then(tokens_from_meta)
        .unwrap_or_else(|| tokenize(source_text(utt)));
    words(&sentences)
}

fn source_text(utt: &Utterance) -> &str {
    utt.meta
        .get(CLEAN_TEXT_KEY)
        .and_then(MetaValue::as_str)
        .unwrap_or(&utt.text)
}

fn missing(key: &str, object: &str) -> Error {
    Error::MissingAnnotation {
        key: key.to_owned(),
        object: object.to_owned(),
    }
}

/// Annotates every utterance with `clean_text` and, unless disabled, with
/// `tokens` of the cleaned text. Optionally replaces the text itself.
#[derive(Debug, Clone)]
pub struct TextCleaner {
    pub overwrite_text: bool,
    pub tokenize: bool,
}

impl Default for TextCleaner {
    fn default() -> Self {
        TextCleaner {
            overwrite_text: false,
            tokenize: true,
        }
    }
}

impl Transformer for TextCleaner {
    fn name(&self) -> &str {
        "text_clean"
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        for u in corpus.utterances_mut() {
            let cleaned = clean_text(&u.text);
            if self.overwrite_text {
                u.text = cleaned.clone();
            }
            let owner = format!("utterance {:?}", u.id);
            if self.tokenize {
                u.meta
                    .annotate(TOKENS_KEY, tokens_to_meta(&tokenize(&cleaned)), &owner);
            }
            u.meta.annotate(CLEAN_TEXT_KEY, cleaned, &owner);
        }
        Ok(corpus)
    }

    fn summarize(&self, corpus: &Corpus) -> Result<SummaryTable> {
        let (mut n, mut changed, mut chars_in, mut chars_out) = (0usize, 0usize, 0usize, 0usize);
        for u in corpus.utterances() {
            let c = u
                .meta
                .get(CLEAN_TEXT_KEY)
                .and_then(MetaValue::as_str)
                .ok_or_else(|| missing(CLEAN_TEXT_KEY, &u.id))?;
            n += 1;
            changed += usize::from(c != u.text);
            chars_in += u.text.chars().count();
            chars_out += c.chars().count();
        }
        let mut t = SummaryTable::new("statistic", &["value"]);
        t.push_row("utterances", vec![n.into()]);
        t.push_row("changed", vec![changed.into()]);
        t.push_row("chars_in", vec![chars_in.into()]);
        t.push_row("chars_out", vec![chars_out.into()]);
        Ok(t)
    }
}

/// Annotates every utterance with `tokens`, read from `clean_text` when
/// present.
#[derive(Debug, Clone, Default)]
pub struct Tokenizer;

impl Transformer for Tokenizer {
    fn name(&self) -> &str {
        "tokenize"
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        for u in corpus.utterances_mut() {
            let toks = tokens_to_meta(&tokenize(source_text(u)));
            let owner = format!("utterance {:?}", u.id);
            u.meta.annotate(TOKENS_KEY, toks, &owner);
        }
        Ok(corpus)
    }

    fn summarize(&self, corpus: &Corpus) -> Result<SummaryTable> {
        let (mut n, mut sentences, mut tokens) = (0usize, 0usize, 0usize);
        for u in corpus.utterances() {
            let s = annotated_tokens(u)?;
            n += 1;
            sentences += s.len();
            tokens += s.iter().map(Vec::len).sum::<usize>();
        }
        let mean = |x: usize| if n == 0 { 0.0 } else { x as f64 / n as f64 };
        let mut t = SummaryTable::new("statistic", &["value"]);
        t.push_row("utterances", vec![n.into()]);
        t.push_row("mean_sentences", vec![mean(sentences).into()]);
        t.push_row("mean_tokens", vec![mean(tokens).into()]);
        Ok(t)
    }
}

/// Folds a reply into its parent when it is the parent's only reply and has
/// the same speaker, repeating to a fixed point. Texts join with a newline,
/// the parent's metadata wins on conflicts, and the earliest timestamp is
/// kept.
#[derive(Debug, Clone, Default)]
pub struct MergeConsecutive;

pub const MERGED_COUNT_KEY: &str = "merge_consecutive";

fn fold_into(parent: &mut Utterance, child: Utterance) {
    parent.text.push('\n');
    parent.text.push_str(&child.text);
    parent.timestamp = match (parent.timestamp, child.timestamp) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let mut merged: MetaTable = child.meta;
    for (k, v) in parent.meta.iter() {
        if let Some(old) = merged.get(k) {
            if old != v {
                log::warn!(
                    "merge_consecutive: {:?} keeps its {k:?} over {:?}",
                    parent.id,
                    child.id
                );
            }
        }
        merged.insert(k.clone(), v.clone());
    }
    parent.meta = merged;
}

/// Merge consecutive same-speaker utterances in place; returns the number of
/// folds performed.
pub fn merge_consecutive(corpus: &mut Corpus) -> Result<usize> {
    let mut folds = 0;
    let convo_ids: Vec<String> = corpus.conversations().map(|c| c.id().to_owned()).collect();
    for cid in convo_ids {
        let order: Vec<String> = corpus
            .traverse(&cid, TraversalOrder::Bfs)?
            .into_iter()
            .map(|u| u.id.clone())
            .collect();
        let mut children: HashMap<String, Vec<String>> = HashMap::new();
        for u in corpus.conversation_utterances(&cid)? {
            if let Some(p) = &u.reply_to {
                children.entry(p.clone()).or_default().push(u.id.clone());
            }
        }
        // Top-down: folding below a node never changes whether the node
        // itself can fold into its parent.
        for uid in order {
            if corpus.utterance(&uid).is_none() {
                continue;
            }
            while let Some([only]) = children.get(&uid).map(Vec::as_slice) {
                let only_child = only.clone();
                let same = corpus.utterance(&only_child).map(|u| &u.speaker_id)
                    == corpus.utterance(&uid).map(|u| &u.speaker_id);
                if !same {
                    break;
                }
                let child = corpus.detach_utterance(&only_child).expect("child exists");
                let grandkids = children.remove(&only_child).unwrap_or_default();
                for g in &grandkids {
                    corpus.utterance_mut(g).expect("grandchild exists").reply_to =
                        Some(uid.clone());
                }
                children.insert(uid.clone(), grandkids);
                fold_into(corpus.utterance_mut(&uid).expect("parent exists"), child);
                folds += 1;
            }
        }
    }
    Ok(folds)
}

impl Transformer for MergeConsecutive {
    fn name(&self) -> &str {
        "merge_consecutive"
    }

    fn is_structural(&self) -> bool {
        true
    }

    fn transform<'c>(&self, corpus: &'c mut Corpus) -> Result<&'c mut Corpus> {
        let folds = merge_consecutive(corpus)?;
        corpus.meta.annotate(MERGED_COUNT_KEY, folds, "corpus");
        Ok(corpus)
    }

    fn summarize(&self, corpus: &Corpus) -> Result<SummaryTable> {
        let folds = corpus
            .meta
            .get(MERGED_COUNT_KEY)
            .cloned()
            .ok_or_else(|| missing(MERGED_COUNT_KEY, "corpus"))?;
        let mut t = SummaryTable::new("statistic", &["value"]);
        t.push_row("merged", vec![folds]);
        t.push_row("utterances", vec![corpus.utterance_count().into()]);
        Ok(t)
    }
}
