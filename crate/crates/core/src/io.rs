//! On-disk corpus layout, corpus merging, and tabular import/export.
//!
//! A corpus directory holds four UTF-8 files:
//!
//! * `manifest.json`      format version, object counts, corpus metadata
//! * `utterances.jsonl`   one utterance object per line
//! * `speakers.json`      speaker id -> `{"meta": {...}}`
//! * `conversations.json` conversation id -> `{"meta": {...}}`
//!
//! Output is byte-stable: maps are written in key order and utterance records
//! in id order with a fixed field order.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::{MetaTable, MetaValue};
use crate::model::{Corpus, CorpusBuilder, Speaker, Utterance};

pub const FORMAT_VERSION: &str = "1.0";

pub const MANIFEST_FILE: &str = "manifest.json";
pub const UTTERANCES_FILE: &str = "utterances.jsonl";
pub const SPEAKERS_FILE: &str = "speakers.json";
pub const CONVERSATIONS_FILE: &str = "conversations.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub format_version: String,
    pub utterance_count: usize,
    pub conversation_count: usize,
    pub speaker_count: usize,
    pub corpus_meta: MetaTable,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtteranceRecord {
    id: String,
    conversation_id: String,
    reply_to: Option<String>,
    speaker: String,
    timestamp: Option<i64>,
    text: String,
    #[serde(default)]
    meta: MetaTable,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaEntry {
    #[serde(default)]
    meta: MetaTable,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn save(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let report = corpus.check_integrity();
    if !report.is_empty() {
        return Err(Error::IntegrityViolation(report.violations));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let manifest = CorpusManifest {
        format_version: FORMAT_VERSION.to_owned(),
        utterance_count: corpus.utterance_count(),
        conversation_count: corpus.conversation_count(),
        speaker_count: corpus.speaker_count(),
        corpus_meta: corpus.meta.clone(),
    };

    let mut lines = String::new();
    for u in corpus.utterances() {
        let record = UtteranceRecord {
            id: u.id.clone(),
            conversation_id: u.conversation_id.clone(),
            reply_to: u.reply_to.clone(),
            speaker: u.speaker_id.clone(),
            timestamp: u.timestamp,
            text: u.text.clone(),
            meta: u.meta.clone(),
        };
        lines.push_str(&serde_json::to_string(&record)?);
        lines.push('\n');
    }

    let speakers: BTreeMap<&str, MetaEntry> = corpus
        .speakers()
        .map(|s| {
            (
                s.id.as_str(),
                MetaEntry {
                    meta: s.meta.clone(),
                },
            )
        })
        .collect();
    let conversations: BTreeMap<&str, MetaEntry> = corpus
        .conversations()
        .map(|c| {
            (
                c.id(),
                MetaEntry {
                    meta: c.meta.clone(),
                },
            )
        })
        .collect();

    write_file(&dir.join(UTTERANCES_FILE), &lines)?;
    write_file(&dir.join(SPEAKERS_FILE), &pretty(&speakers)?)?;
    write_file(&dir.join(CONVERSATIONS_FILE), &pretty(&conversations)?)?;
    write_file(&dir.join(MANIFEST_FILE), &pretty(&manifest)?)?;
    Ok(())
}

fn malformed(file: &str, line: u64, reason: impl ToString) -> Error {
    Error::MalformedRecord {
        file: file.to_owned(),
        line,
        reason: reason.to_string(),
    }
}

fn parse_doc<T: for<'de> Deserialize<'de>>(file: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| malformed(file, e.line() as u64, e))
}

fn check_version(version: &str) -> Result<()> {
    match version.split('.').next() {
        Some("1") => Ok(()),
        _ => Err(Error::UnsupportedVersion(version.to_owned())),
    }
}

fn check_count(what: &'static str, declared: usize, found: usize) -> Result<()> {
    if declared == found {
        Ok(())
    } else {
        Err(Error::CountMismatch {
            what,
            declared,
            found,
        })
    }
}

pub fn load(dir: impl AsRef<Path>) -> Result<Corpus> {
    let corpus = load_unchecked(dir)?;
    let report = corpus.check_integrity();
    if !report.is_empty() {
        return Err(Error::IntegrityViolation(report.violations));
    }
    Ok(corpus)
}

/// Read a corpus directory without enforcing the reply-tree invariants.
pub fn load_unchecked(dir: impl AsRef<Path>) -> Result<Corpus> {
    let dir = dir.as_ref();
    let manifest: CorpusManifest = parse_doc(MANIFEST_FILE, &read_file(&dir.join(MANIFEST_FILE))?)?;
    check_version(&manifest.format_version)?;

    let raw = read_file(&dir.join(UTTERANCES_FILE))?;
    let mut utterances = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let lineno = i as u64 + 1;
        if line.trim().is_empty() {
            return Err(malformed(UTTERANCES_FILE, lineno, "empty line"));
        }
        let r: UtteranceRecord =
            serde_json::from_str(line).map_err(|e| malformed(UTTERANCES_FILE, lineno, e))?;
        utterances.push(Utterance {
            id: r.id,
            speaker_id: r.speaker,
            conversation_id: r.conversation_id,
            reply_to: r.reply_to,
            timestamp: r.timestamp,
            text: r.text,
            meta: r.meta,
        });
    }
    check_count("utterances", manifest.utterance_count, utterances.len())?;

    let speakers: BTreeMap<String, MetaEntry> =
        parse_doc(SPEAKERS_FILE, &read_file(&dir.join(SPEAKERS_FILE))?)?;
    let conversations: BTreeMap<String, MetaEntry> = parse_doc(
        CONVERSATIONS_FILE,
        &read_file(&dir.join(CONVERSATIONS_FILE))?,
    )?;

    let mut builder = CorpusBuilder::new()
        .strict(true)
        .corpus_meta(manifest.corpus_meta)
        .speakers(
            speakers
                .into_iter()
                .map(|(id, e)| Speaker::new(id).with_meta(e.meta))
                .collect(),
        );
    for (id, e) in conversations {
        builder = builder.conversation_meta(id, e.meta);
    }
    let corpus = builder.build_unchecked(utterances)?;
    check_count("speakers", manifest.speaker_count, corpus.speaker_count())?;
    check_count(
        "conversations",
        manifest.conversation_count,
        corpus.conversation_count(),
    )?;
    Ok(corpus)
}

/// One metadata key whose value differed between the two merged corpora.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeConflict {
    pub kind: &'static str,
    pub id: String,
    pub key: String,
    pub kept: MetaValue,
    pub dropped: MetaValue,
}

#[derive(Debug, Clone)]
pub struct Merged {
    pub corpus: Corpus,
    pub log: Vec<MergeConflict>,
}

fn merge_meta(
    kind: &'static str,
    id: &str,
    into: &mut MetaTable,
    from: &MetaTable,
    log: &mut Vec<MergeConflict>,
) {
    for (k, v) in from {
        match into.get(k) {
            Some(old) if old == v => {}
            Some(old) => {
                log.push(MergeConflict {
                    kind,
                    id: id.to_owned(),
                    key: k.clone(),
                    kept: v.clone(),
                    dropped: old.clone(),
                });
                into.insert(k.clone(), v.clone());
            }
            None => {
                into.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Union of two corpora. Metadata collisions resolve key-wise in favour of
/// `b` and are logged; differing structural fields on a shared utterance id
/// are an error.
pub fn merge(a: &Corpus, b: &Corpus) -> Result<Merged> {
    let mut log = Vec::new();

    let mut utterances: BTreeMap<String, Utterance> =
        a.utterances().map(|u| (u.id.clone(), u.clone())).collect();
    for u in b.utterances() {
        match utterances.get_mut(&u.id) {
            None => {
                utterances.insert(u.id.clone(), u.clone());
            }
            Some(old) => {
                let field = if old.speaker_id != u.speaker_id {
                    Some("speaker")
                } else if old.conversation_id != u.conversation_id {
                    Some("conversation_id")
                } else if old.reply_to != u.reply_to {
                    Some("reply_to")
                } else if old.timestamp != u.timestamp {
                    Some("timestamp")
                } else if old.text != u.text {
                    Some("text")
                } else {
                    None
                };
                if let Some(field) = field {
                    return Err(Error::IrreconcilableCollision {
                        kind: "utterance",
                        id: u.id.clone(),
                        field,
                    });
                }
                merge_meta("utterance", &u.id, &mut old.meta, &u.meta, &mut log);
            }
        }
    }

    let mut speakers: BTreeMap<String, Speaker> =
        a.speakers().map(|s| (s.id.clone(), s.clone())).collect();
    for s in b.speakers() {
        match speakers.get_mut(&s.id) {
            Some(old) => merge_meta("speaker", &s.id, &mut old.meta, &s.meta, &mut log),
            None => {
                speakers.insert(s.id.clone(), s.clone());
            }
        }
    }

    let mut convo_meta: BTreeMap<String, MetaTable> = a
        .conversations()
        .map(|c| (c.id().to_owned(), c.meta.clone()))
        .collect();
    for c in b.conversations() {
        match convo_meta.get_mut(c.id()) {
            Some(old) => merge_meta("conversation", c.id(), old, &c.meta, &mut log),
            None => {
                convo_meta.insert(c.id().to_owned(), c.meta.clone());
            }
        }
    }

    let mut corpus_meta = a.meta.clone();
    merge_meta("corpus", "", &mut corpus_meta, &b.meta, &mut log);

    let mut builder = CorpusBuilder::new()
        .speakers(speakers.into_values().collect())
        .corpus_meta(corpus_meta);
    for (id, meta) in convo_meta {
        builder = builder.conversation_meta(id, meta);
    }
    let corpus = builder.build(utterances.into_values().collect())?;
    Ok(Merged { corpus, log })
}

/// Column mapping for delimiter-separated utterance tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportMapping {
    pub id: String,
    pub speaker_id: String,
    pub conversation_id: String,
    pub text: String,
    #[serde(default)]
    pub reply_to: Option<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
    #[serde(default)]
    pub meta_columns: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl ImportMapping {
    pub fn new(id: &str, speaker_id: &str, conversation_id: &str, text: &str) -> Self {
        ImportMapping {
            id: id.to_owned(),
            speaker_id: speaker_id.to_owned(),
            conversation_id: conversation_id.to_owned(),
            text: text.to_owned(),
            reply_to: None,
            timestamp: None,
            meta_columns: Vec::new(),
            delimiter: ',',
        }
    }

    /// Mapping matching the header written by [`export_tabular`].
    pub fn standard(delimiter: char) -> Self {
        ImportMapping {
            reply_to: Some("reply_to".into()),
            timestamp: Some("timestamp".into()),
            delimiter,
            ..Self::new("id", "speaker", "conversation_id", "text")
        }
    }

    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| {
                Error::InvalidConfig(format!("delimiter {:?} is not ASCII", self.delimiter))
            })
    }
}

pub const EXPORT_COLUMNS: [&str; 6] = [
    "id",
    "speaker",
    "conversation_id",
    "reply_to",
    "timestamp",
    "text",
];

pub fn import_tabular(path: impl AsRef<Path>, mapping: &ImportMapping) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    import_tabular_reader(file, mapping, &path.display().to_string())
}

pub fn import_tabular_reader<R: Read>(
    reader: R,
    mapping: &ImportMapping,
    source: &str,
) -> Result<Corpus> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter_byte()?)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| malformed(source, 1, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let id_col = column(&mapping.id)?;
    let speaker_col = column(&mapping.speaker_id)?;
    let convo_col = column(&mapping.conversation_id)?;
    let text_col = column(&mapping.text)?;
    let reply_col = mapping.reply_to.as_deref().map(column).transpose()?;
    let ts_col = mapping.timestamp.as_deref().map(column).transpose()?;
    let meta_cols = mapping
        .meta_columns
        .iter()
        .map(|m| column(m).map(|i| (m.clone(), i)))
        .collect::<Result<Vec<_>>>()?;

    let mut utterances = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(source, line, e)
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let cell = |i: usize| row.get(i).unwrap_or("");
        let required = |i: usize, what: &str| {
            let v = cell(i);
            if v.is_empty() {
                Err(malformed(source, line, format!("empty {what} cell")))
            } else {
                Ok(v.to_owned())
            }
        };
        let id = required(id_col, "id")?;
        let speaker = required(speaker_col, "speaker")?;
        let source_convo = required(convo_col, "conversation")?;
        let mut meta: MetaTable = meta_cols
            .iter()
            .map(|(name, i)| (name.clone(), MetaValue::from(cell(*i))))
            .collect();
        let (conversation_id, reply_to) = match reply_col {
            Some(i) => {
                let r = cell(i);
                (source_convo, (!r.is_empty()).then(|| r.to_owned()))
            }
            None => {
                // Without reply links every row roots its own conversation.
                meta.insert("source_conversation_id", source_convo);
                (id.clone(), None)
            }
        };
        let timestamp = match ts_col.map(cell).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => Some(s.trim().parse::<i64>().map_err(|_| {
                malformed(source, line, format!("timestamp {s:?} is not an integer"))
            })?),
        };
        utterances.push(Utterance {
            id,
            speaker_id: speaker,
            conversation_id,
            reply_to,
            timestamp,
            text: cell(text_col).to_owned(),
            meta,
        });
    }
    crate::model::build_corpus(utterances, None)
}

/// Write one row per utterance (id order) with the [`EXPORT_COLUMNS`] header.
pub fn export_tabular<W: Write>(corpus: &Corpus, writer: W, delimiter: char) -> Result<()> {
    let delim = ImportMapping {
        delimiter,
        ..ImportMapping::standard(delimiter)
    }
    .delimiter_byte()?;
    let mut w = csv::WriterBuilder::new()
        .delimiter(delim)
        .from_writer(writer);
    let csv_err = |e: csv::Error| Error::InvalidConfig(e.to_string());
    w.write_record(EXPORT_COLUMNS).map_err(csv_err)?;
    for u in corpus.utterances() {
        let ts = u.timestamp.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([
            u.id.as_str(),
            u.speaker_id.as_str(),
            u.conversation_id.as_str(),
            u.reply_to.as_deref().unwrap_or(""),
            ts.as_str(),
            u.text.as_str(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<export>", e))?;
    Ok(())
}
