//! Conversational corpora: a speaker, conversation and utterance data model
//! with reply trees, a directory serialization format, and a set of
//! transformers that annotate corpora with linguistic and structural
//! features.
//!
//! Numeric analyzers are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix them to `f64`.

pub mod attributes;
pub mod diversity;
pub mod error;
pub mod fighting_words;
pub mod filter;
pub mod hyperconvo;
pub mod io;
pub mod meta;
pub mod ml;
pub mod model;
pub mod num;
pub mod politeness;
pub mod registry;
pub mod text;
pub mod transform;

pub use error::{Error, Result};
pub use meta::{MetaTable, MetaValue};
pub use model::{
    build_corpus, Conversation, Corpus, CorpusBuilder, Speaker, TraversalOrder, Utterance,
    UtteranceRef,
};
pub use num::Scalar;
pub use transform::{Pipeline, SummaryTable, Transformer};

pub type FwModel = fighting_words::FwModel<f64>;
pub type StructureFeatures = hyperconvo::StructureFeatures<f64>;
pub type DiversityScore = diversity::DiversityScore<f64>;
pub type LinearModel = ml::LinearModel<f64>;
pub type SparseVector = ml::SparseVector<f64>;
