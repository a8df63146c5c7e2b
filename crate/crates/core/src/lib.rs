//! Stakeholder classification for news entities.
//!
//! Entities are recognized in a topic corpus, resolved within and across
//! documents, described from their context sentences plus an optional
//! encyclopedia background, and classified by scoring entailment between the
//! description and one templated hypothesis per candidate stakeholder label.

pub mod error;
pub mod evaluate;
pub mod http;
pub mod ingest;
pub mod jsonl;
pub mod knowledge;
pub mod nli;
pub mod pipeline;
pub mod sidecar;
pub mod similarity;
pub mod types;
pub mod zeroshot;

pub use error::{Error, Result};
pub use types::{
    Document, EntityDescription, EntityKind, EntityMention, LabelRegistry, PipelineConfig, Snippet,
    Span, StakeholderLabel,
};
