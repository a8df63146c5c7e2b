//! Shared domain types: stakeholder labels and their registry, documents,
//! entity mentions, aggregated entity descriptions, and pipeline settings.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Registry shipped with the crate: the five policy topics and their
/// stakeholder groups.
pub const DEFAULT_REGISTRY_JSON: &str = include_str!("../data/registry.json");

/// One stakeholder class.
///
/// A label that is not topic-specific applies to every topic in the
/// registry; its `topics` list is either empty or names every known topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StakeholderLabel {
    pub name: String,
    pub topic_specific: bool,
    #[serde(default)]
    pub topics: Vec<String>,
}

impl StakeholderLabel {
    pub fn applies_to(&self, topic: &str) -> bool {
        !self.topic_specific || self.topics.iter().any(|t| t == topic)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    labels: Vec<StakeholderLabel>,
}

/// The label set, with per-topic candidate lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRegistry {
    labels: Vec<StakeholderLabel>,
    topics: Vec<String>,
}

impl LabelRegistry {
    pub fn new(labels: Vec<StakeholderLabel>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut topics: Vec<String> = Vec::new();
        for label in &labels {
            if label.name.trim().is_empty() {
                return Err(Error::Invalid("stakeholder label with empty name".into()));
            }
            if !seen.insert(label.name.as_str()) {
                return Err(Error::DuplicateLabel(label.name.clone()));
            }
            if label.topic_specific && label.topics.is_empty() {
                return Err(Error::Invalid(format!(
                    "topic-specific label {:?} lists no topics",
                    label.name
                )));
            }
            for topic in &label.topics {
                if !topics.contains(topic) {
                    topics.push(topic.clone());
                }
            }
        }
        // A common label that enumerates topics must enumerate all of them.
        for label in labels.iter().filter(|l| !l.topic_specific && !l.topics.is_empty()) {
            if let Some(missing) = topics.iter().find(|t| !label.topics.contains(t)) {
                return Err(Error::Invalid(format!(
                    "common label {:?} does not list topic {missing:?}",
                    label.name
                )));
            }
        }
        if labels.is_empty() {
            return Err(Error::Invalid("label registry is empty".into()));
        }
        Ok(Self { labels, topics })
    }

    /// The registry built from [`DEFAULT_REGISTRY_JSON`].
    pub fn builtin() -> Self {
        Self::from_json_str(DEFAULT_REGISTRY_JSON, Path::new("<builtin registry>"))
            .expect("builtin registry is valid")
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let file: RegistryFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::new(file.labels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    /// Canonical rendering: two-space pretty JSON with a trailing newline.
    pub fn to_json_string(&self) -> String {
        let file = RegistryFile {
            labels: self.labels.clone(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("registry serializes");
        out.push('\n');
        out
    }

    pub fn labels(&self) -> &[StakeholderLabel] {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&StakeholderLabel> {
        self.labels.iter().find(|l| l.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.label(name).is_some()
    }

    /// Topics named anywhere in the registry, in order of first appearance.
    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    /// Common labels plus the topic's specific labels, in registry order.
    pub fn candidates_for_topic(&self, topic: &str) -> Result<Vec<&StakeholderLabel>> {
        if !self.topics.iter().any(|t| t == topic) {
            return Err(Error::UnknownTopic {
                topic: topic.to_string(),
                known: self.topics.clone(),
            });
        }
        Ok(self.labels.iter().filter(|l| l.applies_to(topic)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub topic: String,
    pub title: String,
    pub text: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Person,
    GeopoliticalEntity,
    Organization,
    Other,
}

impl EntityKind {
    /// Accepts the canonical names plus the usual NER tag spellings.
    pub fn parse(tag: &str) -> Option<Self> {
        match tag.trim() {
            "Person" | "PERSON" | "PER" => Some(Self::Person),
            "GeopoliticalEntity" | "GPE" | "Geopolitical-entity" => Some(Self::GeopoliticalEntity),
            "Organization" | "ORG" | "Organisation" => Some(Self::Organization),
            "Other" => Some(Self::Other),
            _ => None,
        }
    }

    /// Kinds that can carry a stakeholder role.
    pub fn is_stakeholder_kind(self) -> bool {
        !matches!(self, Self::Other)
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Person => "Person",
            Self::GeopoliticalEntity => "GeopoliticalEntity",
            Self::Organization => "Organization",
            Self::Other => "Other",
        };
        f.write_str(s)
    }
}

/// Half-open byte range into a document's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        text.get(self.start..self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    pub entity_kind: EntityKind,
    pub doc_id: String,
    pub char_span: Span,
    pub sentence_index: usize,
}

impl EntityMention {
    /// Checks the span against the owning document.
    pub fn validate(&self, doc: &Document) -> Result<()> {
        if self.doc_id != doc.id {
            return Err(Error::Invalid(format!(
                "mention {:?} belongs to {:?}, not {:?}",
                self.surface, self.doc_id, doc.id
            )));
        }
        match self.char_span.slice(&doc.text) {
            Some(s) if s == self.surface && !s.is_empty() => Ok(()),
            Some(s) => Err(Error::Invalid(format!(
                "mention {:?} does not match text {:?} at {}..{} in {:?}",
                self.surface, s, self.char_span.start, self.char_span.end, doc.id
            ))),
            None => Err(Error::Invalid(format!(
                "mention {:?} span {}..{} is out of bounds or splits a character in {:?}",
                self.surface, self.char_span.start, self.char_span.end, doc.id
            ))),
        }
    }
}

/// One context sentence contributing to an entity description.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Snippet {
    pub doc_id: String,
    pub sentence_index: usize,
    pub text: String,
}

/// Background text followed by ordered context snippets; `rendered` is the
/// premise handed to the entailment scorer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDescription {
    pub entity_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<String>,
    pub snippets: Vec<Snippet>,
    pub rendered: String,
}

impl EntityDescription {
    pub fn new(
        entity_name: impl Into<String>,
        background: Option<String>,
        snippets: Vec<Snippet>,
    ) -> Result<Self> {
        let entity_name = entity_name.into();
        if snippets.is_empty() {
            return Err(Error::Invalid(format!(
                "description of {entity_name:?} has no snippets"
            )));
        }
        let background = background.filter(|b| !b.trim().is_empty());
        let rendered = render(background.as_deref(), &snippets);
        Ok(Self {
            entity_name,
            background,
            snippets,
            rendered,
        })
    }

    /// True when `rendered` is consistent with the parts.
    pub fn is_consistent(&self) -> bool {
        !self.snippets.is_empty() && self.rendered == render(self.background.as_deref(), &self.snippets)
    }
}

fn render(background: Option<&str>, snippets: &[Snippet]) -> String {
    background
        .into_iter()
        .chain(snippets.iter().map(|s| s.text.as_str()))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Tunables for the description pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub saliency_min_mentions: usize,
    pub jw_threshold: f64,
    pub jw_prefix_scale: f64,
    pub max_premise_chars: usize,
    pub background_sentences: usize,
    pub template_id: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            saliency_min_mentions: 2,
            jw_threshold: 0.85,
            jw_prefix_scale: 0.1,
            max_premise_chars: 2000,
            background_sentences: 3,
            template_id: "original".to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.saliency_min_mentions == 0 {
            return Err(Error::Config("saliency_min_mentions must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.jw_threshold) {
            return Err(Error::Config(format!(
                "jw_threshold {} outside [0, 1]",
                self.jw_threshold
            )));
        }
        if !(0.0..=0.25).contains(&self.jw_prefix_scale) {
            return Err(Error::Config(format!(
                "jw_prefix_scale {} outside [0, 0.25]",
                self.jw_prefix_scale
            )));
        }
        if self.max_premise_chars == 0 {
            return Err(Error::Config("max_premise_chars must be positive".into()));
        }
        if self.background_sentences == 0 {
            return Err(Error::Config("background_sentences must be positive".into()));
        }
        if self.template_id.trim().is_empty() {
            return Err(Error::Config("template_id must not be empty".into()));
        }
        if !(0.8..=0.9).contains(&self.jw_threshold) {
            log::warn!(
                "jw_threshold {} is outside the 0.8-0.9 range that works well for cross-document matching",
                self.jw_threshold
            );
        }
        Ok(())
    }

    /// Reads a JSON object whose fields override the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }
}
