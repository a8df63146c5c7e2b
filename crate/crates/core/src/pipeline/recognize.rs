use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::sentences::{sentence_at, split_sentences};
use crate::sidecar::SidecarClient;
use crate::types::{Document, EntityKind, EntityMention, Span};

/// One entity found by a recognizer, before it is tied to a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecognizedEntity {
    pub surface: String,
    pub kind: EntityKind,
    pub span: Span,
}

pub trait EntityRecognizer: Send + Sync {
    fn name(&self) -> &str;
    fn recognize(&self, text: &str) -> Result<Vec<RecognizedEntity>>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub surface: String,
    pub kind: String,
}

/// Exact-match recognizer over a fixed list of surfaces.
///
/// Matches are case-sensitive, aligned to word boundaries, and
/// leftmost-longest: "Narendra Modi" wins over "Modi" inside it.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    // Sorted by descending byte length so the first hit at a position is the longest.
    entries: Vec<(String, EntityKind)>,
}

impl Gazetteer {
    pub fn new(entries: impl IntoIterator<Item = (String, EntityKind)>) -> Self {
        let mut entries: Vec<_> = entries
            .into_iter()
            .filter(|(s, _)| !s.trim().is_empty())
            .collect();
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        entries.dedup_by(|a, b| a.0 == b.0);
        Self { entries }
    }

    pub fn from_entries(entries: Vec<GazetteerEntry>) -> Result<Self> {
        let parsed = entries
            .into_iter()
            .map(|e| {
                EntityKind::parse(&e.kind)
                    .map(|k| (e.surface.clone(), k))
                    .ok_or_else(|| {
                        Error::Invalid(format!("gazetteer entry {:?}: unknown kind {:?}", e.surface, e.kind))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(parsed))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<GazetteerEntry> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::from_entries(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

impl EntityRecognizer for Gazetteer {
    fn name(&self) -> &str {
        "gazetteer"
    }

    fn recognize(&self, text: &str) -> Result<Vec<RecognizedEntity>> {
        let mut found = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let at_boundary = text[..pos].chars().next_back().is_none_or(|c| !is_word_char(c));
            let hit = at_boundary
                .then(|| {
                    self.entries.iter().find(|(surface, _)| {
                        text[pos..].starts_with(surface.as_str())
                            && text[pos + surface.len()..]
                                .chars()
                                .next()
                                .is_none_or(|c| !is_word_char(c))
                    })
                })
                .flatten();
            match hit {
                Some((surface, kind)) => {
                    found.push(RecognizedEntity {
                        surface: surface.clone(),
                        kind: *kind,
                        span: Span::new(pos, pos + surface.len()),
                    });
                    pos += surface.len();
                }
                None => {
                    pos += text[pos..].chars().next().map_or(1, char::len_utf8);
                }
            }
        }
        Ok(found)
    }
}

/// Recognizer backed by the sidecar's `/v1/ner` endpoint.
#[derive(Debug, Clone)]
pub struct SidecarRecognizer {
    client: SidecarClient,
    name: String,
}

impl SidecarRecognizer {
    pub fn new(client: SidecarClient) -> Self {
        let name = format!("sidecar-ner({})", client.endpoint());
        Self { client, name }
    }
}

impl EntityRecognizer for SidecarRecognizer {
    fn name(&self) -> &str {
        &self.name
    }

    fn recognize(&self, text: &str) -> Result<Vec<RecognizedEntity>> {
        self.client
            .ner(text)?
            .into_iter()
            .map(|e| {
                let kind = EntityKind::parse(&e.kind).unwrap_or(EntityKind::Other);
                Ok(RecognizedEntity {
                    surface: e.surface,
                    kind,
                    span: Span::new(e.start, e.end),
                })
            })
            .collect()
    }
}

/// Runs the recognizer over a document and ties each hit to its sentence.
///
/// Any provider failure, including a hit whose span does not reproduce its
/// surface, is reported against the provider.
pub fn recognize_entities(doc: &Document, recognizer: &dyn EntityRecognizer) -> Result<Vec<EntityMention>> {
    let provider_error = |message: String| Error::Provider {
        provider: recognizer.name().to_string(),
        message,
    };
    let hits = recognizer.recognize(&doc.text).map_err(|e| match e {
        e @ Error::Provider { .. } => e,
        other => provider_error(other.to_string()),
    })?;
    let sentences = split_sentences(&doc.text);
    let mut mentions = Vec::with_capacity(hits.len());
    for hit in hits {
        let sentence_index = sentence_at(&sentences, hit.span.start).ok_or_else(|| {
            provider_error(format!(
                "entity {:?} at {}..{} in {:?} is outside every sentence",
                hit.surface, hit.span.start, hit.span.end, doc.id
            ))
        })?;
        let mention = EntityMention {
            surface: hit.surface,
            entity_kind: hit.kind,
            doc_id: doc.id.clone(),
            char_span: hit.span,
            sentence_index,
        };
        mention.validate(doc).map_err(|e| provider_error(e.to_string()))?;
        mentions.push(mention);
    }
    mentions.sort_by_key(|m| m.char_span);
    Ok(mentions)
}

/// Keeps persons, geopolitical entities and organizations, in order.
pub fn filter_stakeholder_kinds(mentions: Vec<EntityMention>) -> Vec<EntityMention> {
    mentions
        .into_iter()
        .filter(|m| m.entity_kind.is_stakeholder_kind())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document {
            id: "d1".into(),
            topic: "Demonetization".into(),
            title: "t".into(),
            text: text.into(),
            source: "s".into(),
            date: None,
        }
    }

    fn gazetteer() -> Gazetteer {
        Gazetteer::new([
            ("Narendra Modi".to_string(), EntityKind::Person),
            ("Modi".to_string(), EntityKind::Person),
            ("RBI".to_string(), EntityKind::Organization),
            ("India".to_string(), EntityKind::GeopoliticalEntity),
            ("Diwali".to_string(), EntityKind::Other),
        ])
    }

    #[test]
    fn exact_spans_per_occurrence() {
        let d = doc("Narendra Modi spoke. Later Modi met the RBI. Modi left.");
        let mentions = recognize_entities(&d, &gazetteer()).unwrap();
        let got: Vec<_> = mentions
            .iter()
            .map(|m| (m.surface.as_str(), m.char_span.start, m.sentence_index))
            .collect();
        assert_eq!(
            got,
            [("Narendra Modi", 0, 0), ("Modi", 27, 1), ("RBI", 40, 1), ("Modi", 45, 2)]
        );
        for m in &mentions {
            assert_eq!(&d.text[m.char_span.start..m.char_span.end], m.surface);
        }
    }

    #[test]
    fn word_boundaries_respected() {
        let d = doc("Indian banks and RBIs filings. Modified rules.");
        assert!(recognize_entities(&d, &gazetteer()).unwrap().is_empty());
    }

    #[test]
    fn no_hits_is_empty() {
        assert!(recognize_entities(&doc("Nothing here."), &gazetteer()).unwrap().is_empty());
    }

    struct Broken;
    impl EntityRecognizer for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn recognize(&self, _: &str) -> Result<Vec<RecognizedEntity>> {
            Ok(vec![RecognizedEntity {
                surface: "RBI".into(),
                kind: EntityKind::Organization,
                span: Span::new(0, 4),
            }])
        }
    }

    #[test]
    fn bad_provider_span_names_provider() {
        let err = recognize_entities(&doc("RBI acted."), &Broken).unwrap_err();
        assert!(matches!(err, Error::Provider { ref provider, .. } if provider == "broken"), "{err}");
    }

    #[test]
    fn filter_kinds() {
        let d = doc("Modi celebrated Diwali with RBI staff.");
        let mentions = recognize_entities(&d, &gazetteer()).unwrap();
        assert_eq!(mentions.len(), 3);
        let kept = filter_stakeholder_kinds(mentions);
        let kinds: Vec<_> = kept.iter().map(|m| m.entity_kind).collect();
        assert_eq!(kinds, [EntityKind::Person, EntityKind::Organization]);
        assert_eq!(filter_stakeholder_kinds(kept.clone()), kept);
        let only_other = recognize_entities(&doc("Diwali came."), &gazetteer()).unwrap();
        assert!(filter_stakeholder_kinds(only_other).is_empty());
    }

    #[test]
    fn gazetteer_rejects_unknown_kind() {
        let entries = vec![GazetteerEntry {
            surface: "X".into(),
            kind: "Planet".into(),
        }];
        assert!(Gazetteer::from_entries(entries).is_err());
    }
}
