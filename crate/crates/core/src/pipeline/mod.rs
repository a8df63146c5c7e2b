//! From documents to aggregated entity descriptions.
//!
//! recognize -> keep stakeholder kinds -> within-document chains -> saliency
//! -> cross-document closure -> background lookup -> description.
//! Per-document stages run in parallel on the current rayon pool; the
//! cross-document step is a sequential reduction over their outputs.

mod context;
mod coref;
mod cross_doc;
mod recognize;
mod sentences;

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use context::{build_description, wd_context, ClusterContext};
pub use coref::{resolve_within_doc, salient_clusters, CoreferenceResolver, EntityCluster, SimilarityResolver};
pub use cross_doc::{resolve_cross_doc, CrossDocEntity};
pub use recognize::{
    filter_stakeholder_kinds, recognize_entities, EntityRecognizer, Gazetteer, GazetteerEntry,
    RecognizedEntity, SidecarRecognizer,
};
pub use sentences::{sentence_at, split_sentences, Sentence};

use crate::error::{Error, Result};
use crate::types::{Document, EntityDescription, EntityKind, PipelineConfig};

/// One line of a description file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescribedEntity {
    pub topic: String,
    pub entity_phrase: String,
    pub entity_kind: EntityKind,
    pub documents: Vec<String>,
    pub description: EntityDescription,
}

/// Source of background text for an entity phrase.
pub trait BackgroundSource: Sync {
    fn background(&self, phrase: &str) -> Result<Option<String>>;
}

/// No background for anyone.
pub struct NoBackground;

impl BackgroundSource for NoBackground {
    fn background(&self, _phrase: &str) -> Result<Option<String>> {
        Ok(None)
    }
}

/// Salient clusters of one document.
pub fn document_clusters(
    doc: &Document,
    recognizer: &dyn EntityRecognizer,
    resolver: &dyn CoreferenceResolver,
    config: &PipelineConfig,
) -> Result<Vec<EntityCluster>> {
    let mentions = filter_stakeholder_kinds(recognize_entities(doc, recognizer)?);
    let clusters = resolve_within_doc(doc, &mentions, resolver)?;
    Ok(salient_clusters(clusters, config.saliency_min_mentions))
}

/// Runs the whole pipeline. Cross-document resolution happens within each
/// topic; topics appear in corpus order.
pub fn describe_corpus(
    documents: &[Document],
    recognizer: &dyn EntityRecognizer,
    resolver: &dyn CoreferenceResolver,
    background: &dyn BackgroundSource,
    config: &PipelineConfig,
) -> Result<Vec<DescribedEntity>> {
    config.validate()?;
    let per_doc: Vec<Vec<EntityCluster>> = documents
        .par_iter()
        .map(|doc| document_clusters(doc, recognizer, resolver, config))
        .collect::<Result<_>>()?;

    let by_id: HashMap<&str, &Document> = documents.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut topics: Vec<&str> = Vec::new();
    let mut topic_clusters: HashMap<&str, Vec<EntityCluster>> = HashMap::new();
    for (doc, clusters) in documents.iter().zip(per_doc) {
        if !topic_clusters.contains_key(doc.topic.as_str()) {
            topics.push(doc.topic.as_str());
        }
        topic_clusters.entry(doc.topic.as_str()).or_default().extend(clusters);
    }

    let mut out = Vec::new();
    for topic in topics {
        let clusters = topic_clusters.remove(topic).unwrap_or_default();
        for entity in resolve_cross_doc(clusters, config) {
            let contexts: Vec<ClusterContext> = entity
                .clusters
                .iter()
                .map(|c| ClusterContext::new(by_id[c.doc_id.as_str()], c))
                .collect();
            let bg = background.background(&entity.canonical)?;
            let description = build_description(&entity, &contexts, bg.as_deref(), config)?;
            let mut documents: Vec<String> = Vec::new();
            for c in &entity.clusters {
                if !documents.contains(&c.doc_id) {
                    documents.push(c.doc_id.clone());
                }
            }
            out.push(DescribedEntity {
                topic: topic.to_string(),
                entity_phrase: entity.canonical,
                entity_kind: entity.entity_kind,
                documents,
                description,
            });
        }
    }
    Ok(out)
}

pub fn write_descriptions(path: &Path, entities: &[DescribedEntity]) -> Result<()> {
    crate::jsonl::write(path, entities)
}

pub fn read_descriptions(path: &Path) -> Result<Vec<DescribedEntity>> {
    let records: Vec<(usize, DescribedEntity)> = crate::jsonl::read_numbered(path)?;
    for (line, r) in &records {
        if !r.description.is_consistent() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: *line,
                message: format!("rendered text of {:?} does not match its parts", r.entity_phrase),
            });
        }
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}
