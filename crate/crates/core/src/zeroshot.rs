//! Zero-shot stakeholder classification from entailment scores.
//!
//! Each candidate label is turned into a hypothesis with a prompt template,
//! scored against the entity description by an [`EntailmentScorer`], and the
//! best-scoring label (or labels) win. Labels are plain strings supplied at
//! call time, so a label never seen during training is scored the same way.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::nli::PromptTemplate;
use crate::pipeline::DescribedEntity;
use crate::sidecar::SidecarClient;
use crate::types::{EntityDescription, LabelRegistry, StakeholderLabel};

pub trait EntailmentScorer: Send + Sync {
    /// Identifies the backend in reports and error messages.
    fn id(&self) -> String;

    /// One score in [0, 1] per (premise, hypothesis) pair, in input order.
    fn score_batch(&self, pairs: &[(String, String)]) -> Result<Vec<f64>>;
}

/// Template words ignored on the hypothesis side of [`lexical_score`].
pub const SCAFFOLD_WORDS: &[&str] = &[
    "the",
    "entity",
    "belongs",
    "to",
    "stakeholder",
    "group",
    "of",
    "is",
    "type",
];

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Share of the hypothesis' content words that occur in the premise.
pub fn lexical_score(premise: &str, hypothesis: &str) -> f64 {
    let content: HashSet<String> = tokens(hypothesis)
        .filter(|t| !SCAFFOLD_WORDS.contains(&t.as_str()))
        .collect();
    if content.is_empty() {
        return 0.0;
    }
    let premise: HashSet<String> = tokens(premise).collect();
    content.iter().filter(|t| premise.contains(*t)).count() as f64 / content.len() as f64
}

/// Deterministic word-overlap baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl EntailmentScorer for LexicalScorer {
    fn id(&self) -> String {
        "lexical".to_string()
    }

    fn score_batch(&self, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        Ok(pairs.iter().map(|(p, h)| lexical_score(p, h)).collect())
    }
}

/// Scores through the sidecar's `/v1/entail` endpoint.
#[derive(Debug, Clone)]
pub struct SidecarScorer {
    client: SidecarClient,
}

impl SidecarScorer {
    pub fn new(client: SidecarClient) -> Self {
        Self { client }
    }
}

impl EntailmentScorer for SidecarScorer {
    fn id(&self) -> String {
        format!("sidecar({})", self.client.endpoint())
    }

    fn score_batch(&self, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        self.client.entail(pairs)
    }
}

/// Sends pairs to the sidecar in chunks of `max_batch`.
pub fn sidecar_score_batch(client: &SidecarClient, pairs: &[(String, String)]) -> Result<Vec<f64>> {
    client.entail(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Single(String),
    Multi(Vec<String>),
}

impl Prediction {
    pub fn top(&self) -> Option<&str> {
        match self {
            Prediction::Single(l) => Some(l),
            Prediction::Multi(ls) => ls.first().map(String::as_str),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub entity_phrase: String,
    /// One entry per candidate, in candidate order.
    pub scores: Vec<LabelScore>,
    pub predicted: Prediction,
    pub template_id: String,
}

impl ClassificationResult {
    pub fn score_map(&self) -> BTreeMap<&str, f64> {
        self.scores.iter().map(|s| (s.label.as_str(), s.score)).collect()
    }

    pub fn score_of(&self, label: &str) -> Option<f64> {
        self.scores.iter().find(|s| s.label == label).map(|s| s.score)
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub topic: String,
    pub entity_phrase: String,
    pub template_id: String,
    pub backend: String,
    pub predicted: Prediction,
    pub scores: Vec<LabelScore>,
}

impl PredictionRecord {
    pub fn new(topic: &str, backend: &str, result: ClassificationResult) -> Self {
        Self {
            topic: topic.to_string(),
            entity_phrase: result.entity_phrase,
            template_id: result.template_id,
            backend: backend.to_string(),
            predicted: result.predicted,
            scores: result.scores,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Single,
    Multi { threshold: f64, k: usize },
}

/// Classifies every described entity against the candidates of its topic,
/// keeping input order.
pub fn classify_described(
    entities: &[DescribedEntity],
    registry: &LabelRegistry,
    template: &PromptTemplate,
    scorer: &dyn EntailmentScorer,
    mode: Mode,
) -> Result<Vec<PredictionRecord>> {
    let backend = scorer.id();
    entities
        .par_iter()
        .map(|e| {
            let candidates = registry.candidates_for_topic(&e.topic)?;
            let result = match mode {
                Mode::Single => classify_single(&e.description, &candidates, template, scorer)?,
                Mode::Multi { threshold, k } => {
                    classify_multi(&e.description, &candidates, template, scorer, threshold, k)?
                }
            };
            Ok(PredictionRecord::new(&e.topic, &backend, result))
        })
        .collect()
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    jsonl::write(path, records)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    jsonl::read(path)
}

fn score_candidates(
    description: &EntityDescription,
    candidates: &[&StakeholderLabel],
    template: &PromptTemplate,
    scorer: &dyn EntailmentScorer,
) -> Result<Vec<LabelScore>> {
    if candidates.is_empty() {
        return Err(Error::Invalid(format!(
            "no candidate labels for {:?}",
            description.entity_name
        )));
    }
    let pairs: Vec<(String, String)> = candidates
        .iter()
        .map(|c| {
            (
                description.rendered.clone(),
                template.render(&description.entity_name, &c.name),
            )
        })
        .collect();
    let backend_failure = |message: String| Error::Backend {
        backend: scorer.id(),
        message,
        retryable: false,
    };
    let scores = scorer.score_batch(&pairs).map_err(|e| match e {
        e @ (Error::Backend { .. } | Error::Protocol { .. }) => e,
        other => backend_failure(other.to_string()),
    })?;
    if scores.len() != candidates.len() {
        return Err(backend_failure(format!(
            "returned {} scores for {} pairs",
            scores.len(),
            candidates.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(backend_failure(format!("score {bad} outside [0, 1]")));
    }
    Ok(candidates
        .iter()
        .zip(scores)
        .map(|(c, score)| LabelScore {
            label: c.name.clone(),
            score,
        })
        .collect())
}

/// Highest-scoring label; the earliest candidate wins ties.
pub fn classify_single(
    description: &EntityDescription,
    candidates: &[&StakeholderLabel],
    template: &PromptTemplate,
    scorer: &dyn EntailmentScorer,
) -> Result<ClassificationResult> {
    let scores = score_candidates(description, candidates, template, scorer)?;
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, s)| if s.score > scores[best].score { i } else { best });
    Ok(ClassificationResult {
        entity_phrase: description.entity_name.clone(),
        predicted: Prediction::Single(scores[best].label.clone()),
        scores,
        template_id: template.id().to_string(),
    })
}

/// Up to `k` labels scoring at least `threshold`, best first; candidate
/// order breaks ties.
pub fn classify_multi(
    description: &EntityDescription,
    candidates: &[&StakeholderLabel],
    template: &PromptTemplate,
    scorer: &dyn EntailmentScorer,
    threshold: f64,
    k: usize,
) -> Result<ClassificationResult> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Invalid(format!("threshold {threshold} outside [0, 1]")));
    }
    if k == 0 {
        return Err(Error::Invalid("top-k must be positive".into()));
    }
    let scores = score_candidates(description, candidates, template, scorer)?;
    let mut ranked: Vec<&LabelScore> = scores.iter().filter(|s| s.score >= threshold).collect();
    // Stable sort keeps candidate order among equal scores.
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    let predicted = ranked.into_iter().take(k).map(|s| s.label.clone()).collect();
    Ok(ClassificationResult {
        entity_phrase: description.entity_name.clone(),
        predicted: Prediction::Multi(predicted),
        scores,
        template_id: template.id().to_string(),
    })
}
