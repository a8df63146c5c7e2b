//! Precision, recall and F1 for single-label predictions, plus the
//! template-robustness sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LabeledExample;
use crate::jsonl;
use crate::nli::PromptTemplate;
use crate::pipeline::DescribedEntity;
use crate::types::LabelRegistry;
use crate::zeroshot::{classify_single, ClassificationResult, EntailmentScorer, PredictionRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Per-label counts over a fixed label universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionTable {
    counts: BTreeMap<String, Counts>,
    n_gold: usize,
}

impl ConfusionTable {
    /// Gold labels must belong to `universe`. A prediction outside the
    /// universe is a miss for its gold label and is not otherwise counted.
    pub fn build(golds: &[String], preds: &[String], universe: &[String]) -> Result<Self> {
        if golds.len() != preds.len() {
            return Err(Error::Invalid(format!(
                "{} gold labels but {} predictions",
                golds.len(),
                preds.len()
            )));
        }
        let mut counts: BTreeMap<String, Counts> =
            universe.iter().map(|l| (l.clone(), Counts::default())).collect();
        for (gold, pred) in golds.iter().zip(preds) {
            if !counts.contains_key(gold) {
                return Err(Error::Invalid(format!("gold label {gold:?} outside the label universe")));
            }
            if gold == pred {
                counts.get_mut(gold).unwrap().tp += 1;
                continue;
            }
            counts.get_mut(gold).unwrap().fn_ += 1;
            if let Some(c) = counts.get_mut(pred) {
                c.fp += 1;
            }
        }
        Ok(Self {
            counts,
            n_gold: golds.len(),
        })
    }

    pub fn counts(&self) -> &BTreeMap<String, Counts> {
        &self.counts
    }

    pub fn n_gold(&self) -> usize {
        self.n_gold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub template_id: String,
    pub backend: String,
    pub n_examples: usize,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_label: Vec<LabelMetrics>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl EvalReport {
    /// Macro-averaged metrics; labels with no predictions have precision 0.
    pub fn from_table(table: &ConfusionTable) -> Self {
        let per_label: Vec<LabelMetrics> = table
            .counts()
            .iter()
            .map(|(label, c)| {
                let precision = ratio(c.tp, c.tp + c.fp);
                let recall = ratio(c.tp, c.tp + c.fn_);
                LabelMetrics {
                    label: label.clone(),
                    precision,
                    recall,
                    f1: harmonic(precision, recall),
                    counts: *c,
                }
            })
            .collect();
        let mean = |f: fn(&LabelMetrics) -> f64| {
            if per_label.is_empty() {
                0.0
            } else {
                per_label.iter().map(f).sum::<f64>() / per_label.len() as f64
            }
        };
        Self {
            split: String::new(),
            template_id: String::new(),
            backend: String::new(),
            n_examples: table.n_gold(),
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            per_label,
        }
    }

    pub fn label(&self, name: &str) -> Option<&LabelMetrics> {
        self.per_label.iter().find(|m| m.label == name)
    }
}

pub fn score_predictions(golds: &[String], preds: &[String], universe: &[String]) -> Result<EvalReport> {
    Ok(EvalReport::from_table(&ConfusionTable::build(golds, preds, universe)?))
}

/// Classifies every example against the candidates of its topic.
pub fn classify_examples(
    examples: &[LabeledExample],
    registry: &LabelRegistry,
    template: &PromptTemplate,
    scorer: &dyn EntailmentScorer,
) -> Result<Vec<ClassificationResult>> {
    examples
        .par_iter()
        .map(|ex| {
            let candidates = registry.candidates_for_topic(&ex.topic)?;
            classify_single(&ex.description, &candidates, template, scorer)
        })
        .collect()
}

pub fn evaluate_split(
    split: &str,
    examples: &[LabeledExample],
    registry: &LabelRegistry,
    template: &PromptTemplate,
    scorer: &dyn EntailmentScorer,
) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::Invalid(format!("split {split:?} is empty")));
    }
    let results = classify_examples(examples, registry, template, scorer)?;
    let golds: Vec<String> = examples.iter().map(|e| e.label.clone()).collect();
    let preds: Vec<String> = results
        .iter()
        .map(|r| r.predicted.top().unwrap_or_default().to_string())
        .collect();
    let universe: Vec<String> = golds.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let mut report = score_predictions(&golds, &preds, &universe)?;
    report.split = split.to_string();
    report.template_id = template.id().to_string();
    report.backend = scorer.id();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub reports: Vec<EvalReport>,
    pub max_spread: f64,
}

impl RobustnessReport {
    pub fn from_reports(reports: Vec<EvalReport>) -> Result<Self> {
        if reports.len() < 2 {
            return Err(Error::Invalid(format!(
                "robustness needs at least 2 templates, got {}",
                reports.len()
            )));
        }
        let f1s = reports.iter().map(|r| r.macro_f1);
        let max = f1s.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = f1s.fold(f64::INFINITY, f64::min);
        Ok(Self {
            reports,
            max_spread: max - min,
        })
    }
}

pub fn robustness_sweep(
    split: &str,
    examples: &[LabeledExample],
    registry: &LabelRegistry,
    templates: &[PromptTemplate],
    scorer: &dyn EntailmentScorer,
) -> Result<RobustnessReport> {
    if templates.len() < 2 {
        return Err(Error::Invalid(format!(
            "robustness needs at least 2 templates, got {}",
            templates.len()
        )));
    }
    let reports = templates
        .iter()
        .map(|t| evaluate_split(split, examples, registry, t, scorer))
        .collect::<Result<Vec<_>>>()?;
    RobustnessReport::from_reports(reports)
}

/// One line of a gold file; `split` names the evaluation split
/// (for example `seen` or `unseen`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldRecord {
    pub topic: String,
    pub entity_phrase: String,
    pub label: String,
    pub split: String,
}

pub fn read_golds(path: &Path, registry: &LabelRegistry) -> Result<Vec<GoldRecord>> {
    let records: Vec<(usize, GoldRecord)> = jsonl::read_numbered(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, r) in records {
        let record = format!("{}:{} ({:?})", path.display(), line, r.entity_phrase);
        if !registry.contains(&r.label) {
            return Err(Error::UnknownLabel { record, label: r.label });
        }
        if !seen.insert((r.topic.clone(), r.entity_phrase.clone())) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: format!("{}/{}", r.topic, r.entity_phrase),
            });
        }
        out.push(r);
    }
    Ok(out)
}

pub fn write_golds(path: &Path, golds: &[GoldRecord]) -> Result<()> {
    jsonl::write(path, golds)
}

fn split_order(golds: &[GoldRecord]) -> Vec<&str> {
    let mut order: Vec<&str> = Vec::new();
    for g in golds {
        if !order.contains(&g.split.as_str()) {
            order.push(&g.split);
        }
    }
    order
}

/// Scores a predictions file against golds, one report per split in order
/// of first appearance. Every gold needs exactly one prediction and vice
/// versa.
pub fn evaluate_predictions(predictions: &[PredictionRecord], golds: &[GoldRecord]) -> Result<Vec<EvalReport>> {
    let mut by_key: BTreeMap<(&str, &str), &PredictionRecord> = BTreeMap::new();
    for p in predictions {
        if by_key.insert((&p.topic, &p.entity_phrase), p).is_some() {
            return Err(Error::Invalid(format!(
                "two predictions for {:?} in topic {:?}",
                p.entity_phrase, p.topic
            )));
        }
    }
    let gold_keys: BTreeSet<(&str, &str)> = golds.iter().map(|g| (g.topic.as_str(), g.entity_phrase.as_str())).collect();
    if let Some((topic, phrase)) = by_key.keys().find(|k| !gold_keys.contains(*k)) {
        return Err(Error::Invalid(format!("prediction for {phrase:?} in topic {topic:?} has no gold label")));
    }

    let mut reports = Vec::new();
    for split in split_order(golds) {
        let members: Vec<&GoldRecord> = golds.iter().filter(|g| g.split == split).collect();
        let mut gold_labels = Vec::with_capacity(members.len());
        let mut preds = Vec::with_capacity(members.len());
        let mut meta: Option<(&str, &str)> = None;
        for g in &members {
            let p = by_key.get(&(g.topic.as_str(), g.entity_phrase.as_str())).ok_or_else(|| {
                Error::Invalid(format!(
                    "gold {:?} in topic {:?} has no prediction",
                    g.entity_phrase, g.topic
                ))
            })?;
            let this = (p.template_id.as_str(), p.backend.as_str());
            if *meta.get_or_insert(this) != this {
                return Err(Error::Invalid("predictions mix templates or backends".into()));
            }
            gold_labels.push(g.label.clone());
            preds.push(p.predicted.top().unwrap_or_default().to_string());
        }
        let universe: Vec<String> = gold_labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let mut report = score_predictions(&gold_labels, &preds, &universe)?;
        let (template_id, backend) = meta.unwrap_or_default();
        report.split = split.to_string();
        report.template_id = template_id.to_string();
        report.backend = backend.to_string();
        reports.push(report);
    }
    Ok(reports)
}

/// Pairs descriptions with their gold labels, grouped by split in order of
/// first appearance.
pub fn labeled_splits(
    descriptions: &[DescribedEntity],
    golds: &[GoldRecord],
) -> Result<Vec<(String, Vec<LabeledExample>)>> {
    let by_key: BTreeMap<(&str, &str), &DescribedEntity> = descriptions
        .iter()
        .map(|d| ((d.topic.as_str(), d.entity_phrase.as_str()), d))
        .collect();
    split_order(golds)
        .into_iter()
        .map(|split| {
            let examples = golds
                .iter()
                .filter(|g| g.split == split)
                .map(|g| {
                    let d = by_key.get(&(g.topic.as_str(), g.entity_phrase.as_str())).ok_or_else(|| {
                        Error::Invalid(format!(
                            "gold {:?} in topic {:?} has no description",
                            g.entity_phrase, g.topic
                        ))
                    })?;
                    Ok(LabeledExample {
                        entity_phrase: g.entity_phrase.clone(),
                        description: d.description.clone(),
                        label: g.label.clone(),
                        topic: g.topic.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((split.to_string(), examples))
        })
        .collect()
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

pub fn write_report<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_pretty_json(value)).map_err(|e| Error::io(path, e))
}

const CSV_HEADER: [&str; 10] = [
    "split", "template_id", "backend", "label", "precision", "recall", "f1", "tp", "fp", "fn",
];

/// One row per (split, template, label).
pub fn write_csv<W: Write>(out: W, reports: &[&EvalReport]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Invalid(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        for m in &r.per_label {
            w.write_record([
                r.split.as_str(),
                &r.template_id,
                &r.backend,
                &m.label,
                &m.precision.to_string(),
                &m.recall.to_string(),
                &m.f1.to_string(),
                &m.counts.tp.to_string(),
                &m.counts.fp.to_string(),
                &m.counts.fn_.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Invalid(format!("writing CSV: {e}")))
}
