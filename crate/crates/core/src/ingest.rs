//! Corpus and labeled-data loading, keyword topic filtering, and
//! seen/unseen dataset splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::types::{Document, EntityDescription, LabelRegistry, Snippet};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub topic: Option<String>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Writes the corpus back in its line-delimited form.
    pub fn write(&self, path: &Path) -> Result<()> {
        jsonl::write(path, &self.documents)
    }
}

/// Reads a line-delimited corpus. Document ids must be unique and texts
/// non-empty.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let records: Vec<(usize, Document)> = jsonl::read_numbered(path)?;
    let mut ids = HashSet::new();
    for (line, doc) in &records {
        if doc.text.trim().is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: *line,
                message: format!("document {:?} has empty text", doc.id),
            });
        }
        if !ids.insert(doc.id.as_str()) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line: *line,
                id: doc.id.clone(),
            });
        }
    }
    let documents: Vec<Document> = records.into_iter().map(|(_, d)| d).collect();
    if documents.is_empty() {
        log::warn!("{}: corpus is empty", path.display());
    } else {
        log::info!("{}: loaded {} documents", path.display(), documents.len());
    }
    let topic = match documents.first() {
        Some(first) if documents.iter().all(|d| d.topic == first.topic) => Some(first.topic.clone()),
        _ => None,
    };
    Ok(Corpus { documents, topic })
}

/// Keeps documents whose lowercased text contains at least `min_hits`
/// distinct keywords.
pub fn filter_by_topic(corpus: &Corpus, include_keywords: &[String], min_hits: usize) -> Result<Corpus> {
    let keywords: BTreeSet<String> = include_keywords
        .iter()
        .map(|k| k.trim().to_lowercase())
        .filter(|k| !k.is_empty())
        .collect();
    if keywords.is_empty() {
        return Err(Error::Invalid("topic filter needs at least one keyword".into()));
    }
    if min_hits == 0 {
        return Err(Error::Invalid("min_hits must be positive".into()));
    }
    let documents = corpus
        .documents
        .iter()
        .filter(|doc| {
            let text = doc.text.to_lowercase();
            keywords.iter().filter(|k| text.contains(k.as_str())).count() >= min_hits
        })
        .cloned()
        .collect();
    Ok(Corpus {
        documents,
        topic: corpus.topic.clone(),
    })
}

/// An annotated entity: its description and gold stakeholder label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub entity_phrase: String,
    pub description: EntityDescription,
    pub label: String,
    pub topic: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    background: Option<String>,
    snippets: Vec<SnippetRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnippetRecord {
    doc_id: String,
    sentence_index: usize,
    text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabeledRecord {
    entity_phrase: String,
    description: DescriptionRecord,
    label: String,
    topic: String,
}

impl From<&LabeledExample> for LabeledRecord {
    fn from(ex: &LabeledExample) -> Self {
        Self {
            entity_phrase: ex.entity_phrase.clone(),
            description: DescriptionRecord {
                background: ex.description.background.clone(),
                snippets: ex
                    .description
                    .snippets
                    .iter()
                    .map(|s| SnippetRecord {
                        doc_id: s.doc_id.clone(),
                        sentence_index: s.sentence_index,
                        text: s.text.clone(),
                    })
                    .collect(),
            },
            label: ex.label.clone(),
            topic: ex.topic.clone(),
        }
    }
}

/// Reads labeled examples and checks every label against the registry.
pub fn load_labeled(path: &Path, registry: &LabelRegistry) -> Result<Vec<LabeledExample>> {
    let records: Vec<(usize, LabeledRecord)> = jsonl::read_numbered(path)?;
    let mut out = Vec::with_capacity(records.len());
    for (line, r) in records {
        let record_name = format!("{}:{} ({:?})", path.display(), line, r.entity_phrase);
        if !registry.contains(&r.label) {
            return Err(Error::UnknownLabel {
                record: record_name,
                label: r.label,
            });
        }
        let snippets = r
            .description
            .snippets
            .into_iter()
            .map(|s| Snippet {
                doc_id: s.doc_id,
                sentence_index: s.sentence_index,
                text: s.text,
            })
            .collect();
        let description = EntityDescription::new(r.entity_phrase.clone(), r.description.background, snippets)
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
        out.push(LabeledExample {
            entity_phrase: r.entity_phrase,
            description,
            label: r.label,
            topic: r.topic,
        });
    }
    Ok(out)
}

pub fn write_labeled(path: &Path, examples: &[LabeledExample]) -> Result<()> {
    let records: Vec<LabeledRecord> = examples.iter().map(LabeledRecord::from).collect();
    jsonl::write(path, &records)
}

/// Instance and label counts per topic, in first-seen order.
pub fn topic_statistics(examples: &[LabeledExample]) -> Vec<(String, usize, usize)> {
    let mut order: Vec<&str> = Vec::new();
    let mut stats: BTreeMap<&str, (usize, BTreeSet<&str>)> = BTreeMap::new();
    for ex in examples {
        let entry = stats.entry(ex.topic.as_str()).or_insert_with(|| {
            order.push(ex.topic.as_str());
            (0, BTreeSet::new())
        });
        entry.0 += 1;
        entry.1.insert(ex.label.as_str());
    }
    order
        .into_iter()
        .map(|t| (t.to_string(), stats[t].0, stats[t].1.len()))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplits {
    pub train: Vec<LabeledExample>,
    pub dev: Vec<LabeledExample>,
    pub test_seen: Vec<LabeledExample>,
    pub test_unseen: Vec<LabeledExample>,
}

fn label_set(examples: &[LabeledExample]) -> BTreeSet<&str> {
    examples.iter().map(|e| e.label.as_str()).collect()
}

impl DatasetSplits {
    pub fn labels(&self) -> [BTreeSet<&str>; 4] {
        [
            label_set(&self.train),
            label_set(&self.dev),
            label_set(&self.test_seen),
            label_set(&self.test_unseen),
        ]
    }

    /// Seen test labels come from training; unseen test labels never do.
    pub fn check(&self) -> Result<()> {
        let [train, dev, seen, unseen] = self.labels();
        if let Some(l) = seen.iter().find(|l| !train.contains(*l)) {
            return Err(Error::Invalid(format!("seen test label {l:?} missing from train")));
        }
        if let Some(l) = dev.iter().find(|l| !train.contains(*l)) {
            return Err(Error::Invalid(format!("dev label {l:?} missing from train")));
        }
        if let Some(l) = unseen.iter().find(|l| train.contains(*l)) {
            return Err(Error::Invalid(format!("unseen test label {l:?} appears in train")));
        }
        Ok(())
    }
}

/// Routes every example of an unseen label to `test_unseen`; the rest is
/// split per label into dev and seen-test shares of `dev_fraction` each,
/// with at least one training example kept per label.
pub fn make_splits(
    examples: &[LabeledExample],
    unseen_labels: &BTreeSet<String>,
    dev_fraction: f64,
    seed: u64,
) -> Result<DatasetSplits> {
    if !(dev_fraction > 0.0 && dev_fraction < 0.5) {
        return Err(Error::Invalid(format!(
            "dev_fraction {dev_fraction} must lie in (0, 0.5): dev and seen-test each take that share"
        )));
    }
    let all = label_set(examples);
    if let Some(l) = unseen_labels.iter().find(|l| !all.contains(l.as_str())) {
        return Err(Error::Invalid(format!("unseen label {l:?} has no examples")));
    }
    if !all.is_empty() && all.iter().all(|l| unseen_labels.contains(*l)) {
        return Err(Error::Invalid("every label is unseen; the training split would be empty".into()));
    }

    let mut splits = DatasetSplits::default();
    let mut by_label: BTreeMap<&str, Vec<&LabeledExample>> = BTreeMap::new();
    for ex in examples {
        if unseen_labels.contains(&ex.label) {
            splits.test_unseen.push(ex.clone());
        } else {
            by_label.entry(ex.label.as_str()).or_default().push(ex);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (_, mut group) in by_label {
        group.shuffle(&mut rng);
        let n = group.len();
        let share = (n as f64 * dev_fraction).round() as usize;
        let mut dev = share;
        let mut test = share;
        if n >= 2 {
            dev = dev.max(1);
        }
        while dev + test >= n && (dev + test) > 0 {
            if test > 0 {
                test -= 1;
            } else {
                dev -= 1;
            }
        }
        splits.dev.extend(group[..dev].iter().map(|e| (*e).clone()));
        splits.test_seen.extend(group[dev..dev + test].iter().map(|e| (*e).clone()));
        splits.train.extend(group[dev + test..].iter().map(|e| (*e).clone()));
    }
    splits.check()?;
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn example(entity: &str, label: &str) -> LabeledExample {
        LabeledExample {
            entity_phrase: entity.into(),
            description: EntityDescription::new(
                entity,
                None,
                vec![Snippet {
                    doc_id: "d".into(),
                    sentence_index: 0,
                    text: format!("{entity} spoke."),
                }],
            )
            .unwrap(),
            label: label.into(),
            topic: "T".into(),
        }
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const DOC: &str = r#"{"id":"ID","topic":"Demonetization","title":"t","text":"Banknote news.","source":"s"}"#;

    #[test]
    fn loads_three_documents() {
        let body: String = (1..=3).map(|i| DOC.replace("ID", &i.to_string()) + "\n").collect();
        let f = write_tmp(&body);
        let corpus = load_corpus(f.path()).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.topic.as_deref(), Some("Demonetization"));
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let f = write_tmp("");
        assert!(load_corpus(f.path()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_names_line() {
        let body = format!("{}\n{}\n", DOC.replace("ID", "a"), DOC.replace("ID", "a"));
        let f = write_tmp(&body);
        match load_corpus(f.path()).unwrap_err() {
            Error::DuplicateId { line, id, .. } => {
                assert_eq!(line, 2);
                assert_eq!(id, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line() {
        let body = format!("{}\n{{not json\n", DOC.replace("ID", "a"));
        let f = write_tmp(&body);
        assert!(matches!(load_corpus(f.path()).unwrap_err(), Error::Parse { line: 2, .. }));
    }

    #[test]
    fn keyword_filter() {
        let mk = |id: &str, text: &str| Document {
            id: id.into(),
            topic: "T".into(),
            title: String::new(),
            text: text.into(),
            source: String::new(),
            date: None,
        };
        let corpus = Corpus {
            documents: vec![
                mk("a", "The Banknote ban hit traders."),
                mk("b", "Demonetisation and banknote queues."),
                mk("c", "Cricket scores."),
            ],
            topic: None,
        };
        let kw = vec!["demonetisation".to_string(), "banknote".to_string()];
        let ids = |c: Corpus| c.documents.into_iter().map(|d| d.id).collect::<Vec<_>>();
        assert_eq!(ids(filter_by_topic(&corpus, &kw, 1).unwrap()), ["a", "b"]);
        assert_eq!(ids(filter_by_topic(&corpus, &kw, 2).unwrap()), ["b"]);
        assert!(filter_by_topic(&corpus, &[], 1).is_err());
    }

    #[test]
    fn labeled_unknown_label() {
        let registry = LabelRegistry::builtin();
        let ok = r#"{"entity_phrase":"RBI","description":{"snippets":[{"doc_id":"d","sentence_index":0,"text":"RBI acted."}]},"label":"Government","topic":"Demonetization"}"#;
        let f = write_tmp(&format!("{ok}\n"));
        let loaded = load_labeled(f.path(), &registry).unwrap();
        assert_eq!(loaded[0].description.rendered, "RBI acted.");

        let bad = ok.replace("Government", "Aliens");
        let f = write_tmp(&format!("{ok}\n{bad}\n"));
        match load_labeled(f.path(), &registry).unwrap_err() {
            Error::UnknownLabel { record, label } => {
                assert_eq!(label, "Aliens");
                assert!(record.contains(":2"), "{record}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn labeled_round_trip() {
        let registry = LabelRegistry::builtin();
        let mut ex = example("RBI", "Banking Sector");
        ex.description = EntityDescription::new("RBI", Some("Background.".into()), ex.description.snippets).unwrap();
        ex.topic = "Demonetization".into();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_labeled(f.path(), std::slice::from_ref(&ex)).unwrap();
        assert_eq!(load_labeled(f.path(), &registry).unwrap(), vec![ex]);
    }

    #[test]
    fn unseen_labels_go_to_unseen_split() {
        let examples: Vec<_> = (0..10)
            .map(|i| example(&format!("e{i}"), if i % 3 == 0 { "B" } else { "A" }))
            .collect();
        let unseen: BTreeSet<String> = ["B".to_string()].into();
        let splits = make_splits(&examples, &unseen, 0.2, 7).unwrap();
        assert_eq!(splits.test_unseen.len(), 4);
        assert!(splits.test_unseen.iter().all(|e| e.label == "B"));
        for part in [&splits.train, &splits.dev, &splits.test_seen] {
            assert!(part.iter().all(|e| e.label == "A"));
        }
        let total = splits.train.len() + splits.dev.len() + splits.test_seen.len() + splits.test_unseen.len();
        assert_eq!(total, 10);
    }

    #[test]
    fn empty_unseen_set() {
        let examples: Vec<_> = (0..6).map(|i| example(&format!("e{i}"), "A")).collect();
        let splits = make_splits(&examples, &BTreeSet::new(), 0.2, 1).unwrap();
        assert!(splits.test_unseen.is_empty());
        assert_eq!(splits.dev.len(), 1);
    }

    #[test]
    fn all_unseen_rejected() {
        let examples: Vec<_> = (0..4).map(|i| example(&format!("e{i}"), "A")).collect();
        let unseen: BTreeSet<String> = ["A".to_string()].into();
        assert!(make_splits(&examples, &unseen, 0.2, 1).is_err());
        assert!(make_splits(&examples, &BTreeSet::new(), 0.6, 1).is_err());
    }
}
