//! Classification examples as premise/hypothesis entailment pairs.
//!
//! Every labeled example expands to one pair per candidate label of its
//! topic: the premise is the rendered entity description, the hypothesis is
//! a prompt naming the entity and the label, and only the gold label's pair
//! is marked as entailed.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::LabeledExample;
use crate::jsonl;
use crate::types::{LabelRegistry, StakeholderLabel};

pub const DEFAULT_TEMPLATES_JSON: &str = include_str!("../data/templates.json");

const ENTITY_SLOT: &str = "{e}";
const LABEL_SLOT: &str = "{S}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptTemplate {
    id: String,
    pattern: String,
}

impl PromptTemplate {
    /// Both `{e}` and `{S}` must occur exactly once.
    pub fn new(id: impl Into<String>, pattern: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let pattern = pattern.into();
        for slot in [ENTITY_SLOT, LABEL_SLOT] {
            let count = pattern.matches(slot).count();
            if count != 1 {
                return Err(Error::Template {
                    id,
                    message: format!("placeholder {slot} occurs {count} times, expected once"),
                });
            }
        }
        if id.trim().is_empty() {
            return Err(Error::Template {
                id,
                message: "empty template id".into(),
            });
        }
        Ok(Self { id, pattern })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    /// Substitutes both slots in one pass, so an entity containing `{S}`
    /// is never re-expanded.
    pub fn render(&self, entity: &str, label: &str) -> String {
        let (first, first_value, second, second_value) =
            if self.pattern.find(ENTITY_SLOT) < self.pattern.find(LABEL_SLOT) {
                (ENTITY_SLOT, entity, LABEL_SLOT, label)
            } else {
                (LABEL_SLOT, label, ENTITY_SLOT, entity)
            };
        let (head, rest) = self.pattern.split_once(first).expect("validated");
        let (middle, tail) = rest.split_once(second).expect("validated");
        let mut out = String::with_capacity(self.pattern.len() + entity.len() + label.len());
        out.push_str(head);
        out.push_str(first_value);
        out.push_str(middle);
        out.push_str(second_value);
        out.push_str(tail);
        out
    }
}

impl<'de> Deserialize<'de> for PromptTemplate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            id: String,
            pattern: String,
        }
        let raw = Raw::deserialize(d)?;
        PromptTemplate::new(raw.id, raw.pattern).map_err(serde::de::Error::custom)
    }
}

pub fn render_prompt(template: &PromptTemplate, entity: &str, label: &str) -> Result<String> {
    if entity.trim().is_empty() || label.trim().is_empty() {
        return Err(Error::Invalid("prompt needs a non-empty entity and label".into()));
    }
    Ok(template.render(entity, label))
}

/// Templates by id, validated at load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateRegistry {
    templates: Vec<PromptTemplate>,
}

impl TemplateRegistry {
    pub fn new(templates: Vec<PromptTemplate>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for t in &templates {
            if !seen.insert(t.id.as_str()) {
                return Err(Error::Template {
                    id: t.id.clone(),
                    message: "duplicate template id".into(),
                });
            }
        }
        Ok(Self { templates })
    }

    /// The three templates shipped with the crate: `original`, `template1`,
    /// `template2`.
    pub fn builtin() -> Self {
        Self::from_json_str(DEFAULT_TEMPLATES_JSON, Path::new("<builtin templates>"))
            .expect("builtin templates are valid")
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let templates: Vec<PromptTemplate> = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::new(templates)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, path)
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate> {
        self.templates.iter().find(|t| t.id == id).ok_or_else(|| Error::Template {
            id: id.to_string(),
            message: format!(
                "unknown template (available: {})",
                self.templates.iter().map(|t| t.id.as_str()).collect::<Vec<_>>().join(", ")
            ),
        })
    }

    pub fn templates(&self) -> &[PromptTemplate] {
        &self.templates
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NliInstance {
    pub group_id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: u8,
    pub entity_phrase: String,
    pub stakeholder: String,
    pub template_id: String,
}

/// Stable id derived from the example's content.
pub fn group_id(example: &LabeledExample) -> String {
    let mut h = Sha256::new();
    for part in [&example.topic, &example.entity_phrase, &example.description.rendered] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())[..16].to_string()
}

pub fn to_nli(
    example: &LabeledExample,
    candidates: &[&StakeholderLabel],
    template: &PromptTemplate,
) -> Result<Vec<NliInstance>> {
    to_nli_with_group(example, candidates, template, group_id(example))
}

fn to_nli_with_group(
    example: &LabeledExample,
    candidates: &[&StakeholderLabel],
    template: &PromptTemplate,
    group: String,
) -> Result<Vec<NliInstance>> {
    if !candidates.iter().any(|c| c.name == example.label) {
        return Err(Error::Invalid(format!(
            "gold label {:?} of {:?} is not a candidate for topic {:?}",
            example.label, example.entity_phrase, example.topic
        )));
    }
    if example.description.rendered.trim().is_empty() {
        return Err(Error::Invalid(format!(
            "empty premise for {:?}",
            example.entity_phrase
        )));
    }
    candidates
        .iter()
        .map(|c| {
            Ok(NliInstance {
                group_id: group.clone(),
                premise: example.description.rendered.clone(),
                hypothesis: render_prompt(template, &example.entity_phrase, &c.name)?,
                label: u8::from(c.name == example.label),
                entity_phrase: example.entity_phrase.clone(),
                stakeholder: c.name.clone(),
                template_id: template.id.clone(),
            })
        })
        .collect()
}

/// Expands every example against its topic's candidates, in input order.
/// Duplicate examples get `-2`, `-3`, ... suffixed group ids.
pub fn compile_dataset(
    examples: &[LabeledExample],
    registry: &LabelRegistry,
    template: &PromptTemplate,
) -> Result<Vec<NliInstance>> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for example in examples {
        let candidates = registry.candidates_for_topic(&example.topic)?;
        let base = group_id(example);
        let n = seen.entry(base.clone()).or_insert(0);
        *n += 1;
        let group = if *n == 1 { base } else { format!("{base}-{n}") };
        out.extend(to_nli_with_group(example, &candidates, template, group)?);
    }
    Ok(out)
}

pub fn write_nli(path: &Path, instances: &[NliInstance]) -> Result<()> {
    jsonl::write(path, instances)
}

pub fn read_nli(path: &Path) -> Result<Vec<NliInstance>> {
    let records: Vec<(usize, NliInstance)> = jsonl::read_numbered(path)?;
    for (line, r) in &records {
        if r.label > 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: *line,
                message: format!("label must be 0 or 1, found {}", r.label),
            });
        }
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{EntityDescription, Snippet};

    fn example(entity: &str, label: &str, topic: &str) -> LabeledExample {
        LabeledExample {
            entity_phrase: entity.into(),
            description: EntityDescription::new(
                entity,
                None,
                vec![Snippet {
                    doc_id: "d".into(),
                    sentence_index: 0,
                    text: format!("{entity} made a statement."),
                }],
            )
            .unwrap(),
            label: label.into(),
            topic: topic.into(),
        }
    }

    #[test]
    fn shipped_templates_render() {
        let reg = TemplateRegistry::builtin();
        assert_eq!(
            render_prompt(reg.get("original").unwrap(), "RBI", "Banking Sector").unwrap(),
            "The entity RBI belongs to the stakeholder group of Banking Sector"
        );
        assert_eq!(render_prompt(reg.get("template1").unwrap(), "X", "Y").unwrap(), "The entity X is Y");
        assert_eq!(
            render_prompt(reg.get("template2").unwrap(), "X", "Y").unwrap(),
            "The entity X is of stakeholder type Y"
        );
        assert!(reg.get("template9").is_err());
    }

    #[test]
    fn placeholders_validated_at_load() {
        assert!(PromptTemplate::new("a", "The entity {e}").is_err());
        assert!(PromptTemplate::new("a", "{e} {e} {S}").is_err());
        let err = TemplateRegistry::from_json_str(r#"[{"id":"x","pattern":"no slots"}]"#, Path::new("t.json"));
        assert!(err.is_err());
        let t = PromptTemplate::new("rev", "{S} describes {e}").unwrap();
        assert_eq!(t.render("A {S}", "B"), "B describes A {S}");
    }

    #[test]
    fn two_label_topic_matches_transform_table() {
        let labels = [
            StakeholderLabel {
                name: "S1".into(),
                topic_specific: true,
                topics: vec!["T".into()],
            },
            StakeholderLabel {
                name: "S2".into(),
                topic_specific: true,
                topics: vec!["T".into()],
            },
        ];
        let candidates: Vec<&StakeholderLabel> = labels.iter().collect();
        let ex = example("e", "S1", "T");
        let template = TemplateRegistry::builtin().get("original").unwrap().clone();
        let out = to_nli(&ex, &candidates, &template).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].hypothesis, template.render("e", "S1"));
        assert_eq!(out[0].label, 1);
        assert_eq!(out[1].hypothesis, template.render("e", "S2"));
        assert_eq!(out[1].label, 0);
        assert!(out.iter().all(|i| i.premise == ex.description.rendered && i.group_id == out[0].group_id));

        let single: Vec<&StakeholderLabel> = labels[..1].iter().collect();
        let out = to_nli(&ex, &single, &template).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label, 1);

        let gold_missing = example("e", "S3", "T");
        assert!(to_nli(&gold_missing, &candidates, &template).is_err());
    }

    #[test]
    fn demonetization_expands_to_six() {
        let registry = LabelRegistry::builtin();
        let template = TemplateRegistry::builtin().get("original").unwrap().clone();
        let ex = example("RBI", "Banking Sector", "Demonetization");
        let candidates = registry.candidates_for_topic("Demonetization").unwrap();
        let out = to_nli(&ex, &candidates, &template).unwrap();
        assert_eq!(out.len(), candidates.len());
        assert_eq!(out.iter().filter(|i| i.label == 1).count(), 1);
    }

    #[test]
    fn compile_small_cases() {
        let registry = LabelRegistry::new(vec![
            StakeholderLabel {
                name: "A".into(),
                topic_specific: false,
                topics: vec![],
            },
            StakeholderLabel {
                name: "B".into(),
                topic_specific: true,
                topics: vec!["T".into()],
            },
        ])
        .unwrap();
        let template = TemplateRegistry::builtin().get("template1").unwrap().clone();
        assert!(compile_dataset(&[], &registry, &template).unwrap().is_empty());
        let examples = [example("x", "A", "T"), example("y", "B", "T")];
        let out = compile_dataset(&examples, &registry, &template).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out.iter().filter(|i| i.label == 1).count(), 2);

        let dup = [example("x", "A", "T"), example("x", "A", "T")];
        let out = compile_dataset(&dup, &registry, &template).unwrap();
        assert_ne!(out[0].group_id, out[2].group_id);
    }

    #[test]
    fn nli_file_round_trip_and_errors() {
        let registry = LabelRegistry::builtin();
        let template = TemplateRegistry::builtin().get("original").unwrap().clone();
        let ex = example("Rahul Gandhi", "Opposition", "CAB Bill");
        let instances: Vec<_> = compile_dataset(&[ex], &registry, &template).unwrap()[..3].to_vec();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nli.jsonl");
        write_nli(&path, &instances).unwrap();
        assert_eq!(read_nli(&path).unwrap(), instances);

        write_nli(&path, &[]).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 0);
        assert!(read_nli(&path).unwrap().is_empty());

        let good = serde_json::to_string(&instances[0]).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"group_id\":1}}\n")).unwrap();
        assert!(matches!(read_nli(&path).unwrap_err(), Error::Parse { line: 2, .. }));
    }
}
