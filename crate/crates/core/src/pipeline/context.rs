use std::collections::BTreeSet;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::pipeline::coref::EntityCluster;
use crate::pipeline::cross_doc::CrossDocEntity;
use crate::pipeline::sentences::split_sentences;
use crate::types::{Document, EntityDescription, PipelineConfig, Snippet};

/// Sentences of `doc` holding at least one mention of `cluster`, once each,
/// in document order.
pub fn wd_context(doc: &Document, cluster: &EntityCluster) -> Vec<(usize, String)> {
    let wanted: BTreeSet<usize> = cluster.mentions.iter().map(|m| m.sentence_index).collect();
    split_sentences(&doc.text)
        .into_iter()
        .filter(|s| wanted.contains(&s.index))
        .map(|s| (s.index, s.text))
        .collect()
}

/// Within-document context of one cluster, tagged with its document date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterContext {
    pub doc_id: String,
    pub date: Option<NaiveDate>,
    pub sentences: Vec<(usize, String)>,
}

impl ClusterContext {
    pub fn new(doc: &Document, cluster: &EntityCluster) -> Self {
        Self {
            doc_id: doc.id.clone(),
            date: doc.date,
            sentences: wd_context(doc, cluster),
        }
    }
}

/// Aggregates context snippets across documents behind optional background.
///
/// Snippets are ordered by date (undated last), then document id, then
/// sentence index. The rendered premise keeps whole sentences only and
/// stays within `max_premise_chars` characters, except that the first
/// snippet is always kept: background sentences are dropped from the end
/// to make room for it, and if it alone exceeds the budget it is the whole
/// premise.
pub fn build_description(
    entity: &CrossDocEntity,
    contexts: &[ClusterContext],
    background: Option<&str>,
    config: &PipelineConfig,
) -> Result<EntityDescription> {
    let mut ordered: Vec<(Option<NaiveDate>, &str, usize, &str)> = contexts
        .iter()
        .flat_map(|c| {
            c.sentences
                .iter()
                .map(move |(i, text)| (c.date, c.doc_id.as_str(), *i, text.as_str()))
        })
        .collect();
    ordered.sort_by(|a, b| {
        let date_key = |d: Option<NaiveDate>| (d.is_none(), d);
        date_key(a.0)
            .cmp(&date_key(b.0))
            .then(a.1.cmp(b.1))
            .then(a.2.cmp(&b.2))
    });
    ordered.dedup_by(|a, b| a.1 == b.1 && a.2 == b.2);

    let Some(first) = ordered.first() else {
        return Err(Error::Invalid(format!(
            "no context sentences for entity {:?}",
            entity.canonical
        )));
    };

    let budget = config.max_premise_chars;
    let chars = |s: &str| s.chars().count();

    let mut background_kept: Vec<String> = background
        .map(|b| split_sentences(b).into_iter().map(|s| s.text).collect())
        .unwrap_or_default();
    let joined_len = |parts: &[String]| -> usize {
        parts.iter().map(|p| chars(p)).sum::<usize>() + parts.len().saturating_sub(1)
    };
    while !background_kept.is_empty() && joined_len(&background_kept) + 1 + chars(first.3) > budget {
        background_kept.pop();
    }

    let mut used = chars(first.3)
        + if background_kept.is_empty() {
            0
        } else {
            joined_len(&background_kept) + 1
        };
    let mut snippets = vec![to_snippet(first)];
    for item in &ordered[1..] {
        let extra = 1 + chars(item.3);
        if used + extra > budget {
            break;
        }
        used += extra;
        snippets.push(to_snippet(item));
    }

    let background = (!background_kept.is_empty()).then(|| background_kept.join(" "));
    EntityDescription::new(entity.canonical.clone(), background, snippets)
}

fn to_snippet(item: &(Option<NaiveDate>, &str, usize, &str)) -> Snippet {
    Snippet {
        doc_id: item.1.to_string(),
        sentence_index: item.2,
        text: item.3.to_string(),
    }
}
