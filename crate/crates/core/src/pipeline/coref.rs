use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{jaro_winkler, mention_match, normalize_mention};
use crate::types::{Document, EntityKind, EntityMention, PipelineConfig};

/// Mentions of one entity inside one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCluster {
    pub doc_id: String,
    pub canonical: String,
    pub mentions: Vec<EntityMention>,
    pub entity_kind: EntityKind,
}

impl EntityCluster {
    /// Builds a cluster; mentions are put in document order and the canonical
    /// name is the longest surface, earliest on ties.
    pub fn from_mentions(mut mentions: Vec<EntityMention>) -> Result<Self> {
        mentions.sort_by_key(|m| m.char_span);
        let first = mentions
            .first()
            .ok_or_else(|| Error::Invalid("entity cluster without mentions".into()))?;
        let doc_id = first.doc_id.clone();
        if let Some(stray) = mentions.iter().find(|m| m.doc_id != doc_id) {
            return Err(Error::Invalid(format!(
                "cluster mixes documents {doc_id:?} and {:?}",
                stray.doc_id
            )));
        }
        let head = canonical_mention(&mentions);
        Ok(Self {
            doc_id,
            canonical: head.surface.clone(),
            entity_kind: head.entity_kind,
            mentions,
        })
    }

    pub fn first_offset(&self) -> usize {
        self.mentions[0].char_span.start
    }
}

fn canonical_mention(mentions: &[EntityMention]) -> &EntityMention {
    // max_by_key keeps the last maximum, so compare explicitly to prefer the earliest.
    mentions
        .iter()
        .fold(None::<&EntityMention>, |best, m| match best {
            Some(b) if b.surface.chars().count() >= m.surface.chars().count() => Some(b),
            _ => Some(m),
        })
        .expect("non-empty")
}

/// Partitions a document's mentions into coreference chains.
///
/// Returns groups of indices into `mentions`; every index must appear in
/// exactly one group.
pub trait CoreferenceResolver: Send + Sync {
    fn name(&self) -> &str;
    fn resolve(&self, doc: &Document, mentions: &[EntityMention]) -> Result<Vec<Vec<usize>>>;
}

/// Nominal-only resolver built on [`mention_match`].
///
/// Mentions are visited longest first, so every chain is anchored on its
/// canonical surface. A mention joins the chain already holding its
/// normalized surface, otherwise the same-kind chain whose anchor it
/// matches with the highest Jaro-Winkler score (earliest chain on ties),
/// otherwise it starts a new chain.
#[derive(Debug, Clone, Default)]
pub struct SimilarityResolver {
    config: PipelineConfig,
}

impl SimilarityResolver {
    pub fn new(config: PipelineConfig) -> Self {
        Self { config }
    }
}

struct Chain {
    anchor: usize,
    kind: EntityKind,
    normalized: Vec<String>,
    members: Vec<usize>,
}

impl CoreferenceResolver for SimilarityResolver {
    fn name(&self) -> &str {
        "similarity-fallback"
    }

    fn resolve(&self, _doc: &Document, mentions: &[EntityMention]) -> Result<Vec<Vec<usize>>> {
        let mut order: Vec<usize> = (0..mentions.len()).collect();
        order.sort_by(|&a, &b| {
            let la = mentions[a].surface.chars().count();
            let lb = mentions[b].surface.chars().count();
            lb.cmp(&la)
                .then(mentions[a].char_span.cmp(&mentions[b].char_span))
        });

        let scale = self.config.jw_prefix_scale;
        let mut chains: Vec<Chain> = Vec::new();
        for idx in order {
            let mention = &mentions[idx];
            let norm = normalize_mention(&mention.surface);
            let same_kind = |c: &&mut Chain| c.kind == mention.entity_kind;

            if let Some(chain) = chains
                .iter_mut()
                .filter(same_kind)
                .find(|c| !norm.is_empty() && c.normalized.contains(&norm))
            {
                chain.members.push(idx);
                continue;
            }

            let mut best: Option<(usize, f64, usize)> = None;
            for (ci, chain) in chains.iter().enumerate() {
                if chain.kind != mention.entity_kind {
                    continue;
                }
                let anchor = &mentions[chain.anchor].surface;
                if !mention_match(anchor, &mention.surface, &self.config).matched {
                    continue;
                }
                let score = jaro_winkler(&normalize_mention(anchor), &norm, scale)?;
                let first = chain
                    .members
                    .iter()
                    .map(|&m| mentions[m].char_span.start)
                    .min()
                    .unwrap_or(usize::MAX);
                let better = match best {
                    None => true,
                    Some((_, s, f)) => score > s || (score == s && first < f),
                };
                if better {
                    best = Some((ci, score, first));
                }
            }
            match best {
                Some((ci, _, _)) => {
                    chains[ci].members.push(idx);
                    chains[ci].normalized.push(norm);
                }
                None => chains.push(Chain {
                    anchor: idx,
                    kind: mention.entity_kind,
                    normalized: vec![norm],
                    members: vec![idx],
                }),
            }
        }
        Ok(chains.into_iter().map(|c| c.members).collect())
    }
}

/// Groups a document's mentions into clusters, ordered by first mention.
pub fn resolve_within_doc(
    doc: &Document,
    mentions: &[EntityMention],
    resolver: &dyn CoreferenceResolver,
) -> Result<Vec<EntityCluster>> {
    let provider_error = |message: String| Error::Provider {
        provider: resolver.name().to_string(),
        message,
    };
    for m in mentions {
        m.validate(doc)?;
    }
    let groups = resolver.resolve(doc, mentions).map_err(|e| match e {
        e @ Error::Provider { .. } => e,
        other => provider_error(other.to_string()),
    })?;

    let mut owner = vec![None; mentions.len()];
    for (g, group) in groups.iter().enumerate() {
        for &i in group {
            match owner.get_mut(i) {
                None => return Err(provider_error(format!("mention index {i} out of range"))),
                Some(Some(_)) => return Err(provider_error(format!("mention index {i} in two chains"))),
                Some(slot) => *slot = Some(g),
            }
        }
    }
    if let Some(i) = owner.iter().position(Option::is_none) {
        return Err(provider_error(format!("mention {:?} left unassigned", mentions[i].surface)));
    }
    // Identical surfaces must share a chain.
    let mut chain_of_surface: HashMap<&str, usize> = HashMap::new();
    for (m, g) in mentions.iter().zip(&owner) {
        let g = g.expect("all assigned");
        if *chain_of_surface.entry(m.surface.as_str()).or_insert(g) != g {
            return Err(provider_error(format!(
                "identical mentions {:?} split across chains",
                m.surface
            )));
        }
    }

    let mut clusters = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|g| EntityCluster::from_mentions(g.into_iter().map(|i| mentions[i].clone()).collect()))
        .collect::<Result<Vec<_>>>()?;
    clusters.sort_by_key(EntityCluster::first_offset);
    Ok(clusters)
}

/// Clusters mentioned at least `min_mentions` times.
pub fn salient_clusters(clusters: Vec<EntityCluster>, min_mentions: usize) -> Vec<EntityCluster> {
    clusters
        .into_iter()
        .filter(|c| c.mentions.len() >= min_mentions)
        .collect()
}
