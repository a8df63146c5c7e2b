use serde::{Deserialize, Serialize};

use crate::pipeline::coref::EntityCluster;
use crate::similarity::mention_match;
use crate::types::{EntityKind, PipelineConfig};

/// One real-world entity aggregated across documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossDocEntity {
    pub canonical: String,
    pub clusters: Vec<EntityCluster>,
    pub entity_kind: EntityKind,
}

#[derive(Debug, Clone)]
struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] = self.rank[a].saturating_add(1);
        }
    }
}

/// Joins same-kind clusters whose canonical names pass [`mention_match`],
/// taking the transitive closure.
///
/// Entities are ordered by their first cluster in the input, and clusters
/// keep input order inside each entity. The canonical name is the longest
/// cluster canonical, earliest on ties.
pub fn resolve_cross_doc(clusters: Vec<EntityCluster>, config: &PipelineConfig) -> Vec<CrossDocEntity> {
    let n = clusters.len();
    let mut sets = DisjointSet::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if clusters[i].entity_kind == clusters[j].entity_kind
                && sets.find(i) != sets.find(j)
                && mention_match(&clusters[i].canonical, &clusters[j].canonical, config).matched
            {
                sets.union(i, j);
            }
        }
    }

    let mut slot_of_root = vec![usize::MAX; n];
    let mut groups: Vec<Vec<EntityCluster>> = Vec::new();
    for (i, cluster) in clusters.into_iter().enumerate() {
        let root = sets.find(i);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot_of_root[root]].push(cluster);
    }

    groups
        .into_iter()
        .map(|clusters| {
            let head = clusters
                .iter()
                .fold(None::<&EntityCluster>, |best, c| match best {
                    Some(b) if b.canonical.chars().count() >= c.canonical.chars().count() => Some(b),
                    _ => Some(c),
                })
                .expect("non-empty group");
            CrossDocEntity {
                canonical: head.canonical.clone(),
                entity_kind: head.entity_kind,
                clusters,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_set_basics() {
        let mut s = DisjointSet::new(5);
        s.union(0, 1);
        s.union(3, 4);
        s.union(1, 4);
        assert_eq!(s.find(0), s.find(3));
        assert_ne!(s.find(0), s.find(2));
    }
}
