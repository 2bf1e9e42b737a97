//! Compact undirected bipartite user-item graph.

mod components;
pub use components::Component;
pub mod io;
mod projection;

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

pub use projection::ProjectedGraph;

/// One partition of the bipartite graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::User => Side::Item,
            Side::Item => Side::User,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }
}

/// Undirected bipartite graph with sorted, duplicate-free adjacency on both
/// sides and a sorted edge list. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    user_count: usize,
    item_count: usize,
    edges: Vec<(u32, u32)>,
    user_offsets: Vec<usize>,
    user_neighbors: Vec<u32>,
    item_offsets: Vec<usize>,
    item_neighbors: Vec<u32>,
}

/// Result of ingesting raw interactions: the graph plus the original id of
/// every dense index.
#[derive(Debug, Clone)]
pub struct LabeledGraph<T> {
    pub graph: BipartiteGraph,
    pub user_ids: Vec<T>,
    pub item_ids: Vec<T>,
}

/// Builds a graph from raw `(user_id, item_id)` pairs, assigning dense
/// indices in order of first appearance and collapsing duplicates.
pub fn build_graph<T: Hash + Eq + Clone>(interactions: &[(T, T)]) -> Result<BipartiteGraph> {
    build_labeled_graph(interactions).map(|l| l.graph)
}

pub fn build_labeled_graph<T: Hash + Eq + Clone>(
    interactions: &[(T, T)],
) -> Result<LabeledGraph<T>> {
    if interactions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut users: HashMap<&T, u32> = HashMap::new();
    let mut items: HashMap<&T, u32> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut edges = Vec::with_capacity(interactions.len());
    for (u, i) in interactions {
        let next = users.len() as u32;
        let ui = *users.entry(u).or_insert_with(|| {
            user_ids.push(u.clone());
            next
        });
        let next = items.len() as u32;
        let ii = *items.entry(i).or_insert_with(|| {
            item_ids.push(i.clone());
            next
        });
        edges.push((ui, ii));
    }
    let graph = BipartiteGraph::from_edges(user_ids.len(), item_ids.len(), edges)?;
    Ok(LabeledGraph {
        graph,
        user_ids,
        item_ids,
    })
}

fn csr(count: usize, pairs: impl Iterator<Item = (u32, u32)> + Clone) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; count + 1];
    for (a, _) in pairs.clone() {
        offsets[a as usize + 1] += 1;
    }
    for k in 0..count {
        offsets[k + 1] += offsets[k];
    }
    let mut fill = offsets.clone();
    let mut neighbors = vec![0u32; offsets[count]];
    for (a, b) in pairs {
        neighbors[fill[a as usize]] = b;
        fill[a as usize] += 1;
    }
    for k in 0..count {
        neighbors[offsets[k]..offsets[k + 1]].sort_unstable();
    }
    (offsets, neighbors)
}

impl BipartiteGraph {
    /// Builds from dense indices. Duplicates are collapsed; nodes without
    /// edges are allowed.
    pub fn from_edges(
        user_count: usize,
        item_count: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self> {
        let mut edges: Vec<(u32, u32)> = edges.into_iter().collect();
        for &(u, i) in &edges {
            if u as usize >= user_count {
                return Err(Error::IndexOutOfRange {
                    side: "user",
                    index: u as usize,
                    count: user_count,
                });
            }
            if i as usize >= item_count {
                return Err(Error::IndexOutOfRange {
                    side: "item",
                    index: i as usize,
                    count: item_count,
                });
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let (user_offsets, user_neighbors) = csr(user_count, edges.iter().copied());
        let (item_offsets, item_neighbors) =
            csr(item_count, edges.iter().map(|&(u, i)| (i, u)));
        Ok(BipartiteGraph {
            user_count,
            item_count,
            edges,
            user_offsets,
            user_neighbors,
            item_offsets,
            item_neighbors,
        })
    }

    /// Keeps only nodes that touch at least one of `edges` and re-indexes
    /// them densely, preserving relative order. Returns the graph plus, per
    /// side, the original index of every new index.
    pub fn compact_from_edges(
        edges: &[(u32, u32)],
    ) -> Result<(BipartiteGraph, Vec<u32>, Vec<u32>)> {
        let mut users: Vec<u32> = edges.iter().map(|e| e.0).collect();
        let mut items: Vec<u32> = edges.iter().map(|e| e.1).collect();
        users.sort_unstable();
        users.dedup();
        items.sort_unstable();
        items.dedup();
        let remapped = edges.iter().map(|&(u, i)| {
            (
                users.binary_search(&u).unwrap() as u32,
                items.binary_search(&i).unwrap() as u32,
            )
        });
        let graph = BipartiteGraph::from_edges(users.len(), items.len(), remapped.collect::<Vec<_>>())?;
        Ok((graph, users, items))
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn count(&self, side: Side) -> usize {
        match side {
            Side::User => self.user_count,
            Side::Item => self.item_count,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges sorted by `(user, item)`.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// First-order neighbors of `node` (sorted, on the opposite side).
    /// Panics if `node` is out of range.
    pub fn neighbors(&self, side: Side, node: usize) -> &[u32] {
        match side {
            Side::User => {
                &self.user_neighbors[self.user_offsets[node]..self.user_offsets[node + 1]]
            }
            Side::Item => {
                &self.item_neighbors[self.item_offsets[node]..self.item_offsets[node + 1]]
            }
        }
    }

    pub fn user_neighbors(&self, user: usize) -> &[u32] {
        self.neighbors(Side::User, user)
    }

    pub fn item_neighbors(&self, item: usize) -> &[u32] {
        self.neighbors(Side::Item, item)
    }

    pub fn degree(&self, side: Side, node: usize) -> usize {
        self.neighbors(side, node).len()
    }

    pub fn degrees(&self, side: Side) -> Vec<usize> {
        (0..self.count(side)).map(|v| self.degree(side, v)).collect()
    }

    pub fn max_degree(&self) -> usize {
        let u = (0..self.user_count).map(|v| self.degree(Side::User, v));
        let i = (0..self.item_count).map(|v| self.degree(Side::Item, v));
        u.chain(i).max().unwrap_or(0)
    }

    pub fn has_edge(&self, user: usize, item: usize) -> bool {
        user < self.user_count && self.user_neighbors(user).binary_search(&(item as u32)).is_ok()
    }

    fn check(&self, side: Side, node: usize) -> Result<()> {
        let count = self.count(side);
        if node >= count {
            return Err(Error::IndexOutOfRange {
                side: side.name(),
                index: node,
                count,
            });
        }
        Ok(())
    }

    /// Nodes at exactly `hops` steps from `node`: opposite-side neighbors for
    /// one hop, same-side co-neighbors (excluding `node`) for two.
    pub fn neighborhood(&self, side: Side, node: usize, hops: u8) -> Result<Vec<usize>> {
        self.check(side, node)?;
        match hops {
            1 => Ok(self.neighbors(side, node).iter().map(|&v| v as usize).collect()),
            2 => {
                let mut out: Vec<usize> = self
                    .neighbors(side, node)
                    .iter()
                    .flat_map(|&mid| self.neighbors(side.other(), mid as usize))
                    .map(|&w| w as usize)
                    .filter(|&w| w != node)
                    .collect();
                out.sort_unstable();
                out.dedup();
                Ok(out)
            }
            h => Err(Error::ConfigError(format!("hops must be 1 or 2, got {h}"))),
        }
    }

    /// Co-occurrence projection onto `side`.
    pub fn project(&self, side: Side) -> ProjectedGraph {
        ProjectedGraph::from_bipartite(self, side)
    }
}
