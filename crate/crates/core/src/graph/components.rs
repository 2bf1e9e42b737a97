use std::cmp::Reverse;
use std::collections::VecDeque;

use super::{BipartiteGraph, Side};
use crate::error::{Error, Result};

/// Induced subgraph on a connected component, with the original index of
/// every retained node.
#[derive(Debug, Clone)]
pub struct Component {
    pub graph: BipartiteGraph,
    pub user_map: Vec<u32>,
    pub item_map: Vec<u32>,
}

impl BipartiteGraph {
    /// Connected component with the most nodes, re-indexed densely.
    ///
    /// Ties go to the component with more edges, then to the one containing
    /// the smaller original user index.
    pub fn largest_connected_component(&self) -> Result<BipartiteGraph> {
        self.largest_component_with_map().map(|c| c.graph)
    }

    pub fn largest_component_with_map(&self) -> Result<Component> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (nu, ni) = (self.user_count(), self.item_count());
        // users are 0..nu, items nu..nu+ni
        let mut label = vec![usize::MAX; nu + ni];
        // (nodes, edges, min user)
        let mut stats: Vec<(usize, usize, usize)> = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..nu {
            if label[start] != usize::MAX || self.degree(Side::User, start) == 0 {
                continue;
            }
            let c = stats.len();
            let (mut nodes, mut degree_sum) = (0usize, 0usize);
            label[start] = c;
            queue.push_back(start);
            while let Some(x) = queue.pop_front() {
                nodes += 1;
                let (side, idx, offset) = if x < nu {
                    (Side::User, x, nu)
                } else {
                    (Side::Item, x - nu, 0)
                };
                let nbrs = self.neighbors(side, idx);
                degree_sum += nbrs.len();
                for &y in nbrs {
                    let y = y as usize + offset;
                    if label[y] == usize::MAX {
                        label[y] = c;
                        queue.push_back(y);
                    }
                }
            }
            // users are visited in increasing order, so `start` is the minimum
            stats.push((nodes, degree_sum / 2, start));
        }
        let best = (0..stats.len())
            .max_by_key(|&c| (stats[c].0, stats[c].1, Reverse(stats[c].2)))
            .expect("non-empty graph has a component");
        let edges: Vec<(u32, u32)> = self
            .edges()
            .iter()
            .copied()
            .filter(|&(u, _)| label[u as usize] == best)
            .collect();
        let (graph, user_map, item_map) = BipartiteGraph::compact_from_edges(&edges)?;
        Ok(Component {
            graph,
            user_map,
            item_map,
        })
    }

    /// True if every node with at least one edge is reachable from every
    /// other, and there are no isolated nodes.
    pub fn is_connected(&self) -> bool {
        match self.largest_connected_component() {
            Ok(c) => {
                c.user_count() == self.user_count()
                    && c.item_count() == self.item_count()
                    && c.edge_count() == self.edge_count()
            }
            Err(_) => false,
        }
    }
}
