use super::{BipartiteGraph, Side};

/// Same-side co-occurrence graph: `R·Rᵀ` for users, `Rᵀ·R` for items.
///
/// Off-diagonal entries are stored as sorted sparse rows; the diagonal
/// (each node's bipartite degree) is kept separately and never appears in
/// the binarized edge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedGraph {
    side: Side,
    diagonal: Vec<u64>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<u64>,
}

impl ProjectedGraph {
    pub(super) fn from_bipartite(graph: &BipartiteGraph, side: Side) -> Self {
        let n = graph.count(side);
        let mut counts = vec![0u64; n];
        let mut touched: Vec<u32> = Vec::new();
        let mut diagonal = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for v in 0..n {
            for &mid in graph.neighbors(side, v) {
                for &w in graph.neighbors(side.other(), mid as usize) {
                    if w as usize == v {
                        continue;
                    }
                    if counts[w as usize] == 0 {
                        touched.push(w);
                    }
                    counts[w as usize] += 1;
                }
            }
            touched.sort_unstable();
            for &w in &touched {
                neighbors.push(w);
                weights.push(counts[w as usize]);
                counts[w as usize] = 0;
            }
            touched.clear();
            offsets.push(neighbors.len());
            diagonal.push(graph.degree(side, v) as u64);
        }
        ProjectedGraph {
            side,
            diagonal,
            offsets,
            neighbors,
            weights,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn node_count(&self) -> usize {
        self.diagonal.len()
    }

    /// Diagonal entry, equal to the node's degree in the bipartite graph.
    pub fn diagonal(&self, v: usize) -> u64 {
        self.diagonal[v]
    }

    /// Off-diagonal neighbors of `v` and their co-occurrence counts.
    pub fn row(&self, v: usize) -> (&[u32], &[u64]) {
        let r = self.offsets[v]..self.offsets[v + 1];
        (&self.neighbors[r.clone()], &self.weights[r])
    }

    /// Entry `(v, w)` of the weighted adjacency, diagonal included.
    pub fn weight(&self, v: usize, w: usize) -> u64 {
        if v == w {
            return self.diagonal[v];
        }
        let (nbrs, ws) = self.row(v);
        nbrs.binary_search(&(w as u32)).map(|k| ws[k]).unwrap_or(0)
    }

    /// Number of distinct neighbors in the binarized, self-loop-free graph.
    pub fn binary_degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Row sum of the weighted adjacency including the diagonal.
    pub fn weighted_degree(&self, v: usize) -> u64 {
        self.diagonal[v] + self.row(v).1.iter().sum::<u64>()
    }

    /// Undirected edges `(v, w)` with `v < w` and positive weight.
    pub fn binarized_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |v| {
            self.row(v)
                .0
                .iter()
                .map(move |&w| (v, w as usize))
                .filter(|&(v, w)| v < w)
        })
    }

    pub fn binarized_edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::tests::arb_graph;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn k22_user_projection() {
        let p = k22().project(Side::User);
        assert_eq!(p.weight(0, 1), 2);
        assert_eq!(p.weight(1, 0), 2);
        assert_eq!(p.diagonal(0), 2);
        assert_eq!(p.binarized_edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn single_edge_projection() {
        let p = single_edge().project(Side::User);
        assert_eq!(p.diagonal(0), 1);
        assert_eq!(p.binarized_edge_count(), 0);
    }

    #[test]
    fn path_item_projection() {
        let p = path4().project(Side::Item);
        assert_eq!(p.weight(0, 1), 1);
        assert_eq!(p.binarized_edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(p.weighted_degree(0), 2 + 1);
    }

    proptest! {
        #[test]
        fn matches_dense_product(g in arb_graph(20, 20)) {
            let (u, i) = (g.user_count(), g.item_count());
            let mut r = vec![vec![0u64; i]; u];
            for &(a, b) in g.edges() {
                r[a as usize][b as usize] = 1;
            }
            let pu = g.project(Side::User);
            for v in 0..u {
                for w in 0..u {
                    let dense: u64 = (0..i).map(|k| r[v][k] * r[w][k]).sum();
                    prop_assert_eq!(pu.weight(v, w), dense);
                    prop_assert_eq!(pu.weight(v, w), pu.weight(w, v));
                }
            }
            let pi = g.project(Side::Item);
            for v in 0..i {
                for w in 0..i {
                    let dense: u64 = (0..u).map(|k| r[k][v] * r[k][w]).sum();
                    prop_assert_eq!(pi.weight(v, w), dense);
                }
            }
            prop_assert!(pi.binarized_edges().all(|(v, w)| v < w));
        }
    }
}
