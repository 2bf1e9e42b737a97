//! Classical and topological dataset characteristics.
//!
//! All aggregates are computed so that relabeling the nodes of a graph
//! yields exactly the same numbers: integer sums wherever the quantity is
//! integral, sorted summation for the clustering coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, ProjectedGraph, Side};
use crate::par::{self, Execution};

/// Column names, in regression order.
pub const NAMES: [&str; 11] = [
    "space_size_log",
    "shape_log",
    "density_log",
    "gini_u",
    "gini_i",
    "avg_deg_u_log",
    "avg_deg_i_log",
    "avg_clustc_u_log",
    "avg_clustc_i_log",
    "assort_u",
    "assort_i",
];

/// The eleven characteristics. Assortativity is `None` when undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicsVector {
    pub space_size_log: f64,
    pub shape_log: f64,
    pub density_log: f64,
    #[serde(rename = "gini_u")]
    pub gini_user: f64,
    #[serde(rename = "gini_i")]
    pub gini_item: f64,
    #[serde(rename = "avg_deg_u_log")]
    pub avg_degree_user_log: f64,
    #[serde(rename = "avg_deg_i_log")]
    pub avg_degree_item_log: f64,
    #[serde(rename = "avg_clustc_u_log")]
    pub avg_clustc_user_log: f64,
    #[serde(rename = "avg_clustc_i_log")]
    pub avg_clustc_item_log: f64,
    #[serde(rename = "assort_u")]
    pub assort_user: Option<f64>,
    #[serde(rename = "assort_i")]
    pub assort_item: Option<f64>,
}

impl CharacteristicsVector {
    pub fn values(&self) -> [Option<f64>; 11] {
        [
            Some(self.space_size_log),
            Some(self.shape_log),
            Some(self.density_log),
            Some(self.gini_user),
            Some(self.gini_item),
            Some(self.avg_degree_user_log),
            Some(self.avg_degree_item_log),
            Some(self.avg_clustc_user_log),
            Some(self.avg_clustc_item_log),
            self.assort_user,
            self.assort_item,
        ]
    }

    pub fn from_values(v: [Option<f64>; 11]) -> Option<Self> {
        Some(CharacteristicsVector {
            space_size_log: v[0]?,
            shape_log: v[1]?,
            density_log: v[2]?,
            gini_user: v[3]?,
            gini_item: v[4]?,
            avg_degree_user_log: v[5]?,
            avg_degree_item_log: v[6]?,
            avg_clustc_user_log: v[7]?,
            avg_clustc_item_log: v[8]?,
            assort_user: v[9],
            assort_item: v[10],
        })
    }

    /// All eleven values, or `None` if any is missing.
    pub fn complete(&self) -> Option<[f64; 11]> {
        let v = self.values();
        let mut out = [0.0; 11];
        for (o, x) in out.iter_mut().zip(v) {
            *o = x?;
        }
        Some(out)
    }

    pub fn is_complete(&self) -> bool {
        self.assort_user.is_some() && self.assort_item.is_some()
    }

    /// CSV fields in [`NAMES`] order; missing values are empty strings.
    pub fn csv_fields(&self) -> Vec<String> {
        self.values()
            .iter()
            .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
            .collect()
    }

    pub fn csv_header() -> String {
        NAMES.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.csv_fields().join(",")
    }

    pub fn parse_csv_fields(fields: &[&str]) -> std::result::Result<Self, String> {
        if fields.len() != 11 {
            return Err(format!("expected 11 characteristic fields, got {}", fields.len()));
        }
        let mut v = [None; 11];
        for (k, f) in fields.iter().enumerate() {
            if !f.is_empty() {
                v[k] = Some(f.parse::<f64>().map_err(|e| format!("{}: {e}", NAMES[k]))?);
            }
        }
        Self::from_values(v).ok_or_else(|| "only assortativity may be missing".to_string())
    }
}

/// √(U·I).
pub fn space_size(graph: &BipartiteGraph) -> f64 {
    ((graph.user_count() as f64) * (graph.item_count() as f64)).sqrt()
}

/// U / I.
pub fn shape(graph: &BipartiteGraph) -> f64 {
    graph.user_count() as f64 / graph.item_count() as f64
}

/// E / (U·I).
pub fn density(graph: &BipartiteGraph) -> f64 {
    graph.edge_count() as f64 / (graph.user_count() as f64 * graph.item_count() as f64)
}

/// Gini concentration of a degree sequence:
/// `Σ_{u<v} |σ_u − σ_v| / (n · Σ σ)`.
///
/// The pairwise sum is evaluated exactly in integer arithmetic through the
/// sorted-prefix identity, so the result is the correctly rounded value of
/// the pairwise formula.
pub fn gini(degrees: &[usize]) -> Result<f64> {
    if degrees.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = degrees.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as i128;
    let mut pairwise: i128 = 0;
    let mut total: i128 = 0;
    for (k, &x) in sorted.iter().enumerate() {
        pairwise += (2 * k as i128 - n + 1) * x as i128;
        total += x as i128;
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(pairwise as f64 / (n * total) as f64)
}

/// Mean first-order neighborhood size on `side`.
pub fn avg_degree(graph: &BipartiteGraph, side: Side) -> f64 {
    graph.edge_count() as f64 / graph.count(side) as f64
}

fn clustering_chunk(graph: &BipartiteGraph, side: Side, nodes: std::ops::Range<usize>) -> Vec<f64> {
    let n = graph.count(side);
    let mut shared = vec![0u32; n];
    let mut touched: Vec<u32> = Vec::new();
    let mut ious: Vec<f64> = Vec::new();
    nodes
        .map(|v| {
            for &mid in graph.neighbors(side, v) {
                for &w in graph.neighbors(side.other(), mid as usize) {
                    if w as usize != v {
                        if shared[w as usize] == 0 {
                            touched.push(w);
                        }
                        shared[w as usize] += 1;
                    }
                }
            }
            if touched.is_empty() {
                return 0.0;
            }
            let dv = graph.degree(side, v) as u32;
            ious.clear();
            for &w in &touched {
                let c = shared[w as usize];
                let dw = graph.degree(side, w as usize) as u32;
                ious.push(c as f64 / (dv + dw - c) as f64);
                shared[w as usize] = 0;
            }
            let count = touched.len();
            touched.clear();
            par::order_independent_sum(&mut ious) / count as f64
        })
        .collect()
}

const CLUSTERING_CHUNK: usize = 256;

/// Per-node clustering coefficient γ_v: mean intersection-over-union of
/// `N(v)` against `N(w)` for every same-side 2-hop neighbor `w`. Nodes
/// without 2-hop neighbors get 0.
pub fn node_clustering(graph: &BipartiteGraph, side: Side, exec: Execution) -> Vec<f64> {
    let n = graph.count(side);
    let chunks = n.div_ceil(CLUSTERING_CHUNK);
    par::map_indexed(exec, chunks, |c| {
        let start = c * CLUSTERING_CHUNK;
        clustering_chunk(graph, side, start..(start + CLUSTERING_CHUNK).min(n))
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Side-average clustering coefficient, computed exactly.
pub fn clustering_coefficient(graph: &BipartiteGraph, side: Side) -> f64 {
    clustering_coefficient_with(graph, side, Execution::default())
}

pub fn clustering_coefficient_with(graph: &BipartiteGraph, side: Side, exec: Execution) -> f64 {
    let n = graph.count(side);
    if n == 0 {
        return 0.0;
    }
    let mut gammas = node_clustering(graph, side, exec);
    par::order_independent_sum(&mut gammas) / n as f64
}

/// Newman degree assortativity of the binarized, self-loop-free projected
/// graph: the Pearson correlation of remaining degrees over both
/// orientations of every edge. `None` when there are no edges or every
/// endpoint has the same degree.
pub fn degree_assortativity(projected: &ProjectedGraph) -> Option<f64> {
    // Integer moments make the result exact up to the final division.
    let (mut m2, mut s1, mut s2, mut sxy) = (0i128, 0i128, 0i128, 0i128);
    for v in 0..projected.node_count() {
        let k = projected.binary_degree(v) as i128;
        if k == 0 {
            continue;
        }
        let x = k - 1;
        m2 += k;
        s1 += k * x;
        s2 += k * x * x;
        for &w in projected.row(v).0 {
            sxy += x * (projected.binary_degree(w as usize) as i128 - 1);
        }
    }
    if m2 == 0 {
        return None;
    }
    let den = m2 * s2 - s1 * s1;
    if den == 0 {
        return None;
    }
    let num = m2 * sxy - s1 * s1;
    Some(num as f64 / den as f64)
}

fn log10_checked(x: f64, what: &'static str) -> Result<f64> {
    if x <= 0.0 {
        Err(Error::Log10OfZero(what))
    } else {
        Ok(x.log10())
    }
}

/// All eleven characteristics of a (connected) graph, log10-scaled where
/// the regression expects it.
pub fn compute_all(graph: &BipartiteGraph) -> Result<CharacteristicsVector> {
    compute_all_with(graph, Execution::default())
}

pub fn compute_all_with(graph: &BipartiteGraph, exec: Execution) -> Result<CharacteristicsVector> {
    if graph.is_empty() || graph.user_count() == 0 || graph.item_count() == 0 {
        return Err(Error::EmptyDataset);
    }
    let cu = clustering_coefficient_with(graph, Side::User, exec);
    let ci = clustering_coefficient_with(graph, Side::Item, exec);
    Ok(CharacteristicsVector {
        space_size_log: space_size(graph).log10(),
        shape_log: shape(graph).log10(),
        density_log: density(graph).log10(),
        gini_user: gini(&graph.degrees(Side::User))?,
        gini_item: gini(&graph.degrees(Side::Item))?,
        avg_degree_user_log: avg_degree(graph, Side::User).log10(),
        avg_degree_item_log: avg_degree(graph, Side::Item).log10(),
        avg_clustc_user_log: log10_checked(cu, "avg_clustc_u")?,
        avg_clustc_item_log: log10_checked(ci, "avg_clustc_i")?,
        assort_user: degree_assortativity(&graph.project(Side::User)),
        assort_item: degree_assortativity(&graph.project(Side::Item)),
    })
}

/// Characterizes many graphs; one graph per task.
pub fn compute_batch(graphs: &[BipartiteGraph], exec: Execution) -> Vec<Result<CharacteristicsVector>> {
    par::map_slice(exec, graphs, |g| compute_all_with(g, Execution::Sequential))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::graph::BipartiteGraph;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn classical_examples() {
        let g = BipartiteGraph::from_edges(4, 9, vec![(0, 0), (1, 1), (2, 2), (3, 3)]).unwrap();
        assert!(close(space_size(&g), 6.0));
        assert!(close(space_size(&single_edge()), 1.0));
        let g34 = BipartiteGraph::from_edges(3, 4, (0..6).map(|k| (k % 3, k % 4))).unwrap();
        assert!(close(space_size(&g34), 12f64.sqrt()));
        assert!(close(density(&g34), 0.5));
        assert!(close(density(&k22()), 1.0));
        assert!(close(density(&single_edge()), 1.0));
        assert!(close(shape(&k22()), 1.0));
        let g24 = BipartiteGraph::from_edges(2, 4, vec![(0, 0), (1, 3)]).unwrap();
        assert!(close(shape(&g24), 0.5));
        let g42 = BipartiteGraph::from_edges(4, 2, vec![(0, 0), (3, 1)]).unwrap();
        assert!(close(shape(&g42), 2.0));
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[2, 2, 2]).unwrap(), 0.0);
        assert!(close(gini(&[1, 1, 2]).unwrap(), 2.0 / 12.0));
        // pairs: 3 × |1−97| = 288; n·Σ = 4 · 100
        assert!(close(gini(&[1, 1, 1, 97]).unwrap(), 288.0 / 400.0));
        assert!(matches!(gini(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn degree_examples() {
        assert!(close(avg_degree(&k22(), Side::User), 2.0));
        assert!(close(avg_degree(&path4(), Side::User), 1.5));
        assert!(close(avg_degree(&single_edge(), Side::Item), 1.0));
    }

    #[test]
    fn clustering_examples() {
        assert!(close(clustering_coefficient(&k22(), Side::User), 1.0));
        assert!(close(clustering_coefficient(&k22(), Side::Item), 1.0));
        // {(u1,i1),(u2,i1),(u2,i2)}: IoU(u1,u2) = 1/2
        assert!(close(clustering_coefficient(&path4(), Side::User), 0.5));
        assert_eq!(clustering_coefficient(&single_edge(), Side::User), 0.0);
    }

    fn path_projection(n: usize) -> ProjectedGraph {
        // one item per consecutive user pair -> user projection is a path
        let edges: Vec<(u32, u32)> = (0..n - 1)
            .flat_map(|k| [(k as u32, k as u32), (k as u32 + 1, k as u32)])
            .collect();
        BipartiteGraph::from_edges(n, n - 1, edges).unwrap().project(Side::User)
    }

    #[test]
    fn assortativity_examples() {
        assert!(close(degree_assortativity(&path_projection(3)).unwrap(), -1.0));
        // star: centre user 0 shares one item with each leaf
        let star = BipartiteGraph::from_edges(5, 4, (0..4).flat_map(|k| [(0, k), (k + 1, k)]))
            .unwrap()
            .project(Side::User);
        assert!(close(degree_assortativity(&star).unwrap(), -1.0));
        assert_eq!(degree_assortativity(&k22().project(Side::User)), None);
        assert_eq!(degree_assortativity(&single_edge().project(Side::User)), None);
    }

    #[test]
    fn compute_all_k22() {
        let err = compute_all(&k22()).unwrap();
        assert_eq!(err.density_log, 0.0);
        assert_eq!(err.shape_log, 0.0);
        assert!(close(err.avg_degree_user_log, 2f64.log10()));
        assert!(close(err.avg_degree_item_log, 2f64.log10()));
        assert_eq!(err.assort_user, None);
        assert!(!err.is_complete());
        assert_eq!(err.csv_fields()[9], "");
    }

    #[test]
    fn zero_clustering_is_an_error() {
        assert!(matches!(compute_all(&single_edge()), Err(Error::Log10OfZero(_))));
    }

    #[test]
    fn csv_roundtrip() {
        let g = BipartiteGraph::from_edges(
            3,
            3,
            vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 0), (0, 2)],
        )
        .unwrap();
        let c = compute_all(&g).unwrap();
        let row = c.csv_row();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(CharacteristicsVector::parse_csv_fields(&fields).unwrap(), c);
    }
}
