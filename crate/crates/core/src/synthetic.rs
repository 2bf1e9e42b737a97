//! Seeded synthetic interaction graphs used by fixtures, tests and benches.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng as _, SeedableRng};

use crate::graph::BipartiteGraph;
use crate::rng::Rng;

/// Chung-Lu style bipartite graph whose expected degrees on both sides
/// follow a power law with the given exponent. About `target_edges` draws
/// are made; duplicates collapse and untouched nodes are dropped.
pub fn power_law_bipartite(
    users: usize,
    items: usize,
    target_edges: usize,
    exponent: f64,
    seed: u64,
) -> BipartiteGraph {
    let mut rng = Rng::seed_from_u64(seed);
    let weights = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|k| ((k + 1) as f64).powf(-1.0 / (exponent - 1.0)))
            .collect()
    };
    let ud = WeightedIndex::new(weights(users)).expect("positive weights");
    let id = WeightedIndex::new(weights(items)).expect("positive weights");
    let edges: Vec<(u32, u32)> = (0..target_edges)
        .map(|_| (ud.sample(&mut rng) as u32, id.sample(&mut rng) as u32))
        .collect();
    let mut edges = edges;
    edges.sort_unstable();
    edges.dedup();
    BipartiteGraph::compact_from_edges(&edges)
        .expect("non-empty edge list")
        .0
}

/// Like [`power_law_bipartite`] but keeps every node: isolated nodes get
/// one weighted edge, and users outside the largest component are tied to
/// a hub item of it. The result is connected with exactly `users` users and
/// `items` items.
pub fn connected_power_law(
    users: usize,
    items: usize,
    target_edges: usize,
    exponent: f64,
    seed: u64,
) -> BipartiteGraph {
    let mut rng = Rng::seed_from_u64(seed);
    let weights = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|k| ((k + 1) as f64).powf(-1.0 / (exponent - 1.0)))
            .collect()
    };
    let ud = WeightedIndex::new(weights(users)).expect("positive weights");
    let id = WeightedIndex::new(weights(items)).expect("positive weights");
    let mut edges: Vec<(u32, u32)> = (0..target_edges)
        .map(|_| (ud.sample(&mut rng) as u32, id.sample(&mut rng) as u32))
        .collect();
    let (mut seen_u, mut seen_i) = (vec![false; users], vec![false; items]);
    for &(u, i) in &edges {
        seen_u[u as usize] = true;
        seen_i[i as usize] = true;
    }
    for u in (0..users).filter(|&u| !seen_u[u]) {
        edges.push((u as u32, id.sample(&mut rng) as u32));
    }
    for i in (0..items).filter(|&i| !seen_i[i]) {
        edges.push((ud.sample(&mut rng) as u32, i as u32));
    }
    let g = BipartiteGraph::from_edges(users, items, edges.clone()).expect("indices in range");
    let lcc = g.largest_component_with_map().expect("non-empty");
    let hub = lcc.item_map[0];
    let mut inside = vec![false; users];
    for &u in &lcc.user_map {
        inside[u as usize] = true;
    }
    edges.extend((0..users).filter(|&u| !inside[u]).map(|u| (u as u32, hub)));
    BipartiteGraph::from_edges(users, items, edges).expect("indices in range")
}

/// Users and items split round-robin into `blocks` communities; a pair is
/// connected with probability `p_in` inside a community and `p_out`
/// across. Every user gets at least `min_degree` in-block items.
pub fn block_dataset(
    users: usize,
    items: usize,
    blocks: usize,
    p_in: f64,
    p_out: f64,
    min_degree: usize,
    seed: u64,
) -> BipartiteGraph {
    let mut rng = Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..users {
        let mut own = Vec::new();
        for i in 0..items {
            let same = u % blocks == i % blocks;
            if same {
                own.push(i);
            }
            if rng.random_bool(if same { p_in } else { p_out }) {
                edges.push((u as u32, i as u32));
            }
        }
        for _ in 0..min_degree {
            let i = own[rng.random_range(0..own.len())];
            edges.push((u as u32, i as u32));
        }
    }
    BipartiteGraph::from_edges(users, items, edges).expect("indices in range")
}

/// Block dataset whose item popularity is additionally skewed: item `i` is
/// accepted with probability scaled by `(i / blocks + 1)^(-skew)`.
pub fn skewed_block_dataset(
    users: usize,
    items: usize,
    blocks: usize,
    p_in: f64,
    p_out: f64,
    skew: f64,
    seed: u64,
) -> BipartiteGraph {
    let mut rng = Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..users {
        for i in 0..items {
            let rank = (i / blocks) as f64 + 1.0;
            let base = if u % blocks == i % blocks { p_in } else { p_out };
            if rng.random_bool((base * rank.powf(-skew) * 3.0).min(1.0)) {
                edges.push((u as u32, i as u32));
            }
        }
        let i = u % blocks;
        edges.push((u as u32, i as u32));
    }
    BipartiteGraph::from_edges(users, items, edges)
        .expect("indices in range")
        .largest_connected_component()
        .expect("non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Side;

    #[test]
    fn power_law_is_skewed() {
        let g = power_law_bipartite(500, 500, 5000, 2.1, 1);
        let d = g.degrees(Side::User);
        assert!(d[0] > 10 * d[d.len() - 1]);
    }

    #[test]
    fn connected_power_law_keeps_every_node() {
        let g = connected_power_law(120, 80, 600, 2.2, 3);
        let c = g.largest_connected_component().unwrap();
        assert_eq!((c.user_count(), c.item_count()), (120, 80));
        assert_eq!(c.edge_count(), g.edge_count());
    }

    #[test]
    fn blocks_are_dense_inside() {
        let g = block_dataset(40, 20, 4, 0.5, 0.01, 1, 2);
        let inside = g.edges().iter().filter(|(u, i)| u % 4 == i % 4).count();
        assert!(inside > 8 * (g.edge_count() - inside));
    }
}
