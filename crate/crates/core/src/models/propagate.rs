//! Normalized neighborhood propagation shared by LightGCN and DGCF.

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Side};

use super::{dot, Embeddings};

/// Layer outputs `e^(0..L)` and their mean as the final representation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    pub user_embeddings: Embeddings,
    pub item_embeddings: Embeddings,
    pub layer_outputs: Option<Vec<(Embeddings, Embeddings)>>,
}

/// Per-intent edge weights `Ã_k` (indexed like `graph.edges()`) and their
/// per-node sums.
#[derive(Debug, Clone, PartialEq)]
pub struct DgcfState {
    pub intent_count: usize,
    pub intent_weights: Vec<Vec<f64>>,
    user_sums: Vec<Vec<f64>>,
    item_sums: Vec<Vec<f64>>,
}

impl DgcfState {
    /// Softmax over intents of per-edge routing scores.
    pub fn from_scores(graph: &BipartiteGraph, scores: &[Vec<f64>]) -> Self {
        let k_count = scores.len();
        let e_count = graph.edge_count();
        let mut weights = vec![vec![0.0; e_count]; k_count];
        for e in 0..e_count {
            let m = scores.iter().map(|s| s[e]).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s[e] - m).exp()).sum();
            for k in 0..k_count {
                weights[k][e] = (scores[k][e] - m).exp() / z;
            }
        }
        let mut user_sums = vec![vec![0.0; graph.user_count()]; k_count];
        let mut item_sums = vec![vec![0.0; graph.item_count()]; k_count];
        for (e, &(u, i)) in graph.edges().iter().enumerate() {
            for k in 0..k_count {
                user_sums[k][u as usize] += weights[k][e];
                item_sums[k][i as usize] += weights[k][e];
            }
        }
        DgcfState {
            intent_count: k_count,
            intent_weights: weights,
            user_sums,
            item_sums,
        }
    }

    pub fn uniform(graph: &BipartiteGraph, intents: usize) -> Self {
        Self::from_scores(graph, &vec![vec![0.0; graph.edge_count()]; intents])
    }
}

pub struct Propagator<'g> {
    graph: &'g BipartiteGraph,
    user_offsets: Vec<usize>,
    item_offsets: Vec<usize>,
    // edge index of each entry of the item-side adjacency
    item_edges: Vec<usize>,
}

fn offsets(graph: &BipartiteGraph, side: Side) -> Vec<usize> {
    let mut off = Vec::with_capacity(graph.count(side) + 1);
    off.push(0);
    for n in 0..graph.count(side) {
        off.push(off[n] + graph.degree(side, n));
    }
    off
}

impl<'g> Propagator<'g> {
    pub fn new(graph: &'g BipartiteGraph) -> Self {
        let user_offsets = offsets(graph, Side::User);
        let item_offsets = offsets(graph, Side::Item);
        let mut item_edges = Vec::with_capacity(graph.edge_count());
        for i in 0..graph.item_count() {
            for &u in graph.item_neighbors(i) {
                let p = graph
                    .user_neighbors(u as usize)
                    .binary_search(&(i as u32))
                    .expect("adjacency is symmetric");
                item_edges.push(user_offsets[u as usize] + p);
            }
        }
        Propagator {
            graph,
            user_offsets,
            item_offsets,
            item_edges,
        }
    }

    pub fn graph(&self) -> &BipartiteGraph {
        self.graph
    }

    fn check(&self, users: &Embeddings, items: &Embeddings, intents: usize) -> Result<()> {
        if users.rows() != self.graph.user_count() || items.rows() != self.graph.item_count() {
            return Err(Error::ShapeError(format!(
                "embeddings {}+{} rows for a {}x{} graph",
                users.rows(),
                items.rows(),
                self.graph.user_count(),
                self.graph.item_count()
            )));
        }
        if users.dim() != items.dim() || users.dim() == 0 {
            return Err(Error::ShapeError("user and item dimensions differ".into()));
        }
        if users.dim() % intents != 0 {
            return Err(Error::ConfigError(format!(
                "dimension {} not divisible by {intents} intents",
                users.dim()
            )));
        }
        Ok(())
    }

    /// One propagation step. Without weights every edge has weight 1 and the
    /// normalization uses plain degrees.
    pub fn layer(&self, weights: Option<&DgcfState>, users: &Embeddings, items: &Embeddings) -> (Embeddings, Embeddings) {
        let g = self.graph;
        let dim = users.dim();
        let k_count = weights.map_or(1, |s| s.intent_count);
        let c = dim / k_count;
        let coef = |k: usize, e: usize, u: usize, i: usize| -> f64 {
            match weights {
                None => 1.0 / ((g.degree(Side::User, u) as f64) * (g.degree(Side::Item, i) as f64)).sqrt(),
                Some(s) => {
                    let d = s.user_sums[k][u] * s.item_sums[k][i];
                    if d > 0.0 {
                        s.intent_weights[k][e] / d.sqrt()
                    } else {
                        0.0
                    }
                }
            }
        };
        let mut out_u = Embeddings::zeros(users.rows(), dim);
        for u in 0..g.user_count() {
            for (p, &i) in g.user_neighbors(u).iter().enumerate() {
                let e = self.user_offsets[u] + p;
                let src = items.row(i as usize);
                let dst = out_u.row_mut(u);
                for k in 0..k_count {
                    let a = coef(k, e, u, i as usize);
                    for d in k * c..(k + 1) * c {
                        dst[d] += a * src[d];
                    }
                }
            }
        }
        let mut out_i = Embeddings::zeros(items.rows(), dim);
        for i in 0..g.item_count() {
            for (p, &u) in g.item_neighbors(i).iter().enumerate() {
                let e = self.item_edges[self.item_offsets[i] + p];
                let src = users.row(u as usize);
                let dst = out_i.row_mut(i);
                for k in 0..k_count {
                    let a = coef(k, e, u as usize, i);
                    for d in k * c..(k + 1) * c {
                        dst[d] += a * src[d];
                    }
                }
            }
        }
        (out_u, out_i)
    }

    /// `layers` propagation steps; the final representation is the mean of
    /// the outputs of steps 0..=layers.
    pub fn propagate(
        &self,
        weights: Option<&DgcfState>,
        users: &Embeddings,
        items: &Embeddings,
        layers: usize,
    ) -> Result<EmbeddingState> {
        self.check(users, items, weights.map_or(1, |s| s.intent_count))?;
        let mut outputs = vec![(users.clone(), items.clone())];
        for _ in 0..layers {
            let (pu, pi) = outputs.last().expect("non-empty");
            let next = self.layer(weights, pu, pi);
            outputs.push(next);
        }
        let mut mu = Embeddings::zeros(users.rows(), users.dim());
        let mut mi = Embeddings::zeros(items.rows(), items.dim());
        for (lu, li) in &outputs {
            for (a, b) in mu.as_mut_slice().iter_mut().zip(lu.as_slice()) {
                *a += b;
            }
            for (a, b) in mi.as_mut_slice().iter_mut().zip(li.as_slice()) {
                *a += b;
            }
        }
        let n = outputs.len() as f64;
        mu.as_mut_slice().iter_mut().for_each(|v| *v /= n);
        mi.as_mut_slice().iter_mut().for_each(|v| *v /= n);
        Ok(EmbeddingState {
            user_embeddings: mu,
            item_embeddings: mi,
            layer_outputs: Some(outputs),
        })
    }
}

pub fn lightgcn_propagate(
    graph: &BipartiteGraph,
    users: &Embeddings,
    items: &Embeddings,
    layers: usize,
) -> Result<EmbeddingState> {
    Propagator::new(graph).propagate(None, users, items, layers)
}

/// Intent weights after `iterations` routing rounds starting from uniform
/// scores. Each round propagates item intent chunks one hop to users under
/// the current weights and adds `tanh(h_{u,k} · e_{i,k})` to the edge score.
pub fn dgcf_routing(
    prop: &Propagator<'_>,
    users: &Embeddings,
    items: &Embeddings,
    intents: usize,
    iterations: usize,
) -> Result<DgcfState> {
    if intents == 0 {
        return Err(Error::ConfigError("intent count must be positive".into()));
    }
    prop.check(users, items, intents)?;
    let g = prop.graph;
    let c = users.dim() / intents;
    let mut scores = vec![vec![0.0; g.edge_count()]; intents];
    let mut state = DgcfState::from_scores(g, &scores);
    for _ in 0..iterations {
        let (hu, _) = prop.layer(Some(&state), users, items);
        for (e, &(u, i)) in g.edges().iter().enumerate() {
            let (hrow, irow) = (hu.row(u as usize), items.row(i as usize));
            for (k, s) in scores.iter_mut().enumerate() {
                s[e] += dot(&hrow[k * c..(k + 1) * c], &irow[k * c..(k + 1) * c]).tanh();
            }
        }
        state = DgcfState::from_scores(g, &scores);
    }
    Ok(state)
}

pub fn dgcf_propagate(
    prop: &Propagator<'_>,
    state: &DgcfState,
    users: &Embeddings,
    items: &Embeddings,
    layers: usize,
) -> Result<EmbeddingState> {
    prop.propagate(Some(state), users, items, layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures;
    use crate::rng::Rng;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn random_state(g: &BipartiteGraph, dim: usize, seed: u64) -> (Embeddings, Embeddings) {
        let mut rng = Rng::seed_from_u64(seed);
        (
            Embeddings::uniform(g.user_count(), dim, &mut rng),
            Embeddings::uniform(g.item_count(), dim, &mut rng),
        )
    }

    #[test]
    fn single_edge_swaps() {
        let g = fixtures::single_edge();
        let u = Embeddings::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let i = Embeddings::from_vec(1, 2, vec![-3.0, 0.5]).unwrap();
        let s = lightgcn_propagate(&g, &u, &i, 1).unwrap();
        let layers = s.layer_outputs.unwrap();
        assert_eq!(layers[1].0, i);
        assert_eq!(layers[1].1, u);
        assert_eq!(s.user_embeddings.as_slice(), &[-1.0, 1.25]);
    }

    #[test]
    fn k22_fixed_point() {
        let g = fixtures::k22();
        let v = [0.3, -0.7, 1.1];
        let e = Embeddings::from_vec(2, 3, v.repeat(2)).unwrap();
        let s = lightgcn_propagate(&g, &e, &e, 3).unwrap();
        for (lu, li) in s.layer_outputs.unwrap() {
            for r in 0..2 {
                for d in 0..3 {
                    assert!((lu.row(r)[d] - v[d]).abs() < 1e-15);
                    assert!((li.row(r)[d] - v[d]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let g = fixtures::k22();
        let (u, _) = random_state(&g, 4, 1);
        let i = Embeddings::zeros(3, 4);
        assert!(matches!(lightgcn_propagate(&g, &u, &i, 1), Err(Error::ShapeError(_))));
    }

    fn dense_oracle(g: &BipartiteGraph, u: &Embeddings, i: &Embeddings, layers: usize) -> Vec<DMatrix<f64>> {
        let (nu, ni, dim) = (g.user_count(), g.item_count(), u.dim());
        let n = nu + ni;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for &(x, y) in g.edges() {
            a[(x as usize, nu + y as usize)] = 1.0;
            a[(nu + y as usize, x as usize)] = 1.0;
        }
        let deg: Vec<f64> = (0..n).map(|r| a.row(r).sum()).collect();
        let norm = DMatrix::from_fn(n, n, |r, c| {
            if a[(r, c)] == 0.0 {
                0.0
            } else {
                a[(r, c)] / (deg[r] * deg[c]).sqrt()
            }
        });
        let mut e = DMatrix::from_fn(n, dim, |r, c| if r < nu { u.row(r)[c] } else { i.row(r - nu)[c] });
        let mut out = vec![e.clone()];
        for _ in 0..layers {
            e = &norm * &e;
            out.push(e.clone());
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn matches_dense_oracle(g in crate::graph::tests::arb_graph(25, 25), layers in 0usize..=4, seed in 0u64..1000) {
            prop_assume!(g.user_count() + g.item_count() <= 50);
            let (u, i) = random_state(&g, 3, seed);
            let s = lightgcn_propagate(&g, &u, &i, layers).unwrap();
            let oracle = dense_oracle(&g, &u, &i, layers);
            let nu = g.user_count();
            for (l, (lu, li)) in s.layer_outputs.as_ref().unwrap().iter().enumerate() {
                for r in 0..nu {
                    for d in 0..3 {
                        prop_assert!((lu.row(r)[d] - oracle[l][(r, d)]).abs() < 1e-10);
                    }
                }
                for r in 0..g.item_count() {
                    for d in 0..3 {
                        prop_assert!((li.row(r)[d] - oracle[l][(nu + r, d)]).abs() < 1e-10);
                    }
                }
            }
        }

        #[test]
        fn one_intent_is_lightgcn(g in crate::graph::tests::arb_graph(12, 12), seed in 0u64..1000, routing in 0usize..3) {
            let (u, i) = random_state(&g, 4, seed);
            let prop = Propagator::new(&g);
            let light = lightgcn_propagate(&g, &u, &i, 3).unwrap();
            let state = dgcf_routing(&prop, &u, &i, 1, routing).unwrap();
            let dgcf = dgcf_propagate(&prop, &state, &u, &i, 3).unwrap();
            prop_assert_eq!(light, dgcf);
        }
    }

    #[test]
    fn zero_routing_keeps_uniform_weights() {
        let g = crate::synthetic::power_law_bipartite(15, 12, 60, 2.0, 4);
        let (u, i) = random_state(&g, 8, 2);
        let s = dgcf_routing(&Propagator::new(&g), &u, &i, 4, 0).unwrap();
        for w in &s.intent_weights {
            assert!(w.iter().all(|&x| x == 0.25));
        }
        assert!(matches!(
            dgcf_routing(&Propagator::new(&g), &u, &i, 3, 0),
            Err(Error::ConfigError(_))
        ));
    }

    #[test]
    fn hand_executed_routing_round() {
        // edges (0,0), (0,1), (1,1); two intents of width 1
        let g = BipartiteGraph::from_edges(2, 2, [(0, 0), (0, 1), (1, 1)]).unwrap();
        let users = Embeddings::from_vec(2, 2, vec![0.2, -0.4, 0.9, 0.1]).unwrap();
        let (a, b) = ([0.5, -1.0], [0.8, 0.3]);
        let items = Embeddings::from_vec(2, 2, vec![a[0], a[1], b[0], b[1]]).unwrap();
        let s = dgcf_routing(&Propagator::new(&g), &users, &items, 2, 1).unwrap();

        // uniform start: every weight 1/2, so intent degrees are half the degrees
        // user 0: d=2, user 1: d=1, item 0: d=1, item 1: d=2
        let h0 = |k: usize| 0.5 * a[k] / (1.0f64 * 0.5).sqrt() + 0.5 * b[k] / (1.0f64 * 1.0).sqrt();
        let h1 = |k: usize| 0.5 * b[k] / (0.5f64 * 1.0).sqrt();
        let scores = [
            [(h0(0) * a[0]).tanh(), (h0(1) * a[1]).tanh()],
            [(h0(0) * b[0]).tanh(), (h0(1) * b[1]).tanh()],
            [(h1(0) * b[0]).tanh(), (h1(1) * b[1]).tanh()],
        ];
        for (e, sc) in scores.iter().enumerate() {
            let z = sc[0].exp() + sc[1].exp();
            for k in 0..2 {
                assert!((s.intent_weights[k][e] - sc[k].exp() / z).abs() < 1e-14);
            }
        }
    }
}
