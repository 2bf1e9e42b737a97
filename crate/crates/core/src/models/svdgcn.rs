//! SVD-GCN: embeddings from the top singular triplets of the shifted,
//! degree-normalized interaction matrix.

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Side};
use crate::numerics::{truncated_svd, CsrMatrix, SvdOptions};

use super::{EmbeddingState, Embeddings, SvdGcnConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SvdGcnState {
    pub singular_values: Vec<f64>,
    /// U×k.
    pub left_vectors: Embeddings,
    /// I×k.
    pub right_vectors: Embeddings,
    pub a1: f64,
    pub a2: f64,
    /// k×k mixing matrix; `None` is the identity.
    pub weight: Option<Embeddings>,
}

/// `(D_u + a2)^(-1/2) R (D_i + a2)^(-1/2)` as a sparse matrix.
pub fn shifted_normalized(graph: &BipartiteGraph, a2: f64) -> Result<CsrMatrix> {
    let triplets = graph
        .edges()
        .iter()
        .map(|&(u, i)| {
            let du = graph.degree(Side::User, u as usize) as f64 + a2;
            let di = graph.degree(Side::Item, i as usize) as f64 + a2;
            (u as usize, i as usize, 1.0 / (du * di).sqrt())
        })
        .collect();
    CsrMatrix::from_triplets(graph.user_count(), graph.item_count(), triplets)
}

fn scaled(m: &nalgebra::DMatrix<f64>, factors: &[f64]) -> Embeddings {
    let (rows, k) = m.shape();
    let data = (0..rows).flat_map(|r| (0..k).map(move |c| m[(r, c)] * factors[c])).collect();
    Embeddings::from_vec(rows, k, data).expect("shape")
}

/// Builds the state and the initial (identity-weight) embeddings
/// `p_u exp(a1 λ)` and `q_i exp(a1 λ)`.
pub fn svdgcn_embed(graph: &BipartiteGraph, config: &SvdGcnConfig, seed: u64) -> Result<(SvdGcnState, EmbeddingState)> {
    if graph.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let matrix = shifted_normalized(graph, config.a2)?;
    let opts = SvdOptions {
        seed,
        ..SvdOptions::default()
    };
    let svd = truncated_svd(&matrix, config.rank, &opts)?;
    let max_d = graph.max_degree() as f64;
    let bound = max_d / (max_d + config.a2);
    let top = svd.values.first().copied().unwrap_or(0.0);
    if top > bound * (1.0 + 1e-10) {
        return Err(Error::NumericsError(format!(
            "largest singular value {top} exceeds the bound {bound}"
        )));
    }
    let ones = vec![1.0; svd.rank()];
    let state = SvdGcnState {
        left_vectors: scaled(&svd.left, &ones),
        right_vectors: scaled(&svd.right, &ones),
        singular_values: svd.values,
        a1: config.a1,
        a2: config.a2,
        weight: None,
    };
    let (users, items) = state.embeddings();
    Ok((
        state,
        EmbeddingState {
            user_embeddings: users,
            item_embeddings: items,
            layer_outputs: None,
        },
    ))
}

impl SvdGcnState {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Singular vectors scaled by `exp(a1 λ)`, before the mixing matrix.
    pub fn base(&self) -> (Embeddings, Embeddings) {
        let f: Vec<f64> = self.singular_values.iter().map(|l| (self.a1 * l).exp()).collect();
        let scale = |e: &Embeddings| {
            let mut out = e.clone();
            for r in 0..out.rows() {
                for (v, s) in out.row_mut(r).iter_mut().zip(&f) {
                    *v *= s;
                }
            }
            out
        };
        (scale(&self.left_vectors), scale(&self.right_vectors))
    }

    pub fn embeddings(&self) -> (Embeddings, Embeddings) {
        let (u, i) = self.base();
        match &self.weight {
            None => (u, i),
            Some(w) => (mat_mul(&u, w), mat_mul(&i, w)),
        }
    }
}

pub(crate) fn mat_mul(a: &Embeddings, b: &Embeddings) -> Embeddings {
    let mut out = Embeddings::zeros(a.rows(), b.dim());
    for r in 0..a.rows() {
        let arow = a.row(r);
        let orow = out.row_mut(r);
        for (t, &x) in arow.iter().enumerate() {
            for (o, y) in orow.iter_mut().zip(b.row(t)) {
                *o += x * y;
            }
        }
    }
    out
}

/// `aᵀ g` for the gradient of the mixing matrix.
pub(crate) fn tr_mat_mul(a: &Embeddings, g: &Embeddings) -> Embeddings {
    let mut out = Embeddings::zeros(a.dim(), g.dim());
    for r in 0..a.rows() {
        let grow = g.row(r);
        for (t, &x) in a.row(r).iter().enumerate() {
            for (o, y) in out.row_mut(t).iter_mut().zip(grow) {
                *o += x * y;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn config(rank: usize, a1: f64) -> SvdGcnConfig {
        SvdGcnConfig {
            rank,
            a1,
            ..SvdGcnConfig::default()
        }
    }

    #[test]
    fn zero_a1_gives_singular_vectors() {
        let g = crate::synthetic::power_law_bipartite(20, 15, 80, 2.0, 9);
        let (state, emb) = svdgcn_embed(&g, &config(4, 0.0), 1).unwrap();
        assert_eq!(emb.user_embeddings, state.left_vectors);
        assert_eq!(emb.item_embeddings, state.right_vectors);
    }

    #[test]
    fn complete_graph_is_rank_one() {
        let g = BipartiteGraph::from_edges(3, 4, (0..3).flat_map(|u| (0..4).map(move |i| (u, i)))).unwrap();
        let (state, _) = svdgcn_embed(&g, &config(3, 1.0), 1).unwrap();
        assert!(state.singular_values[0] > 0.5);
        assert!(state.singular_values[1..].iter().all(|v| v.abs() < 1e-12));
        // single triplet reconstructs the normalized matrix
        let dense = shifted_normalized(&g, 1.0).unwrap().to_dense();
        let l = state.singular_values[0];
        for u in 0..3 {
            for i in 0..4 {
                let rec = state.left_vectors.row(u)[0] * l * state.right_vectors.row(i)[0];
                assert!((rec - dense[(u, i)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn values_match_dense_oracle() {
        let mut rng = <crate::rng::Rng as rand::SeedableRng>::seed_from_u64(21);
        let edges: Vec<(u32, u32)> = (0..12u32)
            .flat_map(|u| (0..9u32).map(move |i| (u, i)))
            .filter(|_| rand::Rng::random_bool(&mut rng, 0.4))
            .collect();
        let g = BipartiteGraph::from_edges(12, 9, edges).unwrap();
        let (state, _) = svdgcn_embed(&g, &config(5, 1.0), 3).unwrap();
        // build the normalized matrix independently
        let a2 = 1.0;
        let m = DMatrix::from_fn(12, 9, |u, i| {
            if g.has_edge(u, i) {
                1.0 / (((g.degree(Side::User, u) as f64) + a2) * ((g.degree(Side::Item, i) as f64) + a2)).sqrt()
            } else {
                0.0
            }
        });
        let mut oracle: Vec<f64> = m.singular_values().iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for k in 0..5 {
            assert!((state.singular_values[k] - oracle[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_above_dimensions_rejected() {
        let g = crate::graph::fixtures::k22();
        assert!(matches!(svdgcn_embed(&g, &config(3, 1.0), 1), Err(Error::ShapeError(_))));
    }

    #[test]
    fn mixing_matrix_products() {
        let a = Embeddings::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Embeddings::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(mat_mul(&a, &b).as_slice(), &[2.0, 1.0, 4.0, 3.0]);
        assert_eq!(tr_mat_mul(&a, &b).as_slice(), &[3.0, 1.0, 4.0, 2.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn singular_value_bound_holds(g in crate::graph::tests::arb_graph(15, 15), a2 in 0.0f64..5.0) {
            let k = g.user_count().min(g.item_count());
            let cfg = SvdGcnConfig { rank: k, a2, ..SvdGcnConfig::default() };
            let (state, _) = svdgcn_embed(&g, &cfg, 0).unwrap();
            let d = g.max_degree() as f64;
            prop_assert!(state.singular_values[0] <= d / (d + a2) + 1e-12);
            prop_assert!(state.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
