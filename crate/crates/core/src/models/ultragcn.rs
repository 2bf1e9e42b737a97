//! UltraGCN objective: weighted pointwise loss plus item-item constraints.

use crate::graph::{BipartiteGraph, ProjectedGraph, Side};

use super::loss::{log_sigmoid, sigmoid, LossAndGrad};
use super::{dot, Embeddings, UltraGcnConfig};

/// Degree tables and item neighbor lists derived from the training graph.
#[derive(Debug, Clone)]
pub struct UltraGcnContext {
    user_degree: Vec<f64>,
    item_degree: Vec<f64>,
    /// Per item, its top co-occurring items with their coefficients.
    pub neighbors: Vec<Vec<(u32, f64)>>,
}

/// Top-`k` neighbors of every item in the item projection, ranked by
/// co-occurrence count (ties to the smaller index), with coefficients
/// `R_ij / (g_i - R_ii) * sqrt(g_i / g_j)` where `g` is the weighted degree
/// including the diagonal. Items with `g_i = R_ii` get no neighbors.
pub fn item_neighbors(projection: &ProjectedGraph, k: usize) -> Vec<Vec<(u32, f64)>> {
    let n = projection.node_count();
    let g: Vec<f64> = (0..n).map(|v| projection.weighted_degree(v) as f64).collect();
    let mut skipped = 0usize;
    let out = (0..n)
        .map(|i| {
            let denom = g[i] - projection.diagonal(i) as f64;
            if denom <= 0.0 {
                skipped += 1;
                return Vec::new();
            }
            let (cols, weights) = projection.row(i);
            let mut row: Vec<(u32, u64)> = cols.iter().copied().zip(weights.iter().copied()).collect();
            row.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            row.truncate(k);
            row.into_iter()
                .map(|(j, r)| (j, r as f64 / denom * (g[i] / g[j as usize]).sqrt()))
                .collect()
        })
        .collect();
    if skipped > 0 {
        log::debug!("{skipped} items without co-occurring neighbors skipped in the item-item loss");
    }
    out
}

impl UltraGcnContext {
    pub fn new(train: &BipartiteGraph, neighbors: usize) -> Self {
        UltraGcnContext {
            user_degree: train.degrees(Side::User).into_iter().map(|d| d as f64).collect(),
            item_degree: train.degrees(Side::Item).into_iter().map(|d| d as f64).collect(),
            neighbors: item_neighbors(&train.project(Side::Item), neighbors),
        }
    }

    /// Constraint coefficient `(1/σ_u) * sqrt(σ_u + 1) / sqrt(σ_i + 1)`.
    pub fn beta(&self, user: usize, item: usize) -> f64 {
        let du = self.user_degree[user];
        if du == 0.0 {
            return 0.0;
        }
        (du + 1.0).sqrt() / du / (self.item_degree[item] + 1.0).sqrt()
    }
}

/// Batch loss and gradients. All terms are averaged over the positives and
/// the negatives of one positive share `negative_weight` between them;
/// `l2` penalizes the rows of users, positives and negatives in the batch.
pub fn ultragcn_losses(
    users: &Embeddings,
    items: &Embeddings,
    batch_pos: &[(u32, u32)],
    batch_neg: &[(u32, u32)],
    ctx: &UltraGcnContext,
    config: &UltraGcnConfig,
    l2: f64,
) -> LossAndGrad {
    let mut gu = Embeddings::zeros(users.rows(), users.dim());
    let mut gi = Embeddings::zeros(items.rows(), items.dim());
    let scale = 1.0 / batch_pos.len().max(1) as f64;
    let mut loss = 0.0;

    // pointwise term: weight * -ln σ(sign * x)
    let pointwise = |u: usize, i: usize, sign: f64, weight: f64, gu: &mut Embeddings, gi: &mut Embeddings| {
        if weight == 0.0 {
            return 0.0;
        }
        let (eu, ei) = (users.row(u), items.row(i));
        let x = sign * dot(eu, ei);
        let c = -weight * sign * sigmoid(-x) * scale;
        for (g, v) in gu.row_mut(u).iter_mut().zip(ei) {
            *g += c * v;
        }
        for (g, v) in gi.row_mut(i).iter_mut().zip(eu) {
            *g += c * v;
        }
        -weight * log_sigmoid(x)
    };

    for &(u, i) in batch_pos {
        let (u, i) = (u as usize, i as usize);
        let w = config.main_weight + config.constraint_weight * ctx.beta(u, i);
        loss += pointwise(u, i, 1.0, w, &mut gu, &mut gi);
        if config.item_weight > 0.0 {
            for &(j, omega) in &ctx.neighbors[i] {
                loss += pointwise(u, j as usize, 1.0, config.item_weight * omega, &mut gu, &mut gi);
            }
        }
    }
    let neg_share = config.negative_weight / config.negatives.max(1) as f64;
    for &(u, j) in batch_neg {
        let (u, j) = (u as usize, j as usize);
        let w = neg_share * (config.main_weight + config.constraint_weight * ctx.beta(u, j));
        loss += pointwise(u, j, -1.0, w, &mut gu, &mut gi);
    }
    if l2 > 0.0 {
        let reg = |e: &Embeddings, g: &mut Embeddings, r: usize| {
            let row = e.row(r);
            for (gv, v) in g.row_mut(r).iter_mut().zip(row) {
                *gv += l2 * scale * v;
            }
            0.5 * l2 * dot(row, row)
        };
        for &(u, i) in batch_pos {
            loss += reg(users, &mut gu, u as usize);
            loss += reg(items, &mut gi, i as usize);
        }
        for &(_, j) in batch_neg {
            loss += reg(items, &mut gi, j as usize);
        }
    }
    LossAndGrad {
        loss: loss * scale,
        users: gu,
        items: gi,
    }
}
