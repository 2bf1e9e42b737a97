//! Graph collaborative-filtering recommenders: LightGCN, DGCF, UltraGCN and
//! SVD-GCN, trained with mini-batch gradient steps and early stopping.

mod loss;
mod optim;
pub mod persist;
mod propagate;
mod svdgcn;
mod train;
mod ultragcn;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, RankingResult};
use crate::par::{self, Execution};
use crate::rng::Rng;
use crate::split::SplitDataset;

pub use loss::{bpr_loss, log_sigmoid, svdgcn_partition_loss, LossAndGrad};
pub use optim::Adam;
pub use propagate::{dgcf_propagate, dgcf_routing, lightgcn_propagate, DgcfState, EmbeddingState, Propagator};
pub use svdgcn::{shifted_normalized, svdgcn_embed, SvdGcnState};
pub use train::{train, EarlyStopping, EpochRecord, StopDecision, TrainedModel};
pub use ultragcn::{item_neighbors, ultragcn_losses, UltraGcnContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    LightGcn,
    Dgcf,
    UltraGcn,
    SvdGcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::LightGcn, ModelKind::Dgcf, ModelKind::UltraGcn, ModelKind::SvdGcn];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LightGcn => "lightgcn",
            ModelKind::Dgcf => "dgcf",
            ModelKind::UltraGcn => "ultragcn",
            ModelKind::SvdGcn => "svdgcn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::ConfigError(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgcfConfig {
    pub intents: usize,
    pub routing_iterations: usize,
}

impl Default for DgcfConfig {
    fn default() -> Self {
        DgcfConfig {
            intents: 4,
            routing_iterations: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UltraGcnConfig {
    pub main_weight: f64,
    pub constraint_weight: f64,
    pub item_weight: f64,
    /// Item neighbors kept per item for the item-item term.
    pub neighbors: usize,
    /// Negatives drawn per positive.
    pub negatives: usize,
    /// Total weight of one positive's negatives; each negative carries
    /// `negative_weight / negatives` of it.
    pub negative_weight: f64,
}

impl Default for UltraGcnConfig {
    fn default() -> Self {
        UltraGcnConfig {
            main_weight: 1.0,
            constraint_weight: 1.0,
            item_weight: 0.5,
            neighbors: 10,
            negatives: 10,
            negative_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvdGcnConfig {
    pub rank: usize,
    pub a1: f64,
    pub a2: f64,
    /// Learn the k×k mixing matrix; when false it stays the identity.
    pub trainable: bool,
    pub partition_weight: f64,
}

impl Default for SvdGcnConfig {
    fn default() -> Self {
        SvdGcnConfig {
            rank: 32,
            a1: 2.0,
            a2: 1.0,
            trainable: false,
            partition_weight: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub embedding_dim: usize,
    pub layers: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub negatives: usize,
    pub l2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Cut-off of the validation recall used for early stopping.
    pub eval_k: usize,
    pub dgcf: DgcfConfig,
    pub ultragcn: UltraGcnConfig,
    pub svdgcn: SvdGcnConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embedding_dim: 64,
            layers: 3,
            learning_rate: 0.01,
            batch_size: 512,
            negatives: 1,
            l2: 1e-4,
            max_epochs: 200,
            patience: 10,
            eval_k: 20,
            dgcf: DgcfConfig::default(),
            ultragcn: UltraGcnConfig::default(),
            svdgcn: SvdGcnConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigError(m.to_string()));
        if self.embedding_dim == 0 || self.batch_size == 0 || self.negatives == 0 || self.eval_k == 0 {
            return bad("embedding_dim, batch_size, negatives and eval_k must be positive");
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return bad("max_epochs and patience must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.l2 >= 0.0) {
            return bad("learning_rate and l2 must be non-negative");
        }
        if self.dgcf.intents == 0 || self.embedding_dim % self.dgcf.intents != 0 {
            return bad("embedding_dim must be divisible by dgcf.intents");
        }
        let u = &self.ultragcn;
        if u.negatives == 0 || u.main_weight < 0.0 || u.constraint_weight < 0.0 || u.item_weight < 0.0 || u.negative_weight < 0.0 {
            return bad("ultragcn weights must be non-negative and negatives positive");
        }
        let s = &self.svdgcn;
        if s.rank == 0 || !(s.a2 >= 0.0) || !s.a1.is_finite() || s.partition_weight < 0.0 {
            return bad("svdgcn.rank must be positive and a2 non-negative");
        }
        Ok(())
    }
}

/// Row-major dense matrix of node embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Embeddings {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Embeddings {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::ShapeError(format!("{} values for a {rows}x{dim} matrix", data.len())));
        }
        Ok(Embeddings { rows, dim, data })
    }

    /// Zero-mean uniform entries with half-width `1/sqrt(dim)`.
    pub fn uniform(rows: usize, dim: usize, rng: &mut Rng) -> Self {
        let h = 1.0 / (dim as f64).sqrt();
        let data = (0..rows * dim).map(|_| rng.random_range(-h..h)).collect();
        Embeddings { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Final user and item representations of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalEmbeddings {
    pub users: Embeddings,
    pub items: Embeddings,
}

impl FinalEmbeddings {
    /// Inner-product score of every item for `user`.
    pub fn score_all(&self, user: usize) -> Vec<f64> {
        let u = self.users.row(user);
        (0..self.items.rows()).map(|i| dot(u, self.items.row(i))).collect()
    }

    /// Top-`k` lists for every user, never containing items in `exclude[u]`.
    pub fn rank(&self, exclude: &[Vec<u32>], k: usize, exec: Execution) -> RankingResult {
        let lists = par::map_indexed(exec, self.users.rows(), |u| {
            let mask = exclude.get(u).map(Vec::as_slice).unwrap_or(&[]);
            metrics::top_k(&self.score_all(u), mask, k)
        });
        RankingResult { k, lists }
    }

    /// Recall@k and nDCG@k on `held_out`, masking `known` items.
    pub fn evaluate(&self, known: &[Vec<u32>], held_out: &[Vec<u32>], k: usize, exec: Execution) -> Result<(f64, f64)> {
        let ranking = self.rank(known, k, exec);
        Ok((
            metrics::recall_at_k(&ranking, held_out, k)?,
            metrics::ndcg_at_k(&ranking, held_out, k)?,
        ))
    }
}

/// Test-set Recall@k and nDCG@k; train and validation items are masked.
pub fn test_metrics(model: &TrainedModel, split: &SplitDataset, k: usize, exec: Execution) -> Result<(f64, f64)> {
    model
        .embeddings
        .evaluate(&split.known_by_user(), &split.test_by_user(), k, exec)
}
