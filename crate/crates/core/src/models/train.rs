//! Mini-batch training with validation-based early stopping.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::metrics;
use crate::par::Execution;
use crate::rng::Rng;
use crate::split::SplitDataset;

use super::loss::{bpr_loss, svdgcn_partition_loss, LossAndGrad};
use super::optim::Adam;
use super::propagate::{dgcf_routing, DgcfState, Propagator};
use super::svdgcn::{mat_mul, svdgcn_embed, tr_mat_mul, SvdGcnState};
use super::ultragcn::{ultragcn_losses, UltraGcnContext};
use super::{dot, Embeddings, FinalEmbeddings, ModelKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_recall: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once `patience` consecutive epochs bring no strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    since: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience: patience.max(1),
            best: None,
            best_epoch: 0,
            since: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, metric: f64) -> StopDecision {
        if !metric.is_nan() && self.best.is_none_or(|b| metric > b) {
            self.best = Some(metric);
            self.best_epoch = epoch;
            self.since = 0;
            return StopDecision::Improved;
        }
        self.since += 1;
        if self.since >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub config: TrainConfig,
    /// Final representations at the best validation epoch.
    pub embeddings: FinalEmbeddings,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_validation: Option<f64>,
    pub trace: Vec<EpochRecord>,
}

impl TrainedModel {
    pub fn score_all(&self, user: usize) -> Vec<f64> {
        self.embeddings.score_all(user)
    }
}

struct Data {
    graph: BipartiteGraph,
    train_by_user: Vec<Vec<u32>>,
    val_by_user: Vec<Vec<u32>>,
    has_validation: bool,
}

fn sample_negative(rng: &mut Rng, item_count: usize, known: &[u32]) -> Option<u32> {
    if known.len() >= item_count {
        return None;
    }
    for _ in 0..64 {
        let j = rng.random_range(0..item_count as u32);
        if known.binary_search(&j).is_err() {
            return Some(j);
        }
    }
    let free: Vec<u32> = (0..item_count as u32).filter(|j| known.binary_search(j).is_err()).collect();
    Some(free[rng.random_range(0..free.len())])
}

fn triples(data: &Data, batch: &[(u32, u32)], rng: &mut Rng) -> Vec<(u32, u32, u32)> {
    batch
        .iter()
        .filter_map(|&(u, i)| {
            sample_negative(rng, data.graph.item_count(), &data.train_by_user[u as usize]).map(|j| (u, i, j))
        })
        .collect()
}

fn add_scaled(dst: &mut Embeddings, src: &Embeddings, a: f64) {
    for (d, s) in dst.as_mut_slice().iter_mut().zip(src.as_slice()) {
        *d += a * s;
    }
}

/// BPR objective of a propagated model with L2 on the layer-0 rows in the
/// batch. Intent weights, when given, are treated as constants.
pub(crate) fn gcn_objective(
    prop: &Propagator<'_>,
    weights: Option<&DgcfState>,
    layers: usize,
    users: &Embeddings,
    items: &Embeddings,
    batch: &[(u32, u32, u32)],
    l2: f64,
) -> Result<LossAndGrad> {
    let fwd = prop.propagate(weights, users, items, layers)?;
    let out = bpr_loss(&fwd.user_embeddings, &fwd.item_embeddings, batch);
    // the mean-of-layers map is symmetric, so the backward pass propagates
    // the output gradient the same way
    let back = prop.propagate(weights, &out.users, &out.items, layers)?;
    let (mut gu, mut gi) = (back.user_embeddings, back.item_embeddings);
    let mut loss = out.loss;
    let scale = 1.0 / batch.len().max(1) as f64;
    if l2 > 0.0 {
        let reg = |e: &Embeddings, g: &mut Embeddings, r: u32| {
            let row = e.row(r as usize);
            for (gv, v) in g.row_mut(r as usize).iter_mut().zip(row) {
                *gv += l2 * scale * v;
            }
            0.5 * l2 * scale * dot(row, row)
        };
        for &(u, i, j) in batch {
            loss += reg(users, &mut gu, u) + reg(items, &mut gi, i) + reg(items, &mut gi, j);
        }
    }
    Ok(LossAndGrad {
        loss,
        users: gu,
        items: gi,
    })
}

trait Learner {
    fn step(&mut self, data: &Data, batch: &[(u32, u32)], rng: &mut Rng) -> Result<f64>;
    fn snapshot(&self) -> Result<FinalEmbeddings>;
}

struct GcnLearner<'p> {
    prop: &'p Propagator<'p>,
    layers: usize,
    l2: f64,
    // (intents, routing iterations) for DGCF
    intents: Option<(usize, usize)>,
    users: Embeddings,
    items: Embeddings,
    adam_u: Adam,
    adam_i: Adam,
}

impl GcnLearner<'_> {
    fn weights(&self) -> Result<Option<DgcfState>> {
        self.intents
            .map(|(k, r)| dgcf_routing(self.prop, &self.users, &self.items, k, r))
            .transpose()
    }
}

impl Learner for GcnLearner<'_> {
    fn step(&mut self, data: &Data, batch: &[(u32, u32)], rng: &mut Rng) -> Result<f64> {
        let t = triples(data, batch, rng);
        if t.is_empty() {
            return Ok(0.0);
        }
        let w = self.weights()?;
        let out = gcn_objective(self.prop, w.as_ref(), self.layers, &self.users, &self.items, &t, self.l2)?;
        self.adam_u.step(self.users.as_mut_slice(), out.users.as_slice());
        self.adam_i.step(self.items.as_mut_slice(), out.items.as_slice());
        Ok(out.loss)
    }

    fn snapshot(&self) -> Result<FinalEmbeddings> {
        let w = self.weights()?;
        let s = self.prop.propagate(w.as_ref(), &self.users, &self.items, self.layers)?;
        Ok(FinalEmbeddings {
            users: s.user_embeddings,
            items: s.item_embeddings,
        })
    }
}

struct UltraLearner {
    ctx: UltraGcnContext,
    config: super::UltraGcnConfig,
    l2: f64,
    users: Embeddings,
    items: Embeddings,
    adam_u: Adam,
    adam_i: Adam,
}

impl Learner for UltraLearner {
    fn step(&mut self, data: &Data, batch: &[(u32, u32)], rng: &mut Rng) -> Result<f64> {
        let mut neg = Vec::with_capacity(batch.len() * self.config.negatives);
        for &(u, _) in batch {
            for _ in 0..self.config.negatives {
                if let Some(j) = sample_negative(rng, data.graph.item_count(), &data.train_by_user[u as usize]) {
                    neg.push((u, j));
                }
            }
        }
        let out = ultragcn_losses(&self.users, &self.items, batch, &neg, &self.ctx, &self.config, self.l2);
        self.adam_u.step(self.users.as_mut_slice(), out.users.as_slice());
        self.adam_i.step(self.items.as_mut_slice(), out.items.as_slice());
        Ok(out.loss)
    }

    fn snapshot(&self) -> Result<FinalEmbeddings> {
        Ok(FinalEmbeddings {
            users: self.users.clone(),
            items: self.items.clone(),
        })
    }
}

struct SvdLearner {
    state: SvdGcnState,
    base_u: Embeddings,
    base_i: Embeddings,
    weight: Embeddings,
    trainable: bool,
    partition_weight: f64,
    l2: f64,
    adam: Adam,
}

impl SvdLearner {
    fn pairs(graph: &BipartiteGraph, side: crate::graph::Side, nodes: &[u32], rng: &mut Rng) -> (Vec<(u32, u32)>, Vec<(u32, u32)>) {
        let n = graph.count(side) as u32;
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for &v in nodes {
            let hop = graph.neighbors(side, v as usize);
            let mid = hop[rng.random_range(0..hop.len())];
            let back = graph.neighbors(side.other(), mid as usize);
            let w = back[rng.random_range(0..back.len())];
            if w != v {
                pos.push((v, w));
            }
            if n > 1 {
                let j = rng.random_range(0..n - 1);
                neg.push((v, if j >= v { j + 1 } else { j }));
            }
        }
        (pos, neg)
    }
}

impl Learner for SvdLearner {
    fn step(&mut self, data: &Data, batch: &[(u32, u32)], rng: &mut Rng) -> Result<f64> {
        let t = triples(data, batch, rng);
        if t.is_empty() {
            return Ok(0.0);
        }
        let eu = mat_mul(&self.base_u, &self.weight);
        let ei = mat_mul(&self.base_i, &self.weight);
        let mut out = bpr_loss(&eu, &ei, &t);
        if !self.trainable {
            return Ok(out.loss);
        }
        let scale = 1.0 / t.len() as f64;
        if self.partition_weight > 0.0 {
            use crate::graph::Side;
            let us: Vec<u32> = batch.iter().map(|p| p.0).collect();
            let is: Vec<u32> = batch.iter().map(|p| p.1).collect();
            let (pu, nu) = Self::pairs(&data.graph, Side::User, &us, rng);
            let (pi, ni) = Self::pairs(&data.graph, Side::Item, &is, rng);
            let (lu, gu) = svdgcn_partition_loss(&eu, &pu, &nu);
            let (li, gi) = svdgcn_partition_loss(&ei, &pi, &ni);
            out.loss += self.partition_weight * scale * (lu + li);
            add_scaled(&mut out.users, &gu, self.partition_weight * scale);
            add_scaled(&mut out.items, &gi, self.partition_weight * scale);
        }
        let mut gw = tr_mat_mul(&self.base_u, &out.users);
        add_scaled(&mut gw, &tr_mat_mul(&self.base_i, &out.items), 1.0);
        add_scaled(&mut gw, &self.weight, self.l2);
        out.loss += 0.5 * self.l2 * dot(self.weight.as_slice(), self.weight.as_slice());
        self.adam.step(self.weight.as_mut_slice(), gw.as_slice());
        Ok(out.loss)
    }

    fn snapshot(&self) -> Result<FinalEmbeddings> {
        let mut s = self.state.clone();
        if self.trainable {
            s.weight = Some(self.weight.clone());
        }
        let (users, items) = s.embeddings();
        Ok(FinalEmbeddings { users, items })
    }
}

fn identity(k: usize) -> Embeddings {
    let mut m = Embeddings::zeros(k, k);
    for d in 0..k {
        m.row_mut(d)[d] = 1.0;
    }
    m
}

fn validation_recall(data: &Data, emb: &FinalEmbeddings, k: usize) -> Result<Option<f64>> {
    if !data.has_validation {
        return Ok(None);
    }
    let ranking = emb.rank(&data.train_by_user, k, Execution::Sequential);
    metrics::recall_at_k(&ranking, &data.val_by_user, k).map(Some)
}

/// Trains `kind` on the training edges of `split`, early-stopping on
/// validation Recall@`eval_k`, and returns the best-validation snapshot.
/// Single-threaded and deterministic for a fixed `seed`.
pub fn train(kind: ModelKind, split: &SplitDataset, config: &TrainConfig, seed: u64) -> Result<TrainedModel> {
    config.validate()?;
    let graph = split.train_graph()?;
    if graph.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let val_by_user = split.validation_by_user();
    let data = Data {
        train_by_user: split.train_by_user(),
        has_validation: val_by_user.iter().any(|v| !v.is_empty()),
        val_by_user,
        graph,
    };
    let mut rng = Rng::seed_from_u64(seed);
    let (nu, ni) = (data.graph.user_count(), data.graph.item_count());
    let b = config.embedding_dim;
    let prop = Propagator::new(&data.graph);

    let mut learner: Box<dyn Learner + '_> = match kind {
        ModelKind::LightGcn | ModelKind::Dgcf => {
            let users = Embeddings::uniform(nu, b, &mut rng);
            let items = Embeddings::uniform(ni, b, &mut rng);
            Box::new(GcnLearner {
                prop: &prop,
                layers: config.layers,
                l2: config.l2,
                intents: (kind == ModelKind::Dgcf).then_some((config.dgcf.intents, config.dgcf.routing_iterations)),
                adam_u: Adam::new(nu * b, config.learning_rate),
                adam_i: Adam::new(ni * b, config.learning_rate),
                users,
                items,
            })
        }
        ModelKind::UltraGcn => {
            let users = Embeddings::uniform(nu, b, &mut rng);
            let items = Embeddings::uniform(ni, b, &mut rng);
            Box::new(UltraLearner {
                ctx: UltraGcnContext::new(&data.graph, config.ultragcn.neighbors),
                config: config.ultragcn.clone(),
                l2: config.l2,
                adam_u: Adam::new(nu * b, config.learning_rate),
                adam_i: Adam::new(ni * b, config.learning_rate),
                users,
                items,
            })
        }
        ModelKind::SvdGcn => {
            let (state, _) = svdgcn_embed(&data.graph, &config.svdgcn, rng.random())?;
            let k = state.rank();
            let (base_u, base_i) = state.base();
            Box::new(SvdLearner {
                state,
                base_u,
                base_i,
                weight: identity(k),
                trainable: config.svdgcn.trainable,
                partition_weight: config.svdgcn.partition_weight,
                l2: config.l2,
                adam: Adam::new(k * k, config.learning_rate),
            })
        }
    };
    // a weight-free SVD-GCN has nothing to fit: one pass records its loss
    let max_epochs = if kind == ModelKind::SvdGcn && !config.svdgcn.trainable {
        1
    } else {
        config.max_epochs
    };

    let edges = data.graph.edges().to_vec();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = learner.snapshot()?;
    let mut trace = Vec::new();
    for epoch in 1..=max_epochs {
        let mut shuffled = edges.clone();
        shuffled.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for batch in shuffled.chunks(config.batch_size) {
            total += learner.step(&data, batch, &mut rng)?;
            batches += 1;
        }
        let loss = total / batches.max(1) as f64;
        let snap = learner.snapshot()?;
        if !loss.is_finite() || !snap.users.is_finite() || !snap.items.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        let val = validation_recall(&data, &snap, config.eval_k)?;
        trace.push(EpochRecord {
            epoch,
            loss,
            val_recall: val,
        });
        log::trace!("{kind} epoch {epoch}: loss {loss:.6} val {val:?}");
        match val {
            None => best = snap,
            Some(v) => match stopper.observe(epoch, v) {
                StopDecision::Improved => best = snap,
                StopDecision::Continue => {}
                StopDecision::Stop => break,
            },
        }
    }
    let epochs_run = trace.len();
    Ok(TrainedModel {
        kind,
        config: config.clone(),
        embeddings: best,
        epochs_run,
        best_epoch: if data.has_validation { stopper.best_epoch() } else { epochs_run },
        best_validation: stopper.best(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::super::loss::tests::finite_difference_error;
    use super::*;
    use crate::split::{split, SplitRatios};

    #[test]
    fn early_stopping_rule() {
        let mut s = EarlyStopping::new(1);
        assert_eq!(s.observe(1, 0.5), StopDecision::Improved);
        assert_eq!(s.observe(2, 0.4), StopDecision::Stop);
        assert_eq!(s.best_epoch(), 1);

        let mut s = EarlyStopping::new(3);
        assert_eq!(s.observe(1, 0.2), StopDecision::Improved);
        assert_eq!(s.observe(2, 0.2), StopDecision::Continue);
        assert_eq!(s.observe(3, 0.3), StopDecision::Improved);
        assert_eq!(s.observe(4, 0.1), StopDecision::Continue);
        assert_eq!(s.observe(5, 0.1), StopDecision::Continue);
        assert_eq!(s.observe(6, 0.1), StopDecision::Stop);
        assert_eq!(s.best(), Some(0.3));
    }

    fn small_split() -> SplitDataset {
        let g = crate::synthetic::block_dataset(40, 30, 3, 0.3, 0.02, 2, 7);
        split(&g, &mut Rng::seed_from_u64(1), SplitRatios::default()).unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            embedding_dim: 8,
            layers: 2,
            max_epochs: 6,
            patience: 2,
            batch_size: 64,
            dgcf: super::super::DgcfConfig {
                intents: 2,
                routing_iterations: 1,
            },
            svdgcn: super::super::SvdGcnConfig {
                rank: 8,
                ..Default::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_stops_after_patience() {
        let s = small_split();
        for kind in [ModelKind::LightGcn, ModelKind::UltraGcn] {
            let cfg = TrainConfig {
                learning_rate: 0.0,
                patience: 3,
                max_epochs: 50,
                ..quick()
            };
            let m = train(kind, &s, &cfg, 4).unwrap();
            assert_eq!(m.epochs_run, 4, "{kind}");
            assert_eq!(m.best_epoch, 1);
            let v0 = m.trace[0].val_recall.unwrap();
            assert!(m.trace.iter().all(|r| r.val_recall == Some(v0)));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let s = small_split();
        for kind in ModelKind::ALL {
            let a = train(kind, &s, &quick(), 9).unwrap();
            let b = train(kind, &s, &quick(), 9).unwrap();
            assert_eq!(a.trace, b.trace, "{kind}");
            assert_eq!(a.embeddings, b.embeddings);
        }
    }

    #[test]
    fn trainable_svdgcn_runs() {
        let s = small_split();
        let mut cfg = quick();
        cfg.svdgcn.trainable = true;
        let m = train(ModelKind::SvdGcn, &s, &cfg, 2).unwrap();
        assert!(m.epochs_run >= 1);
        assert!(m.trace.iter().all(|r| r.loss.is_finite()));
    }

    #[test]
    fn divergence_is_reported() {
        let s = small_split();
        let cfg = TrainConfig {
            learning_rate: f64::MAX,
            ..quick()
        };
        assert!(matches!(
            train(ModelKind::UltraGcn, &s, &cfg, 1),
            Err(Error::TrainingDiverged { epoch: 1 })
        ));
    }

    #[test]
    fn propagated_objective_gradient() {
        let g = crate::synthetic::power_law_bipartite(6, 5, 14, 1.5, 3);
        let prop = Propagator::new(&g);
        let mut rng = Rng::seed_from_u64(4);
        let (nu, ni) = (g.user_count(), g.item_count());
        let u = Embeddings::uniform(nu, 4, &mut rng);
        let i = Embeddings::uniform(ni, 4, &mut rng);
        let t: Vec<(u32, u32, u32)> = g.edges().iter().take(6).map(|&(a, b)| (a, b, (b + 1) % ni as u32)).collect();
        let routed = dgcf_routing(&prop, &u, &i, 2, 2).unwrap();
        for w in [None, Some(&routed)] {
            let out = gcn_objective(&prop, w, 3, &u, &i, &t, 0.05).unwrap();
            let eu = finite_difference_error(u.as_slice(), out.users.as_slice(), |x| {
                gcn_objective(&prop, w, 3, &Embeddings::from_vec(nu, 4, x.to_vec()).unwrap(), &i, &t, 0.05)
                    .unwrap()
                    .loss
            });
            let ei = finite_difference_error(i.as_slice(), out.items.as_slice(), |x| {
                gcn_objective(&prop, w, 3, &u, &Embeddings::from_vec(ni, 4, x.to_vec()).unwrap(), &t, 0.05)
                    .unwrap()
                    .loss
            });
            assert!(eu < 1e-4 && ei < 1e-4, "{eu} {ei}");
        }
    }
}
