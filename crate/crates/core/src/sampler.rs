//! Sub-dataset generation by node- or edge-dropout.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::par::{self, Execution};
use crate::rng::{self, stream, Rng};

/// Consecutive degenerate draws tolerated per sample.
pub const MAX_RETRIES: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    NodeDropout,
    EdgeDropout,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::NodeDropout => "node_dropout",
            Strategy::EdgeDropout => "edge_dropout",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "node_dropout" => Ok(Strategy::NodeDropout),
            "edge_dropout" => Ok(Strategy::EdgeDropout),
            other => Err(format!("unknown sampling strategy `{other}`")),
        }
    }
}

/// Provenance of one accepted sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub sample_id: u64,
    pub strategy: Strategy,
    /// Fraction of nodes or edges removed.
    pub dropout_rate: f64,
    /// Seed of the accepted attempt.
    pub seed: u64,
    pub retries: u32,
}

/// How strategies are assigned to samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyMix {
    /// Fair coin per sample.
    Uniform,
    /// Fraction of samples that use edge-dropout; the rest use node-dropout.
    Alpha(f64),
}

/// Minimum size of an accepted sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceFloors {
    pub min_users: usize,
    pub min_items: usize,
    pub min_edges: usize,
}

impl Default for AcceptanceFloors {
    fn default() -> Self {
        AcceptanceFloors {
            min_users: 50,
            min_items: 50,
            min_edges: 500,
        }
    }
}

impl AcceptanceFloors {
    pub const NONE: AcceptanceFloors = AcceptanceFloors {
        min_users: 1,
        min_items: 1,
        min_edges: 1,
    };

    pub fn check(&self, g: &BipartiteGraph) -> Result<()> {
        if g.user_count() < self.min_users
            || g.item_count() < self.min_items
            || g.edge_count() < self.min_edges
        {
            return Err(Error::DegenerateSample(format!(
                "{} users, {} items, {} edges below floors {}/{}/{}",
                g.user_count(),
                g.item_count(),
                g.edge_count(),
                self.min_users,
                self.min_items,
                self.min_edges
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub sample_count: usize,
    pub rate_range: (f64, f64),
    pub strategy_mix: StrategyMix,
    pub master_seed: u64,
    pub floors: AcceptanceFloors,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            sample_count: 600,
            rate_range: (0.7, 0.9),
            strategy_mix: StrategyMix::Uniform,
            master_seed: 0,
            floors: AcceptanceFloors::default(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.rate_range;
        if self.sample_count == 0 {
            return Err(Error::ConfigError("sample_count must be at least 1".into()));
        }
        if !(0.0 <= lo && lo <= hi && hi < 1.0) {
            return Err(Error::ConfigError(format!(
                "rate_range must satisfy 0 <= low <= high < 1, got ({lo}, {hi})"
            )));
        }
        if let StrategyMix::Alpha(a) = self.strategy_mix {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::ConfigError(format!("alpha must lie in [0, 1], got {a}")));
            }
        }
        Ok(())
    }

    /// Number of node-dropout samples under an α mix:
    /// `⌊(1 − α)·M⌋`, the remainder being edge-dropout.
    pub fn node_share(alpha: f64, total: usize) -> usize {
        (((1.0 - alpha) * total as f64) + 1e-9).floor() as usize
    }
}

/// A generated sub-dataset.
#[derive(Debug, Clone)]
pub struct Sample {
    pub spec: SamplingSpec,
    pub graph: BipartiteGraph,
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::ConfigError(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    Ok(())
}

fn removal_count(rate: f64, n: usize) -> usize {
    // guard against products such as 0.29 * 100 = 28.999999999999996
    ((rate * n as f64 + 1e-9).floor() as usize).min(n)
}

fn compact(edges: &[(u32, u32)]) -> Result<BipartiteGraph> {
    if edges.is_empty() {
        return Err(Error::DegenerateSample("no edges survived dropout".into()));
    }
    Ok(BipartiteGraph::compact_from_edges(edges)?.0)
}

/// Removes `⌊rate·(U+I)⌋` nodes drawn uniformly from the pooled user and
/// item sets, then drops isolated nodes. No component extraction.
pub fn node_dropout_raw(graph: &BipartiteGraph, rate: f64, rng: &mut Rng) -> Result<BipartiteGraph> {
    check_rate(rate)?;
    let (nu, ni) = (graph.user_count(), graph.item_count());
    let mut removed = vec![false; nu + ni];
    for k in index::sample(rng, nu + ni, removal_count(rate, nu + ni)) {
        removed[k] = true;
    }
    let kept: Vec<(u32, u32)> = graph
        .edges()
        .iter()
        .copied()
        .filter(|&(u, i)| !removed[u as usize] && !removed[nu + i as usize])
        .collect();
    compact(&kept)
}

/// Removes `⌊rate·E⌋` uniformly chosen edges, then drops isolated nodes.
/// No component extraction.
pub fn edge_dropout_raw(graph: &BipartiteGraph, rate: f64, rng: &mut Rng) -> Result<BipartiteGraph> {
    check_rate(rate)?;
    let e = graph.edge_count();
    let mut removed = vec![false; e];
    for k in index::sample(rng, e, removal_count(rate, e)) {
        removed[k] = true;
    }
    let kept: Vec<(u32, u32)> = graph
        .edges()
        .iter()
        .zip(&removed)
        .filter(|(_, &r)| !r)
        .map(|(&e, _)| e)
        .collect();
    compact(&kept)
}

fn finish(raw: Result<BipartiteGraph>, floors: &AcceptanceFloors) -> Result<BipartiteGraph> {
    let lcc = raw?.largest_connected_component().map_err(|e| match e {
        Error::EmptyDataset => Error::DegenerateSample("empty after dropout".into()),
        other => other,
    })?;
    floors.check(&lcc)?;
    Ok(lcc)
}

/// Node-dropout followed by largest-component extraction and the floor check.
pub fn node_dropout(
    graph: &BipartiteGraph,
    rate: f64,
    rng: &mut Rng,
    floors: &AcceptanceFloors,
) -> Result<BipartiteGraph> {
    finish(node_dropout_raw(graph, rate, rng), floors)
}

/// Edge-dropout followed by largest-component extraction and the floor check.
pub fn edge_dropout(
    graph: &BipartiteGraph,
    rate: f64,
    rng: &mut Rng,
    floors: &AcceptanceFloors,
) -> Result<BipartiteGraph> {
    finish(edge_dropout_raw(graph, rate, rng), floors)
}

pub fn apply(
    strategy: Strategy,
    graph: &BipartiteGraph,
    rate: f64,
    rng: &mut Rng,
    floors: &AcceptanceFloors,
) -> Result<BipartiteGraph> {
    match strategy {
        Strategy::NodeDropout => node_dropout(graph, rate, rng, floors),
        Strategy::EdgeDropout => edge_dropout(graph, rate, rng, floors),
    }
}

fn strategy_for(config: &GenerationConfig, sample_id: u64) -> Strategy {
    match config.strategy_mix {
        StrategyMix::Uniform => {
            let mut r = rng::rng_for(config.master_seed, &[stream::STRATEGY, sample_id]);
            if r.random_bool(0.5) {
                Strategy::EdgeDropout
            } else {
                Strategy::NodeDropout
            }
        }
        StrategyMix::Alpha(alpha) => {
            let nodes = GenerationConfig::node_share(alpha, config.sample_count) as u64;
            if sample_id < nodes {
                Strategy::NodeDropout
            } else {
                Strategy::EdgeDropout
            }
        }
    }
}

/// Draws one sample. The strategy is fixed per sample id; the rate and the
/// dropout itself are redrawn from a fresh generator on every retry.
pub fn generate_one(graph: &BipartiteGraph, config: &GenerationConfig, sample_id: u64) -> Result<Sample> {
    let strategy = strategy_for(config, sample_id);
    let (lo, hi) = config.rate_range;
    for retry in 0..=MAX_RETRIES {
        let seed = rng::derive_seed(config.master_seed, &[stream::DROPOUT, sample_id, retry as u64]);
        let mut r = <Rng as rand::SeedableRng>::seed_from_u64(seed);
        let rate = if lo == hi { lo } else { r.random_range(lo..=hi) };
        match apply(strategy, graph, rate, &mut r, &config.floors) {
            Ok(g) => {
                return Ok(Sample {
                    spec: SamplingSpec {
                        sample_id,
                        strategy,
                        dropout_rate: rate,
                        seed,
                        retries: retry,
                    },
                    graph: g,
                })
            }
            Err(Error::DegenerateSample(reason)) => {
                log::debug!("sample {sample_id} retry {retry}: {reason}");
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::SamplingExhausted {
        sample_id,
        retries: MAX_RETRIES,
    })
}

/// Generates `config.sample_count` accepted samples, ordered by id. Output
/// is independent of `exec`.
pub fn generate_samples(
    graph: &BipartiteGraph,
    config: &GenerationConfig,
    exec: Execution,
) -> Result<Vec<Sample>> {
    config.validate()?;
    par::map_indexed(exec, config.sample_count, |id| generate_one(graph, config, id as u64))
        .into_iter()
        .collect()
}
