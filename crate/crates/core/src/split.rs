//! Edge-level random train / validation / test split.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{io, BipartiteGraph};
use crate::rng::Rng;

pub const MIN_SPLIT_EDGES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    /// Fraction of all edges held out for testing.
    pub test: f64,
    /// Fraction of the remaining (non-test) edges held out for validation.
    pub validation: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            test: 0.2,
            validation: 0.1,
        }
    }
}

/// Disjoint partition of a graph's edges. Indices refer to the parent
/// graph, whose user and item counts are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitDataset {
    pub user_count: usize,
    pub item_count: usize,
    pub train: Vec<(u32, u32)>,
    pub validation: Vec<(u32, u32)>,
    pub test: Vec<(u32, u32)>,
}

fn share(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 + 1e-9).floor() as usize).min(n)
}

/// Uniform edge split. Users left without training edges get their held-out
/// edges moved back to train, which removes them from evaluation.
pub fn split(graph: &BipartiteGraph, rng: &mut Rng, ratios: SplitRatios) -> Result<SplitDataset> {
    let e = graph.edge_count();
    if e < MIN_SPLIT_EDGES {
        return Err(Error::SplitInfeasible(e));
    }
    if !(0.0..=1.0).contains(&ratios.test) || !(0.0..=1.0).contains(&ratios.validation) {
        return Err(Error::ConfigError(format!("split ratios out of range: {ratios:?}")));
    }
    let mut order: Vec<usize> = (0..e).collect();
    order.shuffle(rng);
    let n_test = share(ratios.test, e);
    let n_val = share(ratios.validation, e - n_test);

    // 0 = train, 1 = validation, 2 = test
    let mut part = vec![0u8; e];
    for &k in &order[..n_test] {
        part[k] = 2;
    }
    for &k in &order[n_test..n_test + n_val] {
        part[k] = 1;
    }
    let edges = graph.edges();
    let mut has_train = vec![false; graph.user_count()];
    for (k, &(u, _)) in edges.iter().enumerate() {
        if part[k] == 0 {
            has_train[u as usize] = true;
        }
    }
    let mut out = SplitDataset {
        user_count: graph.user_count(),
        item_count: graph.item_count(),
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (k, &edge) in edges.iter().enumerate() {
        let p = if has_train[edge.0 as usize] { part[k] } else { 0 };
        match p {
            0 => out.train.push(edge),
            1 => out.validation.push(edge),
            _ => out.test.push(edge),
        }
    }
    Ok(out)
}

/// Per-user sorted item lists.
pub fn group_by_user(user_count: usize, edges: &[(u32, u32)]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); user_count];
    for &(u, i) in edges {
        out[u as usize].push(i);
    }
    for l in &mut out {
        l.sort_unstable();
    }
    out
}

impl SplitDataset {
    pub fn train_graph(&self) -> Result<BipartiteGraph> {
        BipartiteGraph::from_edges(self.user_count, self.item_count, self.train.iter().copied())
    }

    pub fn train_by_user(&self) -> Vec<Vec<u32>> {
        group_by_user(self.user_count, &self.train)
    }

    pub fn validation_by_user(&self) -> Vec<Vec<u32>> {
        group_by_user(self.user_count, &self.validation)
    }

    pub fn test_by_user(&self) -> Vec<Vec<u32>> {
        group_by_user(self.user_count, &self.test)
    }

    /// Items a user already interacted with outside the test set.
    pub fn known_by_user(&self) -> Vec<Vec<u32>> {
        let mut all = self.train.clone();
        all.extend_from_slice(&self.validation);
        group_by_user(self.user_count, &all)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_edges(&dir.join("train.tsv"), &self.train)?;
        io::write_edges(&dir.join("val.tsv"), &self.validation)?;
        io::write_edges(&dir.join("test.tsv"), &self.test)?;
        Ok(())
    }
}
