//! Regression of model accuracy on dataset characteristics.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::characteristics::{CharacteristicsVector, NAMES};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::numerics::{self, ols_fit, pearson_matrix, OlsFit};
use crate::rng::{self, stream};
use crate::sampler::{GenerationConfig, Strategy};

pub const FEATURE_COUNT: usize = NAMES.len();

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub recall: f64,
    pub ndcg: f64,
}

/// One sub-dataset: how it was drawn, its size, its characteristics and
/// the test accuracy of each trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: u64,
    pub strategy: Strategy,
    pub dropout_rate: f64,
    pub seed: u64,
    pub users: usize,
    pub items: usize,
    pub edges: usize,
    pub characteristics: CharacteristicsVector,
    pub performance: BTreeMap<ModelKind, Performance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Recall,
    Ndcg,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Recall, Metric::Ndcg];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Recall => "recall",
            Metric::Ndcg => "ndcg",
        }
    }

    pub fn of(self, p: &Performance) -> f64 {
        match self {
            Metric::Recall => p.recall,
            Metric::Ndcg => p.ndcg,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let base = s.split('@').next().unwrap_or(s);
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(base))
            .ok_or_else(|| Error::ConfigError(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerConfig {
    /// z-score every characteristic column before fitting.
    pub standardize: bool,
    /// Ascending p-value cut-offs of the three significance tiers.
    pub tiers: [f64; 3],
    pub alphas: Vec<f64>,
    /// Records per α setting; 0 uses the largest total both pools allow
    /// for every α.
    pub alpha_total: usize,
    /// Characteristics left out of the regression. The log-scaled size
    /// columns are linearly dependent, so fitting all of them on real
    /// samples is reported as a collinear design.
    pub exclude: Vec<String>,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            standardize: true,
            tiers: [0.001, 0.01, 0.05],
            alphas: vec![0.0, 0.3, 0.7, 1.0],
            alpha_total: 0,
            exclude: Vec::new(),
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        let t = self.tiers;
        if !(0.0 < t[0] && t[0] <= t[1] && t[1] <= t[2] && t[2] < 1.0) {
            return Err(Error::ConfigError(format!("tiers must be ascending in (0, 1), got {t:?}")));
        }
        if self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::ConfigError("alphas must lie in [0, 1]".into()));
        }
        if let Some(bad) = self.exclude.iter().find(|e| !NAMES.contains(&e.as_str())) {
            return Err(Error::ConfigError(format!("unknown characteristic `{bad}` in exclude")));
        }
        if self.features().is_empty() {
            return Err(Error::ConfigError("exclude leaves no characteristics".into()));
        }
        Ok(())
    }

    /// Indices into [`NAMES`] of the characteristics that are fitted.
    pub fn features(&self) -> Vec<usize> {
        (0..FEATURE_COUNT).filter(|&k| !self.exclude.iter().any(|e| e == NAMES[k])).collect()
    }

    /// 3 for the strictest tier down to 0 for not significant.
    pub fn tier(&self, p: f64) -> u8 {
        self.tiers.iter().filter(|&&t| p < t).count() as u8
    }
}

/// Regression inputs: feature columns in [`NAMES`] order and the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// Indices into [`NAMES`] of `columns`.
    pub features: Vec<usize>,
    pub columns: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    /// Column means and standard deviations before any z-scoring.
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    pub standardized: bool,
    pub sample_ids: Vec<u64>,
    pub n_excluded: usize,
}

/// Rows with complete characteristics and a result for `model`. Records
/// with missing assortativity or without that model are excluded and
/// counted.
pub fn assemble_design(records: &[SampleRecord], model: ModelKind, metric: Metric, standardize: bool) -> Result<Design> {
    let all: Vec<usize> = (0..FEATURE_COUNT).collect();
    assemble_design_with(records, model, metric, standardize, &all)
}

/// [`assemble_design`] restricted to the characteristics in `features`.
pub fn assemble_design_with(
    records: &[SampleRecord],
    model: ModelKind,
    metric: Metric,
    standardize: bool,
    features: &[usize],
) -> Result<Design> {
    let mut columns = vec![Vec::new(); features.len()];
    let mut target = Vec::new();
    let mut sample_ids = Vec::new();
    for r in records {
        let (Some(values), Some(perf)) = (r.characteristics.complete(), r.performance.get(&model)) else {
            continue;
        };
        for (c, &k) in columns.iter_mut().zip(features) {
            c.push(values[k]);
        }
        target.push(metric.of(perf));
        sample_ids.push(r.sample_id);
    }
    let needed = features.len() + 2;
    if target.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            available: target.len(),
        });
    }
    let means: Vec<f64> = columns.iter().map(|c| numerics::stats::mean(c)).collect();
    let std_devs: Vec<f64> = columns.iter().map(|c| numerics::stats::std_dev(c)).collect();
    if standardize {
        for (k, col) in columns.iter_mut().enumerate() {
            let (m, s) = (means[k], std_devs[k]);
            for v in col.iter_mut() {
                // a constant column stays constant and is reported as collinear
                *v = if s > 0.0 { (*v - m) / s } else { 0.0 };
            }
        }
    }
    Ok(Design {
        features: features.to_vec(),
        n_excluded: records.len() - target.len(),
        columns,
        target,
        means,
        std_devs,
        standardized: standardize,
        sample_ids,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub characteristic: String,
    /// Fitted coefficient on the design scale.
    pub coefficient: f64,
    /// Effect of one standard deviation of the characteristic.
    pub standardized_coefficient: f64,
    /// Effect of one unit of the raw characteristic.
    pub raw_coefficient: f64,
    pub std_error: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub tier: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub model: ModelKind,
    pub metric: Metric,
    pub standardized: bool,
    pub n_samples_used: usize,
    pub n_samples_excluded: usize,
    pub intercept: f64,
    pub intercept_p_value: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub degrees_of_freedom: usize,
    pub tiers: [f64; 3],
    pub coefficients: Vec<CoefficientRow>,
    /// Pearson matrix of the characteristic columns; `None` where undefined.
    pub correlation: Vec<Vec<Option<f64>>>,
}

pub fn explain(records: &[SampleRecord], model: ModelKind, metric: Metric, config: &ExplainerConfig) -> Result<RegressionReport> {
    config.validate()?;
    let design = assemble_design_with(records, model, metric, config.standardize, &config.features())?;
    let names: Vec<&str> = design.features.iter().map(|&k| NAMES[k]).collect();
    let fit = ols_fit(&design.columns, &design.target, &names)?;
    Ok(report_from_fit(&design, &fit, model, metric, config))
}

fn report_from_fit(design: &Design, fit: &OlsFit, model: ModelKind, metric: Metric, config: &ExplainerConfig) -> RegressionReport {
    let coefficients = design
        .features
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let theta = fit.coefficients[c];
            let sd = design.std_devs[c];
            let (standardized, raw) = if design.standardized {
                (theta, if sd > 0.0 { theta / sd } else { f64::NAN })
            } else {
                (theta * sd, theta)
            };
            let p = fit.p_values[c + 1];
            CoefficientRow {
                characteristic: NAMES[k].to_string(),
                coefficient: theta,
                standardized_coefficient: standardized,
                raw_coefficient: raw,
                std_error: fit.std_errors[c + 1],
                t_statistic: fit.t_statistics[c + 1],
                p_value: p,
                tier: config.tier(p),
            }
        })
        .collect();
    RegressionReport {
        model,
        metric,
        standardized: design.standardized,
        n_samples_used: design.target.len(),
        n_samples_excluded: design.n_excluded,
        intercept: fit.intercept,
        intercept_p_value: fit.p_values[0],
        r_squared: fit.r_squared,
        adj_r_squared: fit.adj_r_squared,
        degrees_of_freedom: fit.dof,
        tiers: config.tiers,
        coefficients,
        correlation: pearson_matrix(&design.columns),
    }
}

impl RegressionReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// One row per characteristic, ready for a bar chart.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        write_coefficient_header(&mut w)?;
        for r in &self.coefficients {
            w.write_record([
                r.characteristic.clone(),
                r.coefficient.to_string(),
                r.standardized_coefficient.to_string(),
                r.raw_coefficient.to_string(),
                r.std_error.to_string(),
                r.t_statistic.to_string(),
                r.p_value.to_string(),
                r.tier.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Square correlation matrix with characteristic names on both axes.
    pub fn write_correlation_csv(&self, path: &Path) -> Result<()> {
        write_correlation_csv(path, &self.correlation)
    }
}

fn write_coefficient_header<W: std::io::Write>(w: &mut csv::Writer<W>) -> Result<()> {
    w.write_record([
        "characteristic",
        "coefficient",
        "standardized_coefficient",
        "raw_coefficient",
        "std_error",
        "t_statistic",
        "p_value",
        "tier",
    ])?;
    Ok(())
}

/// Header-only coefficient CSV, written when a report cannot be fitted.
pub fn write_empty_csv(path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    write_coefficient_header(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_correlation_csv(path: &Path, matrix: &[Vec<Option<f64>>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![String::new()];
    header.extend(NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (name, row) in NAMES.iter().zip(matrix) {
        let mut rec = vec![name.to_string()];
        rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Pearson matrix of the complete characteristic vectors among `records`.
pub fn characteristic_correlation(records: &[SampleRecord]) -> Vec<Vec<Option<f64>>> {
    let mut columns = vec![Vec::new(); FEATURE_COUNT];
    for r in records {
        if let Some(v) = r.characteristics.complete() {
            for (c, x) in columns.iter_mut().zip(v) {
                c.push(x);
            }
        }
    }
    pearson_matrix(&columns)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaMixResult {
    pub alpha: f64,
    pub node_records: usize,
    pub edge_records: usize,
    pub avg_users: f64,
    pub avg_items: f64,
    pub avg_edges: f64,
    pub sample_ids: Vec<u64>,
    pub report: RegressionReport,
}

fn draw(pool: &[&SampleRecord], n: usize, rng: &mut rng::Rng) -> Vec<SampleRecord> {
    let mut picked: Vec<usize> = index::sample(rng, pool.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|k| pool[k].clone()).collect()
}

/// For each α, draws `⌊(1−α)·total⌋` node-dropout and the remaining
/// edge-dropout records without replacement, fits [`explain`] and reports
/// the average size of the drawn samples. Draws for the k-th α use a
/// stream derived from `seed` and k.
#[allow(clippy::too_many_arguments)]
pub fn alpha_mix_study(
    node_records: &[SampleRecord],
    edge_records: &[SampleRecord],
    alphas: &[f64],
    total: usize,
    model: ModelKind,
    metric: Metric,
    config: &ExplainerConfig,
    seed: u64,
) -> Result<Vec<AlphaMixResult>> {
    // only records usable for this model compete for a slot
    let usable = |rs: &[SampleRecord]| -> Vec<SampleRecord> {
        rs.iter()
            .filter(|r| r.characteristics.is_complete() && r.performance.contains_key(&model))
            .cloned()
            .collect()
    };
    let node_pool = usable(node_records);
    let edge_pool = usable(edge_records);
    let node_refs: Vec<&SampleRecord> = node_pool.iter().collect();
    let edge_refs: Vec<&SampleRecord> = edge_pool.iter().collect();
    let mut out = Vec::with_capacity(alphas.len());
    for (k, &alpha) in alphas.iter().enumerate() {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::ConfigError(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let n_node = GenerationConfig::node_share(alpha, total);
        let n_edge = total - n_node;
        for (need, have) in [(n_node, node_refs.len()), (n_edge, edge_refs.len())] {
            if need > have {
                return Err(Error::InsufficientSamples {
                    needed: need,
                    available: have,
                });
            }
        }
        let mut rng = rng::rng_for(seed, &[stream::ALPHA, k as u64]);
        let mut chosen = draw(&node_refs, n_node, &mut rng);
        chosen.extend(draw(&edge_refs, n_edge, &mut rng));
        let report = explain(&chosen, model, metric, config)?;
        let avg = |f: fn(&SampleRecord) -> usize| chosen.iter().map(|r| f(r) as f64).sum::<f64>() / chosen.len() as f64;
        out.push(AlphaMixResult {
            alpha,
            node_records: n_node,
            edge_records: n_edge,
            avg_users: avg(|r| r.users),
            avg_items: avg(|r| r.items),
            avg_edges: avg(|r| r.edges),
            sample_ids: chosen.iter().map(|r| r.sample_id).collect(),
            report,
        });
    }
    Ok(out)
}

/// Largest per-α total that both pools can serve for every α in `alphas`.
pub fn max_alpha_total(node_pool: usize, edge_pool: usize, alphas: &[f64]) -> usize {
    let mut total = node_pool + edge_pool;
    while total > 0
        && alphas.iter().any(|&a| {
            let n = GenerationConfig::node_share(a, total);
            n > node_pool || total - n > edge_pool
        })
    {
        total -= 1;
    }
    total
}
