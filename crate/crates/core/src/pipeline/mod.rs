//! End-to-end orchestration: ingest, sample, characterize, train and
//! evaluate, explain. Every stage is resumable through the run manifest.

pub mod config;
pub mod manifest;
pub mod records;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::characteristics::{self, CharacteristicsVector};
use crate::error::{Error, Result};
use crate::explainer::{self, AlphaMixResult, Metric, Performance, SampleRecord};
use crate::graph::{io, BipartiteGraph, Side};
use crate::models::{self, persist, ModelKind};
use crate::numerics::{fit_degree_distribution, DegreeDistributionFit};
use crate::par::{self, Execution};
use crate::rng::{self, stream};
use crate::sampler::{self, SamplingSpec, Strategy};
use crate::split::{self, SplitDataset};

pub use config::PipelineConfig;
pub use manifest::{Entry, Manifest, ManifestState, Stage};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const RECORDS_FILE: &str = "records.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub name: String,
    pub raw_users: usize,
    pub raw_items: usize,
    pub raw_edges: usize,
    pub users: usize,
    pub items: usize,
    pub edges: usize,
    pub dataset_sha256: String,
}

/// Reads the dataset and keeps its largest connected component.
pub fn ingest_dataset(path: &Path, name: &str) -> Result<(BipartiteGraph, IngestSummary)> {
    if !path.is_file() {
        return Err(Error::ConfigError(format!("dataset not found: {}", path.display())));
    }
    let bytes = fs::read(path)?;
    let labeled = io::read_graph(path)?;
    let raw = &labeled.graph;
    let seed = raw.largest_connected_component()?;
    let summary = IngestSummary {
        name: name.to_string(),
        raw_users: raw.user_count(),
        raw_items: raw.item_count(),
        raw_edges: raw.edge_count(),
        users: seed.user_count(),
        items: seed.item_count(),
        edges: seed.edge_count(),
        dataset_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    Ok((seed, summary))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct MetricsFile {
    k: usize,
    recall: f64,
    ndcg: f64,
    epochs_run: usize,
    best_epoch: usize,
}

/// An opened output directory with its manifest and seed graph.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub seed_graph: BipartiteGraph,
    pub summary: IngestSummary,
    manifest: Manifest,
}

impl Pipeline {
    pub fn open(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let (seed_graph, summary) = ingest_dataset(&config.dataset.path, &config.dataset.name)?;
        let out = &config.output;
        fs::create_dir_all(out.join("seed"))?;
        io::write_graph(&out.join("seed").join("graph.tsv"), &seed_graph)?;
        write_json(&out.join("seed").join("info.json"), &summary)?;
        let manifest = Manifest::open(&out.join(MANIFEST_FILE), &config.hash(), &summary.dataset_sha256)?;
        if !manifest.state().stages.contains(&Stage::Ingest) {
            manifest.append(Entry::StageComplete { stage: Stage::Ingest })?;
        }
        log::info!(
            "seed graph: {} users, {} items, {} edges",
            seed_graph.user_count(),
            seed_graph.item_count(),
            seed_graph.edge_count()
        );
        Ok(Pipeline {
            config,
            seed_graph,
            summary,
            manifest,
        })
    }

    pub fn output(&self) -> &Path {
        &self.config.output
    }

    pub fn manifest_state(&self) -> ManifestState {
        self.manifest.state()
    }

    pub fn sample_dir(&self, id: u64) -> PathBuf {
        self.output().join("samples").join(format!("{id:04}"))
    }

    fn ids(&self) -> Vec<u64> {
        (0..self.config.sampling.samples as u64).collect()
    }

    /// Runs `f` for every sample id on the worker pool and enforces the
    /// failure threshold.
    fn for_each_sample<F>(&self, stage: Stage, ids: &[u64], f: F) -> Result<()>
    where
        F: Fn(u64) -> Result<()> + Sync + Send,
    {
        let results = par::with_workers(self.config.workers, || {
            par::map_slice(Execution::default(), ids, |&id| (id, f(id)))
        });
        for (id, r) in results {
            if let Err(e) = r {
                log::warn!("sample {id}: {stage:?} failed: {e}");
                self.manifest.append(Entry::Failed {
                    sample_id: id,
                    stage,
                    message: e.to_string(),
                })?;
            }
        }
        self.check_failures()
    }

    fn check_failures(&self) -> Result<()> {
        let total = self.config.sampling.samples;
        let state = self.manifest.state();
        // a sample counts as failed unless a later stage succeeded for it
        let failed = state
            .failed
            .keys()
            .filter(|id| !state.evaluated.contains(id))
            .filter(|id| match state.failed[id].0 {
                Stage::Sample => !state.generated.contains(id),
                Stage::Characterize => !state.characterized.contains(id),
                _ => true,
            })
            .count();
        if failed * 10 > total {
            return Err(Error::TooManyFailures { failed, total });
        }
        Ok(())
    }

    /// Stage 1: draw the sub-datasets.
    pub fn sample(&self) -> Result<()> {
        let gen = self.config.generation();
        let state = self.manifest.state();
        let todo: Vec<u64> = self
            .ids()
            .into_iter()
            .filter(|&id| !(state.generated.contains(&id) && self.sample_dir(id).join("graph.tsv").is_file()))
            .collect();
        log::info!("sampling {} of {} samples", todo.len(), gen.sample_count);
        self.for_each_sample(Stage::Sample, &todo, |id| {
            let s = sampler::generate_one(&self.seed_graph, &gen, id)?;
            let dir = self.sample_dir(id);
            fs::create_dir_all(&dir)?;
            io::write_graph(&dir.join("graph.tsv"), &s.graph)?;
            write_json(&dir.join("spec.json"), &s.spec)?;
            self.manifest.append(Entry::Generated { sample_id: id })
        })?;
        self.manifest.append(Entry::StageComplete { stage: Stage::Sample })
    }

    fn load_sample_graph(&self, id: u64) -> Result<BipartiteGraph> {
        let edges = io::read_edges(&self.sample_dir(id).join("graph.tsv"))?;
        Ok(BipartiteGraph::compact_from_edges(&edges)?.0)
    }

    fn generated_ids(&self) -> Vec<u64> {
        let state = self.manifest.state();
        self.ids().into_iter().filter(|id| state.generated.contains(id)).collect()
    }

    /// Stage 2: characteristics of every generated sample.
    pub fn characterize(&self) -> Result<()> {
        self.sample()?;
        let state = self.manifest.state();
        let todo: Vec<u64> = self
            .generated_ids()
            .into_iter()
            .filter(|&id| {
                !(state.characterized.contains(&id) && self.sample_dir(id).join("characteristics.json").is_file())
            })
            .collect();
        log::info!("characterizing {} samples", todo.len());
        self.for_each_sample(Stage::Characterize, &todo, |id| {
            let g = self.load_sample_graph(id)?;
            let c = characteristics::compute_all_with(&g, Execution::Sequential)?;
            write_json(&self.sample_dir(id).join("characteristics.json"), &c)?;
            self.manifest.append(Entry::Characterized { sample_id: id })
        })?;
        self.manifest.append(Entry::StageComplete {
            stage: Stage::Characterize,
        })
    }

    fn split_for(&self, id: u64, g: &BipartiteGraph) -> Result<SplitDataset> {
        let mut r = rng::rng_for(self.config.seed, &[stream::SPLIT, id]);
        split::split(g, &mut r, self.config.split_ratios())
    }

    fn model_dir(&self, id: u64, kind: ModelKind) -> PathBuf {
        self.sample_dir(id).join("models").join(kind.as_str())
    }

    fn train_sample(&self, id: u64) -> Result<()> {
        let state = self.manifest.state();
        let g = self.load_sample_graph(id)?;
        let split = self.split_for(id, &g)?;
        let split_dir = self.sample_dir(id).join("split");
        if !split_dir.join("test.tsv").is_file() {
            fs::create_dir_all(&split_dir)?;
            split.write(&split_dir)?;
        }
        let k = self.config.evaluation.k;
        let mut first_err = None;
        for &kind in &self.config.models {
            let dir = self.model_dir(id, kind);
            if state.trained.contains(&(id, kind)) && dir.join("metrics.json").is_file() {
                continue;
            }
            let seed = rng::derive_seed(self.config.seed, &[stream::TRAIN, id, kind as u64]);
            let outcome = models::train(kind, &split, &self.config.train_config(kind), seed).and_then(|m| {
                let (recall, ndcg) = models::test_metrics(&m, &split, k, Execution::Sequential)?;
                persist::save(&dir, &m)?;
                write_json(
                    &dir.join("metrics.json"),
                    &MetricsFile {
                        k,
                        recall,
                        ndcg,
                        epochs_run: m.epochs_run,
                        best_epoch: m.best_epoch,
                    },
                )
            });
            match outcome {
                Ok(()) => self.manifest.append(Entry::Trained { sample_id: id, model: kind })?,
                Err(e) => {
                    log::warn!("sample {id}: {kind} failed: {e}");
                    first_err.get_or_insert(e);
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => self.manifest.append(Entry::Evaluated { sample_id: id }),
        }
    }

    /// Stage 3: split, train every configured model and evaluate on test.
    pub fn train(&self) -> Result<()> {
        self.characterize()?;
        let state = self.manifest.state();
        let todo: Vec<u64> = self
            .ids()
            .into_iter()
            .filter(|id| state.characterized.contains(id))
            .filter(|&id| {
                self.config
                    .models
                    .iter()
                    .any(|&k| !(state.trained.contains(&(id, k)) && self.model_dir(id, k).join("metrics.json").is_file()))
            })
            .collect();
        log::info!("training on {} samples", todo.len());
        self.for_each_sample(Stage::Train, &todo, |id| self.train_sample(id))?;
        self.write_records()?;
        self.manifest.append(Entry::StageComplete { stage: Stage::Train })
    }

    /// Gathers per-sample artifacts into records, sorted by sample id.
    pub fn collect_records(&self) -> Result<Vec<SampleRecord>> {
        let mut out = Vec::new();
        for id in self.ids() {
            let dir = self.sample_dir(id);
            let (spec_p, char_p) = (dir.join("spec.json"), dir.join("characteristics.json"));
            if !spec_p.is_file() || !char_p.is_file() {
                continue;
            }
            let mut performance = BTreeMap::new();
            for &kind in &self.config.models {
                let p = self.model_dir(id, kind).join("metrics.json");
                if p.is_file() {
                    let m: MetricsFile = read_json(&p)?;
                    performance.insert(
                        kind,
                        Performance {
                            recall: m.recall,
                            ndcg: m.ndcg,
                        },
                    );
                }
            }
            if performance.is_empty() {
                continue;
            }
            let spec: SamplingSpec = read_json(&spec_p)?;
            let characteristics: CharacteristicsVector = read_json(&char_p)?;
            let g = self.load_sample_graph(id)?;
            out.push(SampleRecord {
                sample_id: id,
                strategy: spec.strategy,
                dropout_rate: spec.dropout_rate,
                seed: spec.seed,
                users: g.user_count(),
                items: g.item_count(),
                edges: g.edge_count(),
                characteristics,
                performance,
            });
        }
        Ok(out)
    }

    pub fn write_records(&self) -> Result<PathBuf> {
        let p = self.output().join(RECORDS_FILE);
        records::write_records(&p, &self.collect_records()?, self.config.evaluation.k)?;
        Ok(p)
    }
}

fn records_or_error(config: &PipelineConfig) -> Result<Vec<SampleRecord>> {
    let p = config.output.join(RECORDS_FILE);
    if !p.is_file() {
        return Err(Error::ConfigError(format!(
            "{} not found; run the train stage first",
            p.display()
        )));
    }
    records::read_records(&p)
}

#[derive(Debug, Serialize)]
struct Unavailable<'a> {
    model: ModelKind,
    metric: Metric,
    status: &'a str,
    message: String,
}

fn write_unavailable(json: &Path, csv_path: Option<&Path>, model: ModelKind, metric: Metric, e: &Error) -> Result<()> {
    let status = match e {
        Error::InsufficientSamples { .. } => "insufficient_samples",
        Error::CollinearDesign(_) => "collinear_design",
        _ => "failed",
    };
    write_json(
        json,
        &Unavailable {
            model,
            metric,
            status,
            message: e.to_string(),
        },
    )?;
    if let Some(c) = csv_path {
        explainer::write_empty_csv(c)?;
    }
    Ok(())
}

fn tolerable(e: &Error) -> bool {
    matches!(e, Error::InsufficientSamples { .. } | Error::CollinearDesign(_) | Error::FitInfeasible(_))
}

/// Stage 4: one regression report per model and metric, plus the
/// characteristic correlation matrix. With `strict`, an unfittable report
/// is an error; otherwise a status file is written in its place.
pub fn explain_stage(config: &PipelineConfig, strict: bool) -> Result<Vec<explainer::RegressionReport>> {
    let records = records_or_error(config)?;
    let dir = config.output.join("reports");
    fs::create_dir_all(&dir)?;
    explainer::write_correlation_csv(
        &config.output.join("correlation.csv"),
        &explainer::characteristic_correlation(&records),
    )?;
    let mut out = Vec::new();
    for &model in &config.models {
        for metric in Metric::ALL {
            let stem = format!("{model}_{metric}");
            let (json, csv_path) = (dir.join(format!("{stem}.json")), dir.join(format!("{stem}.csv")));
            match explainer::explain(&records, model, metric, &config.explainer) {
                Ok(rep) => {
                    rep.write_json(&json)?;
                    rep.write_csv(&csv_path)?;
                    out.push(rep);
                }
                Err(e) if !strict && tolerable(&e) => {
                    log::warn!("{stem}: {e}");
                    write_unavailable(&json, Some(&csv_path), model, metric, &e)?;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// α-mix study over the node- and edge-dropout records.
pub fn alpha_mix_stage(config: &PipelineConfig, strict: bool) -> Result<Vec<Vec<AlphaMixResult>>> {
    let records = records_or_error(config)?;
    let (node, edge): (Vec<SampleRecord>, Vec<SampleRecord>) =
        records.into_iter().partition(|r| r.strategy == Strategy::NodeDropout);
    let dir = config.output.join("alpha_mix");
    fs::create_dir_all(&dir)?;
    let alphas = &config.explainer.alphas;
    let mut out = Vec::new();
    for &model in &config.models {
        let usable = |rs: &[SampleRecord]| {
            rs.iter()
                .filter(|r| r.characteristics.is_complete() && r.performance.contains_key(&model))
                .count()
        };
        let total = match config.explainer.alpha_total {
            0 => explainer::max_alpha_total(usable(&node), usable(&edge), alphas),
            t => t,
        };
        for metric in Metric::ALL {
            let stem = format!("{model}_{metric}");
            let json = dir.join(format!("{stem}.json"));
            match explainer::alpha_mix_study(&node, &edge, alphas, total, model, metric, &config.explainer, config.seed) {
                Ok(res) => {
                    write_json(&json, &res)?;
                    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
                    w.write_record([
                        "alpha",
                        "node_records",
                        "edge_records",
                        "avg_users",
                        "avg_items",
                        "avg_edges",
                        "r_squared",
                        "adj_r_squared",
                    ])?;
                    for r in &res {
                        w.write_record([
                            r.alpha.to_string(),
                            r.node_records.to_string(),
                            r.edge_records.to_string(),
                            r.avg_users.to_string(),
                            r.avg_items.to_string(),
                            r.avg_edges.to_string(),
                            r.report.r_squared.to_string(),
                            r.report.adj_r_squared.to_string(),
                        ])?;
                    }
                    w.flush()?;
                    out.push(res);
                }
                Err(e) if !strict && tolerable(&e) => {
                    log::warn!("alpha mix {stem}: {e}");
                    write_unavailable(&json, None, model, metric, &e)?;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeFitReport {
    pub user: DegreeDistributionFit,
    pub item: DegreeDistributionFit,
}

/// Degree-distribution fits of both sides of `graph`, written to
/// `degree_fit.json` and a plot-ready `degree_fit.csv` under `out`.
pub fn degree_fit_stage(graph: &BipartiteGraph, out: &Path) -> Result<DegreeFitReport> {
    let report = DegreeFitReport {
        user: fit_degree_distribution(&graph.degrees(Side::User))?,
        item: fit_degree_distribution(&graph.degrees(Side::Item))?,
    };
    fs::create_dir_all(out)?;
    write_json(&out.join("degree_fit.json"), &report)?;
    let mut w = csv::Writer::from_path(out.join("degree_fit.csv"))?;
    w.write_record(["side", "degree", "probability", "power_law", "exponential"])?;
    for (side, fit) in [("user", &report.user), ("item", &report.item)] {
        for &(d, p) in &fit.empirical {
            w.write_record([
                side.to_string(),
                d.to_string(),
                p.to_string(),
                fit.power_law(d).to_string(),
                fit.exponential(d).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(report)
}

impl Pipeline {
    /// Stage 4, after training whatever is still missing.
    pub fn explain(&self, strict: bool) -> Result<Vec<explainer::RegressionReport>> {
        self.train()?;
        let out = explain_stage(&self.config, strict)?;
        self.manifest.append(Entry::StageComplete { stage: Stage::Explain })?;
        Ok(out)
    }

    pub fn alpha_mix(&self, strict: bool) -> Result<Vec<Vec<AlphaMixResult>>> {
        self.train()?;
        let out = alpha_mix_stage(&self.config, strict)?;
        self.manifest.append(Entry::StageComplete { stage: Stage::AlphaMix })?;
        Ok(out)
    }

    pub fn degree_fit(&self) -> Result<DegreeFitReport> {
        let out = degree_fit_stage(&self.seed_graph, self.output())?;
        self.manifest.append(Entry::StageComplete { stage: Stage::DegreeFit })?;
        Ok(out)
    }
}

/// All stages in order. Reports that cannot be fitted are replaced by
/// status files instead of aborting the run.
pub fn run_pipeline(config: PipelineConfig) -> Result<PathBuf> {
    let p = Pipeline::open(config)?;
    p.explain(false)?;
    p.alpha_mix(false)?;
    match p.degree_fit() {
        Ok(_) => {}
        Err(e @ Error::FitInfeasible(_)) => log::warn!("degree fit: {e}"),
        Err(e) => return Err(e),
    }
    Ok(p.output().to_path_buf())
}
