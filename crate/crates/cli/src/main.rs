use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use topo_rec::characteristics::{self, CharacteristicsVector};
use topo_rec::graph::io;
use topo_rec::pipeline::{self, Pipeline, PipelineConfig};

/// Explains recommender accuracy through dataset characteristics.
#[derive(Debug, Parser)]
#[command(name = "topo-rec", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a dataset and extract its largest connected component.
    Ingest {
        /// Interaction file to use instead of the configured dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Draw the sub-datasets.
    Sample,
    /// Compute characteristics for every sample, or for one graph.
    Characterize {
        /// Print the characteristics of this interaction file as CSV.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Train and evaluate the configured models on every sample.
    Train,
    /// Fit the explanatory regressions.
    Explain,
    /// Run the node/edge-dropout composition study.
    AlphaMix,
    /// Fit power-law and exponential models to the degree distributions.
    DegreeFit {
        /// Interaction file to use instead of the configured dataset.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// All stages in order.
    Run,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let path = self.config.as_deref().context("--config is required for this subcommand")?;
        let mut cfg = PipelineConfig::load(path)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn characterize_file(path: &Path) -> Result<CharacteristicsVector> {
    let g = io::read_graph(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(characteristics::compute_all(&g.graph)?)
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Ingest { dataset: Some(path) } => {
            let (graph, summary) = pipeline::ingest_dataset(&path, "")?;
            if let Some(out) = &common.output {
                std::fs::create_dir_all(out)?;
                io::write_graph(&out.join("graph.tsv"), &graph)?;
            }
            print_json(&summary)
        }
        Command::Ingest { dataset: None } => print_json(&Pipeline::open(common.load()?)?.summary),
        Command::Sample => Pipeline::open(common.load()?)?.sample().map_err(Into::into),
        Command::Characterize { graph: Some(path) } => {
            let c = characterize_file(&path)?;
            println!("{}", CharacteristicsVector::csv_header());
            println!("{}", c.csv_row());
            Ok(())
        }
        Command::Characterize { graph: None } => Pipeline::open(common.load()?)?.characterize().map_err(Into::into),
        Command::Train => {
            let p = Pipeline::open(common.load()?)?;
            p.train()?;
            println!("{}", p.output().join(pipeline::RECORDS_FILE).display());
            Ok(())
        }
        Command::Explain => {
            let reports = Pipeline::open(common.load()?)?.explain(true)?;
            for r in reports {
                println!("{} {}: adj_r2={:.4} m={}", r.model, r.metric, r.adj_r_squared, r.n_samples_used);
            }
            Ok(())
        }
        Command::AlphaMix => {
            let studies = Pipeline::open(common.load()?)?.alpha_mix(true)?;
            for study in studies {
                for a in study {
                    println!(
                        "{} {} alpha={}: node={} edge={} adj_r2={:.4}",
                        a.report.model, a.report.metric, a.alpha, a.node_records, a.edge_records, a.report.adj_r_squared
                    );
                }
            }
            Ok(())
        }
        Command::DegreeFit { graph: Some(path) } => {
            let (g, _) = pipeline::ingest_dataset(&path, "")?;
            let out = common.output.clone().unwrap_or_else(|| PathBuf::from("."));
            print_json(&pipeline::degree_fit_stage(&g, &out)?)
        }
        Command::DegreeFit { graph: None } => print_json(&Pipeline::open(common.load()?)?.degree_fit()?),
        Command::Run => {
            let out = pipeline::run_pipeline(common.load()?)?;
            println!("{}", out.display());
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TOPO_REC_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
