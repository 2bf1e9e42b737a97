//! Append-only JSON-lines run manifest used for resuming.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Sample,
    Characterize,
    Train,
    Explain,
    AlphaMix,
    DegreeFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Entry {
    Start {
        config_hash: String,
        dataset_hash: String,
    },
    Generated {
        sample_id: u64,
    },
    Characterized {
        sample_id: u64,
    },
    Trained {
        sample_id: u64,
        model: ModelKind,
    },
    Evaluated {
        sample_id: u64,
    },
    Failed {
        sample_id: u64,
        stage: Stage,
        message: String,
    },
    StageComplete {
        stage: Stage,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Line {
    timestamp: u64,
    #[serde(flatten)]
    entry: Entry,
}

/// Replayed manifest state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ManifestState {
    pub config_hash: Option<String>,
    pub dataset_hash: Option<String>,
    pub generated: BTreeSet<u64>,
    pub characterized: BTreeSet<u64>,
    pub trained: BTreeSet<(u64, ModelKind)>,
    pub evaluated: BTreeSet<u64>,
    pub failed: BTreeMap<u64, (Stage, String)>,
    pub stages: BTreeSet<Stage>,
}

impl ManifestState {
    fn apply(&mut self, e: &Entry) {
        match e {
            Entry::Start {
                config_hash,
                dataset_hash,
            } => {
                self.config_hash = Some(config_hash.clone());
                self.dataset_hash = Some(dataset_hash.clone());
            }
            Entry::Generated { sample_id } => {
                self.generated.insert(*sample_id);
            }
            Entry::Characterized { sample_id } => {
                self.characterized.insert(*sample_id);
            }
            Entry::Trained { sample_id, model } => {
                self.trained.insert((*sample_id, *model));
            }
            Entry::Evaluated { sample_id } => {
                self.evaluated.insert(*sample_id);
            }
            Entry::Failed {
                sample_id,
                stage,
                message,
            } => {
                self.failed.insert(*sample_id, (*stage, message.clone()));
            }
            Entry::StageComplete { stage } => {
                self.stages.insert(*stage);
            }
        }
    }
}

pub struct Manifest {
    path: PathBuf,
    file: Mutex<File>,
    state: Mutex<ManifestState>,
}

fn corrupt(path: &Path, line: usize, why: impl std::fmt::Display) -> Error {
    Error::ManifestError(format!(
        "{}: line {line} is corrupt ({why}). Truncate the file to its last valid line to resume, \
         or delete it (and the output directory) to start over.",
        path.display()
    ))
}

/// Replays a manifest file; a missing file is an empty state.
pub fn read_state(path: &Path) -> Result<ManifestState> {
    let mut state = ManifestState::default();
    if !path.exists() {
        return Ok(state);
    }
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| corrupt(path, n + 1, e))?;
        state.apply(&parsed.entry);
    }
    Ok(state)
}

impl Manifest {
    /// Opens (or creates) the manifest at `path` and checks it belongs to
    /// the same configuration and dataset.
    pub fn open(path: &Path, config_hash: &str, dataset_hash: &str) -> Result<Self> {
        let state = read_state(path)?;
        if let (Some(c), Some(d)) = (&state.config_hash, &state.dataset_hash) {
            if c != config_hash || d != dataset_hash {
                return Err(Error::ManifestError(format!(
                    "{} was written for a different configuration or dataset. \
                     Use a fresh output directory, or delete the manifest to recompute everything.",
                    path.display()
                )));
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let m = Manifest {
            path: path.to_path_buf(),
            file: Mutex::new(file),
            state: Mutex::new(state),
        };
        if m.state().config_hash.is_none() {
            m.append(Entry::Start {
                config_hash: config_hash.to_string(),
                dataset_hash: dataset_hash.to_string(),
            })?;
        }
        Ok(m)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn state(&self) -> ManifestState {
        self.state.lock().expect("manifest lock").clone()
    }

    pub fn append(&self, entry: Entry) -> Result<()> {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let text = serde_json::to_string(&Line {
            timestamp,
            entry: entry.clone(),
        })?;
        let mut f = self.file.lock().expect("manifest lock");
        writeln!(f, "{text}")?;
        f.flush()?;
        self.state.lock().expect("manifest lock").apply(&entry);
        Ok(())
    }
}
