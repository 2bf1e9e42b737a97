//! Trained-model artifacts: binary embedding dump, JSON manifest and
//! per-epoch trace.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Embeddings, FinalEmbeddings, ModelKind, TrainConfig, TrainedModel};

pub const MAGIC: &[u8; 8] = b"TREMB001";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub kind: ModelKind,
    pub config: TrainConfig,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_validation_recall: Option<f64>,
    pub users: usize,
    pub items: usize,
    pub dim: usize,
}

/// Layout: magic, then users, items and dim as u64 LE, then user rows and
/// item rows as f64 LE.
pub fn write_embeddings(path: &Path, emb: &FinalEmbeddings) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for n in [emb.users.rows(), emb.items.rows(), emb.users.dim()] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for v in emb.users.as_slice().iter().chain(emb.items.as_slice()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<FinalEmbeddings> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ShapeError(format!("{} is not an embedding dump", path.display())));
    }
    let mut word = [0u8; 8];
    let mut header = [0usize; 3];
    for h in &mut header {
        r.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word) as usize;
    }
    let [users, items, dim] = header;
    let mut read = |rows: usize| -> Result<Embeddings> {
        let mut data = Vec::with_capacity(rows * dim);
        for _ in 0..rows * dim {
            r.read_exact(&mut word)?;
            data.push(f64::from_le_bytes(word));
        }
        Embeddings::from_vec(rows, dim, data)
    };
    let u = read(users)?;
    let i = read(items)?;
    Ok(FinalEmbeddings { users: u, items: i })
}

pub fn manifest(model: &TrainedModel) -> ModelManifest {
    ModelManifest {
        kind: model.kind,
        config: model.config.clone(),
        epochs_run: model.epochs_run,
        best_epoch: model.best_epoch,
        best_validation_recall: model.best_validation,
        users: model.embeddings.users.rows(),
        items: model.embeddings.items.rows(),
        dim: model.embeddings.users.dim(),
    }
}

pub fn write_trace(path: &Path, model: &TrainedModel) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "loss", "val_recall@20"])?;
    for r in &model.trace {
        w.write_record([
            r.epoch.to_string(),
            r.loss.to_string(),
            r.val_recall.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `embeddings.bin`, `model.json` and `trace.csv` into `dir`.
pub fn save(dir: &Path, model: &TrainedModel) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_embeddings(&dir.join("embeddings.bin"), &model.embeddings)?;
    std::fs::write(dir.join("model.json"), serde_json::to_string_pretty(&manifest(model))?)?;
    write_trace(&dir.join("trace.csv"), model)
}
