//! Tab-separated interaction files: `user_id<TAB>item_id`, extra columns
//! ignored, `#` comments and blank lines skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{build_labeled_graph, BipartiteGraph, LabeledGraph};
use crate::error::{Error, Result};

pub fn read_interactions(path: &Path) -> Result<Vec<(String, String)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut cols = trimmed.split('\t');
        match (cols.next(), cols.next()) {
            (Some(u), Some(i)) if !u.is_empty() && !i.is_empty() => {
                pairs.push((u.to_string(), i.to_string()))
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: "expected `user_id<TAB>item_id`".into(),
                })
            }
        }
    }
    Ok(pairs)
}

pub fn read_graph(path: &Path) -> Result<LabeledGraph<String>> {
    build_labeled_graph(&read_interactions(path)?)
}

pub fn write_edges(path: &Path, edges: &[(u32, u32)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (u, i) in edges {
        writeln!(w, "{u}\t{i}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the graph with its dense indices as ids.
pub fn write_graph(path: &Path, graph: &BipartiteGraph) -> Result<()> {
    write_edges(path, graph.edges())
}

/// Reads an edge list written by [`write_edges`] back as dense indices.
pub fn read_edges(path: &Path) -> Result<Vec<(u32, u32)>> {
    read_interactions(path)?
        .into_iter()
        .enumerate()
        .map(|(n, (u, i))| match (u.parse(), i.parse()) {
            (Ok(u), Ok(i)) => Ok((u, i)),
            _ => Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: "expected integer indices".into(),
            }),
        })
        .collect()
}
