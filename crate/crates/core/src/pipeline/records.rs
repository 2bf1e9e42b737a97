//! `records.csv`: one row per (sample, model).

use std::collections::BTreeMap;
use std::path::Path;

use crate::characteristics::{CharacteristicsVector, NAMES};
use crate::error::{Error, Result};
use crate::explainer::{Performance, SampleRecord};
use crate::models::ModelKind;

const LEAD: [&str; 7] = ["sample_id", "strategy", "dropout_rate", "seed", "users", "items", "edges"];

pub fn header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = LEAD.iter().map(|s| s.to_string()).collect();
    h.extend(NAMES.iter().map(|s| s.to_string()));
    h.push("model".into());
    h.push(format!("recall@{k}"));
    h.push(format!("ndcg@{k}"));
    h
}

/// Rows ordered by sample id, then model.
pub fn write_records(path: &Path, records: &[SampleRecord], k: usize) -> Result<()> {
    let mut sorted: Vec<&SampleRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sample_id);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header(k))?;
    for r in sorted {
        for (model, perf) in &r.performance {
            let mut row = vec![
                r.sample_id.to_string(),
                r.strategy.as_str().to_string(),
                r.dropout_rate.to_string(),
                r.seed.to_string(),
                r.users.to_string(),
                r.items.to_string(),
                r.edges.to_string(),
            ];
            row.extend(r.characteristics.csv_fields());
            row.push(model.as_str().to_string());
            row.push(perf.recall.to_string());
            row.push(perf.ndcg.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("bad {name} `{v}`"),
    })
}

pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut by_id: BTreeMap<u64, SampleRecord> = BTreeMap::new();
    for (n, row) in r.records().enumerate() {
        let row = row?;
        let line = n + 2;
        if row.len() != LEAD.len() + NAMES.len() + 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, got {}", LEAD.len() + NAMES.len() + 3, row.len()),
            });
        }
        let f: Vec<&str> = row.iter().collect();
        let id: u64 = field(path, line, "sample_id", f[0])?;
        let characteristics = CharacteristicsVector::parse_csv_fields(&f[7..18]).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })?;
        let model: ModelKind = f[18].parse()?;
        let perf = Performance {
            recall: field(path, line, "recall", f[19])?,
            ndcg: field(path, line, "ndcg", f[20])?,
        };
        let rec = match by_id.get_mut(&id) {
            Some(rec) => rec,
            None => by_id.entry(id).or_insert(SampleRecord {
                sample_id: id,
                strategy: f[1].parse().map_err(|message| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message,
                })?,
                dropout_rate: field(path, line, "dropout_rate", f[2])?,
                seed: field(path, line, "seed", f[3])?,
                users: field(path, line, "users", f[4])?,
                items: field(path, line, "items", f[5])?,
                edges: field(path, line, "edges", f[6])?,
                characteristics,
                performance: BTreeMap::new(),
            }),
        };
        rec.performance.insert(model, perf);
    }
    Ok(by_id.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Strategy;

    #[test]
    fn round_trip_with_missing_assortativity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("records.csv");
        let mut recs = crate::explainer::tests::synthetic_records(5, 1, Strategy::NodeDropout, |v, _| v[0].abs() / 10.0);
        recs[2].characteristics.assort_user = None;
        recs[3].performance.insert(ModelKind::SvdGcn, Performance { recall: 0.25, ndcg: 0.125 });
        recs.reverse();
        write_records(&p, &recs, 20).unwrap();
        let back = read_records(&p).unwrap();
        recs.reverse();
        assert_eq!(back, recs);
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1 + 6);
        assert!(text.starts_with("sample_id,strategy,"));
        assert!(text.lines().next().unwrap().ends_with("model,recall@20,ndcg@20"));
    }
}
