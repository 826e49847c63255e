//! Newline-delimited JSON files.
//!
//! Every file starts with a header line
//! `{"schema": "<name>", "count": <records>, "meta": {...}}` followed by one
//! record per line. Points are stored as flat `[x0, y0, z0, x1, ...]` arrays;
//! floats are written in shortest round-trip form, so values survive a
//! write/read cycle bit-exactly. Writes go to a temp file that is renamed into
//! place; reads fail closed on any bad line.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{check_transition, Provenance, Transition, TransitionDataset};
use crate::error::{Error, Result};
use crate::geom::SegmentedCloud;
use crate::util::write_atomic;

pub const DATASET_SCHEMA: &str = "cloudplan.dataset.v1";
pub const CLOUDS_SCHEMA: &str = "cloudplan.clouds.v1";
pub const MODELS_SCHEMA: &str = "cloudplan.models.v1";
pub const TRACE_SCHEMA: &str = "cloudplan.trace.v1";
pub const RUNS_SCHEMA: &str = "cloudplan.runs.v1";
pub const SUITE_SCHEMA: &str = "cloudplan.suite.v1";

#[derive(Serialize, Deserialize)]
struct Header<M> {
    schema: String,
    count: usize,
    meta: M,
}

#[derive(Deserialize)]
struct SchemaOnly {
    schema: String,
}

pub fn to_ndjson<M: Serialize, R: Serialize>(schema: &str, meta: &M, records: &[R]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let header = Header {
        schema: schema.to_string(),
        count: records.len(),
        meta,
    };
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    out.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn from_ndjson<M: DeserializeOwned, R: DeserializeOwned>(schema: &str, bytes: &[u8]) -> Result<(M, Vec<R>)> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::CorruptRecord {
        line: 0,
        reason: e.to_string(),
    })?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(Error::CorruptRecord {
        line: 1,
        reason: "missing header".into(),
    })?;
    let tag: SchemaOnly = serde_json::from_str(first).map_err(|e| Error::CorruptRecord {
        line: 1,
        reason: e.to_string(),
    })?;
    if tag.schema != schema {
        return Err(Error::SchemaMismatch {
            expected: schema.to_string(),
            found: tag.schema,
        });
    }
    let header: Header<M> = serde_json::from_str(first).map_err(|e| Error::CorruptRecord {
        line: 1,
        reason: e.to_string(),
    })?;
    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let r = serde_json::from_str(line).map_err(|e| Error::CorruptRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        records.push(r);
    }
    if records.len() != header.count {
        return Err(Error::CorruptRecord {
            line: records.len() + 1,
            reason: format!("header announces {} records, found {}", header.count, records.len()),
        });
    }
    Ok((header.meta, records))
}

pub fn write_ndjson<M: Serialize, R: Serialize>(path: &Path, schema: &str, meta: &M, records: &[R]) -> Result<()> {
    let bytes = to_ndjson(schema, meta, records)?;
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn read_ndjson<M: DeserializeOwned, R: DeserializeOwned>(path: &Path, schema: &str) -> Result<(M, Vec<R>)> {
    let bytes = std::fs::read(path)?;
    from_ndjson(schema, &bytes)
}

/// A single JSON document with a schema tag.
pub fn write_document<T: Serialize>(path: &Path, schema: &str, value: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        schema: &'a str,
        body: &'a T,
    }
    let mut bytes = serde_json::to_vec_pretty(&Doc { schema, body: value }).map_err(std::io::Error::from)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn read_document<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<T> {
    #[derive(Deserialize)]
    struct Doc<T> {
        body: T,
    }
    let bytes = std::fs::read(path)?;
    let tag: SchemaOnly = serde_json::from_slice(&bytes).map_err(|e| Error::CorruptRecord {
        line: 1,
        reason: e.to_string(),
    })?;
    if tag.schema != schema {
        return Err(Error::SchemaMismatch {
            expected: schema.to_string(),
            found: tag.schema,
        });
    }
    let doc: Doc<T> = serde_json::from_slice(&bytes).map_err(|e| Error::CorruptRecord {
        line: 1,
        reason: e.to_string(),
    })?;
    Ok(doc.body)
}

pub fn write_dataset(path: &Path, ds: &TransitionDataset) -> Result<()> {
    write_ndjson(path, DATASET_SCHEMA, &ds.provenance, &ds.records)
}

pub fn read_dataset(path: &Path) -> Result<TransitionDataset> {
    let (provenance, records): (Provenance, Vec<Transition>) = read_ndjson(path, DATASET_SCHEMA)?;
    for (i, r) in records.iter().enumerate() {
        check_transition(r).map_err(|reason| Error::CorruptRecord { line: i + 2, reason })?;
    }
    Ok(TransitionDataset { records, provenance })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CloudsMeta {
    #[serde(default)]
    pub names: Vec<String>,
}

pub fn write_clouds(path: &Path, names: &[String], clouds: &[SegmentedCloud]) -> Result<()> {
    write_ndjson(path, CLOUDS_SCHEMA, &CloudsMeta { names: names.to_vec() }, clouds)
}

pub fn read_clouds(path: &Path) -> Result<(Vec<String>, Vec<SegmentedCloud>)> {
    let (meta, clouds): (CloudsMeta, Vec<SegmentedCloud>) = read_ndjson(path, CLOUDS_SCHEMA)?;
    Ok((meta.names, clouds))
}
