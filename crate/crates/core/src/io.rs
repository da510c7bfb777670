//! Line-delimited JSON files with a schema header line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub const DATASET_SCHEMA: &str = "natlog.dataset";
pub const METRICS_SCHEMA: &str = "natlog.train_metrics";
pub const TRACE_SCHEMA: &str = "natlog.trace";
pub const ORACLE_SCHEMA: &str = "natlog.oracle";
pub const EVAL_SCHEMA: &str = "natlog.eval";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub version: u32,
}

/// Writes the header line and then one record per line.
pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, schema: &str, records: &[T]) -> Result<()> {
    serde_json::to_writer(&mut w, &Header { schema: schema.into(), version: FORMAT_VERSION })?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(r: R, schema: &str) -> Result<Vec<T>> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty file, expected a schema header".into()))??;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| Error::Parse(format!("bad schema header: {e}")))?;
    if header.schema != schema {
        return Err(Error::Parse(format!("expected schema `{schema}`, found `{}`", header.schema)));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported {schema} version {}", header.version)));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?);
    }
    Ok(out)
}

pub fn save_jsonl<T: Serialize>(path: impl AsRef<Path>, schema: &str, records: &[T]) -> Result<()> {
    write_jsonl(BufWriter::new(File::create(path)?), schema, records)
}

pub fn load_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>, schema: &str) -> Result<Vec<T>> {
    read_jsonl(BufReader::new(File::open(path)?), schema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::ChunkRules;
    use crate::datagen::{generate, GenSpec, LabeledExample};

    #[test]
    fn dataset_round_trip() {
        let spec = GenSpec { train_size: 20, test_size: 5, noise_test_size: 0, two_hop_size: 0, ..GenSpec::default() };
        let data = generate(&spec, &ChunkRules::fragment()).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, DATASET_SCHEMA, &data.train).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"schema":"natlog.dataset","version":1}"#));
        let back: Vec<LabeledExample> = read_jsonl(buf.as_slice(), DATASET_SCHEMA).unwrap();
        assert_eq!(back, data.train);
    }

    #[test]
    fn header_checks() {
        let mut buf = Vec::new();
        write_jsonl::<u32, _>(&mut buf, METRICS_SCHEMA, &[1, 2]).unwrap();
        assert!(read_jsonl::<u32, _>(buf.as_slice(), DATASET_SCHEMA).is_err());
        assert_eq!(read_jsonl::<u32, _>(buf.as_slice(), METRICS_SCHEMA).unwrap(), vec![1, 2]);
        assert!(read_jsonl::<u32, _>(&b""[..], METRICS_SCHEMA).is_err());
        assert!(read_jsonl::<u32, _>(&b"{\"schema\":\"natlog.train_metrics\",\"version\":9}\n"[..], METRICS_SCHEMA).is_err());
    }
}
