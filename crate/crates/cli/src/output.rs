//! Deterministic writers for JSON documents and record streams.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Format, ScenarioConfig};
use crate::CliError;

pub struct Meta<'a> {
    pub enabled: bool,
    pub config: &'a ScenarioConfig,
}

impl Meta<'_> {
    fn block(&self) -> Result<Value, CliError> {
        let generated = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "generated_unix": generated,
            "config": serde_json::to_value(self.config)?,
        }))
    }
}

/// Writes `body` as pretty JSON, with a leading `meta` object unless disabled.
pub fn write_document<T: Serialize>(path: &Path, body: &T, meta: &Meta) -> Result<(), CliError> {
    let mut doc = Map::new();
    if meta.enabled {
        doc.insert("meta".into(), meta.block()?);
    }
    match serde_json::to_value(body)? {
        Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("data".into(), other);
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &Value::Object(doc))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// One flat record per sample. Vector fields are expanded to `name0, name1, ...` in CSV.
pub struct Record {
    pub fields: Vec<(&'static str, Field)>,
}

pub enum Field {
    Scalar(f64),
    Vector(Vec<f64>),
    Text(&'static str),
}

/// Writes `<stem>.jsonl` or `<stem>.csv`; returns the file name.
pub fn write_records(dir: &Path, stem: &str, format: Format, records: &[Record]) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let name = format!("{stem}.jsonl");
            let mut w = BufWriter::new(File::create(dir.join(&name))?);
            for r in records {
                let mut obj = Map::new();
                for (k, f) in &r.fields {
                    let v = match f {
                        Field::Scalar(x) => json!(x),
                        Field::Vector(v) => json!(v),
                        Field::Text(s) => json!(s),
                    };
                    obj.insert((*k).into(), v);
                }
                serde_json::to_writer(&mut w, &Value::Object(obj))?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            Ok(name)
        }
        Format::Csv => {
            let name = format!("{stem}.csv");
            let mut w = csv::Writer::from_path(dir.join(&name))?;
            // event records carry text and are left to the JSON summary
            let records: Vec<&Record> = records
                .iter()
                .filter(|r| !r.fields.iter().any(|(_, f)| matches!(f, Field::Text(_))))
                .collect();
            if let Some(first) = records.first() {
                let mut header = Vec::new();
                for (k, f) in &first.fields {
                    match f {
                        Field::Scalar(_) => header.push(k.to_string()),
                        Field::Vector(v) => header.extend((0..v.len()).map(|i| format!("{k}{i}"))),
                        Field::Text(_) => header.push(k.to_string()),
                    }
                }
                w.write_record(&header)?;
            }
            for r in records {
                let mut row = Vec::new();
                for (_, f) in &r.fields {
                    match f {
                        Field::Scalar(x) => row.push(x.to_string()),
                        Field::Vector(v) => row.extend(v.iter().map(f64::to_string)),
                        Field::Text(s) => row.push(s.to_string()),
                    }
                }
                w.write_record(&row)?;
            }
            w.flush()?;
            Ok(name)
        }
    }
}
