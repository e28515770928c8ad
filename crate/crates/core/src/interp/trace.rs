//! Trace CSV and registry sidecar.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::VarRegistry;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObsId {
    Var(u32),
    Qoi(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub timestamp_ms: u64,
    pub id: ObsId,
    pub value: f64,
}

/// Time-indexed values of one variable or QOI.
pub type Series = Vec<(u64, f64)>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub observations: Vec<Observation>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct Row {
    timestamp_ms: u64,
    kind: String,
    id: String,
    value: f64,
}

impl Trace {
    pub fn push(&mut self, timestamp_ms: u64, id: ObsId, value: f64) {
        self.observations.push(Observation {
            timestamp_ms,
            id,
            value,
        });
    }

    pub fn var_series(&self) -> BTreeMap<u32, Series> {
        let mut out: BTreeMap<u32, Series> = BTreeMap::new();
        for o in &self.observations {
            if let ObsId::Var(v) = o.id {
                out.entry(v).or_default().push((o.timestamp_ms, o.value));
            }
        }
        out
    }

    pub fn qoi_series(&self) -> BTreeMap<String, Series> {
        let mut out: BTreeMap<String, Series> = BTreeMap::new();
        for o in &self.observations {
            if let ObsId::Qoi(q) = &o.id {
                out.entry(q.clone())
                    .or_default()
                    .push((o.timestamp_ms, o.value));
            }
        }
        out
    }

    pub fn write<W: Write>(&self, sink: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        for o in &self.observations {
            let (kind, id) = match &o.id {
                ObsId::Var(v) => ("var", v.to_string()),
                ObsId::Qoi(q) => ("qoi", q.clone()),
            };
            w.serialize(Row {
                timestamp_ms: o.timestamp_ms,
                kind: kind.into(),
                id,
                value: o.value,
            })
            .map_err(std::io::Error::other)?;
        }
        if self.observations.is_empty() {
            w.write_record(["timestamp_ms", "kind", "id", "value"])
                .map_err(std::io::Error::other)?;
        }
        w.flush()
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read<R: Read>(source: R) -> Result<Trace, TraceError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(source);
        let mut trace = Trace::default();
        let mut records = r.records();
        match records.next() {
            Some(Ok(h)) if h.iter().eq(["timestamp_ms", "kind", "id", "value"]) => {}
            Some(Ok(_)) | None => {
                return Err(TraceError::Format {
                    line: 1,
                    message: "expected header `timestamp_ms,kind,id,value`".into(),
                })
            }
            Some(Err(e)) => {
                return Err(TraceError::Format {
                    line: 1,
                    message: e.to_string(),
                })
            }
        }
        let mut last = 0u64;
        for rec in records {
            let rec = rec.map_err(|e| TraceError::Format {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |message: String| TraceError::Format { line, message };
            if rec.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", rec.len())));
            }
            let t: u64 = rec[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad timestamp `{}`", &rec[0])))?;
            if t < last {
                return Err(bad("timestamps must be non-decreasing".into()));
            }
            last = t;
            let id = match &rec[1] {
                "var" => ObsId::Var(
                    rec[2]
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad var id `{}`", &rec[2])))?,
                ),
                "qoi" => ObsId::Qoi(rec[2].to_string()),
                other => return Err(bad(format!("unknown kind `{other}`"))),
            };
            let value: f64 = rec[3]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad value `{}`", &rec[3])))?;
            trace.push(t, id, value);
        }
        Ok(trace)
    }
}

/// Registry sidecar: JSON object mapping id to canonical name.
pub fn registry_json(registry: &VarRegistry) -> String {
    let map: BTreeMap<u32, &str> = registry.iter().collect();
    serde_json::to_string_pretty(&map).expect("map serializes")
}

pub fn parse_registry_json(text: &str) -> Result<BTreeMap<u32, String>, serde_json::Error> {
    serde_json::from_str(text)
}
