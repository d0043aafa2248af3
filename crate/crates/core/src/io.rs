//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! every value reads back bit-exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetParts, LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::trainer::{ClassifierConfig, DynamicsMatrix, RowMeta, SignalKind};

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Column lookup by header name.
struct Header {
    names: Vec<String>,
}

impl Header {
    fn read(reader: &mut csv::Reader<impl Read>) -> Result<Self> {
        let names = reader
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        Ok(Self { names })
    }

    fn find(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.find(name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    }

    /// Indices of `{prefix}{start}`, `{prefix}{start+1}`, ... until a gap.
    fn numbered(&self, prefix: &str, start: usize) -> Vec<usize> {
        (start..)
            .map_while(|k| self.find(&format!("{prefix}{k}")))
            .collect()
    }
}

struct Field<'a> {
    record: &'a csv::StringRecord,
    line: u64,
}

impl Field<'_> {
    fn text(&self, col: usize) -> &str {
        self.record.get(col).unwrap_or("").trim()
    }

    fn err(&self, message: String) -> Error {
        Error::Parse {
            line: self.line,
            message,
        }
    }

    fn parse<T: std::str::FromStr>(&self, col: usize, what: &str) -> Result<T> {
        let s = self.text(col);
        s.parse()
            .map_err(|_| self.err(format!("bad {what} value `{s}`")))
    }

    fn optional<T: std::str::FromStr>(&self, col: Option<usize>, what: &str) -> Result<Option<T>> {
        match col {
            Some(c) if !self.text(c).is_empty() => self.parse(c, what).map(Some),
            _ => Ok(None),
        }
    }

    fn provenance(&self, col: usize) -> Result<Provenance> {
        let s = self.text(col);
        Provenance::parse(s).ok_or_else(|| self.err(format!("bad provenance `{s}`")))
    }
}

fn records(reader: &mut csv::Reader<impl Read>) -> impl Iterator<Item = Result<(csv::StringRecord, u64)>> + '_ {
    reader.records().map(|r| {
        let r = r.map_err(csv_error)?;
        let line = r.position().map_or(0, |p| p.line());
        Ok((r, line))
    })
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input)
}

/// Header: `id,provenance,label,true_label[,source_id],f0,...`. The
/// `source_id` column is written only when some row carries one.
pub fn write_dataset(ds: &LabeledDataset, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_source = ds.has_source_ids();
    let mut header = vec!["id".to_string(), "provenance".into(), "label".into(), "true_label".into()];
    if with_source {
        header.push("source_id".into());
    }
    header.extend((0..ds.dim()).map(|k| format!("f{k}")));
    w.write_record(&header).map_err(csv_error)?;
    for i in 0..ds.len() {
        let mut rec = vec![
            ds.ids()[i].to_string(),
            ds.provenance()[i].as_str().to_string(),
            ds.labels()[i].to_string(),
            ds.true_labels().map_or(String::new(), |t| t[i].to_string()),
        ];
        if with_source {
            rec.push(ds.source_ids()[i].map_or(String::new(), |s| s.to_string()));
        }
        rec.extend(ds.features(i).iter().map(|v| format_f64(*v)));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV. `classes` defaults to one more than the largest label.
pub fn read_dataset(input: impl Read, classes: Option<usize>) -> Result<LabeledDataset> {
    let mut r = reader(input);
    let h = Header::read(&mut r)?;
    let (c_id, c_prov, c_label, c_true) = (
        h.require("id")?,
        h.require("provenance")?,
        h.require("label")?,
        h.require("true_label")?,
    );
    let c_source = h.find("source_id");
    let c_feat = h.numbered("f", 0);
    if c_feat.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "missing column `f0`".into(),
        });
    }

    let mut parts = DatasetParts::default();
    let mut truth = Vec::new();
    for rec in records(&mut r) {
        let (record, line) = rec?;
        let f = Field { record: &record, line };
        parts.ids.push(f.parse(c_id, "id")?);
        parts.provenance.push(f.provenance(c_prov)?);
        parts.labels.push(f.parse(c_label, "label")?);
        truth.push(f.optional::<usize>(Some(c_true), "true_label")?);
        parts.source_ids.push(f.optional(c_source, "source_id")?);
        let row = c_feat
            .iter()
            .map(|&c| f.parse::<f64>(c, "feature"))
            .collect::<Result<Vec<_>>>()?;
        parts.features.push(row);
    }
    parts.true_labels = if truth.iter().all(Option::is_some) && !truth.is_empty() {
        Some(truth.into_iter().flatten().collect())
    } else if truth.iter().all(Option::is_none) {
        None
    } else {
        return Err(Error::InvalidDataset("true_label must be given for all rows or none".into()));
    };
    let max_label = parts
        .labels
        .iter()
        .chain(parts.true_labels.iter().flatten())
        .max()
        .copied()
        .unwrap_or(0);
    parts.classes = classes.unwrap_or(max_label + 1);
    LabeledDataset::from_parts(parts)
}

pub fn save_dataset(ds: &LabeledDataset, path: &Path) -> Result<()> {
    write_dataset(ds, File::create(path)?)
}

pub fn load_dataset(path: &Path, classes: Option<usize>) -> Result<LabeledDataset> {
    read_dataset(File::open(path)?, classes)
}

/// Sidecar written next to a dynamics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsMeta {
    pub signal: SignalKind,
    pub epochs: usize,
    pub seed: u64,
    pub classifier: ClassifierConfig,
}

/// Header: `id,provenance,observed_label,is_noisy,s1,...,sE`.
pub fn write_dynamics(dynamics: &DynamicsMatrix, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "id".to_string(),
        "provenance".into(),
        "observed_label".into(),
        "is_noisy".into(),
    ];
    header.extend((1..=dynamics.epochs()).map(|e| format!("s{e}")));
    w.write_record(&header).map_err(csv_error)?;
    for (i, meta) in dynamics.rows().iter().enumerate() {
        let mut rec = vec![
            meta.id.to_string(),
            meta.provenance.as_str().to_string(),
            meta.observed_label.to_string(),
            meta.is_noisy.map_or(String::new(), |b| u8::from(b).to_string()),
        ];
        rec.extend(dynamics.row(i).iter().map(|v| format_f64(*v)));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dynamics(input: impl Read, signal: SignalKind) -> Result<DynamicsMatrix> {
    let mut r = reader(input);
    let h = Header::read(&mut r)?;
    let (c_id, c_prov, c_label, c_noisy) = (
        h.require("id")?,
        h.require("provenance")?,
        h.require("observed_label")?,
        h.require("is_noisy")?,
    );
    let c_sig = h.numbered("s", 1);
    if c_sig.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "missing column `s1`".into(),
        });
    }
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for rec in records(&mut r) {
        let (record, line) = rec?;
        let f = Field { record: &record, line };
        let is_noisy = match f.text(c_noisy) {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => return Err(f.err(format!("bad is_noisy value `{other}`"))),
        };
        rows.push(RowMeta {
            id: f.parse(c_id, "id")?,
            provenance: f.provenance(c_prov)?,
            observed_label: f.parse(c_label, "observed_label")?,
            is_noisy,
        });
        for &c in &c_sig {
            values.push(f.parse::<f64>(c, "signal")?);
        }
    }
    DynamicsMatrix::new(rows, values, c_sig.len(), signal)
}

pub fn save_dynamics(dynamics: &DynamicsMatrix, meta: &DynamicsMeta, path: &Path) -> Result<()> {
    write_dynamics(dynamics, File::create(path)?)?;
    write_json(meta, &path.with_extension("json"))
}

/// Loads a dynamics CSV, taking the signal kind from its sidecar. Without a
/// sidecar, all-±1 data is read as quantized and anything else as logit
/// difference.
pub fn load_dynamics(path: &Path) -> Result<DynamicsMatrix> {
    let sidecar = path.with_extension("json");
    if sidecar.exists() {
        let meta: DynamicsMeta = read_json(&sidecar)?;
        return read_dynamics(File::open(path)?, meta.signal);
    }
    let d = read_dynamics(File::open(path)?, SignalKind::LogitDifference)?;
    if d.values().iter().all(|v| v.abs() == 1.0) {
        return read_dynamics(File::open(path)?, SignalKind::QuantizedLogitDifference);
    }
    Ok(d)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
