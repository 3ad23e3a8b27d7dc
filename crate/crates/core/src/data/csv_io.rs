//! CSV layout: a header `id,f0,..,f{d-1},label[,group]`, then one row per
//! sample. Features are written with 17 significant digits so `f64` values
//! survive a round trip exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, SampleId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Optional expectations checked against the header while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvSchema {
    pub n_features: Option<usize>,
    pub has_group: Option<bool>,
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset<T>> {
    read_csv(File::open(path)?, schema)
}

pub fn save_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut f = File::create(path)?;
    write_csv(ds, &mut f)?;
    f.flush()?;
    Ok(())
}

fn fmt_err(row: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        row,
        msg: msg.into(),
    }
}

pub fn read_csv<T: Scalar, R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| fmt_err(0, "missing header row"))?
        .map_err(|e| fmt_err(0, e.to_string()))?;
    let cols: Vec<&str> = header.iter().collect();
    let has_group = cols.last() == Some(&"group");
    let label_col = if has_group { cols.len().wrapping_sub(2) } else { cols.len().wrapping_sub(1) };
    if cols.len() < 3 || cols[0] != "id" || cols.get(label_col) != Some(&"label") {
        return Err(fmt_err(
            0,
            format!("header must be `id,f0..f{{d-1}},label[,group]`, got `{}`", cols.join(",")),
        ));
    }
    let d = label_col - 1;
    for (j, name) in cols[1..=d].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(fmt_err(0, format!("expected feature column `f{j}`, found `{name}`")));
        }
    }
    if let Some(expect) = schema.n_features {
        if expect != d {
            return Err(fmt_err(0, format!("expected {expect} feature columns, found {d}")));
        }
    }
    if let Some(expect) = schema.has_group {
        if expect != has_group {
            let what = if expect { "missing" } else { "unexpected" };
            return Err(fmt_err(0, format!("{what} `group` column")));
        }
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut group = has_group.then(Vec::new);
    let mut ids = Vec::new();
    for (k, rec) in records.enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| fmt_err(row, e.to_string()))?;
        if rec.len() != cols.len() {
            return Err(fmt_err(
                row,
                format!("expected {} columns, found {}", cols.len(), rec.len()),
            ));
        }
        let id: u64 = rec[0]
            .parse()
            .map_err(|_| fmt_err(row, format!("invalid id `{}`", &rec[0])))?;
        ids.push(SampleId(id));
        for j in 0..d {
            let v: f64 = rec[j + 1].parse().map_err(|_| {
                fmt_err(row, format!("non-numeric value `{}` in f{j}", &rec[j + 1]))
            })?;
            if !v.is_finite() {
                return Err(fmt_err(row, format!("non-finite value in f{j}")));
            }
            features.push(T::c(v));
        }
        labels.push(parse_bit(&rec[d + 1], row, "label")?);
        if let Some(g) = group.as_mut() {
            g.push(parse_bit(&rec[d + 2], row, "group")?);
        }
    }
    Dataset::new(features, d, labels, group, ids).map_err(|e| match e {
        Error::Argument(msg) => fmt_err(0, msg),
        other => other,
    })
}

fn parse_bit(s: &str, row: usize, what: &str) -> Result<u8> {
    match s {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(fmt_err(row, format!("unknown {what} value `{s}` (expected 0 or 1)"))),
    }
}

pub fn write_csv<T: Scalar, W: Write>(ds: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let d = ds.n_features();
    let mut header = vec!["id".to_string()];
    header.extend((0..d).map(|j| format!("f{j}")));
    header.push("label".into());
    if ds.group().is_some() {
        header.push("group".into());
    }
    w.write_record(&header).map_err(csv_io_err)?;
    for i in 0..ds.len() {
        let mut rec = Vec::with_capacity(d + 3);
        rec.push(ds.ids()[i].to_string());
        rec.extend(ds.row(i).iter().map(|v| format_real(v.as_f64())));
        rec.push(ds.labels()[i].to_string());
        if let Some(g) = ds.group() {
            rec.push(g[i].to_string());
        }
        w.write_record(&rec).map_err(csv_io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// 17 significant digits in scientific notation.
pub(crate) fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_io_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
