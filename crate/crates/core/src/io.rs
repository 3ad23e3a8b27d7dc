//! On-disk formats for parameters and influence reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::data::csv_io::format_real;
use crate::data::SampleId;
use crate::error::{Error, Result};
use crate::influence::{InfluenceReport, Method, Objective};
use crate::models::{Arch, EnsembleSpec, ParamVector};
use crate::scalar::Scalar;

fn raw_real(v: f64) -> Box<RawValue> {
    RawValue::from_string(format_real(v)).expect("formatted float is valid JSON")
}

#[derive(Serialize)]
struct ParamsOut<'a> {
    arch: &'a Arch,
    values: Vec<Box<RawValue>>,
}

#[derive(Deserialize)]
struct ParamsIn {
    arch: Arch,
    values: Vec<f64>,
}

/// `{"arch": ..., "values": [...]}` with every value at 17 significant digits.
pub fn params_to_json<T: Scalar>(theta: &ParamVector<T>) -> Result<String> {
    let out = ParamsOut {
        arch: theta.arch(),
        values: theta.values().iter().map(|v| raw_real(v.as_f64())).collect(),
    };
    Ok(serde_json::to_string_pretty(&out)?)
}

pub fn params_from_json<T: Scalar>(text: &str) -> Result<ParamVector<T>> {
    let p: ParamsIn = serde_json::from_str(text)?;
    ParamVector::new(p.arch, p.values.into_iter().map(T::c).collect())
}

pub fn save_params<T: Scalar>(theta: &ParamVector<T>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), params_to_json(theta)?.as_bytes())
}

pub fn load_params<T: Scalar>(path: impl AsRef<Path>) -> Result<ParamVector<T>> {
    params_from_json(&fs::read_to_string(path)?)
}

/// Writes `checkpoint_000.json`, `checkpoint_001.json`, ... into `dir` and
/// returns the paths in order.
pub fn save_checkpoints<T: Scalar>(
    checkpoints: &[ParamVector<T>],
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    checkpoints
        .iter()
        .enumerate()
        .map(|(i, theta)| {
            let path = dir.join(format!("checkpoint_{i:03}.json"));
            save_params(theta, &path)?;
            Ok(path)
        })
        .collect()
}

/// Loads every `checkpoint_*.json` in `dir`, ordered by file name.
pub fn load_checkpoints<T: Scalar>(dir: impl AsRef<Path>) -> Result<Vec<ParamVector<T>>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("checkpoint_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    paths.iter().map(load_params).collect()
}

/// Provenance stored next to a score CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub method: Method,
    pub objective: Objective,
    pub ensemble: Option<EnsembleSpec>,
    pub model_fingerprint: String,
    pub seed: Option<u64>,
}

impl ReportMeta {
    pub fn of<T: Scalar>(report: &InfluenceReport<T>) -> Self {
        Self {
            method: report.method,
            objective: report.objective,
            ensemble: report.ensemble.clone(),
            model_fingerprint: report.model_fingerprint.clone(),
            seed: report.seed,
        }
    }
}

/// `id,score` rows in ascending id order.
pub fn write_scores<T: Scalar, W: Write>(report: &InfluenceReport<T>, mut w: W) -> Result<()> {
    let mut out = String::from("id,score\n");
    for (id, v) in &report.scores {
        out.push_str(&format!("{id},{}\n", format_real(v.as_f64())));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_scores<T: Scalar, R: Read>(r: R) -> Result<BTreeMap<SampleId, T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = reader
        .headers()
        .map_err(|e| Error::Format { row: 0, msg: e.to_string() })?
        .clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "score" {
        return Err(Error::Format {
            row: 0,
            msg: "expected header `id,score`".into(),
        });
    }
    let mut scores = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Format { row, msg: e.to_string() })?;
        let bad = |what: &str| Error::Format { row, msg: format!("invalid {what}") };
        let id: u64 = rec[0].parse().map_err(|_| bad("id"))?;
        let v: f64 = rec[1].parse().map_err(|_| bad("score"))?;
        if scores.insert(SampleId(id), T::c(v)).is_some() {
            return Err(Error::Format { row, msg: format!("duplicate id {id}") });
        }
    }
    Ok(scores)
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn save_report<T: Scalar>(
    report: &InfluenceReport<T>,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let meta_path = dir.join(format!("{stem}.json"));
    let mut buf = Vec::new();
    write_scores(report, &mut buf)?;
    write_atomic(&csv_path, &buf)?;
    write_atomic(
        &meta_path,
        serde_json::to_string_pretty(&ReportMeta::of(report))?.as_bytes(),
    )?;
    Ok((csv_path, meta_path))
}

pub fn load_report<T: Scalar>(dir: impl AsRef<Path>, stem: &str) -> Result<InfluenceReport<T>> {
    let dir = dir.as_ref();
    let scores = read_scores(fs::File::open(dir.join(format!("{stem}.csv")))?)?;
    let meta: ReportMeta =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    Ok(
        InfluenceReport::new(meta.method, meta.objective, scores, meta.model_fingerprint)?
            .with_ensemble(meta.ensemble)
            .with_seed(meta.seed),
    )
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::arg(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
