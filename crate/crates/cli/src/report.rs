//! Merges run directories into per-kind record tables and mean/std summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ipinf_core::metrics::mean_std;
use ipinf_core::EvalRecord;

use crate::config::usage;
use crate::rundir::{csv_text, fmt_opt, Manifest, MANIFEST, RECORDS};

/// Key columns, row count and per-metric `(mean, std)` of one summary row.
pub type SummaryRow = (Vec<String>, usize, Vec<Option<(f64, f64)>>);

/// Rows that share every key column are aggregated together.
#[derive(Debug, Default)]
pub struct Table {
    pub keys: Vec<&'static str>,
    pub metrics: Vec<&'static str>,
    pub rows: Vec<(Vec<String>, Vec<Option<f64>>)>,
    /// Columns written only to the record table (seed, fingerprint).
    pub tags: Vec<Vec<String>>,
}

impl Table {
    fn new(keys: Vec<&'static str>, metrics: Vec<&'static str>) -> Self {
        Self {
            keys,
            metrics,
            ..Self::default()
        }
    }

    fn push(&mut self, tags: Vec<String>, keys: Vec<String>, metrics: Vec<Option<f64>>) {
        self.tags.push(tags);
        self.rows.push((keys, metrics));
    }

    fn records_csv(&self) -> anyhow::Result<Vec<u8>> {
        let mut header = vec!["fingerprint", "seed"];
        header.extend(&self.keys);
        header.extend(&self.metrics);
        let rows: Vec<Vec<String>> = self
            .tags
            .iter()
            .zip(&self.rows)
            .map(|(tags, (keys, metrics))| {
                let mut row = tags.clone();
                row.extend(keys.iter().cloned());
                row.extend(metrics.iter().map(|v| fmt_opt(*v)));
                row
            })
            .collect();
        csv_text(&header, &rows)
    }

    /// One row per distinct key: count, then mean and sample std of each
    /// metric over the rows where it is present.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<&Vec<String>, Vec<&Vec<Option<f64>>>> = BTreeMap::new();
        for (keys, metrics) in &self.rows {
            groups.entry(keys).or_default().push(metrics);
        }
        groups
            .into_iter()
            .map(|(keys, members)| {
                let stats = (0..self.metrics.len())
                    .map(|j| {
                        let vals: Vec<f64> = members.iter().filter_map(|m| m[j]).collect();
                        (!vals.is_empty()).then(|| mean_std(&vals))
                    })
                    .collect();
                (keys.clone(), members.len(), stats)
            })
            .collect()
    }

    fn summary_csv(&self) -> anyhow::Result<Vec<u8>> {
        let names: Vec<String> = self
            .metrics
            .iter()
            .flat_map(|m| [format!("{m}_mean"), format!("{m}_std")])
            .collect();
        let mut header: Vec<&str> = self.keys.clone();
        header.push("n");
        header.extend(names.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = self
            .summary()
            .into_iter()
            .map(|(keys, n, stats)| {
                let mut row = keys;
                row.push(n.to_string());
                for s in stats {
                    row.push(fmt_opt(s.map(|s| s.0)));
                    row.push(fmt_opt(s.map(|s| s.1)));
                }
                row
            })
            .collect();
        csv_text(&header, &rows)
    }
}

/// Run directories named directly, or found one level below a named
/// directory, in sorted order.
pub fn collect_runs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut runs = Vec::new();
    for input in inputs {
        if input.join(MANIFEST).is_file() {
            runs.push(input.clone());
            continue;
        }
        if !input.is_dir() {
            return Err(usage(format!("{} is not a directory", input.display())));
        }
        let mut children: Vec<PathBuf> = fs::read_dir(input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(MANIFEST).is_file())
            .collect();
        if children.is_empty() {
            return Err(usage(format!(
                "no run directories under {}",
                input.display()
            )));
        }
        children.sort();
        runs.extend(children);
    }
    Ok(runs)
}

fn opt_extra(r: &EvalRecord, key: &str) -> String {
    fmt_opt(r.extra.get(key).copied())
}

fn curate_table() -> Table {
    Table::new(
        vec!["dataset", "method", "ensemble_size", "action", "fraction"],
        vec![
            "acc_pre",
            "acc_post",
            "acc_delta",
            "fair_pre",
            "fair_post",
            "dp_gap_pre",
            "dp_gap_post",
            "recall_at_k",
            "precision_at_k",
            "runtime_ms",
        ],
    )
}

fn defend_table() -> Table {
    Table::new(
        vec![
            "dataset",
            "method",
            "ensemble_size",
            "action",
            "fraction",
            "gamma",
            "attack_frac",
        ],
        vec![
            "acc_clean",
            "acc_attacked",
            "acc_defended",
            "acc_recovered",
            "runtime_ms",
        ],
    )
}

fn verify_table() -> Table {
    Table::new(
        vec!["dataset", "objective", "method", "reference"],
        vec!["spearman", "kendall", "sign_agreement"],
    )
}

fn read_records(dir: &Path) -> anyhow::Result<Vec<EvalRecord>> {
    fs::read_to_string(dir.join(RECORDS))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Tables keyed by experiment kind, built from deduplicated runs.
pub fn merge(runs: &[PathBuf]) -> anyhow::Result<(BTreeMap<String, Table>, usize)> {
    let mut seen = BTreeSet::new();
    let mut tables: BTreeMap<String, Table> = BTreeMap::new();
    for dir in runs {
        let m = Manifest::load(dir)?;
        if !seen.insert(m.fingerprint.clone()) {
            continue;
        }
        let tags = vec![m.fingerprint.clone(), m.seed.to_string()];
        match m.kind.as_str() {
            "curate" => {
                let t = tables.entry(m.kind.clone()).or_insert_with(curate_table);
                for r in read_records(dir)? {
                    let keys = vec![
                        r.dataset.clone(),
                        r.method.clone(),
                        opt_extra(&r, "ensemble_size"),
                        r.action.clone(),
                        r.fraction.to_string(),
                    ];
                    let metrics = vec![
                        Some(r.acc_pre),
                        Some(r.acc_post),
                        Some(r.acc_post - r.acc_pre),
                        r.fair_pre,
                        r.fair_post,
                        r.dp_gap_pre,
                        r.dp_gap_post,
                        r.recall_at_k,
                        r.precision_at_k,
                        Some(r.runtime_ms),
                    ];
                    t.push(vec![tags[0].clone(), r.seed.to_string()], keys, metrics);
                }
            }
            "defend" => {
                let t = tables.entry(m.kind.clone()).or_insert_with(defend_table);
                for r in read_records(dir)? {
                    let keys = vec![
                        r.dataset.clone(),
                        r.method.clone(),
                        opt_extra(&r, "ensemble_size"),
                        r.action.clone(),
                        r.fraction.to_string(),
                        opt_extra(&r, "gamma"),
                        opt_extra(&r, "attack_frac"),
                    ];
                    let metrics = vec![
                        r.extra.get("acc_clean").copied(),
                        Some(r.acc_pre),
                        Some(r.acc_post),
                        Some(r.acc_post - r.acc_pre),
                        Some(r.runtime_ms),
                    ];
                    t.push(tags.clone(), keys, metrics);
                }
            }
            "verify" => {
                let t = tables.entry(m.kind.clone()).or_insert_with(verify_table);
                let mut reader = csv::Reader::from_path(dir.join("correlations.csv"))?;
                for row in reader.records() {
                    let row = row?;
                    let num =
                        |i: usize| -> anyhow::Result<Option<f64>> { Ok(Some(row[i].parse()?)) };
                    let keys = vec![
                        m.dataset.clone(),
                        row[0].into(),
                        row[1].into(),
                        row[2].into(),
                    ];
                    t.push(tags.clone(), keys, vec![num(3)?, num(4)?, num(5)?]);
                }
            }
            other => anyhow::bail!("{}: unknown run kind `{other}`", dir.display()),
        }
    }
    Ok((tables, seen.len()))
}

/// Writes `<kind>_records.csv` and `<kind>_summary.csv` into `out` and
/// returns the written paths.
pub fn write_report(inputs: &[PathBuf], out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let runs = collect_runs(inputs)?;
    let (tables, _) = merge(&runs)?;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for (kind, table) in &tables {
        for (name, bytes) in [
            (format!("{kind}_records.csv"), table.records_csv()?),
            (format!("{kind}_summary.csv"), table.summary_csv()?),
        ] {
            let path = out.join(name);
            ipinf_core::io::write_atomic(&path, &bytes)?;
            written.push(path);
        }
    }
    Ok(written)
}
