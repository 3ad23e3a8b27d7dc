//! Experiment runner behind the `ipinf` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod report;
pub mod rundir;

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use config::{Kind, Precision, RunConfig};
use rundir::{fingerprint, Manifest, RunDir, CONFIG_ECHO, MANIFEST, RECORDS, SCHEMA_VERSION};

/// What one seed produced.
#[derive(Debug)]
pub struct RunSummary {
    pub seed: u64,
    pub dir: PathBuf,
    pub lines: Vec<String>,
}

/// Runs every seed of `cfg` on a pool of `cfg.workers` threads, one run
/// directory per seed.
pub fn execute(cfg: &RunConfig) -> anyhow::Result<Vec<RunSummary>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()?;
    pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, seed))
            .collect()
    })
}

pub fn run_dir_name(cfg: &RunConfig, seed: u64) -> String {
    format!("{}-{}-s{seed}", cfg.kind.name(), cfg.data.dataset.name())
}

fn run_seed(cfg: &RunConfig, seed: u64) -> anyhow::Result<RunSummary> {
    let mut dir = RunDir::create(cfg.out.join(run_dir_name(cfg, seed)))?;
    let echo = cfg.echo(seed);
    dir.write(CONFIG_ECHO, echo.as_bytes())?;

    let (lines, records) = match cfg.precision {
        Precision::F64 => dispatch::<f64>(cfg, seed, &mut dir)?,
        Precision::F32 => dispatch::<f32>(cfg, seed, &mut dir)?,
    };
    if let Some(records) = records {
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        dir.write(RECORDS, text.as_bytes())?;
    }

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        kind: cfg.kind.name().to_string(),
        dataset: cfg.data.dataset.name().to_string(),
        fingerprint: fingerprint(&echo),
        seed,
        seeds: cfg.seeds.clone(),
        retrain_seeds: match cfg.kind {
            Kind::Curate => experiments::retrain_seeds(cfg, seed),
            _ => Vec::new(),
        },
        config: CONFIG_ECHO.to_string(),
        files: dir.files().to_vec(),
        tool: format!("ipinf {}", env!("CARGO_PKG_VERSION")),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    dir.write(
        MANIFEST,
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(RunSummary {
        seed,
        dir: dir.path,
        lines,
    })
}

type Produced = (Vec<String>, Option<Vec<ipinf_core::EvalRecord>>);

fn dispatch<T: ipinf_core::Scalar>(
    cfg: &RunConfig,
    seed: u64,
    dir: &mut RunDir,
) -> anyhow::Result<Produced> {
    Ok(match cfg.kind {
        Kind::Verify => (experiments::verify::<T>(cfg, seed, dir)?, None),
        Kind::Curate => {
            let recs = experiments::curate::<T>(cfg, seed, dir)?;
            (record_lines(&recs), Some(recs))
        }
        Kind::Defend => {
            let recs = experiments::defend::<T>(cfg, seed)?;
            (record_lines(&recs), Some(recs))
        }
    })
}

fn record_lines(records: &[ipinf_core::EvalRecord]) -> Vec<String> {
    records
        .iter()
        .filter(|r| r.extra.get("draw").is_none_or(|d| *d == 0.0))
        .map(|r| {
            let mut line = format!(
                "{} {} {} {}: acc {:.4} -> {:.4}",
                r.method, r.action, r.fraction, r.seed, r.acc_pre, r.acc_post
            );
            if let Some(t) = r.extra.get("ensemble_size") {
                line.push_str(&format!(" (T={t})"));
            }
            if let Some(a) = r.extra.get("attack_frac") {
                line.push_str(&format!(" (attacked {a}, first draw)"));
            }
            line
        })
        .collect()
}
