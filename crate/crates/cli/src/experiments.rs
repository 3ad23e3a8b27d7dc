//! The three experiment kinds, each run for a single seed into a run
//! directory.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::Context;
use ipinf_core::curation::detrimental_order;
use ipinf_core::data::{
    craft_adversarial, flip_labels, make_group_biased, make_half_moons, BlobsConfig, Dataset,
    GroupBiasConfig,
};
use ipinf_core::influence::InfluenceReport;
use ipinf_core::io::{write_scores, ReportMeta};
use ipinf_core::metrics::{detection_metrics, rank_correlation, sign_agreement};
use ipinf_core::models::{train, TrainOutput};
use ipinf_core::pipeline::{
    curate_retrain_eval_seeds, defend_eval, score_report, AttackConfig, CurationData,
    CurationSetup, DefenseArm, MethodConfig, Target,
};
use ipinf_core::{
    CurationAction, EnsembleSpec, EvalRecord, LissaConfig, Method, NoiseRecord, Objective,
    SampleId, Scalar,
};
use rayon::prelude::*;

use crate::config::{DataConfig, DatasetKind, RunConfig, TargetKind};
use crate::rundir::{csv_text, RunDir};

pub struct Splits<T> {
    pub train: Dataset<T>,
    pub val: Dataset<T>,
    pub test: Dataset<T>,
    pub test_counterfactual: Option<Dataset<T>>,
    pub noise: Option<NoiseRecord>,
}

pub fn build_splits<T: Scalar>(d: &DataConfig, seed: u64) -> ipinf_core::Result<Splits<T>> {
    let (train_set, val, test, counterfactual) = match d.dataset {
        DatasetKind::Blobs => {
            let (train_set, pool) =
                BlobsConfig::new(d.n_train, d.n_val + d.n_test, d.separation, seed)
                    .generate::<T>()?;
            let (val, test) = if d.n_val > 0 {
                pool.split_at(d.n_val)?
            } else {
                (pool.clone(), pool)
            };
            (train_set, val, test, None)
        }
        DatasetKind::Moons => {
            let (train_set, test) = make_half_moons::<T>(d.n_train, d.n_test, d.noise, seed)?;
            let val = if d.n_val > 0 {
                make_half_moons::<T>(d.n_val, 0, d.noise, seed.wrapping_add(1000))?.0
            } else {
                test.clone()
            };
            (train_set, val, test, None)
        }
        DatasetKind::Group => {
            let gb = GroupBiasConfig {
                minority_frac: d.minority_frac,
                bias: d.bias,
                label_noise: d.label_noise,
                ..GroupBiasConfig::new(d.n_train, d.n_val, d.n_test, seed)
            };
            let (train_set, val, test) = make_group_biased::<T>(&gb)?;
            let cf = test.negate_feature(GroupBiasConfig::GROUP_FEATURE)?;
            (train_set, val, test, Some(cf))
        }
    };
    let (train_set, noise) = if d.flips > 0 {
        let (noisy, noise) = flip_labels(&train_set, d.flips, d.flips_per_class, seed)?;
        (noisy, Some(noise))
    } else {
        (train_set, None)
    };
    Ok(Splits {
        train: train_set,
        val,
        test,
        test_counterfactual: counterfactual,
        noise,
    })
}

pub fn method_config(
    cfg: &RunConfig,
    method: Method,
    size: Option<usize>,
    seed: u64,
) -> MethodConfig {
    let inf = &cfg.influence;
    MethodConfig {
        ensemble: EnsembleSpec {
            size: size.unwrap_or(inf.ensemble_sizes[0]),
            dropout: inf.dropout,
            extra_sgd_steps: inf.extra_sgd_steps,
            seed,
            ..EnsembleSpec::default()
        },
        lissa: LissaConfig {
            depth: inf.lissa_depth,
            repeats: inf.lissa_repeats,
            damping: inf.damping,
            seed,
            ..LissaConfig::default()
        },
        damping: inf.damping,
        temperature: inf.temperature,
        ..MethodConfig::new(method)
    }
}

/// File-name friendly label, e.g. `ip_ensemble_t5`.
pub fn method_label(method: Method, size: Option<usize>) -> String {
    let base = method.name().to_ascii_lowercase();
    match size {
        Some(t) => format!("{base}_t{t}"),
        None => base,
    }
}

fn score_file<T: Scalar>(
    dir: &mut RunDir,
    stem: &str,
    report: &InfluenceReport<T>,
) -> anyhow::Result<()> {
    let mut csv = Vec::new();
    write_scores(report, &mut csv)?;
    dir.write(&format!("scores/{stem}.csv"), &csv)?;
    let meta = serde_json::to_string_pretty(&ReportMeta::of(report))?;
    dir.write(&format!("scores/{stem}.json"), meta.as_bytes())
}

fn tag_size(record: &mut EvalRecord, size: Option<usize>) {
    if let Some(t) = size {
        record.extra.insert("ensemble_size".into(), t as f64);
    }
}

struct Scored<T> {
    label: String,
    report: InfluenceReport<T>,
    runtime_ms: f64,
}

fn detection_row<T: Scalar>(
    objective: Objective,
    s: &Scored<T>,
    noise: &NoiseRecord,
) -> Vec<String> {
    let benefit = s.report.benefit_scores();
    let k = noise.len();
    let mut top = detrimental_order(&s.report);
    top.truncate(k);
    let (recall, precision) = detection_metrics(&top, noise, k);
    let mut clean: Vec<f64> = benefit
        .iter()
        .filter(|(id, _)| !noise.contains(id))
        .map(|(_, v)| v.as_f64())
        .collect();
    clean.sort_by(f64::total_cmp);
    let median = match clean.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => clean[n / 2],
        n => 0.5 * (clean[n / 2 - 1] + clean[n / 2]),
    };
    let flipped: Vec<f64> = noise
        .flipped_ids
        .iter()
        .filter_map(|id| benefit.get(id))
        .map(|v| v.as_f64())
        .collect();
    vec![
        objective.name().to_string(),
        s.label.clone(),
        k.to_string(),
        recall.to_string(),
        precision.to_string(),
        flipped.iter().filter(|v| **v < 0.0).count().to_string(),
        flipped.iter().filter(|v| **v < median).count().to_string(),
    ]
}

/// Trains one model, scores it with every configured method (plus the exact
/// oracle on a linear model) and writes scores, agreement with the
/// reference estimator, detection counts and scatter data.
pub fn verify<T: Scalar>(
    cfg: &RunConfig,
    seed: u64,
    dir: &mut RunDir,
) -> anyhow::Result<Vec<String>> {
    let s = build_splits::<T>(&cfg.data, seed)?;
    let arch = cfg.model.arch(s.train.n_features());
    let tc = cfg.model.train.with_seed(seed);
    let fit: TrainOutput<T> = train(&s.train, &arch, &tc)?;

    let mut methods: Vec<(Method, Option<usize>)> = Vec::new();
    if arch.is_linear() && !cfg.influence.methods.contains(&Method::Exact) {
        methods.push((Method::Exact, None));
    }
    for &m in &cfg.influence.methods {
        methods.extend(cfg.sizes_for(m).into_iter().map(|t| (m, t)));
    }

    let mut corr_rows = Vec::new();
    let mut detect_rows = Vec::new();
    let mut timings = BTreeMap::new();
    let mut lines = Vec::new();
    for &objective in &cfg.influence.objectives {
        let val = match objective {
            Objective::Robustness => {
                craft_adversarial(&s.val, &fit.params, cfg.attack.gamma, 1.0, seed)?.0
            }
            _ => s.val.clone(),
        };
        let scored: Vec<Scored<T>> = methods
            .par_iter()
            .map(|&(m, t)| {
                let mc = method_config(cfg, m, t, seed);
                let started = Instant::now();
                let report = score_report(&mc, objective, &fit, &s.train, &val, &tc)
                    .with_context(|| format!("{} on {}", m.name(), objective.name()))?;
                Ok(Scored {
                    label: method_label(m, t),
                    report,
                    runtime_ms: started.elapsed().as_secs_f64() * 1e3,
                })
            })
            .collect::<anyhow::Result<_>>()?;

        let reference = &scored[0];
        for sc in &scored {
            score_file(
                dir,
                &format!("{}_{}", objective.name(), sc.label),
                &sc.report,
            )?;
            timings.insert(format!("{}_{}", objective.name(), sc.label), sc.runtime_ms);
            if let Some(noise) = &s.noise {
                detect_rows.push(detection_row(objective, sc, noise));
            }
        }
        for sc in &scored[1..] {
            let (rho, tau) = rank_correlation(&reference.report, &sc.report)?;
            let agree = sign_agreement(&reference.report, &sc.report)?;
            lines.push(format!(
                "{} {} vs {}: spearman {rho:.4} kendall {tau:.4} sign agreement {agree:.4}",
                objective.name(),
                sc.label,
                reference.label
            ));
            corr_rows.push(vec![
                objective.name().to_string(),
                sc.label.clone(),
                reference.label.clone(),
                rho.to_string(),
                tau.to_string(),
                agree.to_string(),
            ]);
        }

        let mut header = vec!["id".to_string(), "flipped".to_string()];
        header.extend(scored.iter().map(|sc| sc.label.clone()));
        let rows: Vec<Vec<String>> = s
            .train
            .ids()
            .iter()
            .map(|id| {
                let flipped = s.noise.as_ref().is_some_and(|n| n.contains(id));
                let mut row = vec![id.to_string(), u8::from(flipped).to_string()];
                row.extend(scored.iter().map(|sc| score_text(&sc.report, id)));
                row
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        dir.write(
            &format!("scatter_{}.csv", objective.name()),
            &csv_text(&header, &rows)?,
        )?;
    }

    dir.write(
        "correlations.csv",
        &csv_text(
            &[
                "objective",
                "method",
                "reference",
                "spearman",
                "kendall",
                "sign_agreement",
            ],
            &corr_rows,
        )?,
    )?;
    if !detect_rows.is_empty() {
        for r in &detect_rows {
            lines.push(format!(
                "{} {}: recall@{} {}, {} of {} flipped below the clean median",
                r[0], r[1], r[2], r[3], r[6], r[2]
            ));
        }
        dir.write(
            "detection.csv",
            &csv_text(
                &[
                    "objective",
                    "method",
                    "flipped",
                    "recall_at_k",
                    "precision_at_k",
                    "flipped_negative",
                    "flipped_below_clean_median",
                ],
                &detect_rows,
            )?,
        )?;
    }
    dir.write(
        "timings.json",
        serde_json::to_string_pretty(&timings)?.as_bytes(),
    )?;
    Ok(lines)
}

fn score_text<T: Scalar>(report: &InfluenceReport<T>, id: &SampleId) -> String {
    report
        .get(id)
        .map(|v| v.as_f64().to_string())
        .unwrap_or_default()
}

pub fn retrain_seeds(cfg: &RunConfig, seed: u64) -> Vec<u64> {
    (0..cfg.curation.retrains as u64)
        .map(|r| seed.wrapping_mul(1000).wrapping_add(r))
        .collect()
}

/// Grid of methods x ensemble sizes x actions x fractions, each cell scored
/// once and retrained under every retrain seed.
pub fn curate<T: Scalar>(
    cfg: &RunConfig,
    seed: u64,
    dir: &mut RunDir,
) -> anyhow::Result<Vec<EvalRecord>> {
    let s = build_splits::<T>(&cfg.data, seed)?;
    let arch = cfg.model.arch(s.train.n_features());
    let tc = cfg.model.train.with_seed(seed);
    let target = match cfg.curation.target {
        TargetKind::Utility => Target::Single(Objective::Utility),
        TargetKind::Fairness => Target::Single(Objective::Fairness),
        TargetKind::Joint => Target::JointUtilityFairness,
    };
    let data = CurationData {
        train: &s.train,
        val: &s.val,
        test: &s.test,
        test_counterfactual: s.test_counterfactual.as_ref(),
        noise: s.noise.as_ref(),
    };
    let seeds = retrain_seeds(cfg, seed);

    let mut cells: Vec<(Method, Option<usize>, CurationAction, f64)> = Vec::new();
    for &m in &cfg.influence.methods {
        for t in cfg.sizes_for(m) {
            for &a in &cfg.curation.actions {
                for &f in &cfg.curation.fractions {
                    cells.push((m, t, a, f));
                }
            }
        }
    }
    let outcomes: Vec<_> = cells
        .par_iter()
        .map(|&(m, t, action, fraction)| {
            let mc = method_config(cfg, m, t, seed);
            let setup = CurationSetup {
                dataset: cfg.data.dataset.name(),
                arch: &arch,
                method: &mc,
                target,
                action,
                fraction,
                train: &tc,
            };
            curate_retrain_eval_seeds(data, &setup, &seeds)
                .with_context(|| format!("{} {} {fraction}", m.name(), action.name()))
        })
        .collect::<anyhow::Result<_>>()?;

    let mut records = Vec::new();
    let mut saved = std::collections::BTreeSet::new();
    for (&(m, t, _, _), outcome) in cells.iter().zip(outcomes) {
        let label = method_label(m, t);
        if saved.insert(label.clone()) {
            for r in &outcome.reports {
                score_file(dir, &format!("{}_{label}", r.objective.name()), r)?;
            }
        }
        for mut rec in outcome.records {
            tag_size(&mut rec, t);
            records.push(rec);
        }
    }
    Ok(records)
}

/// One defended arm per method x ensemble size x action x fraction, evaluated
/// at every attacked fraction over the configured number of draws.
pub fn defend<T: Scalar>(cfg: &RunConfig, seed: u64) -> anyhow::Result<Vec<EvalRecord>> {
    let s = build_splits::<T>(&cfg.data, seed)?;
    let tc = cfg.model.train.with_seed(seed);
    let mut arms = Vec::new();
    let mut sizes = Vec::new();
    for &m in &cfg.influence.methods {
        for t in cfg.sizes_for(m) {
            for &action in &cfg.curation.actions {
                for &fraction in &cfg.curation.fractions {
                    arms.push(DefenseArm {
                        method: method_config(cfg, m, t, seed),
                        action,
                        fraction,
                    });
                    sizes.push(t);
                }
            }
        }
    }
    let per_level: Vec<Vec<EvalRecord>> = cfg
        .attack
        .fractions
        .par_iter()
        .map(|&fraction| {
            let attack = AttackConfig {
                gamma: cfg.attack.gamma,
                fraction,
                draws: cfg.attack.draws,
                seed,
            };
            let mut recs = defend_eval(
                cfg.data.dataset.name(),
                &s.train,
                &s.val,
                &s.test,
                &tc,
                &attack,
                &arms,
            )?;
            for (i, rec) in recs.iter_mut().enumerate() {
                tag_size(rec, sizes[i / cfg.attack.draws]);
            }
            Ok(recs)
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(per_level.into_iter().flatten().collect())
}
