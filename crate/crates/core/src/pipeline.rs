//! End-to-end score → curate → retrain → evaluate runs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::curation::{CurationAction, CurationPlan};
use crate::data::{craft_adversarial, Dataset, NoiseRecord};
use crate::error::{Error, Result};
use crate::influence::{
    ensemble_influence, exact_influence_for, ip_influence, lissa_influence, self_influence,
    InfluenceReport, LissaConfig, Method, Objective,
};
use crate::metrics::{accuracy, consistency_fair_score, detection_metrics, dp_gap, EvalRecord};
use crate::models::{
    generate_param_sets, train, train_weighted, Arch, EnsembleSpec, EnsembleStrategy,
    ParamVector, TrainConfig, TrainOutput,
};
use crate::scalar::Scalar;

/// Estimator choice plus the knobs the individual estimators need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    /// Ensemble size, dropout bounds, extra-SGD steps and seed. The strategy
    /// is taken from `method` for TRACIN, GEX and IP_ENSEMBLE.
    pub ensemble: EnsembleSpec,
    pub lissa: LissaConfig,
    /// Damping for the exact estimator.
    pub damping: f64,
    /// Softmax temperature for REWEIGHT.
    pub temperature: f64,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ensemble: EnsembleSpec::default(),
            lissa: LissaConfig::default(),
            damping: 1e-2,
            temperature: 1.0,
        }
    }

    pub fn with_ensemble(mut self, spec: EnsembleSpec) -> Self {
        self.ensemble = spec;
        self
    }

    /// The ensemble spec actually used, if `method` is an ensemble method.
    pub fn ensemble_spec(&self) -> Option<EnsembleSpec> {
        let strategy = match self.method {
            Method::TracIn => EnsembleStrategy::Checkpoint,
            Method::Gex => EnsembleStrategy::ExtraSgd,
            Method::IpEnsemble => EnsembleStrategy::Dropout,
            _ => return None,
        };
        Some(EnsembleSpec {
            strategy,
            ..self.ensemble.clone()
        })
    }
}

/// Scores every training sample of `train` for `objective` with the model `fit`.
pub fn score_report<T: Scalar>(
    mc: &MethodConfig,
    objective: Objective,
    fit: &TrainOutput<T>,
    train_set: &Dataset<T>,
    val: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<InfluenceReport<T>> {
    let theta = &fit.params;
    match mc.method {
        Method::Ip | Method::IpFair | Method::IpRobust => {
            ip_influence(theta, train_set, val, objective)
        }
        Method::SelfIp => self_influence(theta, train_set),
        Method::Exact => exact_influence_for(theta, train_set, val, objective, T::c(mc.damping)),
        Method::Lissa => lissa_influence(theta, train_set, val, objective, &mc.lissa),
        Method::TracIn | Method::Gex | Method::IpEnsemble => {
            let spec = mc.ensemble_spec().expect("ensemble method");
            let sets = generate_param_sets(theta, &fit.checkpoints, Some(train_set), &spec, Some(cfg))?;
            ensemble_influence(&sets, train_set, val, objective, Some(&spec))
        }
    }
}

/// What the curation ranks against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Single(Objective),
    /// Rank-sum of a utility and a fairness report.
    JointUtilityFairness,
}

/// Inputs shared by every curation run.
#[derive(Debug, Clone, Copy)]
pub struct CurationData<'a, T> {
    pub train: &'a Dataset<T>,
    pub val: &'a Dataset<T>,
    pub test: &'a Dataset<T>,
    /// Test set with the sensitive attribute perturbed, id-aligned with `test`.
    pub test_counterfactual: Option<&'a Dataset<T>>,
    pub noise: Option<&'a NoiseRecord>,
}

#[derive(Debug, Clone)]
pub struct CurationOutcome<T> {
    /// One record per retrain seed.
    pub records: Vec<EvalRecord>,
    pub plan: CurationPlan<T>,
    pub reports: Vec<InfluenceReport<T>>,
}

/// Parameters of one curation arm.
#[derive(Debug, Clone, PartialEq)]
pub struct CurationSetup<'a> {
    pub dataset: &'a str,
    pub arch: &'a Arch,
    pub method: &'a MethodConfig,
    pub target: Target,
    pub action: CurationAction,
    pub fraction: f64,
    pub train: &'a TrainConfig,
}

fn fit_with<T: Scalar>(
    ds: &Dataset<T>,
    weights: Option<&[T]>,
    arch: &Arch,
    cfg: &TrainConfig,
) -> Result<ParamVector<T>> {
    Ok(train_weighted(ds, arch, cfg, weights)?.params)
}

fn optional<T>(cond: bool, f: impl FnOnce() -> Result<T>) -> Result<Option<T>> {
    if cond {
        f().map(Some)
    } else {
        Ok(None)
    }
}

/// Score → plan → apply → retrain → evaluate, with a single retrain seeded by
/// `setup.train.seed`.
pub fn curate_retrain_eval<T: Scalar>(
    data: CurationData<'_, T>,
    setup: &CurationSetup<'_>,
) -> Result<EvalRecord> {
    let mut out = curate_retrain_eval_seeds(data, setup, &[setup.train.seed])?;
    Ok(out.records.remove(0))
}

/// Scores once with the model trained under `setup.train.seed`, then, for each
/// retrain seed, trains on the uncurated and the curated data and compares
/// test metrics of the two.
pub fn curate_retrain_eval_seeds<T: Scalar>(
    data: CurationData<'_, T>,
    setup: &CurationSetup<'_>,
    retrain_seeds: &[u64],
) -> Result<CurationOutcome<T>> {
    if retrain_seeds.is_empty() {
        return Err(Error::arg("at least one retrain seed is required"));
    }
    let cfg = setup.train;
    let fit = train(data.train, setup.arch, cfg)?;

    let started = Instant::now();
    let (reports, plan) = match setup.target {
        Target::Single(objective) => {
            let r = score_report(setup.method, objective, &fit, data.train, data.val, cfg)?;
            let plan = CurationPlan::from_report(
                data.train,
                &r,
                setup.action,
                setup.fraction,
                setup.method.temperature,
            )?;
            (vec![r], plan)
        }
        Target::JointUtilityFairness => {
            let u = score_report(setup.method, Objective::Utility, &fit, data.train, data.val, cfg)?;
            let f = score_report(setup.method, Objective::Fairness, &fit, data.train, data.val, cfg)?;
            let plan = CurationPlan::joint(
                data.train,
                &u,
                &f,
                setup.action,
                setup.fraction,
                setup.method.temperature,
            )?;
            (vec![u, f], plan)
        }
    };
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;

    let (curated, weights) = plan.apply(data.train)?;
    let method_name = match setup.target {
        Target::Single(_) => reports[0].method.name().to_string(),
        Target::JointUtilityFairness => format!("{}_JOINT", setup.method.method.name()),
    };
    let detection = match (data.noise, setup.action) {
        (Some(noise), CurationAction::Trim | CurationAction::Relabel) => {
            Some(detection_metrics(&plan.ids, noise, plan.ids.len()))
        }
        _ => None,
    };
    let has_groups = data.test.group().is_some();

    let mut records = Vec::with_capacity(retrain_seeds.len());
    for &seed in retrain_seeds {
        let seeded = cfg.with_seed(seed);
        let before = fit_with(data.train, None, setup.arch, &seeded)?;
        let after = fit_with(&curated, weights.as_deref(), setup.arch, &seeded)?;
        let fair = |theta: &ParamVector<T>| {
            optional(data.test_counterfactual.is_some(), || {
                consistency_fair_score(theta, data.test, data.test_counterfactual.unwrap())
            })
        };
        let record = EvalRecord {
            dataset: setup.dataset.to_string(),
            method: method_name.clone(),
            action: setup.action.name().to_string(),
            fraction: setup.fraction,
            seed,
            acc_pre: accuracy(&before, data.test)?,
            acc_post: accuracy(&after, data.test)?,
            fair_pre: fair(&before)?,
            fair_post: fair(&after)?,
            dp_gap_pre: optional(has_groups, || dp_gap(&before, data.test))?,
            dp_gap_post: optional(has_groups, || dp_gap(&after, data.test))?,
            recall_at_k: detection.map(|d| d.0),
            precision_at_k: detection.map(|d| d.1),
            extra: Default::default(),
            runtime_ms,
        };
        record.validate()?;
        records.push(record);
    }
    Ok(CurationOutcome {
        records,
        plan,
        reports,
    })
}

/// White-box evasion attack settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub gamma: f64,
    /// Fraction of the test set perturbed per draw.
    pub fraction: f64,
    pub draws: usize,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            fraction: 0.25,
            draws: 10,
            seed: 0,
        }
    }
}

impl AttackConfig {
    fn draw_seed(&self, draw: usize) -> u64 {
        self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(draw as u64 + 1)
    }
}

/// One defended arm: estimator, action and the fraction acted on.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseArm {
    pub method: MethodConfig,
    pub action: CurationAction,
    pub fraction: f64,
}

/// Attack/defense evaluation on a linear model.
///
/// The model trained on `train` is attacked on `draws` random subsets of
/// `test`. Each arm scores the training set by robustness influence against
/// the fully perturbed validation set, curates, retrains with the same seed
/// and is evaluated on the same attacked test sets. Records carry the
/// undefended post-attack accuracy as `acc_pre`, the defended accuracy as
/// `acc_post`, and `acc_clean`, `gamma`, `attack_frac` and `draw` in `extra`.
pub fn defend_eval<T: Scalar>(
    dataset: &str,
    train_set: &Dataset<T>,
    val: &Dataset<T>,
    test: &Dataset<T>,
    cfg: &TrainConfig,
    attack: &AttackConfig,
    arms: &[DefenseArm],
) -> Result<Vec<EvalRecord>> {
    let arch = Arch::linear(train_set.n_features());
    let fit = train(train_set, &arch, cfg)?;
    let theta = &fit.params;
    let acc_clean = accuracy(theta, test)?;
    let (val_adv, _) = craft_adversarial(val, theta, attack.gamma, 1.0, attack.seed)?;
    let attacked: Vec<Dataset<T>> = (0..attack.draws)
        .map(|d| {
            craft_adversarial(test, theta, attack.gamma, attack.fraction, attack.draw_seed(d))
                .map(|(ds, _)| ds)
        })
        .collect::<Result<_>>()?;
    let undefended: Vec<f64> = attacked
        .iter()
        .map(|ds| accuracy(theta, ds))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for arm in arms {
        let started = Instant::now();
        let report = score_report(&arm.method, Objective::Robustness, &fit, train_set, &val_adv, cfg)?;
        let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
        let plan = CurationPlan::from_report(
            train_set,
            &report,
            arm.action,
            arm.fraction,
            arm.method.temperature,
        )?;
        let (curated, weights) = plan.apply(train_set)?;
        let defended = fit_with(&curated, weights.as_deref(), &arch, cfg)?;
        for (d, ds) in attacked.iter().enumerate() {
            let extra = [
                ("acc_clean".to_string(), acc_clean),
                ("gamma".to_string(), attack.gamma),
                ("attack_frac".to_string(), attack.fraction),
                ("draw".to_string(), d as f64),
            ]
            .into_iter()
            .collect();
            let record = EvalRecord {
                dataset: dataset.to_string(),
                method: report.method.name().to_string(),
                action: arm.action.name().to_string(),
                fraction: arm.fraction,
                seed: cfg.seed,
                acc_pre: undefended[d],
                acc_post: accuracy(&defended, ds)?,
                fair_pre: None,
                fair_post: None,
                dp_gap_pre: None,
                dp_gap_post: None,
                recall_at_k: None,
                precision_at_k: None,
                extra,
                runtime_ms,
            };
            record.validate()?;
            records.push(record);
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{flip_labels, make_blobs};

    fn blobs() -> (Dataset<f64>, Dataset<f64>, NoiseRecord) {
        let (tr, te) = make_blobs::<f64>(80, 40, 4.0, 3).unwrap();
        let (noisy, noise) = flip_labels(&tr, 6, false, 3).unwrap();
        (noisy, te, noise)
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_fraction_is_plain_retrain() {
        let (tr, te, noise) = blobs();
        let mc = MethodConfig::new(Method::Ip);
        let cfg = quick();
        let setup = CurationSetup {
            dataset: "blobs",
            arch: &Arch::linear(2),
            method: &mc,
            target: Target::Single(Objective::Utility),
            action: CurationAction::Trim,
            fraction: 0.0,
            train: &cfg,
        };
        let data = CurationData {
            train: &tr,
            val: &te,
            test: &te,
            test_counterfactual: None,
            noise: Some(&noise),
        };
        let r = curate_retrain_eval(data, &setup).unwrap();
        assert_eq!(r.acc_pre, r.acc_post);
        assert_eq!(r.recall_at_k, Some(0.0));
        assert_eq!(curate_retrain_eval(data, &setup).unwrap().acc_post, r.acc_post);
    }

    #[test]
    fn ensemble_spec_follows_method() {
        let mc = MethodConfig::new(Method::TracIn);
        assert_eq!(mc.ensemble_spec().unwrap().strategy, EnsembleStrategy::Checkpoint);
        assert!(MethodConfig::new(Method::Ip).ensemble_spec().is_none());
    }

    #[test]
    fn zero_attack_fraction_keeps_accuracy() {
        let (tr, te, _) = blobs();
        let attack = AttackConfig {
            fraction: 0.0,
            draws: 2,
            ..AttackConfig::default()
        };
        let arms = [DefenseArm {
            method: MethodConfig::new(Method::Ip),
            action: CurationAction::Trim,
            fraction: 0.0,
        }];
        let recs = defend_eval("blobs", &tr, &te, &te, &quick(), &attack, &arms).unwrap();
        assert_eq!(recs.len(), 2);
        for r in recs {
            assert_eq!(r.acc_pre, r.extra["acc_clean"]);
            assert_eq!(r.acc_post, r.acc_pre);
        }
    }
}
