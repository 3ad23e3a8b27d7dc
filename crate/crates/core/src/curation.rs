//! Turning influence reports into dataset edits: trim, relabel, reweight.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SampleId};
use crate::error::{Error, Result};
use crate::influence::InfluenceReport;
use crate::metrics::average_ranks;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CurationAction {
    Trim,
    Relabel,
    Reweight,
}

impl CurationAction {
    pub fn name(self) -> &'static str {
        match self {
            CurationAction::Trim => "TRIM",
            CurationAction::Relabel => "RELABEL",
            CurationAction::Reweight => "REWEIGHT",
        }
    }
}

impl std::str::FromStr for CurationAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TRIM" => Ok(CurationAction::Trim),
            "RELABEL" => Ok(CurationAction::Relabel),
            "REWEIGHT" => Ok(CurationAction::Reweight),
            other => Err(Error::arg(format!("unknown curation action `{other}`"))),
        }
    }
}

fn count_for(fraction: f64, n: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::arg(format!("fraction must lie in [0,1], got {fraction}")));
    }
    Ok(((fraction * n as f64) + 1e-9).floor() as usize)
}

/// Ids ordered from most to least detrimental, ties broken by ascending id.
pub fn detrimental_order<T: Scalar>(report: &InfluenceReport<T>) -> Vec<SampleId> {
    let mut entries: Vec<(SampleId, T)> = report.benefit_scores().into_iter().collect();
    entries.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    entries.into_iter().map(|(id, _)| id).collect()
}

/// The `⌊fraction·n⌋` most detrimental ids: lowest scores first, or highest
/// first for self-influence.
pub fn rank_bottom<T: Scalar>(report: &InfluenceReport<T>, fraction: f64) -> Result<Vec<SampleId>> {
    let k = count_for(fraction, report.len())?;
    let mut order = detrimental_order(report);
    order.truncate(k);
    Ok(order)
}

/// Combined key per id: the sum of its detrimental ranks (1 = most
/// detrimental, ties averaged) in the two reports.
pub fn joint_keys<T: Scalar>(
    util: &InfluenceReport<T>,
    fair: &InfluenceReport<T>,
) -> Result<BTreeMap<SampleId, f64>> {
    if !util.same_ids(fair) {
        return Err(Error::arg("joint ranking needs reports over identical ids"));
    }
    let ranks = |r: &InfluenceReport<T>| {
        let v: Vec<f64> = r.benefit_scores().values().map(|s| s.as_f64()).collect();
        average_ranks(&v)
    };
    let (ru, rf) = (ranks(util), ranks(fair));
    Ok(util
        .scores
        .keys()
        .zip(ru.iter().zip(&rf))
        .map(|(id, (a, b))| (*id, a + b))
        .collect())
}

/// Bottom `fraction` of ids by combined utility + fairness rank; ties by id.
pub fn joint_rank<T: Scalar>(
    util: &InfluenceReport<T>,
    fair: &InfluenceReport<T>,
    fraction: f64,
) -> Result<Vec<SampleId>> {
    let keys = joint_keys(util, fair)?;
    let k = count_for(fraction, keys.len())?;
    let mut entries: Vec<(SampleId, f64)> = keys.into_iter().collect();
    entries.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(entries.into_iter().take(k).map(|(id, _)| id).collect())
}

fn id_set<T: Scalar>(ds: &Dataset<T>, ids: &[SampleId]) -> Result<BTreeSet<SampleId>> {
    ds.indices_of(ids)?;
    Ok(ids.iter().copied().collect())
}

/// Removes the listed rows.
pub fn apply_trim<T: Scalar>(ds: &Dataset<T>, ids: &[SampleId]) -> Result<Dataset<T>> {
    let drop = id_set(ds, ids)?;
    let keep: Vec<usize> = (0..ds.len()).filter(|&i| !drop.contains(&ds.ids()[i])).collect();
    Ok(ds.select(&keep))
}

/// Flips the binary label of the listed rows.
pub fn apply_relabel<T: Scalar>(ds: &Dataset<T>, ids: &[SampleId]) -> Result<Dataset<T>> {
    let flip = id_set(ds, ids)?;
    let labels = ds
        .labels()
        .iter()
        .zip(ds.ids())
        .map(|(&l, id)| if flip.contains(id) { 1 - l } else { l })
        .collect();
    ds.with_labels(labels)
}

/// Softmax sample weights `w_i = n · softmax(z_i / temperature)` where `z` are
/// the z-normalized benefit scores, so higher-scoring samples weigh more and
/// the weights sum to `n`. Returned weights follow the row order of `ds`.
pub fn apply_reweight<T: Scalar>(
    ds: &Dataset<T>,
    report: &InfluenceReport<T>,
    temperature: f64,
) -> Result<(Dataset<T>, Vec<T>)> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::arg("reweighting temperature must be positive"));
    }
    let benefit = report.benefit_scores();
    let scores: Vec<f64> = ds
        .ids()
        .iter()
        .map(|id| {
            benefit
                .get(id)
                .map(|v| v.as_f64())
                .ok_or_else(|| Error::arg(format!("report has no score for sample {id}")))
        })
        .collect::<Result<_>>()?;
    Ok((ds.clone(), softmax_weights(&scores, temperature)?.into_iter().map(T::c).collect()))
}

pub(crate) fn softmax_weights(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    let n = scores.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let std = (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64).sqrt();
    let z: Vec<f64> = scores
        .iter()
        .map(|s| if std > 0.0 { (s - mean) / std / temperature } else { 0.0 })
        .collect();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    let w: Vec<f64> = exp.iter().map(|e| n as f64 * e / total).collect();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite reweighting weights".into()));
    }
    Ok(w)
}

/// A concrete dataset edit derived from an influence report.
#[derive(Debug, Clone, PartialEq)]
pub struct CurationPlan<T> {
    pub action: CurationAction,
    /// Targets of TRIM / RELABEL, most detrimental first.
    pub ids: Vec<SampleId>,
    /// REWEIGHT weights by id; they sum to the number of samples.
    pub weights: Option<BTreeMap<SampleId, T>>,
    pub source_fingerprint: String,
}

impl<T: Scalar> CurationPlan<T> {
    /// Targets the bottom `fraction` of `report` (TRIM / RELABEL) or weights
    /// every sample (REWEIGHT, `fraction` unused).
    pub fn from_report(
        ds: &Dataset<T>,
        report: &InfluenceReport<T>,
        action: CurationAction,
        fraction: f64,
        temperature: f64,
    ) -> Result<Self> {
        Self::from_order(ds, report, detrimental_order(report), action, fraction, temperature)
    }

    /// Like [`CurationPlan::from_report`], but ranked jointly over a utility
    /// and a fairness report. Reweighting uses the negated combined rank.
    pub fn joint(
        ds: &Dataset<T>,
        util: &InfluenceReport<T>,
        fair: &InfluenceReport<T>,
        action: CurationAction,
        fraction: f64,
        temperature: f64,
    ) -> Result<Self> {
        let keys = joint_keys(util, fair)?;
        let scores = keys.iter().map(|(id, k)| (*id, T::c(-k))).collect();
        let combined = InfluenceReport::new(
            util.method,
            util.objective,
            scores,
            format!("{}+{}", util.model_fingerprint, fair.model_fingerprint),
        )?;
        let order = joint_rank(util, fair, 1.0)?;
        Self::from_order(ds, &combined, order, action, fraction, temperature)
    }

    fn from_order(
        ds: &Dataset<T>,
        report: &InfluenceReport<T>,
        order: Vec<SampleId>,
        action: CurationAction,
        fraction: f64,
        temperature: f64,
    ) -> Result<Self> {
        let k = count_for(fraction, order.len())?;
        let (ids, weights) = match action {
            CurationAction::Trim | CurationAction::Relabel => {
                let ids: Vec<SampleId> = order.into_iter().take(k).collect();
                ds.indices_of(&ids)?;
                (ids, None)
            }
            CurationAction::Reweight => {
                let (_, w) = apply_reweight(ds, report, temperature)?;
                (Vec::new(), Some(ds.ids().iter().copied().zip(w).collect()))
            }
        };
        Ok(Self {
            action,
            ids,
            weights,
            source_fingerprint: report.model_fingerprint.clone(),
        })
    }

    /// Applies the plan. REWEIGHT returns the unchanged rows together with
    /// per-row weights.
    pub fn apply(&self, ds: &Dataset<T>) -> Result<(Dataset<T>, Option<Vec<T>>)> {
        match self.action {
            CurationAction::Trim => Ok((apply_trim(ds, &self.ids)?, None)),
            CurationAction::Relabel => Ok((apply_relabel(ds, &self.ids)?, None)),
            CurationAction::Reweight => {
                let map = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| Error::arg("reweight plan without weights"))?;
                let w = ds
                    .ids()
                    .iter()
                    .map(|id| {
                        map.get(id)
                            .copied()
                            .ok_or_else(|| Error::arg(format!("no weight for sample {id}")))
                    })
                    .collect::<Result<Vec<T>>>()?;
                Ok((ds.clone(), Some(w)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::{Method, Objective};

    fn report(values: &[f64], method: Method) -> InfluenceReport<f64> {
        let scores = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (SampleId(i as u64), v))
            .collect();
        InfluenceReport::new(method, Objective::Utility, scores, "fp".into()).unwrap()
    }

    fn ds(n: usize) -> Dataset<f64> {
        let features = (0..n).map(|i| i as f64).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::with_sequential_ids(features, 1, labels, None).unwrap()
    }

    #[test]
    fn rank_bottom_counts_and_order() {
        let r = report(&[0.3, -1.0, 0.0, -1.0, 2.0], Method::Ip);
        assert!(rank_bottom(&r, 0.0).unwrap().is_empty());
        assert_eq!(rank_bottom(&r, 0.6).unwrap(), vec![SampleId(1), SampleId(3), SampleId(2)]);
        let big = report(&vec![1.0; 150], Method::Ip);
        assert_eq!(rank_bottom(&big, 0.05).unwrap().len(), 7);
        assert_eq!(rank_bottom(&big, 0.1).unwrap().len(), 15);
        assert!(rank_bottom(&r, 1.5).is_err());
    }

    #[test]
    fn self_influence_ranks_highest_first() {
        let r = report(&[0.3, 5.0, 0.0, 1.0], Method::SelfIp);
        assert_eq!(rank_bottom(&r, 0.5).unwrap(), vec![SampleId(1), SampleId(3)]);
    }

    #[test]
    fn joint_rank_degenerate_cases() {
        let util = report(&[0.5, -0.2, 0.9, -1.0, 0.1, 0.0], Method::Ip);
        let flat = report(&[0.0; 6], Method::IpFair);
        assert_eq!(joint_rank(&util, &flat, 0.5).unwrap(), rank_bottom(&util, 0.5).unwrap());
        assert_eq!(joint_rank(&util, &util, 0.5).unwrap(), rank_bottom(&util, 0.5).unwrap());
        let other = report(&[0.0; 5], Method::IpFair);
        assert!(joint_rank(&util, &other, 0.5).is_err());
    }

    #[test]
    fn anti_correlated_reports_fall_back_to_id_order() {
        let a = report(&[1.0, 2.0, 3.0, 4.0], Method::Ip);
        let b = report(&[4.0, 3.0, 2.0, 1.0], Method::IpFair);
        let keys = joint_keys(&a, &b).unwrap();
        assert!(keys.values().all(|&k| k == 5.0));
        assert_eq!(joint_rank(&a, &b, 0.5).unwrap(), vec![SampleId(0), SampleId(1)]);
    }

    #[test]
    fn trim_and_relabel() {
        let d = ds(6);
        assert_eq!(apply_trim(&d, &[]).unwrap(), d);
        let t = apply_trim(&d, &[SampleId(1), SampleId(4)]).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.ids(), &[SampleId(0), SampleId(2), SampleId(3), SampleId(5)]);
        let ids = [SampleId(0), SampleId(3)];
        let once = apply_relabel(&d, &ids).unwrap();
        assert_ne!(once, d);
        assert_eq!(apply_relabel(&once, &ids).unwrap(), d);
        assert!(apply_trim(&d, &[SampleId(99)]).is_err());
        assert!(apply_relabel(&d, &[SampleId(99)]).is_err());
    }

    #[test]
    fn reweight_properties() {
        let d = ds(4);
        let flat = report(&[0.7; 4], Method::Ip);
        let (_, w) = apply_reweight(&d, &flat, 1.0).unwrap();
        assert!(w.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let r = report(&[0.1, -3.0, 2.0, 0.5], Method::Ip);
        let (_, w) = apply_reweight(&d, &r, 1.0).unwrap();
        assert!((w.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert!(w[2] > w[3] && w[3] > w[0] && w[0] > w[1]);
        assert!(apply_reweight(&d, &r, 0.0).is_err());
        let short = report(&[0.1, 0.2], Method::Ip);
        assert!(apply_reweight(&d, &short, 1.0).is_err());
    }

    #[test]
    fn plan_round_trip() {
        let d = ds(10);
        let r = report(&[0.5, -0.4, 0.3, 0.2, 0.1, -0.9, 0.0, 0.7, 0.8, 0.9], Method::Ip);
        let plan = CurationPlan::from_report(&d, &r, CurationAction::Trim, 0.2, 1.0).unwrap();
        assert_eq!(plan.ids, vec![SampleId(5), SampleId(1)]);
        let (out, w) = plan.apply(&d).unwrap();
        assert_eq!(out.len(), 8);
        assert!(w.is_none());
        let plan = CurationPlan::from_report(&d, &r, CurationAction::Reweight, 0.2, 1.0).unwrap();
        let (out, w) = plan.apply(&d).unwrap();
        assert_eq!(out, d);
        assert_eq!(w.unwrap().len(), 10);
    }
}
