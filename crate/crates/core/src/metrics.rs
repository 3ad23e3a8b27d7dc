//! Evaluation metrics: accuracy, group fairness, detection quality and
//! agreement between influence estimators.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NoiseRecord, SampleId};
use crate::error::{Error, Result};
use crate::influence::InfluenceReport;
use crate::models::{predict_proba, ParamVector};
use crate::scalar::Scalar;

/// Hard prediction at the 0.5 threshold; a probability of exactly 0.5 maps to 1.
pub fn predict_label<T: Scalar>(theta: &ParamVector<T>, x: &[T]) -> Result<u8> {
    Ok(u8::from(predict_proba(theta, x)? >= T::c(0.5)))
}

pub fn accuracy<T: Scalar>(theta: &ParamVector<T>, ds: &Dataset<T>) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::arg("accuracy of an empty dataset"));
    }
    let mut correct = 0usize;
    for z in ds.samples() {
        if predict_label(theta, z.x)? == z.y {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// `|mean_{g=1} p̂ − mean_{g=0} p̂|` with `p̂` the positive-class probability.
pub fn dp_gap<T: Scalar>(theta: &ParamVector<T>, ds: &Dataset<T>) -> Result<f64> {
    let group = ds
        .group()
        .ok_or_else(|| Error::arg("DP gap needs a group attribute"))?;
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for (i, z) in ds.samples().enumerate() {
        let g = usize::from(group[i]);
        sums[g] += predict_proba(theta, z.x)?.as_f64();
        counts[g] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::arg("DP gap needs both groups present"));
    }
    Ok((sums[1] / counts[1] as f64 - sums[0] / counts[0] as f64).abs())
}

/// Fraction of id-aligned pairs whose hard predictions differ. Lower is fairer.
pub fn consistency_fair_score<T: Scalar>(
    theta: &ParamVector<T>,
    ds: &Dataset<T>,
    ds_perturbed: &Dataset<T>,
) -> Result<f64> {
    if ds.len() != ds_perturbed.len() {
        return Err(Error::Shape {
            expected: ds.len(),
            found: ds_perturbed.len(),
        });
    }
    if ds.is_empty() {
        return Err(Error::arg("fair score of an empty dataset"));
    }
    let rows = ds_perturbed.indices_of(ds.ids())?;
    let mut differ = 0usize;
    for (i, &j) in rows.iter().enumerate() {
        if predict_label(theta, ds.row(i))? != predict_label(theta, ds_perturbed.row(j))? {
            differ += 1;
        }
    }
    Ok(differ as f64 / ds.len() as f64)
}

/// Recall and precision of the first `k` entries of `selected` against the
/// flipped set. Recall is 0 when nothing was flipped; precision is 0 for `k = 0`.
pub fn detection_metrics(selected: &[SampleId], noise: &NoiseRecord, k: usize) -> (f64, f64) {
    let top = &selected[..k.min(selected.len())];
    let hits = top.iter().filter(|id| noise.contains(id)).count() as f64;
    let recall = if noise.is_empty() {
        0.0
    } else {
        hits / noise.len() as f64
    };
    let precision = if k == 0 { 0.0 } else { hits / k as f64 };
    (recall, precision)
}

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman correlation with average ranks for ties; 0 for constant input.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Kendall's tau-b; 0 when either side is constant.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_a, mut ties_b) = (0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i].total_cmp(&a[j]) as i64;
            let db = b[i].total_cmp(&b[j]) as i64;
            if da == 0 {
                ties_a += 1;
            }
            if db == 0 {
                ties_b += 1;
            }
            match da * db {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let pairs = (n * n.saturating_sub(1) / 2) as i64;
    let denom = (((pairs - ties_a) * (pairs - ties_b)) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (concordant - discordant) as f64 / denom
    }
}

fn aligned<T: Scalar>(a: &InfluenceReport<T>, b: &InfluenceReport<T>) -> Result<(Vec<f64>, Vec<f64>)> {
    if !a.same_ids(b) {
        return Err(Error::arg("reports cover different sample ids"));
    }
    Ok((
        a.scores.values().map(|v| v.as_f64()).collect(),
        b.scores.values().map(|v| v.as_f64()).collect(),
    ))
}

/// `(spearman, kendall)` between two reports over the same ids.
pub fn rank_correlation<T: Scalar>(
    a: &InfluenceReport<T>,
    b: &InfluenceReport<T>,
) -> Result<(f64, f64)> {
    let (x, y) = aligned(a, b)?;
    Ok((spearman(&x, &y), kendall_tau(&x, &y)))
}

/// Fraction of samples whose scores carry the same sign (zero counts as its own sign).
pub fn sign_agreement<T: Scalar>(a: &InfluenceReport<T>, b: &InfluenceReport<T>) -> Result<f64> {
    let (x, y) = aligned(a, b)?;
    if x.is_empty() {
        return Err(Error::arg("sign agreement of empty reports"));
    }
    let sign = |v: f64| (v > 0.0) as i8 - (v < 0.0) as i8;
    let same = x.iter().zip(&y).filter(|(p, q)| sign(**p) == sign(**q)).count();
    Ok(same as f64 / x.len() as f64)
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Outcome of one curation or defense run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub dataset: String,
    pub method: String,
    pub action: String,
    pub fraction: f64,
    pub seed: u64,
    pub acc_pre: f64,
    pub acc_post: f64,
    /// Consistency fair score before/after curation, when a counterfactual test set exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fair_pre: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fair_post: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp_gap_pre: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp_gap_post: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_at_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_at_k: Option<f64>,
    /// Extra named quantities (attack level, draw index, clean accuracy, ...).
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub extra: std::collections::BTreeMap<String, f64>,
    /// Time spent in the influence estimator.
    pub runtime_ms: f64,
}

impl EvalRecord {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            Some(self.acc_pre),
            Some(self.acc_post),
            self.recall_at_k,
            self.precision_at_k,
            self.fair_pre,
            self.fair_post,
            self.dp_gap_pre,
            self.dp_gap_post,
        ];
        if unit.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Numeric("metric outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Map from id to hard label under `theta`, used for paired comparisons.
pub fn predictions<T: Scalar>(
    theta: &ParamVector<T>,
    ds: &Dataset<T>,
) -> Result<HashMap<SampleId, u8>> {
    let mut out = HashMap::with_capacity(ds.len());
    for (i, z) in ds.samples().enumerate() {
        out.insert(ds.ids()[i], predict_label(theta, z.x)?);
    }
    Ok(out)
}
