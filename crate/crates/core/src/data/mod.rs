//! Tabular binary-classification datasets, synthetic generators, label noise
//! injection, the closed-form evasion attack and CSV ingestion.

mod attack;
pub(crate) mod csv_io;
mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use attack::{craft_adversarial, perturb_point};
pub use csv_io::{load_csv, read_csv, save_csv, write_csv, CsvSchema};
pub use synth::{
    flip_labels, make_blobs, make_group_biased, make_half_moons, BlobsConfig, GroupBiasConfig,
    DEFAULT_MOONS_NOISE,
};

/// Stable identifier of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub u64);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Borrowed view of one labelled row.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, T> {
    pub x: &'a [T],
    pub y: u8,
}

/// Row-major feature matrix with binary labels, optional binary group
/// attribute and unique sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    n_features: usize,
    features: Vec<T>,
    labels: Vec<u8>,
    group: Option<Vec<u8>>,
    ids: Vec<SampleId>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Vec<T>,
        n_features: usize,
        labels: Vec<u8>,
        group: Option<Vec<u8>>,
        ids: Vec<SampleId>,
    ) -> Result<Self> {
        let n = labels.len();
        if n_features == 0 {
            return Err(Error::arg("dataset needs at least one feature column"));
        }
        if features.len() != n * n_features {
            return Err(Error::Shape {
                expected: n * n_features,
                found: features.len(),
            });
        }
        if ids.len() != n {
            return Err(Error::Shape {
                expected: n,
                found: ids.len(),
            });
        }
        if let Some(g) = &group {
            if g.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    found: g.len(),
                });
            }
            if let Some(pos) = g.iter().position(|&v| v > 1) {
                return Err(Error::arg(format!(
                    "group value {} at row {pos} is not in {{0,1}}",
                    g[pos]
                )));
            }
        }
        if let Some(pos) = labels.iter().position(|&v| v > 1) {
            return Err(Error::arg(format!(
                "label {} at row {pos} is not binary",
                labels[pos]
            )));
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(*id) {
                return Err(Error::arg(format!("duplicate sample id {id}")));
            }
        }
        Ok(Self {
            n_features,
            features,
            labels,
            group,
            ids,
        })
    }

    /// Dataset with ids `0..n`.
    pub fn with_sequential_ids(
        features: Vec<T>,
        n_features: usize,
        labels: Vec<u8>,
        group: Option<Vec<u8>>,
    ) -> Result<Self> {
        let ids = (0..labels.len() as u64).map(SampleId).collect();
        Self::new(features, n_features, labels, group, ids)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn group(&self) -> Option<&[u8]> {
        self.group.as_deref()
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn sample(&self, i: usize) -> Sample<'_, T> {
        Sample {
            x: self.row(i),
            y: self.labels[i],
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample<'_, T>> + '_ {
        (0..self.len()).map(move |i| self.sample(i))
    }

    /// Map from id to row index.
    pub fn index_map(&self) -> HashMap<SampleId, usize> {
        self.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }

    /// Row indices for `ids`, failing on any id not present.
    pub fn indices_of<'a, I>(&self, ids: I) -> Result<Vec<usize>>
    where
        I: IntoIterator<Item = &'a SampleId>,
    {
        let map = self.index_map();
        ids.into_iter()
            .map(|id| {
                map.get(id)
                    .copied()
                    .ok_or_else(|| Error::arg(format!("unknown sample id {id}")))
            })
            .collect()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset<T> {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        Dataset {
            n_features: self.n_features,
            features,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            group: self
                .group
                .as_ref()
                .map(|g| rows.iter().map(|&r| g[r]).collect()),
            ids: rows.iter().map(|&r| self.ids[r]).collect(),
        }
    }

    /// Splits into the first `at` rows and the rest.
    pub fn split_at(&self, at: usize) -> Result<(Dataset<T>, Dataset<T>)> {
        if at > self.len() {
            return Err(Error::arg(format!(
                "split point {at} beyond dataset of {} rows",
                self.len()
            )));
        }
        let head: Vec<usize> = (0..at).collect();
        let tail: Vec<usize> = (at..self.len()).collect();
        Ok((self.select(&head), self.select(&tail)))
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Dataset<T>> {
        Dataset::new(
            self.features.clone(),
            self.n_features,
            labels,
            self.group.clone(),
            self.ids.clone(),
        )
    }

    pub fn with_features(&self, features: Vec<T>) -> Result<Dataset<T>> {
        Dataset::new(
            features,
            self.n_features,
            self.labels.clone(),
            self.group.clone(),
            self.ids.clone(),
        )
    }

    pub fn with_group(&self, group: Option<Vec<u8>>) -> Result<Dataset<T>> {
        Dataset::new(
            self.features.clone(),
            self.n_features,
            self.labels.clone(),
            group,
            self.ids.clone(),
        )
    }

    /// Copy with ids shifted by `offset`.
    pub fn offset_ids(&self, offset: u64) -> Dataset<T> {
        let mut out = self.clone();
        for id in &mut out.ids {
            id.0 += offset;
        }
        out
    }

    /// Copy with feature `column` negated; the demographic counterfactual for
    /// a `±1`-coded group feature.
    pub fn negate_feature(&self, column: usize) -> Result<Dataset<T>> {
        if column >= self.n_features {
            return Err(Error::arg(format!(
                "feature column {column} out of range for {} features",
                self.n_features
            )));
        }
        let mut features = self.features.clone();
        for i in 0..self.len() {
            let v = &mut features[i * self.n_features + column];
            *v = -*v;
        }
        self.with_features(features)
    }

    /// Number of rows of each class, `[count(0), count(1)]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    /// Converts the scalar type, going through `f64`.
    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            n_features: self.n_features,
            features: self
                .features
                .iter()
                .map(|v| U::c(v.as_f64()))
                .collect(),
            labels: self.labels.clone(),
            group: self.group.clone(),
            ids: self.ids.clone(),
        }
    }
}

/// Ground truth of injected label noise.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub flipped_ids: BTreeSet<SampleId>,
    pub original_labels: BTreeMap<SampleId, u8>,
}

impl NoiseRecord {
    pub fn len(&self) -> usize {
        self.flipped_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flipped_ids.is_empty()
    }

    pub fn contains(&self, id: &SampleId) -> bool {
        self.flipped_ids.contains(id)
    }

    /// Checks the record against the noisy dataset it describes.
    pub fn validate<T: Scalar>(&self, noisy: &Dataset<T>) -> Result<()> {
        let map = noisy.index_map();
        for id in &self.flipped_ids {
            let row = *map
                .get(id)
                .ok_or_else(|| Error::arg(format!("flipped id {id} not in dataset")))?;
            let orig = self
                .original_labels
                .get(id)
                .ok_or_else(|| Error::arg(format!("no original label for {id}")))?;
            if *orig == noisy.labels()[row] {
                return Err(Error::arg(format!(
                    "id {id} is recorded as flipped but still carries label {orig}"
                )));
            }
        }
        Ok(())
    }
}
