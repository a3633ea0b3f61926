use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Sorted, duplicate-free set of class indices to erase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct ForgetSet(Vec<usize>);

impl ForgetSet {
    pub fn new(classes: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = classes.into_iter().collect();
        Self(set.into_iter().collect())
    }

    pub fn single(class: usize) -> Self {
        Self(vec![class])
    }

    #[inline]
    pub fn contains(&self, class: usize) -> bool {
        self.0.binary_search(&class).is_ok()
    }

    pub fn classes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn union(&self, other: &ForgetSet) -> ForgetSet {
        ForgetSet::new(self.0.iter().chain(&other.0).copied())
    }

    /// Every index must be a valid class and at least one class must remain.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::config("forget set is empty"));
        }
        if let Some(&c) = self.0.iter().find(|&&c| c >= num_classes) {
            return Err(Error::InvalidClass { class: c, num_classes });
        }
        if self.0.len() >= num_classes {
            return Err(Error::config("forget set must leave at least one retained class"));
        }
        Ok(())
    }

    /// Parses `"0,4"`-style lists.
    pub fn parse(s: &str) -> Result<Self> {
        let classes = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>().map_err(|_| Error::config(format!("bad class id {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(classes))
    }
}

impl From<Vec<usize>> for ForgetSet {
    fn from(v: Vec<usize>) -> Self {
        Self::new(v)
    }
}

impl From<ForgetSet> for Vec<usize> {
    fn from(s: ForgetSet) -> Self {
        s.0
    }
}

impl std::fmt::Display for ForgetSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Soft label over all classes.
    pub label: Vec<f64>,
    /// Class the sample was recorded as, kept even after relabelling.
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    num_classes: usize,
    samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn new(num_classes: usize) -> Self {
        Self { num_classes, samples: Vec::new() }
    }

    pub fn from_samples(num_classes: usize, samples: Vec<Sample>) -> Result<Self> {
        let mut ds = Self::new(num_classes);
        for s in samples {
            ds.push(s)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if sample.class >= self.num_classes {
            return Err(Error::InvalidClass { class: sample.class, num_classes: self.num_classes });
        }
        if sample.label.len() != self.num_classes {
            return Err(Error::Shape(format!(
                "label has {} entries for {} classes",
                sample.label.len(),
                self.num_classes
            )));
        }
        let s: f64 = sample.label.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("label sums to {s}")));
        }
        if let Some(first) = self.samples.first() {
            if first.features.len() != sample.features.len() {
                return Err(Error::Shape(format!(
                    "sample has {} features, dataset has {}",
                    sample.features.len(),
                    first.features.len()
                )));
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn push_one_hot(&mut self, features: Vec<f64>, class: usize) -> Result<()> {
        let mut label = vec![0.0; self.num_classes];
        if class < self.num_classes {
            label[class] = 1.0;
        }
        self.push(Sample { features, label, class })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Sample] {
        &mut self.samples
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.class] += 1;
        }
        counts
    }

    /// `n_F`: number of samples whose recorded class is being forgotten.
    pub fn forget_count(&self, forget: &ForgetSet) -> usize {
        self.samples.iter().filter(|s| forget.contains(s.class)).count()
    }

    /// Splits into `(forget, retain)` by recorded class.
    pub fn partition(&self, forget: &ForgetSet) -> (LabeledDataset, LabeledDataset) {
        let (f, r): (Vec<Sample>, Vec<Sample>) =
            self.samples.iter().cloned().partition(|s| forget.contains(s.class));
        (
            LabeledDataset { num_classes: self.num_classes, samples: f },
            LabeledDataset { num_classes: self.num_classes, samples: r },
        )
    }

    /// Drops every sample of the given classes.
    pub fn without_classes(&self, classes: &ForgetSet) -> LabeledDataset {
        self.partition(classes).1
    }

    /// Seeded stratified split; each class contributes `round(n_c · test_fraction)`
    /// samples to the test side. Returns `(train, test)`.
    pub fn split_stratified(&self, test_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::config("test fraction must lie in [0, 1)"));
        }
        let mut train = LabeledDataset::new(self.num_classes);
        let mut test = LabeledDataset::new(self.num_classes);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.num_classes];
        for (i, s) in self.samples.iter().enumerate() {
            by_class[s.class].push(i);
        }
        let mut is_test = vec![false; self.samples.len()];
        for (c, idx) in by_class.iter_mut().enumerate() {
            let mut r = rng::seeded(rng::substream(seed, c as u64));
            idx.shuffle(&mut r);
            let n_test = (idx.len() as f64 * test_fraction).round() as usize;
            for &i in &idx[..n_test] {
                is_test[i] = true;
            }
        }
        for (s, t) in self.samples.iter().zip(is_test) {
            if t {
                test.samples.push(s.clone());
            } else {
                train.samples.push(s.clone());
            }
        }
        Ok((train, test))
    }

    pub fn features_all_finite(&self) -> bool {
        self.samples.iter().all(|s| s.features.iter().all(|v| v.is_finite()))
    }
}

/// Per-feature z-scoring fitted on one dataset and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &LabeledDataset) -> Self {
        let d = data.feature_dim();
        let n = data.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for s in data.samples() {
            for (m, x) in mean.iter_mut().zip(&s.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in data.samples() {
            for ((v, x), m) in var.iter_mut().zip(&s.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        // constant features map to zero rather than dividing by ~0
        let std = var.into_iter().map(|v| (v / n).sqrt().max(1e-6)).collect();
        Self { mean, std }
    }

    pub fn apply(&self, data: &mut LabeledDataset) {
        for s in data.samples_mut() {
            for ((x, m), sd) in s.features.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / sd;
            }
        }
    }
}
