//! Seeded harmonic-tone corpus standing in for recorded speech classes.
//!
//! Class `c` is a stack of harmonics over a base frequency
//! `base + spacing·c` Hz, jittered per clip by up to `pitch_jitter` (relative), with additive white
//! Gaussian noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{LogMel, MelConfig, WavClip};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::rng;

pub const SYNTH_SAMPLE_RATE: u32 = 8000;
const DURATION_SECS: f64 = 0.8;
const HARMONICS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthProfile {
    /// Well separated classes, 120 Hz apart.
    #[default]
    Standard,
    /// Classes only 45 Hz apart, so jittered neighbours overlap.
    Accent,
}

impl SynthProfile {
    fn base_hz(self) -> f64 {
        300.0
    }

    fn spacing_hz(self) -> f64 {
        match self {
            SynthProfile::Standard => 120.0,
            SynthProfile::Accent => 45.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub seed: u64,
    pub profile: SynthProfile,
    pub noise_sigma: f64,
    /// Relative half-width of the per-clip pitch jitter.
    pub pitch_jitter: f64,
    pub mel: MelConfig,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 10,
            per_class: 200,
            seed: 7,
            profile: SynthProfile::Standard,
            noise_sigma: 0.5,
            pitch_jitter: 0.05,
            mel: MelConfig::default(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("synthetic data needs at least two classes"));
        }
        if self.per_class == 0 {
            return Err(Error::config("per_class must be at least 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma must be finite and non-negative"));
        }
        let top = self.profile.base_hz() + self.profile.spacing_hz() * (self.num_classes - 1) as f64;
        if !(0.0..1.0).contains(&self.pitch_jitter) {
            return Err(Error::config("pitch_jitter must lie in [0, 1)"));
        }
        if top * (1.0 + self.pitch_jitter) >= SYNTH_SAMPLE_RATE as f64 / 2.0 {
            return Err(Error::config("too many classes for the synthetic frequency range"));
        }
        self.mel.validate()
    }
}

/// The `index`-th clip of class `class`, fully determined by `spec.seed`.
pub fn synth_clip(spec: &SynthSpec, class: usize, index: usize) -> WavClip {
    let stream = (class * spec.per_class.max(1) + index) as u64;
    let mut r = rng::seeded(rng::substream(spec.seed, stream));
    let nominal = spec.profile.base_hz() + spec.profile.spacing_hz() * class as f64;
    let f0 = nominal * (1.0 + r.random_range(-spec.pitch_jitter..=spec.pitch_jitter));
    let nyquist = SYNTH_SAMPLE_RATE as f64 / 2.0;
    let partials: Vec<(f64, f64, f64)> = (1..=HARMONICS)
        .map(|h| (h as f64 * f0, 0.4 / h as f64, r.random_range(0.0..2.0 * PI)))
        .filter(|(f, _, _)| *f < nyquist)
        .collect();
    let n = (DURATION_SECS * SYNTH_SAMPLE_RATE as f64) as usize;
    let noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).expect("validated sigma"));
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / SYNTH_SAMPLE_RATE as f64;
            let tone: f64 = partials.iter().map(|(f, a, ph)| a * (2.0 * PI * f * t + ph).sin()).sum();
            let eps = noise.as_ref().map_or(0.0, |d| d.sample(&mut r));
            (tone + eps).clamp(-1.0, 1.0)
        })
        .collect();
    WavClip { sample_rate: SYNTH_SAMPLE_RATE, samples }
}

/// Generates `per_class` log-mel samples per class, class-major order, one-hot labels.
pub fn synth_dataset(spec: &SynthSpec) -> Result<LabeledDataset> {
    synth_dataset_with(spec, Exec::default())
}

pub fn synth_dataset_with(spec: &SynthSpec, exec: Exec) -> Result<LabeledDataset> {
    spec.validate()?;
    let extractor = LogMel::new(SYNTH_SAMPLE_RATE, spec.mel)?;
    let total = spec.num_classes * spec.per_class;
    let features = exec::map_range(exec, total, |i| {
        let (class, index) = (i / spec.per_class, i % spec.per_class);
        extractor.extract(&synth_clip(spec, class, index)).map(|f| f.values)
    });
    let mut ds = LabeledDataset::new(spec.num_classes);
    for (i, f) in features.into_iter().enumerate() {
        ds.push_one_hot(f?, i / spec.per_class)?;
    }
    Ok(ds)
}
