use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::WavClip;
use crate::error::{Error, Result};

/// Additive floor inside the log; silence maps to `ln(1e-6)`.
pub const LOG_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub target_frames: usize,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self { n_fft: 256, hop: 128, n_mels: 32, target_frames: 32 }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(Error::config("n_fft must be a power of two"));
        }
        if self.hop == 0 {
            return Err(Error::config("hop must be at least 1"));
        }
        if self.n_mels == 0 || self.n_mels > self.n_fft / 2 {
            return Err(Error::config("n_mels must lie in 1..=n_fft/2"));
        }
        if self.target_frames == 0 {
            return Err(Error::config("target_frames must be at least 1"));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.n_mels * self.target_frames
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramFeature {
    pub n_mels: usize,
    pub n_frames: usize,
    /// Mel-major: `values[m * n_frames + t]`.
    pub values: Vec<f64>,
}

impl SpectrogramFeature {
    pub fn get(&self, mel: usize, frame: usize) -> f64 {
        self.values[mel * self.n_frames + frame]
    }

    pub fn flattened_dim(&self) -> usize {
        self.values.len()
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters, `n_mels × (n_fft/2 + 1)`, with corner frequencies
/// evenly spaced on the mel scale over `[0, sample_rate / 2]`.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    let corners: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (corners[m], corners[m + 1], corners[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / n_fft as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided `|X_k|²` (`k = 0..=n/2`) of an already-windowed frame.
pub fn power_spectrum(frame: &[f64]) -> Vec<f64> {
    let fft = FftPlanner::new().plan_fft_forward(frame.len());
    power_with(&*fft, frame)
}

fn power_with(fft: &dyn Fft<f64>, frame: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fft.process(&mut buf);
    buf[..frame.len() / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}

/// Reusable log-mel extractor for a fixed sample rate and configuration.
#[derive(Clone)]
pub struct LogMel {
    cfg: MelConfig,
    sample_rate: u32,
    window: Vec<f64>,
    filters: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl LogMel {
    pub fn new(sample_rate: u32, cfg: MelConfig) -> Result<Self> {
        cfg.validate()?;
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        Ok(Self {
            cfg,
            sample_rate,
            window: hann(cfg.n_fft),
            filters: mel_filterbank(sample_rate, cfg.n_fft, cfg.n_mels),
            fft: FftPlanner::new().plan_fft_forward(cfg.n_fft),
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.cfg
    }

    /// Number of STFT frames before cropping/padding; clips shorter than
    /// `n_fft` are zero-padded to a single frame.
    pub fn raw_frames(&self, n_samples: usize) -> usize {
        if n_samples <= self.cfg.n_fft {
            1
        } else {
            1 + (n_samples - self.cfg.n_fft) / self.cfg.hop
        }
    }

    /// Mel power of one frame starting at `start`.
    pub fn mel_power(&self, samples: &[f64], start: usize) -> Vec<f64> {
        let n = self.cfg.n_fft;
        let frame: Vec<f64> = (0..n)
            .map(|i| samples.get(start + i).copied().unwrap_or(0.0) * self.window[i])
            .collect();
        let power = power_with(&*self.fft, &frame);
        self.filters
            .iter()
            .map(|f| f.iter().zip(&power).map(|(w, p)| w * p).sum())
            .collect()
    }

    pub fn extract(&self, clip: &WavClip) -> Result<SpectrogramFeature> {
        if clip.sample_rate != self.sample_rate {
            return Err(Error::config(format!(
                "clip sample rate {} differs from extractor rate {}",
                clip.sample_rate, self.sample_rate
            )));
        }
        let total = self.raw_frames(clip.samples.len());
        let target = self.cfg.target_frames;
        // centre crop when long; pad silence at the end when short
        let first = total.saturating_sub(target) / 2;
        let used = total.min(target);
        let mut values = vec![LOG_FLOOR.ln(); self.cfg.n_mels * target];
        for t in 0..used {
            let mel = self.mel_power(&clip.samples, (first + t) * self.cfg.hop);
            for (m, p) in mel.into_iter().enumerate() {
                values[m * target + t] = (LOG_FLOOR + p).ln();
            }
        }
        Ok(SpectrogramFeature { n_mels: self.cfg.n_mels, n_frames: target, values })
    }
}

/// One-shot convenience over [`LogMel`].
pub fn log_mel_spectrogram(clip: &WavClip, cfg: &MelConfig) -> Result<SpectrogramFeature> {
    LogMel::new(clip.sample_rate, *cfg)?.extract(clip)
}

impl std::fmt::Debug for LogMel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogMel").field("cfg", &self.cfg).field("sample_rate", &self.sample_rate).finish()
    }
}
