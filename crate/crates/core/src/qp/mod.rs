//! Four-phase class-forgetting pipeline.
//!
//! 1. phase-shift the forgotten classes' final-layer columns and biases;
//! 2. replace forgotten samples' labels with the uniform distribution;
//! 3. fine-tune on the whole relabelled set with [`QuantumLoss`];
//! 4. post-multiply the final weights by the class-mixing matrix.
//!
//! The order is fixed. Each phase can be skipped for ablation studies.

mod interference;
mod loss;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use interference::{
    apply_mixing, build_mixing_matrix, interference_transform, phase_factor, suppression_check,
};
pub use loss::{quantum_loss, quantum_loss_logit_grad, QuantumLoss};

use crate::dataset::{ForgetSet, LabeledDataset};
use crate::error::{Error, Result};
use crate::metrics::split_accuracy;
use crate::model::Classifier;
use crate::train::{train, TrainConfig};

/// Phases to skip. All `false` runs the full method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub no_weight_transform: bool,
    pub no_label_superposition: bool,
    pub no_uncertainty_maximization: bool,
    pub no_matrix_m: bool,
}

impl Ablation {
    pub fn all() -> Self {
        Self {
            no_weight_transform: true,
            no_label_superposition: true,
            no_uncertainty_maximization: true,
            no_matrix_m: true,
        }
    }

    /// Parses a flag name such as `no_matrix_m`.
    pub fn set(&mut self, flag: &str) -> Result<()> {
        match flag {
            "no_weight_transform" => self.no_weight_transform = true,
            "no_label_superposition" => self.no_label_superposition = true,
            "no_uncertainty_maximization" => self.no_uncertainty_maximization = true,
            "no_matrix_m" => self.no_matrix_m = true,
            other => return Err(Error::config(format!("unknown ablation flag {other:?}"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnlearnConfig {
    pub forget_set: ForgetSet,
    /// Phase angle of the interference transform, radians.
    pub phi: f64,
    /// Entropy weight in the forget branch of the loss.
    pub lambda: f64,
    /// Mixing coefficient, strictly between 0 and 1.
    pub alpha: f64,
    /// Fine-tuning epochs; overrides `train.epochs`.
    pub epochs: usize,
    pub train: TrainConfig,
    pub ablation: Ablation,
}

impl Default for UnlearnConfig {
    fn default() -> Self {
        Self {
            forget_set: ForgetSet::single(0),
            phi: std::f64::consts::PI,
            lambda: 1.0,
            alpha: 0.3,
            epochs: 5,
            train: TrainConfig::default(),
            ablation: Ablation::default(),
        }
    }
}

impl UnlearnConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        self.forget_set.validate(num_classes)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha must lie in (0, 1)"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda must be positive"));
        }
        if !self.phi.is_finite() {
            return Err(Error::config("phi must be finite"));
        }
        self.train.validate()
    }
}

/// Replaces the label of every forgotten sample with `[1/K, …, 1/K]`.
pub fn superpose_labels(data: &LabeledDataset, forget: &ForgetSet) -> LabeledDataset {
    let k = data.num_classes();
    let mut out = data.clone();
    for s in out.samples_mut() {
        if forget.contains(s.class) {
            s.label = vec![1.0 / k as f64; k];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: String,
    /// Percent; absent when the data holds no forgotten samples.
    pub forget_accuracy: Option<f64>,
    /// Percent; absent when the data holds no retained samples.
    pub retain_accuracy: Option<f64>,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
}

pub type PhaseLog = Vec<PhaseRecord>;

pub const PHASES: [&str; 4] = ["weight_transform", "label_superposition", "uncertainty_maximization", "matrix_mixing"];

/// Runs the pipeline on a copy of `model` and returns it with a per-phase log.
/// Accuracy snapshots are taken on `data` by recorded class.
pub fn run_qp_audio_eraser(
    model: &Classifier,
    data: &LabeledDataset,
    cfg: &UnlearnConfig,
) -> Result<(Classifier, PhaseLog)> {
    cfg.validate(model.num_classes())?;
    if data.num_classes() != model.num_classes() {
        return Err(Error::Shape("dataset and model disagree on the class count".into()));
    }
    let forget = &cfg.forget_set;
    let mut model = model.clone();
    let mut log = PhaseLog::new();

    let snapshot = |model: &Classifier, phase: &str, started: Instant, skipped: bool| -> Result<PhaseRecord> {
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        let (fa, ra) = split_accuracy(model, data, forget)?;
        Ok(PhaseRecord { phase: phase.into(), forget_accuracy: fa, retain_accuracy: ra, wall_ms, skipped })
    };

    let t = Instant::now();
    if !cfg.ablation.no_weight_transform {
        interference_transform(&mut model, forget, cfg.phi)?;
    }
    log.push(snapshot(&model, PHASES[0], t, cfg.ablation.no_weight_transform)?);

    let t = Instant::now();
    let relabelled = if cfg.ablation.no_label_superposition {
        data.clone()
    } else {
        superpose_labels(data, forget)
    };
    log.push(snapshot(&model, PHASES[1], t, cfg.ablation.no_label_superposition)?);

    let t = Instant::now();
    if !cfg.ablation.no_uncertainty_maximization {
        let train_cfg = TrainConfig { epochs: cfg.epochs, ..cfg.train.clone() };
        train(&mut model, &relabelled, &train_cfg, &QuantumLoss::new(forget.clone(), cfg.lambda))?;
    }
    log.push(snapshot(&model, PHASES[2], t, cfg.ablation.no_uncertainty_maximization)?);

    let t = Instant::now();
    if !cfg.ablation.no_matrix_m {
        let m = build_mixing_matrix(model.num_classes(), forget, cfg.alpha)?;
        apply_mixing(&mut model, &m)?;
    }
    log.push(snapshot(&model, PHASES[3], t, cfg.ablation.no_matrix_m)?);

    if !model.fits_f32() {
        return Err(Error::NonFinite("unlearned model has non-finite parameters".into()));
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledDataset {
        let mut ds = LabeledDataset::new(4);
        for c in 0..4 {
            for i in 0..3 {
                let mut x = vec![0.1 * i as f64; 4];
                x[c] += 1.0;
                ds.push_one_hot(x, c).unwrap();
            }
        }
        ds
    }

    #[test]
    fn superposition_cases() {
        let ds = toy();
        let out = superpose_labels(&ds, &ForgetSet::single(2));
        for (a, b) in ds.samples().iter().zip(out.samples()) {
            assert_eq!(a.class, b.class);
            if a.class == 2 {
                assert_eq!(b.label, vec![0.25; 4]);
            } else {
                assert_eq!(a.label, b.label);
            }
        }
    }

    #[test]
    fn superposition_multi_class() {
        let mut ds = LabeledDataset::new(10);
        for c in 0..10 {
            ds.push_one_hot(vec![c as f64], c).unwrap();
        }
        let out = superpose_labels(&ds, &ForgetSet::new([0, 4]));
        assert_eq!(out.samples()[0].label, vec![0.1; 10]);
        assert_eq!(out.samples()[4].label, vec![0.1; 10]);
        assert_eq!(out.samples()[5].label, ds.samples()[5].label);
    }

    #[test]
    fn all_phases_disabled_is_identity() {
        let m = Classifier::new(4, &[5], 4, 3).unwrap();
        let cfg = UnlearnConfig { ablation: Ablation::all(), ..Default::default() };
        let (out, log) = run_qp_audio_eraser(&m, &toy(), &cfg).unwrap();
        assert_eq!(out, m);
        assert_eq!(log.len(), 4);
        assert!(log.iter().all(|r| r.skipped));
    }

    #[test]
    fn config_validation() {
        let m = Classifier::new(4, &[5], 4, 3).unwrap();
        for bad in [
            UnlearnConfig { alpha: 1.0, ..Default::default() },
            UnlearnConfig { lambda: 0.0, ..Default::default() },
            UnlearnConfig { forget_set: ForgetSet::single(4), ..Default::default() },
        ] {
            assert!(run_qp_audio_eraser(&m, &toy(), &bad).is_err());
        }
    }

    #[test]
    fn ablation_flags_parse() {
        let mut a = Ablation::default();
        a.set("no_matrix_m").unwrap();
        assert!(a.no_matrix_m);
        assert!(a.set("no_such_thing").is_err());
    }
}
