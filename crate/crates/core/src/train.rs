//! Mini-batch SGD and finite-difference gradient auditing.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::loss::Objective;
use crate::model::{Classifier, Gradients};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, epochs: 10, batch_size: 32, seed: 0, shuffle: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be a finite non-negative number"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainLog {
    /// Mean per-sample loss over each epoch, measured before each batch update.
    pub epoch_losses: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Sum of per-sample losses and gradients over `samples`.
pub fn batch_gradient<O: Objective + ?Sized>(
    model: &Classifier,
    samples: &[&Sample],
    objective: &O,
    exec: Exec,
) -> Result<(f64, Gradients)> {
    let k = model.num_classes();
    let (loss, grads, err) = exec::chunked_fold(
        exec,
        samples,
        || (0.0, Gradients::zeros_like(model), None::<Error>),
        |(loss, grads, err), s| {
            if err.is_some() {
                return;
            }
            match model.trace(&s.features) {
                Ok(trace) => {
                    let mut dz = vec![0.0; k];
                    *loss += objective.loss_and_grad(&trace.logits, &s.label, s.class, &mut dz);
                    model.backward(&s.features, &trace, &dz, 1.0, grads);
                }
                Err(e) => *err = Some(e),
            }
        },
        |(la, ga, ea), (lb, gb, eb)| {
            *la += lb;
            ga.add(&gb);
            if ea.is_none() {
                *ea = eb;
            }
        },
    );
    match err {
        Some(e) => Err(e),
        None => Ok((loss, grads)),
    }
}

/// Runs `cfg.epochs` of mini-batch SGD on `objective`, averaging gradients
/// within each batch. Identical inputs give bit-identical parameters.
pub fn train<O: Objective + ?Sized>(
    model: &mut Classifier,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    objective: &O,
) -> Result<TrainLog> {
    train_with(model, data, cfg, objective, Exec::default())
}

pub fn train_with<O: Objective + ?Sized>(
    model: &mut Classifier,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    objective: &O,
    exec: Exec,
) -> Result<TrainLog> {
    cfg.validate()?;
    let mut log = TrainLog::default();
    if data.is_empty() {
        log::warn!("training skipped: empty dataset");
        log.warnings.push("empty dataset; parameters left unchanged".into());
        return Ok(log);
    }
    if data.feature_dim() != model.feature_dim() || data.num_classes() != model.num_classes() {
        return Err(Error::Shape(format!(
            "dataset is {}-d/{} classes, model is {}-d/{} classes",
            data.feature_dim(),
            data.num_classes(),
            model.feature_dim(),
            model.num_classes()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            let mut r = rng::seeded(rng::substream(cfg.seed, epoch as u64));
            order.shuffle(&mut r);
        }
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let samples: Vec<&Sample> = batch.iter().map(|&i| &data.samples()[i]).collect();
            let (loss, mut grads) = batch_gradient(model, &samples, objective, exec)?;
            total += loss;
            grads.scale(1.0 / samples.len() as f64);
            model.sgd_step(&grads, cfg.learning_rate);
        }
        // beyond the f32 range a checkpoint could no longer hold the model
        if !model.fits_f32() {
            return Err(Error::NonFinite(format!("parameters diverged in epoch {epoch}")));
        }
        log.epoch_losses.push(total / data.len() as f64);
    }
    Ok(log)
}

pub const FD_STEP: f64 = 1e-5;

/// Largest relative discrepancy between the analytic gradient and a central
/// finite difference (step [`FD_STEP`]), measured as
/// `|g_a − g_fd| / max(1, |g_a|, |g_fd|)` over every parameter.
pub fn gradient_check<O: Objective + ?Sized>(
    model: &Classifier,
    sample: &Sample,
    objective: &O,
) -> Result<f64> {
    let (_, analytic) = batch_gradient(model, &[sample], objective, Exec::Sequential)?;
    let base = model.to_flat();
    let mut probe = model.clone();
    let mut flat = base.clone();
    let loss_at = |m: &Classifier| -> Result<f64> {
        let z = m.logits(&sample.features)?;
        Ok(objective.loss(&z, &sample.label, sample.class))
    };
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        flat[i] = base[i] + FD_STEP;
        probe.set_flat(&flat)?;
        let up = loss_at(&probe)?;
        flat[i] = base[i] - FD_STEP;
        probe.set_flat(&flat)?;
        let down = loss_at(&probe)?;
        flat[i] = base[i];
        let fd = (up - down) / (2.0 * FD_STEP);
        let ga = analytic.data[i];
        let err = (ga - fd).abs() / 1f64.max(ga.abs()).max(fd.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}
