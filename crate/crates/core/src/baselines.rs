//! Comparison unlearners built on the shared training loop.
//!
//! Gradient ascent and negative gradient push the forget split up the
//! cross-entropy surface (gradient ascent then repairs on the retain split).
//! Fisher forgetting perturbs each parameter with noise scaled by how much more
//! it matters to the forget split than to the retain split. Synaptic dampening
//! shrinks parameters that are disproportionately important to the forget split.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ForgetSet, LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::loss::{Ascent, CrossEntropy, Objective};
use crate::model::{Classifier, Gradients};
use crate::rng;
use crate::train::{train_with, TrainConfig};

/// Guards the Fisher ratio against division by zero.
pub const FISHER_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    GradientAscent,
    NegativeGradient,
    FisherForgetting,
    SynapticDampening,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] =
        [Self::GradientAscent, Self::NegativeGradient, Self::FisherForgetting, Self::SynapticDampening];

    /// Short CLI name.
    pub fn short(self) -> &'static str {
        match self {
            Self::GradientAscent => "ga",
            Self::NegativeGradient => "ng",
            Self::FisherForgetting => "fisher",
            Self::SynapticDampening => "ssd",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Self::GradientAscent => "Gradient Ascent",
            Self::NegativeGradient => "Negative Gradient",
            Self::FisherForgetting => "Fisher Forgetting",
            Self::SynapticDampening => "Synaptic Dampening",
        }
    }

    pub fn from_short(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.short() == s)
    }
}

/// Knobs for all four methods; each method reads only the fields it needs.
///
/// In JSON only `method` is required. Omitted fields take the defaults of
/// [`BaselineConfig::new`] for that method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBaselineConfig")]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub ascent_epochs: usize,
    pub finetune_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Noise scale γ for Fisher forgetting.
    pub fisher_noise_scale: f64,
    /// Selection threshold τ for synaptic dampening.
    pub ssd_threshold: f64,
    pub ssd_dampening_floor: f64,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBaselineConfig {
    method: BaselineMethod,
    ascent_epochs: Option<usize>,
    finetune_epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    fisher_noise_scale: Option<f64>,
    ssd_threshold: Option<f64>,
    ssd_dampening_floor: Option<f64>,
    seed: Option<u64>,
}

impl TryFrom<RawBaselineConfig> for BaselineConfig {
    type Error = Error;

    fn try_from(r: RawBaselineConfig) -> Result<Self> {
        let d = BaselineConfig::new(r.method);
        let cfg = BaselineConfig {
            method: r.method,
            ascent_epochs: r.ascent_epochs.unwrap_or(d.ascent_epochs),
            finetune_epochs: r.finetune_epochs.unwrap_or(d.finetune_epochs),
            learning_rate: r.learning_rate.unwrap_or(d.learning_rate),
            batch_size: r.batch_size.unwrap_or(d.batch_size),
            fisher_noise_scale: r.fisher_noise_scale.unwrap_or(d.fisher_noise_scale),
            ssd_threshold: r.ssd_threshold.unwrap_or(d.ssd_threshold),
            ssd_dampening_floor: r.ssd_dampening_floor.unwrap_or(d.ssd_dampening_floor),
            seed: r.seed.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl BaselineConfig {
    /// Per-method defaults. Gradient ascent runs a moderate ascent followed by
    /// one repair epoch; negative gradient runs a short unrepaired ascent with
    /// a large step, the regime in which it overshoots and wrecks the model;
    /// Fisher noise is conservative; dampening uses the lowest threshold at
    /// which any parameter can be selected.
    pub fn new(method: BaselineMethod) -> Self {
        let (ascent_epochs, learning_rate) = match method {
            BaselineMethod::NegativeGradient => (5, 0.5),
            _ => (10, 0.05),
        };
        Self {
            method,
            ascent_epochs,
            finetune_epochs: 1,
            learning_rate,
            batch_size: 32,
            fisher_noise_scale: 0.01,
            ssd_threshold: 1.0,
            ssd_dampening_floor: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be a finite non-negative number"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.fisher_noise_scale >= 0.0 && self.fisher_noise_scale.is_finite()) {
            return Err(Error::config("fisher_noise_scale must be finite and non-negative"));
        }
        if !(self.ssd_threshold > 0.0) {
            return Err(Error::config("ssd_threshold must be positive"));
        }
        if !(self.ssd_dampening_floor >= 0.0 && self.ssd_dampening_floor.is_finite()) {
            return Err(Error::config("ssd_dampening_floor must be finite and non-negative"));
        }
        Ok(())
    }

    fn train_config(&self, epochs: usize, stream: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs,
            batch_size: self.batch_size,
            seed: rng::substream(self.seed, stream),
            shuffle: true,
        }
    }
}

/// Runs the method named in `cfg.method` on a copy of `model`.
pub fn run_baseline(model: &Classifier, data: &LabeledDataset, forget: &ForgetSet, cfg: &BaselineConfig) -> Result<Classifier> {
    run_baseline_with(model, data, forget, cfg, Exec::default())
}

pub fn run_baseline_with(
    model: &Classifier,
    data: &LabeledDataset,
    forget: &ForgetSet,
    cfg: &BaselineConfig,
    exec: Exec,
) -> Result<Classifier> {
    let mut m = model.clone();
    match cfg.method {
        BaselineMethod::GradientAscent => gradient_ascent_unlearn(&mut m, data, forget, cfg, exec)?,
        BaselineMethod::NegativeGradient => negative_gradient_unlearn(&mut m, data, forget, cfg, exec)?,
        BaselineMethod::FisherForgetting => fisher_forgetting(&mut m, data, forget, cfg, exec)?,
        BaselineMethod::SynapticDampening => synaptic_dampening(&mut m, data, forget, cfg, exec)?,
    }
    if !m.fits_f32() {
        return Err(Error::NonFinite(format!("{} produced parameters outside the f32 range", cfg.method.display_name())));
    }
    Ok(m)
}

fn prepare(model: &Classifier, data: &LabeledDataset, forget: &ForgetSet, cfg: &BaselineConfig) -> Result<()> {
    cfg.validate()?;
    forget.validate(model.num_classes())?;
    if data.num_classes() != model.num_classes() {
        return Err(Error::Shape("dataset and model disagree on the class count".into()));
    }
    Ok(())
}

/// Ascent on the forget split, then ordinary fine-tuning on the retain split.
pub fn gradient_ascent_unlearn(
    model: &mut Classifier,
    data: &LabeledDataset,
    forget: &ForgetSet,
    cfg: &BaselineConfig,
    exec: Exec,
) -> Result<()> {
    prepare(model, data, forget, cfg)?;
    let (forget_split, retain_split) = data.partition(forget);
    if forget_split.is_empty() {
        log::warn!("forget split is empty; {} is a no-op", cfg.method.display_name());
        return Ok(());
    }
    train_with(model, &forget_split, &cfg.train_config(cfg.ascent_epochs, 0), &Ascent(CrossEntropy), exec)?;
    train_with(model, &retain_split, &cfg.train_config(cfg.finetune_epochs, 1), &CrossEntropy, exec)?;
    Ok(())
}

/// Ascent on the forget split only.
pub fn negative_gradient_unlearn(
    model: &mut Classifier,
    data: &LabeledDataset,
    forget: &ForgetSet,
    cfg: &BaselineConfig,
    exec: Exec,
) -> Result<()> {
    let cfg = BaselineConfig { finetune_epochs: 0, ..cfg.clone() };
    gradient_ascent_unlearn(model, data, forget, &cfg, exec)
}

/// Mean over `samples` of the squared per-sample cross-entropy gradient.
/// Entries are in [`Classifier::to_flat`] order.
pub fn estimate_diag_fisher(model: &Classifier, samples: &[Sample], exec: Exec) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::config("Fisher estimate needs at least one sample"));
    }
    let k = model.num_classes();
    let (sum, err) = exec::chunked_fold(
        exec,
        samples,
        || (vec![0.0; model.num_params()], None::<Error>),
        |(acc, err), s| {
            if err.is_some() {
                return;
            }
            match model.trace(&s.features) {
                Ok(trace) => {
                    let mut dz = vec![0.0; k];
                    CrossEntropy.loss_and_grad(&trace.logits, &s.label, s.class, &mut dz);
                    let mut g = Gradients::zeros_like(model);
                    model.backward(&s.features, &trace, &dz, 1.0, &mut g);
                    for (a, v) in acc.iter_mut().zip(&g.data) {
                        *a += v * v;
                    }
                }
                Err(e) => *err = Some(e),
            }
        },
        |(a, ea), (b, eb)| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            if ea.is_none() {
                *ea = eb;
            }
        },
    );
    if let Some(e) = err {
        return Err(e);
    }
    let n = samples.len() as f64;
    Ok(sum.into_iter().map(|v| v / n).collect())
}

/// Adds `N(0, σ_p²)` to every parameter with `σ_p = γ·√(F_forget / (F_retain + ε))`.
pub fn fisher_forgetting(
    model: &mut Classifier,
    data: &LabeledDataset,
    forget: &ForgetSet,
    cfg: &BaselineConfig,
    exec: Exec,
) -> Result<()> {
    prepare(model, data, forget, cfg)?;
    let (forget_split, retain_split) = data.partition(forget);
    if forget_split.is_empty() || cfg.fisher_noise_scale == 0.0 {
        return Ok(());
    }
    let f_forget = estimate_diag_fisher(model, forget_split.samples(), exec)?;
    let f_retain = if retain_split.is_empty() {
        vec![0.0; f_forget.len()]
    } else {
        estimate_diag_fisher(model, retain_split.samples(), exec)?
    };
    let mut r = rng::seeded(cfg.seed);
    model.for_each_param_mut(|i, p| {
        let sigma = cfg.fisher_noise_scale * (f_forget[i] / (f_retain[i] + FISHER_EPS)).sqrt();
        let z: f64 = StandardNormal.sample(&mut r);
        *p += sigma * z;
    });
    Ok(())
}

/// Scales parameters with `F_forget > τ·F_full` by `min(floor·F_full / F_forget, 1)`.
pub fn synaptic_dampening(
    model: &mut Classifier,
    data: &LabeledDataset,
    forget: &ForgetSet,
    cfg: &BaselineConfig,
    exec: Exec,
) -> Result<()> {
    prepare(model, data, forget, cfg)?;
    let (forget_split, _) = data.partition(forget);
    if forget_split.is_empty() {
        return Ok(());
    }
    let f_forget = estimate_diag_fisher(model, forget_split.samples(), exec)?;
    let f_full = estimate_diag_fisher(model, data.samples(), exec)?;
    let mut selected = 0usize;
    model.for_each_param_mut(|i, p| {
        if f_forget[i] > cfg.ssd_threshold * f_full[i] {
            *p *= dampening_factor(f_forget[i], f_full[i], cfg.ssd_dampening_floor);
            selected += 1;
        }
    });
    log::debug!("synaptic dampening selected {selected} parameters");
    Ok(())
}

/// `min(floor·full / forget, 1)`; only called with `forget > 0`.
pub fn dampening_factor(f_forget: f64, f_full: f64, floor: f64) -> f64 {
    (floor * f_full / f_forget).min(1.0)
}
