//! Softmax, cross-entropy, entropy, and the per-sample objective interface
//! the trainer differentiates.

use serde::{Deserialize, Serialize};

/// Clamp added inside logarithms so a zero probability never yields `-inf`.
pub const LOG_EPS: f64 = 1e-12;

/// A probability vector produced by [`softmax`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction(Vec<f64>);

impl Prediction {
    /// Wraps an existing distribution. Panics unless it sums to one within 1e-9.
    pub fn new(probs: Vec<f64>) -> Self {
        let s: f64 = probs.iter().sum();
        assert!((s - 1.0).abs() <= 1e-9, "probabilities sum to {s}");
        assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        Self(probs)
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }
}

/// Max-shifted softmax; stable for logits of any finite magnitude.
pub fn softmax(logits: &[f64]) -> Prediction {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    Prediction(out)
}

/// `−Σ t_j · ln(p_j + ε)`
pub fn cross_entropy(pred: &Prediction, target: &[f64]) -> f64 {
    -pred.0.iter().zip(target).map(|(p, t)| t * (p + LOG_EPS).ln()).sum::<f64>()
}

/// Shannon entropy in nats, with `0 · ln 0 = 0`. Zero entries are skipped, so
/// no clamp is needed and `H(uniform(K)) = ln K` to rounding.
pub fn entropy(pred: &Prediction) -> f64 {
    -pred
        .0
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Per-sample training objective, expressed on logits.
pub trait Objective: Sync {
    /// Returns the loss for one sample and writes `∂L/∂z` into `grad`.
    fn loss_and_grad(&self, logits: &[f64], target: &[f64], class: usize, grad: &mut [f64]) -> f64;

    fn loss(&self, logits: &[f64], target: &[f64], class: usize) -> f64 {
        let mut scratch = vec![0.0; logits.len()];
        self.loss_and_grad(logits, target, class, &mut scratch)
    }
}

/// Softmax cross-entropy against the (possibly soft) target.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrossEntropy;

impl Objective for CrossEntropy {
    fn loss_and_grad(&self, logits: &[f64], target: &[f64], _class: usize, grad: &mut [f64]) -> f64 {
        let pred = softmax(logits);
        for ((g, p), t) in grad.iter_mut().zip(pred.probs()).zip(target) {
            *g = p - t;
        }
        cross_entropy(&pred, target)
    }
}

/// Negates another objective, turning descent into ascent.
#[derive(Debug, Clone, Copy)]
pub struct Ascent<O>(pub O);

impl<O: Objective> Objective for Ascent<O> {
    fn loss_and_grad(&self, logits: &[f64], target: &[f64], class: usize, grad: &mut [f64]) -> f64 {
        let l = self.0.loss_and_grad(logits, target, class, grad);
        grad.iter_mut().for_each(|g| *g = -*g);
        -l
    }
}
