//! Membership-dependent objective for the uncertainty-maximisation phase.
//!
//! Retained samples are scored with cross-entropy. Samples whose recorded
//! class is being forgotten are scored with `−λ·H(p)`, so descending the loss
//! drives their predictions toward the uniform distribution, where `H = ln K`
//! and the branch reaches its minimum `−λ·ln K`.

use crate::dataset::ForgetSet;
use crate::loss::{cross_entropy, entropy, softmax, Objective, Prediction};

#[derive(Debug, Clone)]
pub struct QuantumLoss {
    pub forget: ForgetSet,
    pub lambda: f64,
}

impl QuantumLoss {
    pub fn new(forget: ForgetSet, lambda: f64) -> Self {
        Self { forget, lambda }
    }
}

pub fn quantum_loss(pred: &Prediction, target: &[f64], class: usize, forget: &ForgetSet, lambda: f64) -> f64 {
    if forget.contains(class) {
        -lambda * entropy(pred)
    } else {
        cross_entropy(pred, target)
    }
}

/// Gradient of [`quantum_loss`] with respect to the logits that produced `pred`.
///
/// Forget branch: `g_k = λ·p_k·(ln p_k + H(p))`, which vanishes at the
/// uniform distribution and always sums to zero. Retained branch: `p − target`.
pub fn quantum_loss_logit_grad(
    pred: &Prediction,
    target: &[f64],
    class: usize,
    forget: &ForgetSet,
    lambda: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; pred.probs().len()];
    write_grad(pred, target, class, forget, lambda, &mut g);
    g
}

fn write_grad(pred: &Prediction, target: &[f64], class: usize, forget: &ForgetSet, lambda: f64, out: &mut [f64]) {
    let p = pred.probs();
    if forget.contains(class) {
        let h = entropy(pred);
        for (g, &pk) in out.iter_mut().zip(p) {
            *g = if pk > 0.0 { lambda * pk * (pk.ln() + h) } else { 0.0 };
        }
    } else {
        for ((g, pk), t) in out.iter_mut().zip(p).zip(target) {
            *g = pk - t;
        }
    }
}

impl Objective for QuantumLoss {
    fn loss_and_grad(&self, logits: &[f64], target: &[f64], class: usize, grad: &mut [f64]) -> f64 {
        let pred = softmax(logits);
        write_grad(&pred, target, class, &self.forget, self.lambda, grad);
        quantum_loss(&pred, target, class, &self.forget, self.lambda)
    }
}
