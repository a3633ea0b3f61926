//! Final-layer surgery: the phase-shift transform applied before optimisation
//! and the class-mixing matrix applied after it.

use std::f64::consts::SQRT_2;

use crate::dataset::{ForgetSet, Sample};
use crate::error::{Error, Result};
use crate::loss::softmax;
use crate::matrix::Matrix;
use crate::model::Classifier;

/// `cos φ`, with values within 1e-12 of zero snapped to exactly zero so that
/// `φ = π/2` annihilates the column instead of leaving ~6e-17 residue.
pub fn phase_factor(phi: f64) -> f64 {
    let c = phi.cos();
    if c.abs() < 1e-12 {
        0.0
    } else {
        c
    }
}

/// For each forgotten class `j`: `W_j ← W_j·cos φ / √2`, `b_j ← b_j·cos φ`.
/// All other parameters are untouched.
pub fn interference_transform(model: &mut Classifier, forget: &ForgetSet, phi: f64) -> Result<()> {
    forget.validate(model.num_classes())?;
    let c = phase_factor(phi);
    let layer = model.final_layer_mut();
    let rows = layer.weights.rows();
    for &j in forget.classes() {
        for i in 0..rows {
            let w = layer.weights.get(i, j);
            layer.weights.set(i, j, w * c / SQRT_2);
        }
        layer.bias[j] *= c;
    }
    Ok(())
}

/// Mean over `samples` of `σ(z)_c − σ(z̃)_c`, where `c` is each sample's
/// recorded class and `z`, `z̃` are the logits before and after a transform.
pub fn suppression_check(before: &Classifier, after: &Classifier, samples: &[Sample]) -> Result<f64> {
    if before.num_classes() != after.num_classes() || before.feature_dim() != after.feature_dim() {
        return Err(Error::Shape("models differ in shape".into()));
    }
    if samples.is_empty() {
        return Err(Error::config("suppression check needs at least one sample"));
    }
    let mut total = 0.0;
    for s in samples {
        let p0 = softmax(&before.logits(&s.features)?).probs()[s.class];
        let p1 = softmax(&after.logits(&s.features)?).probs()[s.class];
        total += p0 - p1;
    }
    Ok(total / samples.len() as f64)
}

/// `K × K` mixing matrix: unit diagonal, `α` between each forgotten class and
/// each retained class, zero elsewhere (including forgotten–forgotten pairs).
pub fn build_mixing_matrix(num_classes: usize, forget: &ForgetSet, alpha: f64) -> Result<Matrix> {
    forget.validate(num_classes)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut m = Matrix::identity(num_classes);
    for i in 0..num_classes {
        for j in 0..num_classes {
            if i != j && forget.contains(i) != forget.contains(j) {
                m.set(i, j, alpha);
            }
        }
    }
    Ok(m)
}

/// `W ← W·M`. The bias and hidden layers are left as they are.
pub fn apply_mixing(model: &mut Classifier, mixing: &Matrix) -> Result<()> {
    let k = model.num_classes();
    if mixing.rows() != k || mixing.cols() != k {
        return Err(Error::Shape(format!(
            "mixing matrix is {}x{}, model has {k} classes",
            mixing.rows(),
            mixing.cols()
        )));
    }
    let layer = model.final_layer_mut();
    layer.weights = layer.weights.matmul(mixing)?;
    Ok(())
}
