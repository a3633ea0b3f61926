//! Dense ReLU classifier with a linear softmax head.
//!
//! Weights of every layer are stored `(fan_in × fan_out)` row-major, so the
//! final layer is exactly the `d × K` matrix `W` whose column `j` scores class
//! `j`: `z_j = W_jᵀ h + b_j`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weights: Matrix::zeros(fan_in, fan_out), bias: vec![0.0; fan_out] }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    fn num_params(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    /// `out = Wᵀ input + b`
    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        let cols = self.fan_out();
        for (i, &a) in input.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.weights.as_slice()[i * cols..(i + 1) * cols];
            for (o, w) in out.iter_mut().zip(row) {
                *o += a * w;
            }
        }
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// Post-ReLU output of each hidden layer.
    pub activations: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

impl Trace {
    /// Representation `h` fed to the final layer.
    pub fn hidden<'a>(&'a self, input: &'a [f64]) -> &'a [f64] {
        self.activations.last().map_or(input, Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    hidden: Vec<DenseLayer>,
    output: DenseLayer,
}

impl Classifier {
    /// He-initialised network; biases start at zero.
    pub fn new(feature_dim: usize, hidden_sizes: &[usize], num_classes: usize, seed: u64) -> Result<Self> {
        if feature_dim == 0 || hidden_sizes.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        if num_classes < 2 {
            return Err(Error::config("a classifier needs at least two classes"));
        }
        let mut rng = rng::seeded(seed);
        let mut widths = vec![feature_dim];
        widths.extend_from_slice(hidden_sizes);
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        for pair in widths.windows(2) {
            hidden.push(random_layer(&mut rng, pair[0], pair[1], (2.0 / pair[0] as f64).sqrt()));
        }
        let d = *widths.last().unwrap();
        let output = random_layer(&mut rng, d, num_classes, (1.0 / d as f64).sqrt());
        Ok(Self { hidden, output })
    }

    pub fn from_layers(hidden: Vec<DenseLayer>, output: DenseLayer) -> Result<Self> {
        let mut width = None;
        for layer in hidden.iter().chain(std::iter::once(&output)) {
            if layer.bias.len() != layer.fan_out() {
                return Err(Error::Shape(format!(
                    "bias length {} does not match layer width {}",
                    layer.bias.len(),
                    layer.fan_out()
                )));
            }
            if let Some(w) = width {
                if layer.fan_in() != w {
                    return Err(Error::Shape(format!(
                        "layer expects {} inputs but previous layer emits {w}",
                        layer.fan_in()
                    )));
                }
            }
            if layer.fan_in() == 0 || layer.fan_out() == 0 {
                return Err(Error::Shape("empty layer".into()));
            }
            width = Some(layer.fan_out());
        }
        if output.fan_out() < 2 {
            return Err(Error::Shape("a classifier needs at least two classes".into()));
        }
        Ok(Self { hidden, output })
    }

    pub fn feature_dim(&self) -> usize {
        self.hidden.first().unwrap_or(&self.output).fan_in()
    }

    pub fn num_classes(&self) -> usize {
        self.output.fan_out()
    }

    /// Width `d` of the representation entering the final layer.
    pub fn hidden_dim(&self) -> usize {
        self.output.fan_in()
    }

    pub fn hidden_layers(&self) -> &[DenseLayer] {
        &self.hidden
    }

    pub fn final_layer(&self) -> &DenseLayer {
        &self.output
    }

    pub fn final_layer_mut(&mut self) -> &mut DenseLayer {
        &mut self.output
    }

    pub fn final_weights(&self) -> &Matrix {
        &self.output.weights
    }

    pub fn final_bias(&self) -> &[f64] {
        &self.output.bias
    }

    /// All layers, hidden first, final last.
    pub fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.hidden.iter().chain(std::iter::once(&self.output))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.hidden.iter_mut().chain(std::iter::once(&mut self.output))
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(DenseLayer::num_params).sum()
    }

    /// Parameters flattened as `[w0, b0, w1, b1, …, W, b]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in self.layers() {
            out.extend_from_slice(layer.weights.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut off = 0;
        for layer in self.layers_mut() {
            let w = layer.weights.as_mut_slice();
            w.copy_from_slice(&flat[off..off + w.len()]);
            off += w.len();
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Applies `f` to every parameter in flat order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut idx = 0;
        for layer in self.layers_mut() {
            for p in layer.weights.as_mut_slice().iter_mut().chain(layer.bias.iter_mut()) {
                f(idx, p);
                idx += 1;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers().all(|l| l.weights.all_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// True when every parameter is finite and stays finite as an `f32`.
    pub fn fits_f32(&self) -> bool {
        self.layers()
            .all(|l| l.weights.as_slice().iter().chain(&l.bias).all(|p| (*p as f32).is_finite()))
    }

    /// Rounds every parameter to the nearest `f32`, the precision checkpoints store.
    pub fn quantize_f32(&mut self) {
        self.for_each_param_mut(|_, p| *p = *p as f32 as f64);
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.feature_dim()
            )));
        }
        Ok(())
    }

    /// Returns `(h, z)`: the final hidden representation and the logits.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let trace = self.trace(x)?;
        let hidden = trace.hidden(x).to_vec();
        Ok((hidden, trace.logits))
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.logits)
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut trace = Trace { activations: Vec::with_capacity(self.hidden.len()), logits: Vec::new() };
        let mut buf = Vec::new();
        for layer in &self.hidden {
            layer.affine(trace.hidden(x), &mut buf);
            for v in &mut buf {
                *v = v.max(0.0);
            }
            trace.activations.push(std::mem::take(&mut buf));
        }
        let mut logits = Vec::with_capacity(self.num_classes());
        self.output.affine(trace.hidden(x), &mut logits);
        trace.logits = logits;
        Ok(trace)
    }

    /// Accumulates `scale · ∂L/∂θ` into `grads`, given `∂L/∂z` for one sample.
    pub fn backward(&self, x: &[f64], trace: &Trace, dlogits: &[f64], scale: f64, grads: &mut Gradients) {
        debug_assert_eq!(grads.len(), self.num_params());
        let mut offsets = Vec::with_capacity(self.hidden.len() + 1);
        let mut off = 0;
        for layer in self.layers() {
            offsets.push(off);
            off += layer.num_params();
        }

        let mut delta: Vec<f64> = dlogits.iter().map(|g| g * scale).collect();
        let layers: Vec<&DenseLayer> = self.layers().collect();
        for li in (0..layers.len()).rev() {
            let layer = layers[li];
            let input: &[f64] = if li == 0 { x } else { &trace.activations[li - 1] };
            let cols = layer.fan_out();
            let (wg, bg) = grads.data[offsets[li]..offsets[li] + layer.num_params()]
                .split_at_mut(layer.weights.as_slice().len());
            for (i, &a) in input.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (g, d) in wg[i * cols..(i + 1) * cols].iter_mut().zip(&delta) {
                    *g += a * d;
                }
            }
            for (g, d) in bg.iter_mut().zip(&delta) {
                *g += d;
            }
            if li == 0 {
                break;
            }
            // propagate through W and the ReLU of the layer below
            let below = &trace.activations[li - 1];
            let w = layer.weights.as_slice();
            delta = (0..layer.fan_in())
                .map(|i| {
                    if below[i] > 0.0 {
                        w[i * cols..(i + 1) * cols].iter().zip(&delta).map(|(w, d)| w * d).sum()
                    } else {
                        0.0
                    }
                })
                .collect();
        }
    }

    /// Plain SGD step `θ ← θ − lr·g`.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        self.for_each_param_mut(|i, p| *p -= lr * grads.data[i]);
    }

    /// Index of the largest logit, ties broken toward the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn random_layer(rng: &mut impl Rng, fan_in: usize, fan_out: usize, std: f64) -> DenseLayer {
    let normal = Normal::new(0.0, std).expect("finite std");
    let data = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
    DenseLayer {
        weights: Matrix::from_vec(fan_in, fan_out, data).expect("sized above"),
        bias: vec![0.0; fan_out],
    }
}

/// Flat gradient buffer laid out like [`Classifier::to_flat`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub data: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &Classifier) -> Self {
        Self { data: vec![0.0; model.num_params()] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|a| *a = 0.0);
    }
}
