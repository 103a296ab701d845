//! Differentiable predictors: a linear scorer and a one-hidden-layer
//! fully connected network (ReLU hidden, sigmoid output). Parameters are
//! immutable values; every update returns a new value.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_rng, tag};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Fcnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Fcnn {
        /// hidden x p_A
        w1: Matrix,
        b1: Vec<f64>,
        /// output row, length hidden
        w2: Vec<f64>,
        b2: f64,
    },
}

/// Scores for one batch: pre-sigmoid logits and their probabilities.
#[derive(Debug, Clone)]
pub struct BatchScores {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl ModelParams {
    pub fn init(kind: ModelKind, p_a: usize, hidden: usize, seed: u64) -> ModelParams {
        match kind {
            ModelKind::Linear => ModelParams::Linear { weights: vec![0.0; p_a], bias: 0.0 },
            ModelKind::Fcnn => {
                let mut rng = derive_rng(seed, &[tag("init-fcnn")]);
                fn uni(rng: &mut rand_chacha::ChaCha12Rng, fan_in: usize) -> f64 {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    rng.random_range(-bound..bound)
                }
                let mut w1 = Matrix::zeros(hidden, p_a);
                for v in w1.data_mut() {
                    *v = uni(&mut rng, p_a);
                }
                let b1: Vec<f64> = (0..hidden).map(|_| uni(&mut rng, p_a)).collect();
                let w2: Vec<f64> = (0..hidden).map(|_| uni(&mut rng, hidden)).collect();
                let b2 = uni(&mut rng, hidden);
                ModelParams::Fcnn { w1, b1, w2, b2 }
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Linear { .. } => ModelKind::Linear,
            ModelParams::Fcnn { .. } => ModelKind::Fcnn,
        }
    }

    pub fn p_a(&self) -> usize {
        match self {
            ModelParams::Linear { weights, .. } => weights.len(),
            ModelParams::Fcnn { w1, .. } => w1.cols(),
        }
    }

    pub fn zeros_like(&self) -> ModelParams {
        match self {
            ModelParams::Linear { weights, .. } => {
                ModelParams::Linear { weights: vec![0.0; weights.len()], bias: 0.0 }
            }
            ModelParams::Fcnn { w1, b1, w2, .. } => ModelParams::Fcnn {
                w1: Matrix::zeros(w1.rows(), w1.cols()),
                b1: vec![0.0; b1.len()],
                w2: vec![0.0; w2.len()],
                b2: 0.0,
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            ModelParams::Linear { weights, bias } => {
                weights.iter().all(|v| v.is_finite()) && bias.is_finite()
            }
            ModelParams::Fcnn { w1, b1, w2, b2 } => {
                w1.is_finite()
                    && b1.iter().all(|v| v.is_finite())
                    && w2.iter().all(|v| v.is_finite())
                    && b2.is_finite()
            }
        }
    }

    /// Squared L2 norm of the weights; biases excluded.
    pub fn weight_sq_norm(&self) -> f64 {
        match self {
            ModelParams::Linear { weights, .. } => weights.iter().map(|w| w * w).sum(),
            ModelParams::Fcnn { w1, w2, .. } => {
                w1.data().iter().map(|w| w * w).sum::<f64>()
                    + w2.iter().map(|w| w * w).sum::<f64>()
            }
        }
    }

    /// Hidden pre-activations for one row (FCNN only).
    fn hidden_pre(&self, row: &[f64]) -> Vec<f64> {
        match self {
            ModelParams::Fcnn { w1, b1, .. } => (0..w1.rows())
                .map(|h| {
                    b1[h] + w1.row(h).iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
                })
                .collect(),
            _ => unreachable!(),
        }
    }

    fn logit_row(&self, row: &[f64]) -> f64 {
        match self {
            ModelParams::Linear { weights, bias } => {
                bias + weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
            }
            ModelParams::Fcnn { w2, b2, .. } => {
                let z1 = self.hidden_pre(row);
                b2 + z1.iter().zip(w2).map(|(z, w)| z.max(0.0) * w).sum::<f64>()
            }
        }
    }

    pub fn forward(&self, a: &Matrix) -> Result<BatchScores> {
        if a.cols() != self.p_a() {
            return Err(Error::model(format!(
                "feature width {} does not match model p_A {}",
                a.cols(),
                self.p_a()
            )));
        }
        if !a.is_finite() {
            return Err(Error::model("non-finite input features"));
        }
        let logits: Vec<f64> = a.iter_rows().map(|row| self.logit_row(row)).collect();
        let probs = logits.iter().map(|&z| sigmoid(z)).collect();
        Ok(BatchScores { logits, probs })
    }

    /// Gradient of sum_i coeff_i * logit_i with respect to the parameters.
    /// The shared backward pass: loss and penalty terms both reduce to
    /// per-sample logit coefficients.
    pub fn backprop_logit_coeffs(&self, a: &Matrix, coeffs: &[f64]) -> ModelParams {
        debug_assert_eq!(a.rows(), coeffs.len());
        match self {
            ModelParams::Linear { weights, .. } => {
                let mut gw = vec![0.0; weights.len()];
                let mut gb = 0.0;
                for (row, &c) in a.iter_rows().zip(coeffs) {
                    if c == 0.0 {
                        continue;
                    }
                    for (g, x) in gw.iter_mut().zip(row) {
                        *g += c * x;
                    }
                    gb += c;
                }
                ModelParams::Linear { weights: gw, bias: gb }
            }
            ModelParams::Fcnn { w1, b1: _, w2, .. } => {
                let hidden = w1.rows();
                let mut gw1 = Matrix::zeros(hidden, w1.cols());
                let mut gb1 = vec![0.0; hidden];
                let mut gw2 = vec![0.0; hidden];
                let mut gb2 = 0.0;
                for (row, &c) in a.iter_rows().zip(coeffs) {
                    if c == 0.0 {
                        continue;
                    }
                    let z1 = self.hidden_pre(row);
                    gb2 += c;
                    for h in 0..hidden {
                        let act = z1[h].max(0.0);
                        gw2[h] += c * act;
                        if z1[h] > 0.0 {
                            let dz = c * w2[h];
                            gb1[h] += dz;
                            let grow = gw1.row_mut(h);
                            for (g, x) in grow.iter_mut().zip(row) {
                                *g += dz * x;
                            }
                        }
                    }
                }
                ModelParams::Fcnn { w1: gw1, b1: gb1, w2: gw2, b2: gb2 }
            }
        }
    }

    /// Mean binary cross-entropy and its exact gradient.
    pub fn loss_and_grad(&self, a: &Matrix, y: &[u8]) -> Result<(f64, ModelParams)> {
        if y.is_empty() {
            return Err(Error::model("empty batch"));
        }
        if a.rows() != y.len() {
            return Err(Error::model("batch feature/label count mismatch"));
        }
        let scores = self.forward(a)?;
        let m = y.len() as f64;
        let mut loss = 0.0;
        let mut coeffs = Vec::with_capacity(y.len());
        for (&z, &yi) in scores.logits.iter().zip(y) {
            let yf = f64::from(yi);
            loss += softplus(z) - z * yf;
            coeffs.push((sigmoid(z) - yf) / m);
        }
        Ok((loss / m, self.backprop_logit_coeffs(a, &coeffs)))
    }

    pub fn loss(&self, a: &Matrix, y: &[u8]) -> Result<f64> {
        if y.is_empty() {
            return Err(Error::model("empty batch"));
        }
        let scores = self.forward(a)?;
        let m = y.len() as f64;
        let loss: f64 = scores
            .logits
            .iter()
            .zip(y)
            .map(|(&z, &yi)| softplus(z) - z * f64::from(yi))
            .sum();
        Ok(loss / m)
    }

    /// params - lr * grad, elementwise.
    pub fn apply_update(&self, grad: &ModelParams, lr: f64) -> ModelParams {
        let mut out = self.clone();
        out.axpy(-lr, grad);
        out
    }

    /// self += alpha * other, elementwise over matching shapes.
    pub fn axpy(&mut self, alpha: f64, other: &ModelParams) {
        match (self, other) {
            (
                ModelParams::Linear { weights, bias },
                ModelParams::Linear { weights: ow, bias: ob },
            ) => {
                assert_eq!(weights.len(), ow.len(), "shape mismatch");
                for (w, o) in weights.iter_mut().zip(ow) {
                    *w += alpha * o;
                }
                *bias += alpha * ob;
            }
            (
                ModelParams::Fcnn { w1, b1, w2, b2 },
                ModelParams::Fcnn { w1: o1, b1: ob1, w2: o2, b2: ob2 },
            ) => {
                assert_eq!(w1.cols(), o1.cols(), "shape mismatch");
                assert_eq!(w1.rows(), o1.rows(), "shape mismatch");
                for (w, o) in w1.data_mut().iter_mut().zip(o1.data()) {
                    *w += alpha * o;
                }
                for (w, o) in b1.iter_mut().zip(ob1) {
                    *w += alpha * o;
                }
                for (w, o) in w2.iter_mut().zip(o2) {
                    *w += alpha * o;
                }
                *b2 += alpha * ob2;
            }
            _ => panic!("model kind mismatch"),
        }
    }

    /// Add `2 * gamma * w` to a gradient (the L2 term; biases untouched).
    pub fn add_l2_grad(&mut self, gamma: f64, params: &ModelParams) {
        match (self, params) {
            (ModelParams::Linear { weights, .. }, ModelParams::Linear { weights: pw, .. }) => {
                for (g, w) in weights.iter_mut().zip(pw) {
                    *g += 2.0 * gamma * w;
                }
            }
            (
                ModelParams::Fcnn { w1, w2, .. },
                ModelParams::Fcnn { w1: p1, w2: p2, .. },
            ) => {
                for (g, w) in w1.data_mut().iter_mut().zip(p1.data()) {
                    *g += 2.0 * gamma * w;
                }
                for (g, w) in w2.iter_mut().zip(p2) {
                    *g += 2.0 * gamma * w;
                }
            }
            _ => panic!("model kind mismatch"),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<ModelParams> {
        Ok(serde_json::from_str(text)?)
    }
}
