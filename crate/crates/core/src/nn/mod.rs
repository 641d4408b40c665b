//! Small hand-differentiated numerics: dense tensors, affine layers, LSTM cells,
//! Adam and finite-difference gradient checking.
//!
//! Every layer exposes a `forward` that returns whatever it needs for the
//! matching `backward`, which accumulates parameter gradients into a zeroed
//! copy of the layer and returns the gradient with respect to its input.

mod adam;
mod gradcheck;
mod lstm;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::{grad_check, GradCheckReport};
pub use lstm::{lstm_step, Gate, LstmParams, LstmTrace};
pub use tensor::{add_into, cosine, dot, euclidean, norm, scale_into, Tensor2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Range of the uniform initializer shared by every learnable tensor.
pub const INIT_SCALE: f64 = 0.08;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A bag of named tensors. Gradient containers are values of the same type.
pub trait Params {
    fn tensors(&self) -> Vec<(String, &Tensor2)>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)>;

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn accumulate(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.axpy(1.0, b);
        }
    }

    fn scale(&mut self, alpha: f64) {
        for (_, t) in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x *= alpha);
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.data().iter().copied())
            .collect()
    }

    fn assign_flat(&mut self, values: &[f64]) {
        let mut offset = 0;
        for (_, t) in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, values.len(), "flat parameter length mismatch");
    }
}

/// Prefix every tensor name of a sub-module.
pub fn prefixed<'a>(prefix: &str, items: Vec<(String, &'a Tensor2)>) -> Vec<(String, &'a Tensor2)> {
    items
        .into_iter()
        .map(|(n, t)| (format!("{prefix}.{n}"), t))
        .collect()
}

pub fn prefixed_mut<'a>(
    prefix: &str,
    items: Vec<(String, &'a mut Tensor2)>,
) -> Vec<(String, &'a mut Tensor2)> {
    items
        .into_iter()
        .map(|(n, t)| (format!("{prefix}.{n}"), t))
        .collect()
}

/// Affine map `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor2,
    pub bias: Tensor2,
}

impl Linear {
    pub fn new<R: rand::Rng + ?Sized>(input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        Self {
            weight: Tensor2::uniform(output_dim, input_dim, INIT_SCALE, rng),
            bias: Tensor2::uniform(output_dim, 1, INIT_SCALE, rng),
        }
    }

    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            weight: Tensor2::zeros(output_dim, input_dim),
            bias: Tensor2::zeros(output_dim, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "linear layer expects input of {} values, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut y = self.weight.matvec(x);
        add_into(&mut y, self.bias.data());
        Ok(y)
    }

    /// Accumulates `dW += dy x^T`, `db += dy` into `grad` and returns `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear) -> Vec<f64> {
        grad.weight.add_outer(dy, x);
        grad.bias.add_slice(dy);
        self.weight.matvec_t(dy)
    }
}

impl Params for Linear {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![("w".into(), &self.weight), ("b".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        vec![("w".into(), &mut self.weight), ("b".into(), &mut self.bias)]
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn tanh_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.tanh()).collect()
}

/// Backprop through `y = tanh(x)` given the forward output `y`.
pub fn tanh_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    y.iter().zip(dy).map(|(y, d)| d * (1.0 - y * y)).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Categorical cross-entropy `-log softmax(logits)[target]` and its gradient
/// with respect to the logits.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "class {target} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
