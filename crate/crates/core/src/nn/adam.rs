use std::collections::BTreeMap;

use super::{Params, Tensor2};
use crate::error::{Error, Result};

/// Bias-corrected Adam with per-tensor moment accumulators keyed by name.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub moments: BTreeMap<String, (Tensor2, Tensor2)>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    /// Applies one Adam step. Nothing is modified if any gradient is
    /// non-finite or does not match its parameter's shape.
    pub fn update<P: Params>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        if grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for ((name, p), (gname, g)) in params.iter().zip(&grads) {
            if name != gname || p.shape() != g.shape() {
                return Err(Error::Shape(format!(
                    "gradient `{gname}` {:?} does not match parameter `{name}` {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((name, p), (_, g)) in params.iter_mut().zip(&grads) {
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (Tensor2::zeros(g.rows(), g.cols()), Tensor2::zeros(g.rows(), g.cols())));
            let pd = p.data_mut();
            for (k, &gk) in g.data().iter().enumerate() {
                let mk = &mut m.data_mut()[k];
                *mk = self.beta1 * *mk + (1.0 - self.beta1) * gk;
                let mhat = *mk / bc1;
                let vk = &mut v.data_mut()[k];
                *vk = self.beta2 * *vk + (1.0 - self.beta2) * gk * gk;
                let vhat = *vk / bc2;
                pd[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
