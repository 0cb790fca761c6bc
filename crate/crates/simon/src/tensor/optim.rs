//! Adam optimizer with bias-corrected first and second moments.

use super::{Parameter, Scalar};
use crate::error::{Result, SimonError};

/// Adam hyperparameters. Defaults: lr 1e-3, beta1 0.9, beta2 0.999,
/// epsilon 1e-8.
#[derive(Clone, Copy, Debug)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Per-tensor optimizer state: first/second moment vectors and the step
/// count used for bias correction.
#[derive(Clone, Debug)]
pub struct AdamState<S: Scalar> {
    m: Vec<S>,
    v: Vec<S>,
    t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(numel: usize) -> Self {
        AdamState { m: vec![S::zero(); numel], v: vec![S::zero(); numel], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One Adam update in place:
    ///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
    ///   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    pub fn step(&mut self, hp: &AdamParams, theta: &mut [S], grad: &[S]) -> Result<()> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(SimonError::ShapeMismatch {
                op: "adam_step",
                left: vec![self.m.len()],
                right: vec![theta.len().max(grad.len())],
            });
        }
        self.t += 1;
        let b1 = S::from_f64(hp.beta1);
        let b2 = S::from_f64(hp.beta2);
        let one = S::one();
        let lr = S::from_f64(hp.learning_rate);
        let eps = S::from_f64(hp.epsilon);
        let bc1 = S::from_f64(1.0 - hp.beta1.powi(self.t as i32));
        let bc2 = S::from_f64(1.0 - hp.beta2.powi(self.t as i32));
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] = theta[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Optimizer state across a whole parameter list: one [`AdamState`] per
/// parameter, kept in list order.
#[derive(Clone, Debug)]
pub struct Adam<S: Scalar> {
    pub hp: AdamParams,
    slots: Vec<AdamState<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(hp: AdamParams, params: &[Parameter<S>]) -> Self {
        let slots = params.iter().map(|p| AdamState::new(p.value.numel())).collect();
        Adam { hp, slots }
    }

    /// Apply one Adam step to every trainable parameter from its
    /// accumulated gradient, then clear all gradients. Non-trainable
    /// parameters are skipped entirely (their frozen values and their
    /// optimizer slots stay untouched). A trainable parameter without a
    /// gradient is a usage error.
    pub fn update(&mut self, params: &mut [Parameter<S>]) -> Result<()> {
        if params.len() != self.slots.len() {
            return Err(SimonError::Usage(format!(
                "optimizer built for {} parameters, got {}",
                self.slots.len(),
                params.len()
            )));
        }
        for (param, slot) in params.iter_mut().zip(&mut self.slots) {
            if !param.trainable {
                param.value.clear_grad();
                continue;
            }
            let grad = match param.value.grad() {
                Some(g) => g.to_vec(),
                None => {
                    return Err(SimonError::Usage(format!(
                        "trainable parameter '{}' has no gradient",
                        param.name
                    )))
                }
            };
            slot.step(&self.hp, param.value.data_mut(), &grad)?;
            param.value.clear_grad();
        }
        Ok(())
    }

    /// Reset the slot for one parameter (used when a head is replaced).
    pub fn reset_slot(&mut self, index: usize, numel: usize) {
        self.slots[index] = AdamState::new(numel);
    }
}
