use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{Gradient, NetParams, NnError};
use crate::math;

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn for_net(net: &NetParams, lr: f64) -> Self {
        Self::new(net.len(), lr)
    }

    /// One bias-corrected Adam step applied in place.
    pub fn step(&mut self, params: &mut NetParams, grad: &Gradient) -> Result<(), NnError> {
        let n = params.len();
        if grad.0.len() != n || self.m.len() != n || self.v.len() != n {
            return Err(NnError::Shape { expected: n, got: grad.0.len() });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - math::powi(self.beta1, t);
        let bc2 = 1.0 - math::powi(self.beta2, t);
        for i in 0..n {
            let g = grad.0[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params.params[i] -= self.lr * mhat / (math::sqrt(vhat) + self.eps);
        }
        Ok(())
    }
}

/// Rescale `g` so its L2 norm is at most `max_norm`; returns the original norm.
pub fn clip_grad_norm(g: &mut Gradient, max_norm: f64) -> f64 {
    let norm = g.norm();
    if max_norm > 0.0 && norm > max_norm {
        let k = max_norm / norm;
        g.0.iter_mut().for_each(|x| *x *= k);
    }
    norm
}
