//! Adam with bias correction, target-network soft updates, and gradient clipping.

use super::{Gradients, Mlp};
use crate::error::{BresaError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m_weights: net.weights().iter().map(|w| vec![0.0; w.len()]).collect(),
            v_weights: net.weights().iter().map(|w| vec![0.0; w.len()]).collect(),
            m_biases: net.biases().iter().map(|b| vec![0.0; b.len()]).collect(),
            v_biases: net.biases().iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn matches(&self, net: &Mlp) -> bool {
        self.m_weights.len() == net.weights().len()
            && self
                .m_weights
                .iter()
                .zip(net.weights())
                .all(|(m, w)| m.len() == w.len())
            && self
                .m_biases
                .iter()
                .zip(net.biases())
                .all(|(m, b)| m.len() == b.len())
    }

    pub fn moments_max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for v in self.m_weights.iter().chain(&self.m_biases) {
            for x in v {
                m = m.max(x.abs());
            }
        }
        m
    }

    pub(crate) fn parts(
        &self,
    ) -> (&[Vec<f64>], &[Vec<f64>], &[Vec<f64>], &[Vec<f64>]) {
        (&self.m_weights, &self.v_weights, &self.m_biases, &self.v_biases)
    }

    pub(crate) fn from_parts(
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        step: u64,
        m_weights: Vec<Vec<f64>>,
        v_weights: Vec<Vec<f64>>,
        m_biases: Vec<Vec<f64>>,
        v_biases: Vec<Vec<f64>>,
    ) -> Self {
        AdamState {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step,
            m_weights,
            v_weights,
            m_biases,
            v_biases,
        }
    }
}

/// One Adam update. Increments the step counter and mutates `net` in place.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if !state.matches(net)
        || grads.weights.len() != net.weights().len()
        || grads
            .weights
            .iter()
            .zip(net.weights())
            .any(|(g, w)| g.len() != w.len())
        || grads
            .biases
            .iter()
            .zip(net.biases())
            .any(|(g, b)| g.len() != b.len())
    {
        return Err(BresaError::Shape("gradient/optimizer shape mismatch".into()));
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);

    let update = |params: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..params.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };

    for l in 0..grads.weights.len() {
        update(
            &mut net.weights_mut()[l],
            &grads.weights[l],
            &mut state.m_weights[l],
            &mut state.v_weights[l],
        );
        update(
            &mut net.biases_mut()[l],
            &grads.biases[l],
            &mut state.m_biases[l],
            &mut state.v_biases[l],
        );
    }
    debug_assert!(net.params_finite());
    Ok(())
}

/// Polyak averaging: `target <- (1 - tau) * target + tau * source`.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<()> {
    if !target.same_topology(source) {
        return Err(BresaError::Shape("soft_update topology mismatch".into()));
    }
    if !(0.0..=1.0).contains(&tau) || tau <= 0.0 {
        return Err(BresaError::Config(format!("tau must be in (0,1], got {tau}")));
    }
    for (tw, sw) in target.weights_mut().iter_mut().zip(source.weights()) {
        for (t, s) in tw.iter_mut().zip(sw) {
            *t = (1.0 - tau) * *t + tau * s;
        }
    }
    for (tb, sb) in target.biases_mut().iter_mut().zip(source.biases()) {
        for (t, s) in tb.iter_mut().zip(sb) {
            *t = (1.0 - tau) * *t + tau * s;
        }
    }
    Ok(())
}

/// Scales gradients in place so the global L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
}

/// Adam for a single scalar parameter (entropy temperature).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarAdam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: f64,
    pub v: f64,
}

impl ScalarAdam {
    pub fn new(learning_rate: f64) -> Self {
        ScalarAdam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: 0.0,
            v: 0.0,
        }
    }

    pub fn step_param(&mut self, param: &mut f64, grad: f64) {
        self.step += 1;
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad;
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad;
        let m_hat = self.m / (1.0 - self.beta1.powi(self.step as i32));
        let v_hat = self.v / (1.0 - self.beta2.powi(self.step as i32));
        *param -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
    }
}
