//! Soft actor-critic task policy: squashed-Gaussian actor, twin Q critics
//! with target copies, and optional automatic entropy-temperature tuning.

use super::NormBatch;
use crate::error::Result;
use crate::nn::{
    adam_step, clip_global_norm, soft_update, Activation, AdamState, Gradients, Mlp, ScalarAdam,
};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const LOG_STD_MIN: f64 = -20.0;
const LOG_STD_MAX: f64 = 2.0;
const SQUASH_EPS: f64 = 1e-6;
const LOG_ALPHA_MIN: f64 = -10.0;
const LOG_ALPHA_MAX: f64 = 3.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Entropy temperature mode: fixed, or auto-tuned toward `-action_dim` target
/// entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SacLosses {
    pub q1: f64,
    pub q2: f64,
    pub actor: f64,
    pub alpha: f64,
    pub mean_q: f64,
}

#[derive(Debug, Clone)]
pub struct TaskPolicy {
    /// Outputs `[mean..., log_std...]` (identity head).
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub actor_opt: AdamState,
    pub q1_opt: AdamState,
    pub q2_opt: AdamState,
    pub log_alpha: f64,
    pub alpha_opt: ScalarAdam,
    pub alpha_mode: AlphaMode,
    act_dim: usize,
    gamma: f64,
    tau: f64,
    grad_clip: f64,
    target_entropy: f64,
}

struct SquashedSample {
    u: Vec<f64>,
    noise: Vec<f64>,
    std: Vec<f64>,
    log_std_active: Vec<bool>,
    log_prob: f64,
}

impl TaskPolicy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        learning_rate: f64,
        gamma: f64,
        tau: f64,
        alpha_mode: AlphaMode,
        grad_clip: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(2 * act_dim);
        let mut q_sizes = vec![obs_dim + act_dim];
        q_sizes.extend_from_slice(hidden);
        q_sizes.push(1);

        let actor = Mlp::new(&actor_sizes, Activation::Identity, rng)?;
        let q1 = Mlp::new(&q_sizes, Activation::Identity, rng)?;
        let q2 = Mlp::new(&q_sizes, Activation::Identity, rng)?;
        let q1_target = q1.clone();
        let q2_target = q2.clone();
        let actor_opt = AdamState::new(&actor, learning_rate);
        let q1_opt = AdamState::new(&q1, learning_rate);
        let q2_opt = AdamState::new(&q2, learning_rate);
        let log_alpha = match alpha_mode {
            AlphaMode::Fixed(a) => a.max(1e-8).ln(),
            AlphaMode::Auto => (0.1f64).ln(),
        };
        Ok(TaskPolicy {
            actor,
            q1,
            q2,
            q1_target,
            q2_target,
            actor_opt,
            q1_opt,
            q2_opt,
            log_alpha,
            alpha_opt: ScalarAdam::new(learning_rate),
            alpha_mode,
            act_dim,
            gamma,
            tau,
            grad_clip,
            target_entropy: -(act_dim as f64),
        })
    }

    pub fn alpha(&self) -> f64 {
        match self.alpha_mode {
            AlphaMode::Fixed(a) => a,
            AlphaMode::Auto => self.log_alpha.exp(),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn actor_heads(&self, out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mean = out[..self.act_dim].to_vec();
        let log_std = out[self.act_dim..].to_vec();
        (mean, log_std)
    }

    /// Squashed mean action in [-1, 1]^d (greedy evaluation).
    pub fn mean_action(&self, obs: &[f64]) -> Vec<f64> {
        let out = self.actor.forward(obs).expect("actor forward");
        let (mean, _) = self.actor_heads(&out);
        mean.iter().map(|m| m.tanh()).collect()
    }

    /// Stochastic squashed-Gaussian sample in [-1, 1]^d.
    pub fn sample_action(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let out = self.actor.forward(obs).expect("actor forward");
        let s = self.squash(&out, rng);
        s.u
    }

    fn squash(&self, actor_out: &[f64], rng: &mut ChaCha8Rng) -> SquashedSample {
        let (mean, log_std_raw) = self.actor_heads(actor_out);
        let mut u = Vec::with_capacity(self.act_dim);
        let mut noise = Vec::with_capacity(self.act_dim);
        let mut std = Vec::with_capacity(self.act_dim);
        let mut active = Vec::with_capacity(self.act_dim);
        let mut log_prob = 0.0;
        for j in 0..self.act_dim {
            let ls = log_std_raw[j].clamp(LOG_STD_MIN, LOG_STD_MAX);
            active.push(log_std_raw[j] > LOG_STD_MIN && log_std_raw[j] < LOG_STD_MAX);
            let sd = ls.exp();
            let eps: f64 = StandardNormal.sample(rng);
            let z = mean[j] + sd * eps;
            let uj = z.tanh();
            log_prob += -0.5 * eps * eps - ls - HALF_LN_2PI - (1.0 - uj * uj + SQUASH_EPS).ln();
            u.push(uj);
            noise.push(eps);
            std.push(sd);
        }
        SquashedSample {
            u,
            noise,
            std,
            log_std_active: active,
            log_prob,
        }
    }

    fn q_input(obs: &[f64], act: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(obs.len() + act.len());
        v.extend_from_slice(obs);
        v.extend_from_slice(act);
        v
    }

    /// One SAC update (twin-critic regression, reparameterized actor step,
    /// optional temperature step, target soft updates).
    pub fn update(&mut self, batch: &NormBatch, rng: &mut ChaCha8Rng) -> Result<SacLosses> {
        let n = batch.len();
        let scale = 1.0 / n as f64;
        let alpha = self.alpha();

        // --- critic targets ---
        let mut targets = Vec::with_capacity(n);
        for i in 0..n {
            let next_out = self.actor.forward(&batch.next_obs[i])?;
            let next = self.squash(&next_out, rng);
            let qin = Self::q_input(&batch.next_obs[i], &next.u);
            let q1t = self.q1_target.forward(&qin)?[0];
            let q2t = self.q2_target.forward(&qin)?[0];
            let q_min = q1t.min(q2t);
            let y = batch.rewards[i]
                + self.gamma * (1.0 - batch.dones[i]) * (q_min - alpha * next.log_prob);
            targets.push(y);
        }

        // --- critic regression ---
        let mut q1_grads = Gradients::zeros_like(&self.q1);
        let mut q2_grads = Gradients::zeros_like(&self.q2);
        let mut q1_loss = 0.0;
        let mut q2_loss = 0.0;
        let mut mean_q = 0.0;
        for i in 0..n {
            let qin = Self::q_input(&batch.obs[i], &batch.act[i]);
            let (out1, tape1) = self.q1.forward_tape(&qin)?;
            let (out2, tape2) = self.q2.forward_tape(&qin)?;
            let d1 = out1[0] - targets[i];
            let d2 = out2[0] - targets[i];
            q1_loss += d1 * d1 * scale;
            q2_loss += d2 * d2 * scale;
            mean_q += out1[0] * scale;
            let r1 = self.q1.backward(&tape1, &[2.0 * d1 * scale])?;
            let r2 = self.q2.backward(&tape2, &[2.0 * d2 * scale])?;
            q1_grads.add_scaled(&r1.grads, 1.0);
            q2_grads.add_scaled(&r2.grads, 1.0);
        }
        clip_global_norm(&mut q1_grads, self.grad_clip);
        clip_global_norm(&mut q2_grads, self.grad_clip);
        adam_step(&mut self.q1, &q1_grads, &mut self.q1_opt)?;
        adam_step(&mut self.q2, &q2_grads, &mut self.q2_opt)?;

        // --- actor step (reparameterized, through the frozen critics) ---
        let mut actor_grads = Gradients::zeros_like(&self.actor);
        let mut actor_loss = 0.0;
        let mut mean_log_prob = 0.0;
        for i in 0..n {
            let (out, tape) = self.actor.forward_tape(&batch.obs[i])?;
            let s = self.squash(&out, rng);
            let qin = Self::q_input(&batch.obs[i], &s.u);
            let (v1, tape1) = self.q1.forward_tape(&qin)?;
            let (v2, tape2) = self.q2.forward_tape(&qin)?;
            let (q_min, q_grad_u) = if v1[0] <= v2[0] {
                let r = self.q1.backward(&tape1, &[1.0])?;
                (v1[0], r.input_grad[batch.obs[i].len()..].to_vec())
            } else {
                let r = self.q2.backward(&tape2, &[1.0])?;
                (v2[0], r.input_grad[batch.obs[i].len()..].to_vec())
            };
            actor_loss += (alpha * s.log_prob - q_min) * scale;
            mean_log_prob += s.log_prob * scale;

            // d loss / d [mean, log_std] for this sample
            let mut out_grad = vec![0.0; 2 * self.act_dim];
            for j in 0..self.act_dim {
                let uj = s.u[j];
                let dsq = 1.0 - uj * uj;
                // loss_i = alpha * log pi(u) - q_min(u)
                let dl_du = alpha * (2.0 * uj / (dsq + SQUASH_EPS)) - q_grad_u[j];
                let dl_dz = dl_du * dsq;
                out_grad[j] = dl_dz * scale;
                if s.log_std_active[j] {
                    out_grad[self.act_dim + j] =
                        (dl_dz * s.std[j] * s.noise[j] - alpha) * scale;
                }
            }
            let r = self.actor.backward(&tape, &out_grad)?;
            actor_grads.add_scaled(&r.grads, 1.0);
        }
        clip_global_norm(&mut actor_grads, self.grad_clip);
        adam_step(&mut self.actor, &actor_grads, &mut self.actor_opt)?;

        // --- temperature ---
        let mut alpha_loss = 0.0;
        if matches!(self.alpha_mode, AlphaMode::Auto) {
            let grad = -(mean_log_prob + self.target_entropy);
            alpha_loss = -self.log_alpha * (mean_log_prob + self.target_entropy);
            self.alpha_opt.step_param(&mut self.log_alpha, grad);
            self.log_alpha = self.log_alpha.clamp(LOG_ALPHA_MIN, LOG_ALPHA_MAX);
        }

        soft_update(&mut self.q1_target, &self.q1, self.tau)?;
        soft_update(&mut self.q2_target, &self.q2, self.tau)?;

        Ok(SacLosses {
            q1: q1_loss,
            q2: q2_loss,
            actor: actor_loss,
            alpha: alpha_loss,
            mean_q,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn bandit_batch(n: usize, rng: &mut ChaCha8Rng) -> NormBatch {
        use rand::Rng;
        // one-step bandit: reward 1 when the action is positive
        let mut b = NormBatch {
            obs: Vec::new(),
            act: Vec::new(),
            next_obs: Vec::new(),
            rewards: Vec::new(),
            constraints: Vec::new(),
            dones: Vec::new(),
        };
        for _ in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            b.obs.push(vec![0.0]);
            b.act.push(vec![a]);
            b.next_obs.push(vec![0.0]);
            b.rewards.push(if a > 0.0 { 1.0 } else { 0.0 });
            b.constraints.push(0.0);
            b.dones.push(1.0);
        }
        b
    }

    fn policy(seed: u64, alpha: AlphaMode, gamma: f64) -> TaskPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TaskPolicy::new(1, 1, &[32, 32], 3e-3, gamma, 0.01, alpha, 10.0, &mut rng).unwrap()
    }

    #[test]
    fn bandit_actor_mean_drifts_positive() {
        let mut p = policy(1, AlphaMode::Fixed(0.05), 0.99);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..400 {
            let batch = bandit_batch(32, &mut rng);
            p.update(&batch, &mut rng).unwrap();
        }
        let u = p.mean_action(&[0.0]);
        assert!(u[0] > 0.3, "mean action {} should drift positive", u[0]);
    }

    #[test]
    fn zero_gamma_regresses_to_immediate_reward() {
        let mut p = policy(3, AlphaMode::Fixed(0.01), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..600 {
            let mut batch = bandit_batch(32, &mut rng);
            // fixed reward, ignore the action sign
            for r in batch.rewards.iter_mut() {
                *r = 0.7;
            }
            batch.dones.iter_mut().for_each(|d| *d = 0.0);
            p.update(&batch, &mut rng).unwrap();
        }
        // with gamma = 0 the target is the immediate reward only
        let q = p.q1.forward(&[0.0, 0.5]).unwrap()[0];
        assert!((q - 0.7).abs() < 0.1, "q {q}");
    }

    #[test]
    fn identical_seeds_produce_identical_loss_sequences() {
        let mut p1 = policy(5, AlphaMode::Auto, 0.95);
        let mut p2 = policy(5, AlphaMode::Auto, 0.95);
        let mut r1 = ChaCha8Rng::seed_from_u64(6);
        let mut r2 = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let b1 = bandit_batch(16, &mut r1);
            let b2 = bandit_batch(16, &mut r2);
            let l1 = p1.update(&b1, &mut r1).unwrap();
            let l2 = p2.update(&b2, &mut r2).unwrap();
            assert_eq!(l1, l2);
        }
        assert_eq!(p1.actor, p2.actor);
        assert_eq!(p1.q1, p2.q1);
    }

    #[test]
    fn parameters_stay_finite_and_actions_bounded() {
        let mut p = policy(7, AlphaMode::Auto, 0.95);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let mut batch = bandit_batch(16, &mut rng);
            for r in batch.rewards.iter_mut() {
                *r *= 100.0; // large rewards stress the update
            }
            p.update(&batch, &mut rng).unwrap();
        }
        assert!(p.actor.params_finite() && p.q1.params_finite() && p.q2.params_finite());
        let u = p.sample_action(&[0.0], &mut rng);
        assert!(u[0] > -1.0 && u[0] < 1.0);
        assert!(p.alpha().is_finite() && p.alpha() > 0.0);
    }

    #[test]
    fn auto_alpha_decays_when_entropy_exceeds_target() {
        let mut p = policy(9, AlphaMode::Auto, 0.95);
        let a0 = p.alpha();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let batch = bandit_batch(16, &mut rng);
            p.update(&batch, &mut rng).unwrap();
        }
        // a fresh policy is near-maximum entropy; the temperature should move
        assert_ne!(p.alpha(), a0);
        assert!(p.alpha() > 0.0);
    }
}
