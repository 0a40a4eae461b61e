//! Deterministic recovery policy: a tanh-headed actor trained to minimize
//! the safety critic's risk estimate (deterministic policy gradient through
//! the frozen critic).

use super::safety::SafetyCritic;
use crate::error::Result;
use crate::nn::{adam_step, clip_global_norm, Activation, AdamState, Gradients, Mlp};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RecoveryPolicy {
    pub actor: Mlp,
    pub opt: AdamState,
    grad_clip: f64,
}

impl RecoveryPolicy {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        learning_rate: f64,
        grad_clip: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(act_dim);
        let actor = Mlp::new(&sizes, Activation::Tanh, rng)?;
        let opt = AdamState::new(&actor, learning_rate);
        Ok(RecoveryPolicy {
            actor,
            opt,
            grad_clip,
        })
    }

    /// Deterministic action in [-1, 1]^d.
    pub fn act(&self, obs: &[f64]) -> Vec<f64> {
        self.actor.forward(obs).expect("recovery actor forward")
    }

    /// One gradient step minimizing `Q_risk(s, pi(s))` over the batch states.
    /// The critic parameters are left untouched.
    pub fn update(&mut self, safety: &SafetyCritic, obs_batch: &[Vec<f64>]) -> Result<f64> {
        let n = obs_batch.len();
        let scale = 1.0 / n as f64;
        let mut grads = Gradients::zeros_like(&self.actor);
        let mut loss = 0.0;
        for obs in obs_batch {
            let (u, tape) = self.actor.forward_tape(obs)?;
            let (risk, risk_grad_u) = safety.risk_with_action_grad(obs, &u)?;
            loss += risk * scale;
            let out_grad: Vec<f64> = risk_grad_u.iter().map(|g| g * scale).collect();
            let r = self.actor.backward(&tape, &out_grad)?;
            grads.add_scaled(&r.grads, 1.0);
        }
        clip_global_norm(&mut grads, self.grad_clip);
        adam_step(&mut self.actor, &grads, &mut self.opt)?;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Hand-built critic: risk(s, a) = sigmoid(|a - 0.3|), minimized at a = 0.3.
    fn vee_critic() -> SafetyCritic {
        // input [obs, act] (dims 1+1), hidden 2 ReLU, sigmoid head
        let q = Mlp::from_parts(
            vec![2, 2, 1],
            vec![
                // h1 = relu(a - 0.3), h2 = relu(0.3 - a); obs weight zero
                vec![0.0, 1.0, 0.0, -1.0],
                vec![1.0, 1.0],
            ],
            vec![vec![-0.3, 0.3], vec![0.0]],
            Activation::Sigmoid,
        )
        .unwrap();
        SafetyCritic::from_network(q, 3e-4, 0.65, 0.005, 10.0)
    }

    #[test]
    fn actor_converges_to_the_risk_minimizing_action() {
        let critic = vee_critic();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut policy = RecoveryPolicy::new(1, 1, &[16, 16], 1e-2, 10.0, &mut rng).unwrap();
        let batch: Vec<Vec<f64>> = vec![vec![0.0]; 16];
        for _ in 0..1500 {
            policy.update(&critic, &batch).unwrap();
        }
        let u = policy.act(&[0.0]);
        assert!((u[0] - 0.3).abs() < 0.05, "converged to {} instead of 0.3", u[0]);
    }

    #[test]
    fn flat_critic_leaves_the_actor_unchanged() {
        let q = Mlp::zeros(&[2, 4, 1], Activation::Sigmoid).unwrap();
        let critic = SafetyCritic::from_network(q, 3e-4, 0.65, 0.005, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut policy = RecoveryPolicy::new(1, 1, &[8], 1e-2, 10.0, &mut rng).unwrap();
        let before = policy.actor.clone();
        for _ in 0..10 {
            policy.update(&critic, &vec![vec![0.5]; 8]).unwrap();
        }
        assert_eq!(policy.actor, before, "zero critic gradient must not move the actor");
    }

    #[test]
    fn outputs_stay_within_bounds_under_extreme_critics() {
        // critic strictly increasing in the action pushes the actor toward -1
        let q = Mlp::from_parts(
            vec![2, 1, 1],
            vec![vec![0.0, 5.0], vec![5.0]],
            vec![vec![5.0], vec![0.0]],
            Activation::Sigmoid,
        )
        .unwrap();
        let critic = SafetyCritic::from_network(q, 3e-4, 0.65, 0.005, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut policy = RecoveryPolicy::new(1, 1, &[8], 5e-2, 10.0, &mut rng).unwrap();
        for _ in 0..500 {
            policy.update(&critic, &vec![vec![0.0]; 4]).unwrap();
        }
        let u = policy.act(&[0.0]);
        assert!(u[0] >= -1.0 && u[0] < -0.5, "pushed to the bound, got {}", u[0]);
        assert!(policy.actor.params_finite());
    }
}
