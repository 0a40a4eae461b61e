//! Low-level trajectory controller: linear interpolation from the plan
//! origin to the action target, emitted as bounded minor actions, plus the
//! executed-action bookkeeping used for training.

use crate::env::{Environment, MinorOutcome};
use crate::geom::Vec2;
use rand_chacha::ChaCha8Rng;

const LEN_EPS: f64 = 1e-12;

/// Next step of a [`TrajectoryPlan`].
#[derive(Debug, Clone, PartialEq)]
pub enum PlanStep {
    /// A minor action (full action-dim vector).
    Step(Vec<f64>),
    /// Time out or action target reached.
    Exhausted,
}

/// How minor actions relate to the interpolated line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlanMode {
    /// Fixed steps of the minor size along the action direction, emitted
    /// open-loop until the whole action length is covered (navigation).
    OpenLoop,
    /// The command point marches along the line; each minor is the delta
    /// from the current realized position to the next command point, until
    /// the realized position is within tolerance of the target (maze).
    CommandTracking,
}

/// Internal memory of one high-level action's trajectory: origin, target,
/// iteration index, and step budget.
#[derive(Debug, Clone)]
pub struct TrajectoryPlan {
    origin: Vec2,
    target: Vec2,
    direction: Vec2,
    length: f64,
    step_len: f64,
    budget: usize,
    tolerance: f64,
    mode: PlanMode,
    /// Non-planar action components carried through to every minor action
    /// (the maze stiffness values).
    extra: Vec<f64>,
    index: usize,
    emitted_len: f64,
}

impl TrajectoryPlan {
    /// Plans the execution of `action` starting at `origin`. The planar delta
    /// is `action[0..2]`; remaining components are copied into every minor.
    /// A zero `tolerance` selects open-loop stepping (navigation), a positive
    /// one selects command tracking with that target-reached tolerance (maze).
    pub fn new(origin: Vec2, action: &[f64], step_len: f64, budget: usize, tolerance: f64) -> Self {
        let delta = Vec2::new(action[0], action[1]);
        let target = origin + delta;
        let length = delta.norm();
        TrajectoryPlan {
            origin,
            target,
            direction: delta.normalized(),
            length,
            step_len: step_len.max(LEN_EPS),
            budget,
            tolerance,
            mode: if tolerance > 0.0 {
                PlanMode::CommandTracking
            } else {
                PlanMode::OpenLoop
            },
            extra: action[2..].to_vec(),
            index: 0,
            emitted_len: 0.0,
        }
    }

    pub fn target(&self) -> Vec2 {
        self.target
    }

    pub fn index(&self) -> usize {
        self.index
    }

    fn with_extra(&self, delta: Vec2) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + self.extra.len());
        v.push(delta.x);
        v.push(delta.y);
        v.extend_from_slice(&self.extra);
        v
    }

    /// Returns the next minor action toward the target, or [`PlanStep::Exhausted`]
    /// on time-out or when the action target is reached.
    pub fn intermediate_action(&mut self, current: Vec2) -> PlanStep {
        if self.index >= self.budget {
            return PlanStep::Exhausted;
        }
        match self.mode {
            PlanMode::OpenLoop => {
                let remaining = self.length - self.emitted_len;
                if remaining <= LEN_EPS {
                    return PlanStep::Exhausted;
                }
                let step = remaining.min(self.step_len);
                self.emitted_len += step;
                self.index += 1;
                PlanStep::Step(self.with_extra(self.direction * step))
            }
            PlanMode::CommandTracking => {
                if current.dist(self.target) < self.tolerance {
                    return PlanStep::Exhausted;
                }
                self.index += 1;
                let cmd_len = (self.index as f64 * self.step_len).min(self.length);
                let cmd_point = if cmd_len >= self.length {
                    self.target
                } else {
                    self.origin + self.direction * cmd_len
                };
                PlanStep::Step(self.with_extra(cmd_point - current))
            }
        }
    }
}

/// Executes one minor action in the environment (low-level control rule,
/// dynamics, and observation are all encapsulated by the environment).
pub fn execute_action(
    env: &mut dyn Environment,
    minor: &[f64],
    rng: &mut ChaCha8Rng,
) -> MinorOutcome {
    env.execute_minor(minor, rng)
}

/// The executed action `a' = p_after - p_before`; non-planar components
/// (maze stiffness) are copied from the intended action.
pub fn executed_action(p_before: Vec2, p_after: Vec2, intended: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(intended.len());
    v.push(p_after.x - p_before.x);
    v.push(p_after.y - p_before.y);
    v.extend_from_slice(&intended[2..]);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::nav::{nav_minor_step, NavEnv, NavMap, NavParams};
    use crate::env::Environment;
    use rand::{Rng, SeedableRng};

    fn collect_steps(plan: &mut TrajectoryPlan, mut pos: Vec2, apply: bool) -> Vec<Vec<f64>> {
        let mut steps = Vec::new();
        loop {
            match plan.intermediate_action(pos) {
                PlanStep::Step(s) => {
                    if apply {
                        pos = pos + Vec2::new(s[0], s[1]);
                    }
                    steps.push(s);
                }
                PlanStep::Exhausted => break,
            }
        }
        steps
    }

    #[test]
    fn unit_action_emits_five_fixed_steps() {
        let mut plan = TrajectoryPlan::new(Vec2::ZERO, &[1.0, 0.0], 0.2, 45, 0.0);
        let steps = collect_steps(&mut plan, Vec2::ZERO, true);
        assert_eq!(steps.len(), 5);
        for s in &steps {
            assert!((s[0] - 0.2).abs() < 1e-12 && s[1].abs() < 1e-12);
        }
    }

    #[test]
    fn zero_action_exhausts_immediately() {
        let mut plan = TrajectoryPlan::new(Vec2::new(3.0, 4.0), &[0.0, 0.0], 0.2, 45, 0.0);
        assert_eq!(plan.intermediate_action(Vec2::new(3.0, 4.0)), PlanStep::Exhausted);
    }

    #[test]
    fn remainder_step_is_shortened() {
        let mut plan = TrajectoryPlan::new(Vec2::ZERO, &[0.5, 0.0], 0.2, 45, 0.0);
        let steps = collect_steps(&mut plan, Vec2::ZERO, true);
        assert_eq!(steps.len(), 3);
        assert!((steps[0][0] - 0.2).abs() < 1e-12);
        assert!((steps[1][0] - 0.2).abs() < 1e-12);
        assert!((steps[2][0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn emitted_steps_sum_to_the_action() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let action = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let origin = Vec2::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..80.0));
            let mut plan = TrajectoryPlan::new(origin, &action, 0.2, 100, 0.0);
            let steps = collect_steps(&mut plan, origin, true);
            let sum = steps
                .iter()
                .fold(Vec2::ZERO, |acc, s| acc + Vec2::new(s[0], s[1]));
            assert!((sum.x - action[0]).abs() < 1e-12);
            assert!((sum.y - action[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn open_loop_respects_budget() {
        let mut plan = TrajectoryPlan::new(Vec2::ZERO, &[3.0, 0.0], 0.2, 4, 0.0);
        let steps = collect_steps(&mut plan, Vec2::ZERO, true);
        assert_eq!(steps.len(), 4);
    }

    #[test]
    fn command_tracking_marches_toward_the_target() {
        // start at the origin; the realized position follows each command
        let origin = Vec2::ZERO;
        let action = [0.01, 0.0, 500.0, 700.0];
        let mut plan = TrajectoryPlan::new(origin, &action, 0.0006, 100, 0.002);
        let mut pos = origin;
        let mut count = 0;
        loop {
            match plan.intermediate_action(pos) {
                PlanStep::Step(s) => {
                    assert_eq!(&s[2..], &[500.0, 700.0], "stiffness carried through");
                    pos = pos + Vec2::new(s[0], s[1]);
                    count += 1;
                }
                PlanStep::Exhausted => break,
            }
        }
        // reached within tolerance well before the budget
        assert!(pos.dist(Vec2::new(0.01, 0.0)) < 0.002);
        assert!(count < 100);
    }

    #[test]
    fn command_tracking_times_out_when_blocked() {
        // realized position never moves: the plan must stop at the budget
        let mut plan = TrajectoryPlan::new(Vec2::ZERO, &[0.03, 0.0, 500.0, 500.0], 0.0006, 100, 0.002);
        let pos = Vec2::ZERO;
        let mut count = 0;
        while let PlanStep::Step(_) = plan.intermediate_action(pos) {
            count += 1;
        }
        assert_eq!(count, 100);
    }

    #[test]
    fn execute_action_delegates_to_the_environment() {
        let params = NavParams {
            sigma: 0.0,
            ..NavParams::default()
        };
        let map = NavMap::default_map();
        let mut env = NavEnv::new(map.clone(), params);
        env.reset();
        let s = env.position();
        let minor = [0.2, 0.0];
        let (expect, ec, es) = nav_minor_step(
            &map,
            &params,
            s,
            Vec2::new(0.2, 0.0),
            &mut rand_chacha::ChaCha8Rng::seed_from_u64(0),
        );
        let out = execute_action(
            &mut env,
            &minor,
            &mut rand_chacha::ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(out.state, vec![expect.x, expect.y]);
        assert_eq!(out.constraint, ec);
        assert_eq!(out.success, es);
    }

    #[test]
    fn executed_action_is_position_difference() {
        let a = executed_action(Vec2::new(1.0, 2.0), Vec2::new(1.0, 2.0), &[0.5, 0.5]);
        assert_eq!(a, vec![0.0, 0.0]);

        let a = executed_action(Vec2::new(1.0, 2.0), Vec2::new(1.5, 2.5), &[0.5, 0.5]);
        assert_eq!(a, vec![0.5, 0.5]);

        // maze actions carry the intended stiffness through
        let a = executed_action(
            Vec2::new(0.1, 0.1),
            Vec2::new(0.11, 0.1),
            &[0.03, 0.0, 400.0, 900.0],
        );
        assert!((a[0] - 0.01).abs() < 1e-15);
        assert_eq!(&a[2..], &[400.0, 900.0]);
    }

    #[test]
    fn interrupted_execution_yields_half_the_action() {
        // execute half the minor steps of a straight-line action (sigma = 0)
        let action = [2.0, 0.0];
        let origin = Vec2::new(10.0, 10.0);
        let mut plan = TrajectoryPlan::new(origin, &action, 0.2, 45, 0.0);
        let mut pos = origin;
        for _ in 0..5 {
            if let PlanStep::Step(s) = plan.intermediate_action(pos) {
                pos = pos + Vec2::new(s[0], s[1]);
            }
        }
        let a_exec = executed_action(origin, pos, &action);
        let norm = (a_exec[0] * a_exec[0] + a_exec[1] * a_exec[1]).sqrt();
        assert!((norm - 1.0).abs() < 1e-9, "half of a 2-unit action");
    }
}
