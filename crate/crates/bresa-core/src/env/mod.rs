//! Environment abstraction shared by the trajectory controller, the decision
//! loop, and the offline collectors.
//!
//! Environments own their full internal state (the maze additionally tracks
//! the commanded equilibrium pose and the movable discs); the state vector
//! they expose is what policies and critics observe.

pub mod maze;
pub mod nav;

use crate::geom::Vec2;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Navigation,
    Maze,
}

impl EnvKind {
    pub fn tag(self) -> u8 {
        match self {
            EnvKind::Navigation => 0,
            EnvKind::Maze => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<EnvKind> {
        match tag {
            0 => Some(EnvKind::Navigation),
            1 => Some(EnvKind::Maze),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Navigation => "navigation",
            EnvKind::Maze => "maze",
        }
    }
}

/// Result of executing one minor action in the control loop.
#[derive(Debug, Clone)]
pub struct MinorOutcome {
    pub state: Vec<f64>,
    pub constraint: bool,
    pub success: bool,
}

pub trait Environment {
    fn kind(&self) -> EnvKind;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Per-dimension action bounds.
    fn action_low(&self) -> &[f64];
    fn action_high(&self) -> &[f64];
    /// Per-dimension observation normalization (center and half-extent).
    fn obs_center(&self) -> &[f64];
    fn obs_half_extent(&self) -> &[f64];
    /// Reward scaling applied by the agents during training only.
    fn reward_scale(&self) -> f64;

    /// Reset to the task start state and return the state vector.
    fn reset(&mut self) -> Vec<f64>;
    /// Current state vector.
    fn state_vec(&self) -> Vec<f64>;
    /// Realized planar position of the agent.
    fn position(&self) -> Vec2;
    /// Origin the trajectory controller should interpolate from
    /// (the realized position, except the maze uses the commanded pose).
    fn plan_origin(&self) -> Vec2;
    /// Reward of a (post-action) state vector.
    fn reward(&self, state: &[f64]) -> f64;

    /// Minor step length: navigation minor-action size, maze per-tick command advance.
    fn minor_step_len(&self) -> f64;
    /// Control-loop tick budget per decision step.
    fn control_budget(&self) -> usize;
    /// Position tolerance for "action target reached".
    fn target_tolerance(&self) -> f64;
    /// Decision-step horizon per episode.
    fn horizon(&self) -> usize;

    /// Called once when a new high-level action starts. Environments that
    /// derive per-action context from the action override this (the maze
    /// builds its stiffness frame here).
    fn begin_action(&mut self, _action: &[f64]) {}

    /// Execute one minor action (a full action-dim vector; the planar delta
    /// occupies the first two components).
    fn execute_minor(&mut self, minor: &[f64], rng: &mut ChaCha8Rng) -> MinorOutcome;

    /// Place the agent at a position with cleared dynamics (offline collection).
    fn teleport(&mut self, position: Vec2);
}
