//! 2D navigation task: a point agent crosses a 100x80 area through tight
//! bottlenecks between rectangular obstacles. Minor actions are perturbed by
//! Gaussian noise; touching an obstacle violates the constraint and ends the
//! episode.

use super::{EnvKind, Environment, MinorOutcome};
use crate::error::{BresaError, Result};
use crate::geom::{Rect, Vec2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

/// Default map shipped with the crate (versioned; see `maps/navigation.toml`).
pub const DEFAULT_NAV_MAP: &str = include_str!("../../maps/navigation.toml");

/// Static world description parsed from a map file.
#[derive(Debug, Clone)]
pub struct NavMap {
    pub version: u32,
    pub width: f64,
    pub height: f64,
    pub obstacles: Vec<Rect>,
    pub start: Vec2,
    pub goal: Vec2,
    pub goal_radius: f64,
}

#[derive(Deserialize)]
struct NavMapFile {
    version: u32,
    area: AreaSection,
    start: PointSection,
    goal: GoalSection,
    #[serde(default)]
    obstacles: Vec<RectSection>,
}

#[derive(Deserialize)]
struct AreaSection {
    width: f64,
    height: f64,
}

#[derive(Deserialize)]
struct PointSection {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct GoalSection {
    x: f64,
    y: f64,
    radius: f64,
}

#[derive(Deserialize)]
struct RectSection {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl NavMap {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: NavMapFile =
            toml::from_str(text).map_err(|e| BresaError::Config(format!("navigation map: {e}")))?;
        let map = NavMap {
            version: file.version,
            width: file.area.width,
            height: file.area.height,
            obstacles: file
                .obstacles
                .iter()
                .map(|r| Rect::new(r.x, r.y, r.w, r.h))
                .collect(),
            start: Vec2::new(file.start.x, file.start.y),
            goal: Vec2::new(file.goal.x, file.goal.y),
            goal_radius: file.goal.radius,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn default_map() -> Self {
        Self::from_toml(DEFAULT_NAV_MAP).expect("bundled navigation map is valid")
    }

    fn validate(&self) -> Result<()> {
        if self.width <= 0.0 || self.height <= 0.0 || self.goal_radius <= 0.0 {
            return Err(BresaError::Config("map dimensions must be positive".into()));
        }
        if self.inside_obstacle(self.start) || self.inside_obstacle(self.goal) {
            return Err(BresaError::Config(
                "start and goal must lie outside all obstacles".into(),
            ));
        }
        Ok(())
    }

    /// Obstacle test; points exactly on an edge count as violations.
    pub fn inside_obstacle(&self, p: Vec2) -> bool {
        self.obstacles.iter().any(|r| r.contains(p))
    }

    pub fn clamp_to_area(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    /// Distance from `p` to the closest obstacle (0 when inside one).
    pub fn obstacle_clearance(&self, p: Vec2) -> f64 {
        let mut best = f64::INFINITY;
        for r in &self.obstacles {
            if r.contains(p) {
                return 0.0;
            }
            let dx = (r.x - p.x).max(0.0).max(p.x - (r.x + r.w));
            let dy = (r.y - p.y).max(0.0).max(p.y - (r.y + r.h));
            best = best.min((dx * dx + dy * dy).sqrt());
        }
        best
    }
}

/// Runtime parameters of the navigation task.
#[derive(Debug, Clone, Copy)]
pub struct NavParams {
    /// Componentwise action bound.
    pub a_max: f64,
    /// Minor action size.
    pub minor_size: f64,
    /// Per-minor-step Gaussian noise scale (per axis).
    pub sigma: f64,
    /// Decision-step horizon.
    pub horizon: usize,
    /// Probability of rescaling an offline action to minor size.
    pub minorization_prob: f64,
}

impl Default for NavParams {
    fn default() -> Self {
        NavParams {
            a_max: 3.0,
            minor_size: 0.2,
            sigma: 0.02,
            horizon: 500,
            minorization_prob: 0.25,
        }
    }
}

/// One minor step: `s' = s + minor + noise`, clamped to the task area.
/// Returns the next position, the constraint flag (inside an obstacle) and
/// the success flag (within the goal radius). A violating step never counts
/// as a success.
pub fn nav_minor_step(
    map: &NavMap,
    params: &NavParams,
    s: Vec2,
    minor: Vec2,
    rng: &mut ChaCha8Rng,
) -> (Vec2, bool, bool) {
    debug_assert!(
        minor.norm() <= params.minor_size + 1e-9,
        "minor action exceeds minor size"
    );
    let nx: f64 = StandardNormal.sample(rng);
    let ny: f64 = StandardNormal.sample(rng);
    let noise = Vec2::new(nx * params.sigma, ny * params.sigma);
    let next = map.clamp_to_area(s + minor + noise);
    let constraint = map.inside_obstacle(next);
    let success = !constraint && next.dist(map.goal) <= map.goal_radius;
    (next, constraint, success)
}

/// Negative Euclidean distance to the goal.
pub fn nav_reward(map: &NavMap, p: Vec2) -> f64 {
    -p.dist(map.goal)
}

/// Offline action sampler: componentwise uniform in `[-a_max, a_max]`, then
/// with probability `minorization_prob` the whole action is rescaled to the
/// minor-action magnitude.
pub fn nav_offline_action_sampler(params: &NavParams, rng: &mut ChaCha8Rng) -> Vec2 {
    let a = Vec2::new(
        rng.gen_range(-params.a_max..=params.a_max),
        rng.gen_range(-params.a_max..=params.a_max),
    );
    if rng.gen_range(0.0..1.0) < params.minorization_prob && a.norm() > 0.0 {
        a.scaled_to(params.minor_size)
    } else {
        a
    }
}

/// The navigation environment (implements [`Environment`]).
#[derive(Debug, Clone)]
pub struct NavEnv {
    pub map: NavMap,
    pub params: NavParams,
    pos: Vec2,
    action_low: [f64; 2],
    action_high: [f64; 2],
    obs_center: [f64; 2],
    obs_half: [f64; 2],
}

impl NavEnv {
    pub fn new(map: NavMap, params: NavParams) -> Self {
        let action_low = [-params.a_max, -params.a_max];
        let action_high = [params.a_max, params.a_max];
        let obs_center = [map.width / 2.0, map.height / 2.0];
        let obs_half = [map.width / 2.0, map.height / 2.0];
        let pos = map.start;
        NavEnv {
            map,
            params,
            pos,
            action_low,
            action_high,
            obs_center,
            obs_half,
        }
    }
}

impl Environment for NavEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::Navigation
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_low(&self) -> &[f64] {
        &self.action_low
    }

    fn action_high(&self) -> &[f64] {
        &self.action_high
    }

    fn obs_center(&self) -> &[f64] {
        &self.obs_center
    }

    fn obs_half_extent(&self) -> &[f64] {
        &self.obs_half
    }

    fn reward_scale(&self) -> f64 {
        // distances span ~128 units; keeps critic targets O(1)
        1.0 / (self.map.width.hypot(self.map.height))
    }

    fn reset(&mut self) -> Vec<f64> {
        self.pos = self.map.start;
        self.state_vec()
    }

    fn state_vec(&self) -> Vec<f64> {
        vec![self.pos.x, self.pos.y]
    }

    fn position(&self) -> Vec2 {
        self.pos
    }

    fn plan_origin(&self) -> Vec2 {
        self.pos
    }

    fn reward(&self, state: &[f64]) -> f64 {
        nav_reward(&self.map, Vec2::new(state[0], state[1]))
    }

    fn minor_step_len(&self) -> f64 {
        self.params.minor_size
    }

    fn control_budget(&self) -> usize {
        ((self.params.a_max / self.params.minor_size).ceil() as usize) * 3
    }

    fn target_tolerance(&self) -> f64 {
        // open-loop minor steps land on the target exactly (before noise)
        0.0
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn execute_minor(&mut self, minor: &[f64], rng: &mut ChaCha8Rng) -> MinorOutcome {
        let m = Vec2::new(minor[0], minor[1]);
        let (next, constraint, success) = nav_minor_step(&self.map, &self.params, self.pos, m, rng);
        self.pos = next;
        MinorOutcome {
            state: self.state_vec(),
            constraint,
            success,
        }
    }

    fn teleport(&mut self, position: Vec2) {
        self.pos = position;
    }
}
