//! Planar contact-rich maze: a peg-shaped end effector driven by variable
//! impedance control through a 50 mm channel with four turns and three
//! movable discs. Contact is resolved quasi-statically: the realized peg
//! position is the commanded pose projected into free space, and the measured
//! force is the spring force between command and realization. Exceeding the
//! force threshold violates the constraint and ends the episode.

use super::{EnvKind, Environment, MinorOutcome};
use crate::error::{BresaError, Result};
use crate::geom::{Polyline, Segment, Vec2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Deserialize;

/// Default map shipped with the crate (versioned; see `maps/maze.toml`).
pub const DEFAULT_MAZE_MAP: &str = include_str!("../../maps/maze.toml");

/// Substep length for the swept contact resolution. Well below the peg
/// radius so a single substep can never cross a wall.
const SWEEP_SUBSTEP: f64 = 0.002;
/// Sequential projection iteration cap and convergence tolerance (meters).
const PROJECT_MAX_ITERS: usize = 20;
const PROJECT_TOL: f64 = 1e-6;

/// The maze action: a planar position change plus stiffness along the major
/// and minor axes of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessAction {
    pub dp: Vec2,
    pub k1: f64,
    pub k2: f64,
}

impl StiffnessAction {
    pub fn from_slice(a: &[f64]) -> Self {
        StiffnessAction {
            dp: Vec2::new(a[0], a[1]),
            k1: a[2],
            k2: a[3],
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.dp.x, self.dp.y, self.k1, self.k2]
    }

    pub fn clamped(self, params: &MazeParams) -> Self {
        StiffnessAction {
            dp: Vec2::new(
                self.dp.x.clamp(-params.a_max, params.a_max),
                self.dp.y.clamp(-params.a_max, params.a_max),
            ),
            k1: self.k1.clamp(params.k_min, params.k_max),
            k2: self.k2.clamp(params.k_min, params.k_max),
        }
    }
}

/// Symmetric 3x3 matrix used for stiffness and damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        Mat3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Upper-left 2x2 block (the planar part).
    pub fn planar(&self) -> [[f64; 2]; 2] {
        [
            [self.0[0][0], self.0[0][1]],
            [self.0[1][0], self.0[1][1]],
        ]
    }
}

fn rotation_cos_sin(dp: Vec2) -> (f64, f64) {
    let n = dp.norm();
    if n > 0.0 {
        (dp.x / n, dp.y / n)
    } else {
        // degenerate action: identity rotation, K_t = K_a
        (1.0, 0.0)
    }
}

/// World-frame translational stiffness `K_t = R_p^T K_a R_p`, with the
/// rotation columns normalized so the eigenvalues are exactly {K1, K2, K_z}.
pub fn build_stiffness(action: &StiffnessAction, k_z: f64) -> Mat3 {
    let (c, s) = rotation_cos_sin(action.dp);
    let (k1, k2) = (action.k1, action.k2);
    // (R^T K_a R) for R with columns [(c,s,0), (-s,c,0), (0,0,1)]
    let kxx = c * c * k1 + s * s * k2;
    let kxy = c * s * (k2 - k1);
    let kyy = s * s * k1 + c * c * k2;
    Mat3([[kxx, kxy, 0.0], [kxy, kyy, 0.0], [0.0, 0.0, k_z]])
}

/// Damping proportional to stiffness: `D = R_p^T (2 zeta sqrt(K_a)) R_p`.
pub fn damping_matrix(action: &StiffnessAction, k_z: f64, zeta: f64) -> Mat3 {
    let (c, s) = rotation_cos_sin(action.dp);
    let d1 = 2.0 * zeta * action.k1.sqrt();
    let d2 = 2.0 * zeta * action.k2.sqrt();
    let dz = 2.0 * zeta * k_z.sqrt();
    let dxx = c * c * d1 + s * s * d2;
    let dxy = c * s * (d2 - d1);
    let dyy = s * s * d1 + c * c * d2;
    Mat3([[dxx, dxy, 0.0], [dxy, dyy, 0.0], [0.0, 0.0, dz]])
}

/// Desired end-effector wrench `w = K x_err + D v_err` (exact).
pub fn impedance_wrench(k: &Mat3, d: &Mat3, x_err: [f64; 3], v_err: [f64; 3]) -> [f64; 3] {
    let a = k.mul_vec(x_err);
    let b = d.mul_vec(v_err);
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// A movable disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub pos: Vec2,
    pub radius: f64,
    /// Contact force (N) needed before the disc yields; 0 means it moves
    /// whenever its displaced position is free.
    pub push_resistance: f64,
}

/// Static maze description parsed from a map file.
#[derive(Debug, Clone)]
pub struct MazeMap {
    pub version: u32,
    pub force_threshold: f64,
    pub peg_radius: f64,
    pub start: Vec2,
    pub goal: Vec2,
    pub goal_radius: f64,
    pub walls: Vec<Segment>,
    pub discs: Vec<Disc>,
    pub centerline: Vec<Vec2>,
}

#[derive(Deserialize)]
struct MazeMapFile {
    version: u32,
    force_threshold: f64,
    peg_radius: f64,
    start: XY,
    goal: GoalXY,
    centerline: Vec<[f64; 2]>,
    #[serde(default)]
    walls: Vec<WallSection>,
    #[serde(default)]
    discs: Vec<DiscSection>,
}

#[derive(Deserialize)]
struct XY {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct GoalXY {
    x: f64,
    y: f64,
    radius: f64,
}

#[derive(Deserialize)]
struct WallSection {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

#[derive(Deserialize)]
struct DiscSection {
    x: f64,
    y: f64,
    radius: f64,
    #[serde(default)]
    push_resistance: f64,
}

impl MazeMap {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: MazeMapFile =
            toml::from_str(text).map_err(|e| BresaError::Config(format!("maze map: {e}")))?;
        let map = MazeMap {
            version: file.version,
            force_threshold: file.force_threshold,
            peg_radius: file.peg_radius,
            start: Vec2::new(file.start.x, file.start.y),
            goal: Vec2::new(file.goal.x, file.goal.y),
            goal_radius: file.goal.radius,
            walls: file
                .walls
                .iter()
                .map(|w| Segment::new(Vec2::new(w.x1, w.y1), Vec2::new(w.x2, w.y2)))
                .collect(),
            discs: file
                .discs
                .iter()
                .map(|d| Disc {
                    pos: Vec2::new(d.x, d.y),
                    radius: d.radius,
                    push_resistance: d.push_resistance,
                })
                .collect(),
            centerline: file.centerline.iter().map(|p| Vec2::new(p[0], p[1])).collect(),
        };
        map.validate()?;
        Ok(map)
    }

    pub fn default_map() -> Self {
        Self::from_toml(DEFAULT_MAZE_MAP).expect("bundled maze map is valid")
    }

    fn validate(&self) -> Result<()> {
        if self.force_threshold <= 0.0 || self.peg_radius <= 0.0 || self.goal_radius <= 0.0 {
            return Err(BresaError::Config("maze thresholds must be positive".into()));
        }
        if self.centerline.len() < 2 {
            return Err(BresaError::Config("maze centerline needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn wall_clearance(&self, p: Vec2) -> f64 {
        self.walls
            .iter()
            .map(|s| s.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Free-space test for the peg center against walls and the given discs.
    pub fn peg_position_free(&self, p: Vec2, discs: &[Vec2]) -> bool {
        if self.wall_clearance(p) < self.peg_radius {
            return false;
        }
        discs
            .iter()
            .zip(&self.discs)
            .all(|(q, d)| p.dist(*q) >= self.peg_radius + d.radius)
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in &self.walls {
            for p in [s.a, s.b] {
                lo.x = lo.x.min(p.x);
                lo.y = lo.y.min(p.y);
                hi.x = hi.x.max(p.x);
                hi.y = hi.y.max(p.y);
            }
        }
        (lo, hi)
    }
}

/// Runtime parameters of the maze task.
#[derive(Debug, Clone, Copy)]
pub struct MazeParams {
    /// Componentwise position-change bound (m).
    pub a_max: f64,
    pub k_min: f64,
    pub k_max: f64,
    /// Fixed translational stiffness along z (unused by the planar dynamics
    /// but part of the stiffness construction).
    pub k_z: f64,
    /// Fixed rotational stiffness, recorded for fidelity; the planar
    /// reduction has no rotational degrees of freedom.
    pub k_rot: [f64; 3],
    /// Damping ratio for the proportional damping design.
    pub zeta: f64,
    /// Control period (s); one tick per control step.
    pub control_dt: f64,
    /// Ticks a full-length (a_max) command takes, i.e. the command advances
    /// a_max / ticks_per_action per tick.
    pub ticks_per_action: usize,
    /// Control-loop tick budget per decision step.
    pub control_budget: usize,
    /// Target-reached tolerance (m).
    pub target_tolerance: f64,
    /// Decision-step horizon.
    pub horizon: usize,
}

impl Default for MazeParams {
    fn default() -> Self {
        MazeParams {
            a_max: 0.03,
            k_min: 300.0,
            k_max: 1000.0,
            k_z: 750.0,
            k_rot: [100.0, 100.0, 0.0],
            zeta: 0.7,
            control_dt: 0.01,
            ticks_per_action: 50,
            control_budget: 100,
            target_tolerance: 0.002,
            horizon: 300,
        }
    }
}

impl MazeParams {
    pub fn tick_advance(&self) -> f64 {
        self.a_max / self.ticks_per_action as f64
    }
}

fn planar_force(k_planar: &[[f64; 2]; 2], gap: Vec2) -> Vec2 {
    Vec2::new(
        k_planar[0][0] * gap.x + k_planar[0][1] * gap.y,
        k_planar[1][0] * gap.x + k_planar[1][1] * gap.y,
    )
}

/// Sequential projection of `goal` into free space, seeded at a known-valid
/// point for contact-side disambiguation. Movable discs are displaced along
/// the contact normal when their displaced position is free (and, for a
/// resisting disc, when the commanded spring force exceeds the resistance);
/// otherwise they behave like walls.
fn project_point(
    map: &MazeMap,
    discs: &mut [Vec2],
    seed: Vec2,
    goal: Vec2,
    cmd: Vec2,
    k_planar: &[[f64; 2]; 2],
) -> Vec2 {
    let mut p = goal;
    for _ in 0..PROJECT_MAX_ITERS {
        let mut max_adjust = 0.0f64;

        for seg in &map.walls {
            let cp = seg.closest_point(p);
            let d = p.dist(cp);
            if d < map.peg_radius {
                let n = if d > 1e-12 {
                    (p - cp) * (1.0 / d)
                } else {
                    (seed - cp).normalized()
                };
                if n == Vec2::ZERO {
                    continue;
                }
                let new_p = cp + n * map.peg_radius;
                max_adjust = max_adjust.max(p.dist(new_p));
                p = new_p;
            }
        }

        for i in 0..discs.len() {
            let spec = map.discs[i];
            let q = discs[i];
            let min_d = map.peg_radius + spec.radius;
            let d = p.dist(q);
            if d < min_d {
                let n = if d > 1e-12 {
                    (q - p) * (1.0 / d)
                } else {
                    (q - seed).normalized()
                };
                let n = if n == Vec2::ZERO { Vec2::new(1.0, 0.0) } else { n };
                let overlap = min_d - d;
                let candidate = q + n * overlap;
                let candidate_free = map.wall_clearance(candidate) >= spec.radius
                    && discs.iter().enumerate().all(|(j, other)| {
                        j == i || candidate.dist(*other) >= spec.radius + map.discs[j].radius
                    });
                let force_ok = spec.push_resistance <= 0.0
                    || planar_force(k_planar, cmd - p).dot(n) > spec.push_resistance;
                if candidate_free && force_ok {
                    discs[i] = candidate;
                } else {
                    // immovable: push the peg out instead
                    let new_p = q - n * min_d;
                    max_adjust = max_adjust.max(p.dist(new_p));
                    p = new_p;
                }
            }
        }

        if max_adjust < PROJECT_TOL {
            break;
        }
    }
    p
}

/// Moves the realized peg position from `from` toward the commanded pose,
/// resolving wall and disc contacts in swept substeps. Each substep goal
/// stays within `SWEEP_SUBSTEP` of the last valid position, so the contact
/// side is always unambiguous and the peg cannot tunnel; the walk stops when
/// blocked.
pub(crate) fn resolve_position(
    map: &MazeMap,
    discs: &mut [Vec2],
    from: Vec2,
    cmd: Vec2,
    k_planar: &[[f64; 2]; 2],
) -> Vec2 {
    let mut p = from;
    // sliding along walls can roughly double the path length
    let max_steps = (((cmd - from).norm() / SWEEP_SUBSTEP).ceil() as usize) * 2 + 4;
    for _ in 0..max_steps {
        let to_cmd = cmd - p;
        let d = to_cmd.norm();
        if d < 1e-12 {
            break;
        }
        let goal = if d <= SWEEP_SUBSTEP {
            cmd
        } else {
            p + to_cmd * (SWEEP_SUBSTEP / d)
        };
        let next = project_point(map, discs, p, goal, cmd, k_planar);
        let progressed = next.dist(p) >= 1e-9;
        p = next;
        if !progressed {
            break;
        }
    }
    p
}

/// One quasi-static control step: the command pose moves to `cmd_next`, the
/// realized position is projected into free space, and the measured force is
/// the spring force over the command-to-realization gap. Returns
/// `(realized, force, constraint, success)`.
pub fn maze_control_step(
    map: &MazeMap,
    discs: &mut [Vec2],
    pos: Vec2,
    cmd_next: Vec2,
    k: &Mat3,
    d: &Mat3,
) -> (Vec2, Vec2, bool, bool) {
    let k_planar = k.planar();
    let realized = resolve_position(map, discs, pos, cmd_next, &k_planar);
    let gap = cmd_next - realized;
    // quasi-static: zero velocity error, so the wrench is the pure spring term
    let w = impedance_wrench(k, d, [gap.x, gap.y, 0.0], [0.0, 0.0, 0.0]);
    let force = Vec2::new(w[0], w[1]);
    let constraint = force.norm() > map.force_threshold;
    let success = !constraint && realized.dist(map.goal) <= map.goal_radius;
    (realized, force, constraint, success)
}

/// Stand-in task reward: negative geodesic distance to the goal along the
/// channel skeleton, normalized by the total channel length, plus a bonus of
/// 1.0 inside the goal region.
pub fn maze_reward(centerline: &Polyline, goal_arclength: f64, p: Vec2, in_goal: bool) -> f64 {
    let s = centerline.arclength_of_closest(p);
    let remaining = (goal_arclength - s).max(0.0);
    let base = -remaining / centerline.total_length().max(f64::MIN_POSITIVE);
    if in_goal {
        base + 1.0
    } else {
        base
    }
}

/// Offline action sampler: direction uniform on the circle, magnitude from a
/// unit-rate exponential rejection-truncated at 1 and scaled by `a_max`,
/// stiffness uniform in `[k_min, k_max]`.
pub fn maze_offline_sampler(params: &MazeParams, rng: &mut ChaCha8Rng) -> StiffnessAction {
    let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let magnitude = loop {
        let x: f64 = Exp1.sample(rng);
        if x <= 1.0 {
            break x * params.a_max;
        }
    };
    StiffnessAction {
        dp: Vec2::from_angle(theta) * magnitude,
        k1: rng.gen_range(params.k_min..=params.k_max),
        k2: rng.gen_range(params.k_min..=params.k_max),
    }
}

/// The maze environment (implements [`Environment`]).
///
/// State vector: `[p_x, p_y, v_x, v_y, f_x, f_y]`. Besides the observed
/// state the environment tracks the commanded equilibrium pose (which
/// accumulates across actions, so sustained pushing builds up force) and the
/// movable disc positions.
#[derive(Debug, Clone)]
pub struct MazeEnv {
    pub map: MazeMap,
    pub params: MazeParams,
    centerline: Polyline,
    goal_arclength: f64,
    pos: Vec2,
    cmd: Vec2,
    vel: Vec2,
    force: Vec2,
    disc_pos: Vec<Vec2>,
    active_k: Mat3,
    active_d: Mat3,
    action_low: [f64; 4],
    action_high: [f64; 4],
    obs_center: [f64; 6],
    obs_half: [f64; 6],
}

impl MazeEnv {
    pub fn new(map: MazeMap, params: MazeParams) -> Self {
        let centerline = Polyline::new(map.centerline.clone());
        let goal_arclength = centerline.arclength_of_closest(map.goal);
        let (lo, hi) = map.bounding_box();
        let center = (lo + hi) * 0.5;
        let half = (hi - lo) * 0.5;
        let obs_center = [center.x, center.y, 0.0, 0.0, 0.0, 0.0];
        let obs_half = [
            half.x.max(1e-6),
            half.y.max(1e-6),
            0.2,
            0.2,
            map.force_threshold,
            map.force_threshold,
        ];
        let action_low = [-params.a_max, -params.a_max, params.k_min, params.k_min];
        let action_high = [params.a_max, params.a_max, params.k_max, params.k_max];
        let default_action = StiffnessAction {
            dp: Vec2::ZERO,
            k1: params.k_min,
            k2: params.k_min,
        };
        let pos = map.start;
        let disc_pos = map.discs.iter().map(|d| d.pos).collect();
        MazeEnv {
            active_k: build_stiffness(&default_action, params.k_z),
            active_d: damping_matrix(&default_action, params.k_z, params.zeta),
            map,
            params,
            centerline,
            goal_arclength,
            pos,
            cmd: pos,
            vel: Vec2::ZERO,
            force: Vec2::ZERO,
            disc_pos,
            action_low,
            action_high,
            obs_center,
            obs_half,
        }
    }

    pub fn disc_positions(&self) -> &[Vec2] {
        &self.disc_pos
    }

    pub fn command_pose(&self) -> Vec2 {
        self.cmd
    }

    pub fn centerline(&self) -> &Polyline {
        &self.centerline
    }

    pub fn position_free(&self, p: Vec2) -> bool {
        self.map.peg_position_free(p, &self.disc_pos)
    }

    /// Full impedance wrench at the current state with the actual velocity
    /// error (used for trace reporting; positions never depend on damping).
    pub fn reported_wrench(&self) -> [f64; 3] {
        let gap = self.cmd - self.pos;
        impedance_wrench(
            &self.active_k,
            &self.active_d,
            [gap.x, gap.y, 0.0],
            [-self.vel.x, -self.vel.y, 0.0],
        )
    }
}

impl Environment for MazeEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::Maze
    }

    fn state_dim(&self) -> usize {
        6
    }

    fn action_dim(&self) -> usize {
        4
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
        1.0
    }

    fn reset(&mut self) -> Vec<f64> {
        self.pos = self.map.start;
        self.cmd = self.map.start;
        self.vel = Vec2::ZERO;
        self.force = Vec2::ZERO;
        self.disc_pos = self.map.discs.iter().map(|d| d.pos).collect();
        self.state_vec()
    }

    fn state_vec(&self) -> Vec<f64> {
        vec![
            self.pos.x, self.pos.y, self.vel.x, self.vel.y, self.force.x, self.force.y,
        ]
    }

    fn position(&self) -> Vec2 {
        self.pos
    }

    fn plan_origin(&self) -> Vec2 {
        self.cmd
    }

    fn reward(&self, state: &[f64]) -> f64 {
        let p = Vec2::new(state[0], state[1]);
        let in_goal = p.dist(self.map.goal) <= self.map.goal_radius;
        maze_reward(&self.centerline, self.goal_arclength, p, in_goal)
    }

    fn minor_step_len(&self) -> f64 {
        self.params.tick_advance()
    }

    fn control_budget(&self) -> usize {
        self.params.control_budget
    }

    fn target_tolerance(&self) -> f64 {
        self.params.target_tolerance
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn begin_action(&mut self, action: &[f64]) {
        let a = StiffnessAction::from_slice(action).clamped(&self.params);
        self.active_k = build_stiffness(&a, self.params.k_z);
        self.active_d = damping_matrix(&a, self.params.k_z, self.params.zeta);
    }

    fn execute_minor(&mut self, minor: &[f64], _rng: &mut ChaCha8Rng) -> MinorOutcome {
        let cmd_next = self.pos + Vec2::new(minor[0], minor[1]);
        let (realized, force, constraint, success) = maze_control_step(
            &self.map,
            &mut self.disc_pos,
            self.pos,
            cmd_next,
            &self.active_k,
            &self.active_d,
        );
        self.vel = (realized - self.pos) * (1.0 / self.params.control_dt);
        self.pos = realized;
        self.cmd = cmd_next;
        self.force = force;
        MinorOutcome {
            state: self.state_vec(),
            constraint,
            success,
        }
    }

    fn teleport(&mut self, position: Vec2) {
        self.pos = position;
        self.cmd = position;
        self.vel = Vec2::ZERO;
        self.force = Vec2::ZERO;
    }
}
