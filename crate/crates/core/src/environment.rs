//! Episode orchestration: launcher and drone placement, the throw, drone
//! kinematics, catch detection and the per-step episode log.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::{observe, Observation};
use crate::physics::{simulate_trajectory, Aabb, ObjectSim, ObjectSpec, ObjectState, RoomGeometry, SimConfig, Terminal, Vec3};
use crate::planner::camera_angles;
use crate::policy::RewardSpec;

/// Drone state: `d` is the center of the top-mounted basket, the point the
/// planner steers onto the object. The body hangs directly below it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub d: Vec3,
    pub v: Vec3,
    /// Last commanded (clamped, pre-noise) acceleration.
    pub a: Vec3,
    /// Camera pitch, rad.
    pub phi: f64,
    /// Camera yaw, rad.
    pub theta: f64,
}

impl AgentState {
    pub fn at_rest(d: Vec3) -> Self {
        Self { d, v: Vec3::zeros(), a: Vec3::zeros(), phi: 0.0, theta: 0.0 }
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        Self { d: self.d + offset, ..*self }
    }

    /// `[d, v, a, phi, theta]`
    pub fn to_array(&self) -> [f64; 11] {
        [
            self.d.x, self.d.y, self.d.z, self.v.x, self.v.y, self.v.z, self.a.x, self.a.y, self.a.z, self.phi, self.theta,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DroneSpec {
    /// m/s² per axis.
    pub max_accel: f64,
    /// m/s.
    pub max_velocity: f64,
    pub body_extent: Vec3,
    pub basket_extent: Vec3,
    /// Acceleration noise std as a fraction of `max_accel`.
    pub movement_noise_sigma: f64,
    /// Fraction of `max_accel` available to the controller.
    pub mobility: f64,
}

impl Default for DroneSpec {
    fn default() -> Self {
        Self {
            max_accel: 25.0,
            max_velocity: 40.0,
            body_extent: Vec3::new(0.47, 0.14, 0.37),
            basket_extent: Vec3::new(0.3, 0.2, 0.3),
            movement_noise_sigma: 0.0,
            mobility: 1.0,
        }
    }
}

impl DroneSpec {
    /// Effective per-axis acceleration bound.
    pub fn accel_limit(&self) -> f64 {
        self.max_accel * self.mobility
    }

    pub fn validate(&self) -> Result<()> {
        let extents_ok = (0..3).all(|k| self.body_extent[k] > 0.0 && self.basket_extent[k] > 0.0);
        if !(self.max_accel > 0.0 && self.max_velocity > 0.0 && extents_ok && self.movement_noise_sigma >= 0.0 && self.mobility > 0.0 && self.mobility <= 1.0) {
            return Err(Error::InvalidConfig("drone spec out of range".into()));
        }
        Ok(())
    }

    /// Region the basket center may occupy so the airframe stays inside `room`.
    pub fn flight_box(&self, room: &RoomGeometry) -> Aabb {
        let half_w = 0.5 * self.body_extent.x.max(self.basket_extent.x);
        let half_d = 0.5 * self.body_extent.z.max(self.basket_extent.z);
        let below = 0.5 * self.basket_extent.y + self.body_extent.y;
        let above = 0.5 * self.basket_extent.y;
        Aabb::new(
            room.min_corner + Vec3::new(half_w, below, half_d),
            room.max_corner - Vec3::new(half_w, above, half_d),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LauncherConfig {
    /// N
    pub force_range: [f64; 2],
    pub elevation_range_deg: [f64; 2],
    /// Measured about the launcher-to-drone bearing.
    pub azimuth_range_deg: [f64; 2],
    /// Muzzle height above the floor, m.
    pub height: f64,
    pub horizontal_distance_to_drone: f64,
    /// Seconds over which the launch force acts.
    pub impulse_duration: f64,
    /// Basket-center height above the floor at spawn.
    pub drone_height_range: [f64; 2],
    /// Minimum clearance between the launcher or drone and the walls.
    pub wall_margin: f64,
}

impl Default for LauncherConfig {
    fn default() -> Self {
        Self {
            force_range: [40.0, 60.0],
            elevation_range_deg: [45.0, 60.0],
            azimuth_range_deg: [-30.0, 30.0],
            height: 1.8,
            horizontal_distance_to_drone: 2.0,
            impulse_duration: 0.05,
            drone_height_range: [0.8, 1.6],
            wall_margin: 0.4,
        }
    }
}

impl LauncherConfig {
    pub fn validate(&self, room: &RoomGeometry) -> Result<()> {
        let ordered = |r: &[f64; 2]| r[0] <= r[1] && r[0].is_finite() && r[1].is_finite();
        let ceiling = room.max_corner.y - room.min_corner.y;
        let ok = ordered(&self.force_range)
            && self.force_range[0] > 0.0
            && ordered(&self.elevation_range_deg)
            && self.elevation_range_deg[0] >= -90.0
            && self.elevation_range_deg[1] <= 90.0
            && ordered(&self.azimuth_range_deg)
            && self.azimuth_range_deg[0] >= -180.0
            && self.azimuth_range_deg[1] <= 180.0
            && ordered(&self.drone_height_range)
            && self.height > 0.0
            && self.height < ceiling
            && self.horizontal_distance_to_drone > 0.0
            && self.impulse_duration > 0.0
            && self.wall_margin >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("launcher config out of range".into()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub seed: u64,
    pub object: ObjectSpec,
    #[serde(default)]
    pub room: RoomGeometry,
    #[serde(default)]
    pub drone: DroneSpec,
    #[serde(default)]
    pub launcher: LauncherConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default = "default_max_steps")]
    pub max_control_steps: usize,
}

fn default_max_steps() -> usize {
    50
}

impl EpisodeConfig {
    pub fn new(seed: u64, object: ObjectSpec) -> Self {
        Self {
            seed,
            object,
            room: RoomGeometry::default(),
            drone: DroneSpec::default(),
            launcher: LauncherConfig::default(),
            sim: SimConfig::default(),
            max_control_steps: default_max_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.object.validate()?;
        self.room.validate()?;
        self.drone.validate()?;
        self.launcher.validate(&self.room)?;
        self.sim.validate()?;
        if self.max_control_steps == 0 {
            return Err(Error::InvalidConfig("max_control_steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::parse("<toml>", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("episode config is always representable in TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

/// Independent random streams derived from an episode seed. Placement and
/// launch are fixed per episode; the rest vary with the repeat index.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Placement,
    Launch,
    Observation(u32),
    Movement(u32),
    Planner(u32),
    Training(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Placement => 0,
            Stream::Launch => 1,
            Stream::Observation(r) => 0x100 | ((r as u64) << 16),
            Stream::Movement(r) => 0x200 | ((r as u64) << 16),
            Stream::Planner(r) => 0x300 | ((r as u64) << 16),
            Stream::Training(r) => 0x400 | ((r as u64) << 16),
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spawn {
    /// World-frame drone state, camera pointed at the muzzle.
    pub agent: AgentState,
    pub muzzle: Vec3,
}

const PLACEMENT_ATTEMPTS: usize = 1000;

/// Places the launcher uniformly in the room and the drone at the configured
/// horizontal distance on a random bearing, facing the muzzle.
pub fn spawn_episode(cfg: &EpisodeConfig) -> Result<Spawn> {
    let mut rng = stream_rng(cfg.seed, Stream::Placement);
    let room = &cfg.room;
    let l = &cfg.launcher;
    let floor = room.floor_y();
    let margin = Vec3::new(l.wall_margin, 0.0, l.wall_margin);
    let area = room.bounds().expanded(-margin);
    let fly = cfg.drone.flight_box(room).expanded(-margin);
    let body = Vec3::new(0.5 * cfg.drone.body_extent.x, 0.5 * cfg.drone.basket_extent.y + cfg.drone.body_extent.y, 0.5 * cfg.drone.body_extent.z);
    for _ in 0..PLACEMENT_ATTEMPTS {
        let lx = rng.random_range(area.min.x..=area.max.x);
        let lz = rng.random_range(area.min.z..=area.max.z);
        let bearing = rng.random_range(0.0..std::f64::consts::TAU);
        let h = rng.random_range(l.drone_height_range[0]..=l.drone_height_range[1]);
        let muzzle = Vec3::new(lx, floor + l.height, lz);
        let d = Vec3::new(
            lx + l.horizontal_distance_to_drone * bearing.cos(),
            floor + h,
            lz + l.horizontal_distance_to_drone * bearing.sin(),
        );
        if !fly.contains(&d) || !room.is_free(&muzzle, cfg.object.radius) {
            continue;
        }
        if room.obstacles.iter().any(|ob| ob.expanded(body).contains(&d)) {
            continue;
        }
        let (theta, phi) = camera_angles(&muzzle, &d)?;
        let agent = AgentState { phi, theta, ..AgentState::at_rest(d) };
        return Ok(Spawn { agent, muzzle });
    }
    Err(Error::PlacementInfeasible { attempts: PLACEMENT_ATTEMPTS })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaunchParams {
    pub force: f64,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub speed: f64,
}

/// Initial velocity for a throw: speed `force·τ/mass` along the direction at
/// `elevation` above the horizontal, rotated `azimuth` about the vertical from
/// the horizontal unit vector `toward`.
pub fn launch_velocity(toward: &Vec3, force: f64, elevation_deg: f64, azimuth_deg: f64, impulse_duration: f64, mass: f64) -> Vec3 {
    let speed = force * impulse_duration / mass;
    let (sa, ca) = azimuth_deg.to_radians().sin_cos();
    let (se, ce) = elevation_deg.to_radians().sin_cos();
    let hx = toward.x * ca - toward.z * sa;
    let hz = toward.x * sa + toward.z * ca;
    Vec3::new(speed * ce * hx, speed * se, speed * ce * hz)
}

/// Samples force, elevation and azimuth uniformly and returns the launched
/// object at the muzzle.
pub fn launch_object(cfg: &EpisodeConfig, spawn: &Spawn, rng: &mut impl Rng) -> (ObjectState, LaunchParams) {
    let l = &cfg.launcher;
    let force = rng.random_range(l.force_range[0]..=l.force_range[1]);
    let elevation_deg = rng.random_range(l.elevation_range_deg[0]..=l.elevation_range_deg[1]);
    let azimuth_deg = rng.random_range(l.azimuth_range_deg[0]..=l.azimuth_range_deg[1]);
    let mut toward = spawn.agent.d - spawn.muzzle;
    toward.y = 0.0;
    let toward = toward.normalize();
    let v = launch_velocity(&toward, force, elevation_deg, azimuth_deg, l.impulse_duration, cfg.object.mass);
    let state = ObjectState::new(spawn.muzzle, v, cfg.sim.gravity_vec());
    let params = LaunchParams { force, elevation_deg, azimuth_deg, speed: v.norm() };
    (state, params)
}

/// Spawn plus launch drawn from the episode's fixed streams.
pub fn initial_conditions(cfg: &EpisodeConfig) -> Result<(Spawn, ObjectState, LaunchParams)> {
    let spawn = spawn_episode(cfg)?;
    let mut rng = stream_rng(cfg.seed, Stream::Launch);
    let (object, params) = launch_object(cfg, &spawn, &mut rng);
    Ok((spawn, object, params))
}

/// One control step of the drone: clamp the command, add movement noise,
/// advance position then velocity, cap speed and keep the drone in `bounds`.
pub fn step_agent(state: &AgentState, action: &Vec3, drone: &DroneSpec, bounds: &Aabb, dt: f64, rng: &mut impl Rng) -> AgentState {
    let limit = drone.accel_limit();
    let commanded = action.map(|c| c.clamp(-limit, limit));
    let mut realized = commanded;
    let sigma = drone.movement_noise_sigma * drone.max_accel;
    if sigma > 0.0 {
        for k in 0..3 {
            let n: f64 = StandardNormal.sample(rng);
            realized[k] += sigma * n;
        }
    }
    kinematic_step(state, commanded, realized, drone, bounds, dt)
}

pub(crate) fn kinematic_step(state: &AgentState, commanded: Vec3, realized: Vec3, drone: &DroneSpec, bounds: &Aabb, dt: f64) -> AgentState {
    let mut d = state.d + state.v * dt;
    let mut v = state.v + realized * dt;
    let speed = v.norm();
    if speed > drone.max_velocity {
        v *= drone.max_velocity / speed;
    }
    for k in 0..3 {
        if d[k] < bounds.min[k] {
            d[k] = bounds.min[k];
            v[k] = 0.0;
        } else if d[k] > bounds.max[k] {
            d[k] = bounds.max[k];
            v[k] = 0.0;
        }
    }
    AgentState { d, v, a: commanded, phi: state.phi, theta: state.theta }
}

/// Object center inside the basket box centered on `d`.
pub fn basket_contains(d: &Vec3, object: &Vec3, drone: &DroneSpec) -> bool {
    let rel = object - d;
    (0..3).all(|k| rel[k].abs() <= 0.5 * drone.basket_extent[k])
}

pub fn check_catch(agent: &AgentState, object: &ObjectState, drone: &DroneSpec) -> bool {
    basket_contains(&agent.d, &object.o, drone)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Caught,
    Ground,
    Rest,
    StepCap,
}

impl From<Terminal> for Outcome {
    fn from(t: Terminal) -> Self {
        match t {
            Terminal::Ground => Outcome::Ground,
            Terminal::Rest => Outcome::Rest,
            Terminal::StepCap => Outcome::StepCap,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Difficult,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Difficult];

    pub fn from_collisions(count: usize) -> Self {
        match count {
            0 => Difficulty::Easy,
            1 => Difficulty::Medium,
            _ => Difficulty::Difficult,
        }
    }
}

/// Data needed to credit a policy for the executed action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrace {
    pub input: Vec<f64>,
    /// Executed first action before clamping.
    pub raw_action: Vec<f64>,
    pub log_prob: f64,
    /// Every pre-clamp draw the sampler proposed at this step, when kept.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: usize,
    /// World frame, at the start of the step.
    pub agent: AgentState,
    pub object: ObjectState,
    /// Start frame.
    pub observation: Observation,
    pub action: Vec3,
    pub collided: bool,
    /// Controller's object-state estimate, start frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<ObjectState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PolicyTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub object_id: String,
    pub repeat: u32,
    /// World position of the drone at spawn; start-frame quantities are
    /// world minus this offset.
    pub origin: Vec3,
    pub steps: Vec<StepLog>,
    pub outcome: Outcome,
    pub collision_count: usize,
    pub reward: f64,
    /// World-frame states at the instant the episode ended.
    pub final_agent: AgentState,
    pub final_object: ObjectState,
}

impl EpisodeRecord {
    pub fn caught(&self) -> bool {
        self.outcome == Outcome::Caught
    }

    pub fn difficulty(&self) -> Difficulty {
        classify_difficulty(self)
    }
}

pub fn classify_difficulty(record: &EpisodeRecord) -> Difficulty {
    Difficulty::from_collisions(record.collision_count)
}

/// Per-step rewards: `−c·‖d_t − o_t‖` for every logged step plus the success
/// bonus on the last one.
pub fn step_rewards(steps: &[StepLog], caught: bool, spec: &RewardSpec) -> Vec<f64> {
    let mut r: Vec<f64> = steps.iter().map(|s| -spec.distance_coefficient * (s.agent.d - s.object.o).norm()).collect();
    if caught {
        if let Some(last) = r.last_mut() {
            *last += spec.success_bonus;
        }
    }
    r
}

/// Undiscounted episode return, accumulated back to front.
pub fn episode_reward(steps: &[StepLog], caught: bool, spec: &RewardSpec) -> f64 {
    step_rewards(steps, caught, spec).iter().rev().fold(0.0, |g, r| r + 1.0 * g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CameraMode {
    /// Controller points the camera at its own prediction.
    Rotating,
    /// Camera keeps its spawn orientation.
    Fixed,
    /// Camera points at the true next object position.
    GroundTruth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Observation noise std, m.
    pub sigma_obs: f64,
    pub fov_deg: f64,
    pub camera: CameraMode,
    /// Selects the stochastic streams (noise, sampling) for this run.
    pub repeat: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { sigma_obs: 0.1, fov_deg: 90.0, camera: CameraMode::Rotating, repeat: 0 }
    }
}

/// What a controller learns once per episode. Positions are in the agent's
/// start frame (world translated so the drone starts at the origin).
#[derive(Clone, Debug)]
pub struct EpisodeContext {
    pub drone: DroneSpec,
    pub flight_box: Aabb,
    pub dt: f64,
    pub gravity: f64,
    pub max_steps: usize,
    pub start_agent: AgentState,
    /// True object positions per control step; only offered to controllers
    /// that ask for it (offline upper bound).
    pub ground_truth: Option<Vec<Vec3>>,
    /// Episode seed and repeat index, for the controller's own streams.
    pub seed: u64,
    pub repeat: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct ControlInput<'a> {
    pub t: usize,
    /// Start frame.
    pub agent: &'a AgentState,
    pub observations: &'a [Observation],
}

#[derive(Clone, Debug, Default)]
pub struct Command {
    pub action: Vec3,
    /// Desired `(theta, phi)` for the next observation.
    pub camera: Option<(f64, f64)>,
    pub estimate: Option<ObjectState>,
    pub trace: Option<PolicyTrace>,
}

impl Command {
    pub fn hold() -> Self {
        Self::default()
    }
}

pub trait Controller {
    fn begin(&mut self, ctx: &EpisodeContext) -> Result<()>;
    fn act(&mut self, input: &ControlInput<'_>) -> Result<Command>;
    fn wants_ground_truth(&self) -> bool {
        false
    }
}

/// Always commands zero acceleration.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullController;

impl Controller for NullController {
    fn begin(&mut self, _ctx: &EpisodeContext) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, _input: &ControlInput<'_>) -> Result<Command> {
        Ok(Command::hold())
    }
}

const GROUND_TRUTH_PAD: usize = 32;

/// Runs one throw to completion under `controller`.
pub fn run_episode(cfg: &EpisodeConfig, controller: &mut dyn Controller, opts: &RunOptions) -> Result<EpisodeRecord> {
    cfg.validate()?;
    let (spawn, object0, _) = initial_conditions(cfg)?;
    let origin = spawn.agent.d;
    let to_start = -origin;
    let world_box = cfg.drone.flight_box(&cfg.room);
    let dt = cfg.sim.control_dt;

    let ground_truth = if controller.wants_ground_truth() {
        let traj = simulate_trajectory(&cfg.object, &object0, &cfg.room, &cfg.sim, cfg.max_control_steps + GROUND_TRUTH_PAD)?;
        let mut pts: Vec<Vec3> = traj.states.iter().map(|s| s.o + to_start).collect();
        pts.push(traj.end_state.o + to_start);
        Some(pts)
    } else {
        None
    };
    let ctx = EpisodeContext {
        drone: cfg.drone.clone(),
        flight_box: Aabb::new(world_box.min + to_start, world_box.max + to_start),
        dt,
        gravity: cfg.sim.gravity,
        max_steps: cfg.max_control_steps,
        start_agent: spawn.agent.translated(&to_start),
        ground_truth,
        seed: cfg.seed,
        repeat: opts.repeat,
    };
    controller.begin(&ctx)?;

    let mut obs_rng = stream_rng(cfg.seed, Stream::Observation(opts.repeat));
    let mut move_rng = stream_rng(cfg.seed, Stream::Movement(opts.repeat));
    let mut sim = ObjectSim::new(&cfg.object, &cfg.room, &cfg.sim, object0);
    let mut agent = spawn.agent;
    let mut observations: Vec<Observation> = Vec::with_capacity(cfg.max_control_steps);
    let mut steps: Vec<StepLog> = Vec::with_capacity(cfg.max_control_steps);
    let mut outcome = None;
    let mut final_agent = agent;
    let mut final_object = sim.state;

    if sim.at_rest_on_floor() {
        outcome = Some(Outcome::Rest);
    }

    let substeps = cfg.sim.physics_substeps;
    for t in 0..cfg.max_control_steps {
        if outcome.is_some() {
            break;
        }
        let mut obs = observe(&agent, &sim.state, opts.sigma_obs, opts.fov_deg, &mut obs_rng);
        obs.t = t;
        if let Some(p) = obs.pos.as_mut() {
            *p += to_start;
        }
        observations.push(obs.clone());
        let local = agent.translated(&to_start);
        let cmd = controller
            .act(&ControlInput { t, agent: &local, observations: &observations })
            .map_err(|e| Error::EpisodeAborted { step: t, reason: e.to_string() })?;
        if !crate::physics::finite(&cmd.action) {
            return Err(Error::EpisodeAborted { step: t, reason: "non-finite action".into() });
        }
        steps.push(StepLog {
            t,
            agent,
            object: sim.state,
            observation: obs,
            action: cmd.action,
            collided: false,
            estimate: cmd.estimate,
            trace: cmd.trace,
        });

        let mut next = step_agent(&agent, &cmd.action, &cfg.drone, &world_box, dt, &mut move_rng);
        let mut collided = false;
        for k in 1..=substeps {
            let report = sim.substep()?;
            collided |= report.collided;
            let frac = k as f64 / substeps as f64;
            let d_k = agent.d + (next.d - agent.d) * frac;
            if basket_contains(&d_k, &report.state.o, &cfg.drone) {
                outcome = Some(Outcome::Caught);
                final_agent = AgentState { d: d_k, ..next };
                final_object = report.state;
                break;
            }
            if let Some(terminal) = report.terminal(&cfg.sim) {
                outcome = Some(terminal.into());
                final_agent = AgentState { d: d_k, ..next };
                final_object = report.state;
                break;
            }
        }
        if let Some(last) = steps.last_mut() {
            last.collided = collided;
        }
        match opts.camera {
            CameraMode::Rotating => {
                if let Some((theta, phi)) = cmd.camera {
                    next.theta = theta;
                    next.phi = phi;
                }
            }
            CameraMode::Fixed => {
                next.theta = spawn.agent.theta;
                next.phi = spawn.agent.phi;
            }
            CameraMode::GroundTruth => {
                if let Ok((theta, phi)) = camera_angles(&sim.state.o, &next.d) {
                    next.theta = theta;
                    next.phi = phi;
                }
            }
        }
        agent = next;
        if outcome.is_none() {
            final_agent = agent;
            final_object = sim.state;
        }
    }
    let outcome = outcome.unwrap_or(Outcome::StepCap);
    let caught = outcome == Outcome::Caught;
    let reward = episode_reward(&steps, caught, &RewardSpec::default());
    Ok(EpisodeRecord {
        seed: cfg.seed,
        object_id: cfg.object.id.clone(),
        repeat: opts.repeat,
        origin,
        steps,
        outcome,
        collision_count: sim.collision_count,
        reward,
        final_agent,
        final_object,
    })
}
