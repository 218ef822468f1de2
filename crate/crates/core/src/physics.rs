//! Point-mass projectile dynamics: gravity, multiplicative drag and
//! restitution bounces against an axis-aligned room with box obstacles.
//!
//! Convention: `y` is vertical and gravity acts along `-y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Tangential velocity retained on every contact substep.
pub const TANGENTIAL_FRICTION: f64 = 0.95;

/// Physical catalog entry for a throwable object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    /// kg
    pub mass: f64,
    /// Restitution applied to the normal velocity component, in `[0, 1]`.
    pub bounciness: f64,
    /// Linear drag rate in 1/s.
    pub drag: f64,
    /// Carried for catalog completeness; the point-mass model ignores it.
    pub angular_drag: f64,
    /// Collision sphere radius in meters.
    pub radius: f64,
}

impl ObjectSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mass.is_finite()
            && self.mass > 0.0
            && (0.0..=1.0).contains(&self.bounciness)
            && self.drag.is_finite()
            && self.drag >= 0.0
            && self.angular_drag.is_finite()
            && self.angular_drag >= 0.0
            && self.radius.is_finite()
            && self.radius > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("object spec {:?} out of range", self.id)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    /// Position, m.
    pub o: Vec3,
    /// Velocity, m/s.
    pub v: Vec3,
    /// Acceleration, m/s².
    pub a: Vec3,
}

impl ObjectState {
    pub fn new(o: Vec3, v: Vec3, a: Vec3) -> Self {
        Self { o, v, a }
    }

    pub fn is_finite(&self) -> bool {
        finite(&self.o) && finite(&self.v) && finite(&self.a)
    }
}

pub fn finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn contains_strict(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] > self.min[k] && p[k] < self.max[k])
    }

    /// Grows (or shrinks, for negative margins) the box on every side.
    pub fn expanded(&self, margin: Vec3) -> Aabb {
        Aabb::new(self.min - margin, self.max + margin)
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        Vec3::from_fn(|k, _| p[k].clamp(self.min[k], self.max[k]))
    }

    fn is_ordered(&self) -> bool {
        (0..3).all(|k| self.min[k] < self.max[k])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomGeometry {
    pub min_corner: Vec3,
    pub max_corner: Vec3,
    #[serde(default)]
    pub obstacles: Vec<Aabb>,
}

impl RoomGeometry {
    pub fn bounds(&self) -> Aabb {
        Aabb::new(self.min_corner, self.max_corner)
    }

    pub fn floor_y(&self) -> f64 {
        self.min_corner.y
    }

    pub fn validate(&self) -> Result<()> {
        let room = self.bounds();
        if !room.is_ordered() || !finite(&self.min_corner) || !finite(&self.max_corner) {
            return Err(Error::InvalidConfig("room corners must be ordered componentwise".into()));
        }
        for (i, ob) in self.obstacles.iter().enumerate() {
            if !ob.is_ordered() || !room.contains_strict(&ob.min) || !room.contains_strict(&ob.max) {
                return Err(Error::InvalidConfig(format!("obstacle {i} must lie strictly inside the room")));
            }
        }
        Ok(())
    }

    /// A 6 m × 3 m × 6 m living room with a sofa and a coffee table.
    pub fn living_room() -> Self {
        Self {
            min_corner: Vec3::new(0.0, 0.0, 0.0),
            max_corner: Vec3::new(6.0, 3.0, 6.0),
            obstacles: vec![
                Aabb::new(Vec3::new(0.3, 0.01, 4.9), Vec3::new(2.6, 0.85, 5.8)),
                Aabb::new(Vec3::new(3.8, 0.01, 2.2), Vec3::new(4.9, 0.45, 3.0)),
            ],
        }
    }

    /// True when a sphere of the given radius centered at `p` overlaps no
    /// obstacle and lies inside the walls.
    pub fn is_free(&self, p: &Vec3, radius: f64) -> bool {
        let r = Vec3::repeat(radius);
        self.bounds().expanded(-r).contains(p)
            && self.obstacles.iter().all(|ob| !ob.expanded(r).contains(p))
    }
}

impl Default for RoomGeometry {
    fn default() -> Self {
        Self::living_room()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// m/s², acting along −y.
    pub gravity: f64,
    /// Seconds per control step.
    pub control_dt: f64,
    pub physics_substeps: usize,
    /// Speed below which a floor contact counts as coming to rest.
    pub rest_speed_epsilon: f64,
    /// When set, a floor bounce faster than the rest threshold is an
    /// ordinary collision instead of terminating the flight.
    pub floor_bounce_continues: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            control_dt: 0.02,
            physics_substeps: 4,
            rest_speed_epsilon: 0.05,
            floor_bounce_continues: false,
        }
    }
}

impl SimConfig {
    pub fn substep_dt(&self) -> f64 {
        self.control_dt / self.physics_substeps as f64
    }

    pub fn gravity_vec(&self) -> Vec3 {
        Vec3::new(0.0, -self.gravity, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.control_dt > 0.0) || self.physics_substeps == 0 || !(self.gravity >= 0.0) || !(self.rest_speed_epsilon >= 0.0) {
            return Err(Error::InvalidConfig("sim config requires control_dt > 0, substeps >= 1, gravity >= 0".into()));
        }
        Ok(())
    }
}

/// One explicit step of the discrete motion recurrence
/// `o += v·dt; v += a·dt`, followed by drag decay `v *= max(0, 1 − drag·dt)`.
/// The returned acceleration is pure gravity.
pub fn integrate_object_step(state: &ObjectState, spec: &ObjectSpec, dt: f64, gravity: f64) -> ObjectState {
    let o = state.o + state.v * dt;
    let decay = (1.0 - spec.drag * dt).max(0.0);
    let v = (state.v + state.a * dt) * decay;
    ObjectState {
        o,
        v,
        a: Vec3::new(0.0, -gravity, 0.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Surface {
    Floor,
    Ceiling,
    Wall,
    Obstacle(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub axis: usize,
    /// +1 when the contact pushes toward +axis, −1 otherwise.
    pub normal: f64,
    /// Coordinate of the sphere center when just touching the face.
    pub plane: f64,
    pub surface: Surface,
}

/// Faces currently penetrated by a sphere of radius `radius` at `p`.
pub fn detect_contacts(p: &Vec3, radius: f64, room: &RoomGeometry) -> Result<Vec<Contact>> {
    let mut contacts = Vec::new();
    for k in 0..3 {
        let lo = room.min_corner[k] + radius;
        let hi = room.max_corner[k] - radius;
        if p[k] < lo {
            let surface = if k == 1 { Surface::Floor } else { Surface::Wall };
            contacts.push(Contact { axis: k, normal: 1.0, plane: lo, surface });
        }
        if p[k] > hi {
            let surface = if k == 1 { Surface::Ceiling } else { Surface::Wall };
            contacts.push(Contact { axis: k, normal: -1.0, plane: hi, surface });
        }
    }
    for (i, ob) in room.obstacles.iter().enumerate() {
        let e = ob.expanded(Vec3::repeat(radius));
        if !e.contains_strict(p) {
            continue;
        }
        // Exit through the shallowest face that leads back into the room; a
        // face flush with a wall or the floor cannot be exited through.
        let open = |k: usize, plane: f64| plane >= room.min_corner[k] + radius && plane <= room.max_corner[k] - radius;
        let mut best = None;
        let mut best_depth = f64::INFINITY;
        for pass in 0..2 {
            for k in 0..3 {
                let d_lo = p[k] - e.min[k];
                if d_lo < best_depth && (pass == 1 || open(k, e.min[k])) {
                    best_depth = d_lo;
                    best = Some(Contact { axis: k, normal: -1.0, plane: e.min[k], surface: Surface::Obstacle(i) });
                }
                let d_hi = e.max[k] - p[k];
                if d_hi < best_depth && (pass == 1 || open(k, e.max[k])) {
                    best_depth = d_hi;
                    best = Some(Contact { axis: k, normal: 1.0, plane: e.max[k], surface: Surface::Obstacle(i) });
                }
            }
            if best.is_some() {
                break;
            }
        }
        contacts.extend(best);
    }
    for (i, a) in contacts.iter().enumerate() {
        for b in &contacts[i + 1..] {
            if a.axis == b.axis && a.normal != b.normal {
                return Err(Error::GeometryDegenerate { axis: a.axis, radius });
            }
        }
    }
    Ok(contacts)
}

/// Resolves penetration and returns the contacts that were handled.
pub fn resolve_contacts(state: &ObjectState, spec: &ObjectSpec, room: &RoomGeometry) -> Result<(ObjectState, Vec<Contact>)> {
    let contacts = detect_contacts(&state.o, spec.radius, room)?;
    if contacts.is_empty() {
        return Ok((*state, contacts));
    }
    let mut out = *state;
    let mut normal_axes = [false; 3];
    for c in &contacts {
        let k = c.axis;
        if normal_axes[k] {
            continue;
        }
        normal_axes[k] = true;
        out.o[k] = 2.0 * c.plane - out.o[k];
        if out.v[k] * c.normal < 0.0 {
            out.v[k] = -spec.bounciness * out.v[k];
        }
    }
    for k in 0..3 {
        if !normal_axes[k] {
            out.v[k] *= TANGENTIAL_FRICTION;
        }
    }
    Ok((out, contacts))
}

/// Reflects the sphere out of any wall or obstacle it penetrates.
pub fn resolve_collision(state: &ObjectState, spec: &ObjectSpec, room: &RoomGeometry) -> Result<(ObjectState, bool)> {
    let (s, contacts) = resolve_contacts(state, spec, room)?;
    Ok((s, !contacts.is_empty()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    Ground,
    Rest,
    StepCap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloorEvent {
    Bounce,
    Rest,
}

#[derive(Clone, Copy, Debug)]
pub struct SubstepReport {
    pub state: ObjectState,
    pub collided: bool,
    /// A new counted collision event started on this substep.
    pub new_event: bool,
    pub floor: Option<FloorEvent>,
}

impl SubstepReport {
    /// Whether this substep ends the flight under `cfg`.
    pub fn terminal(&self, cfg: &SimConfig) -> Option<Terminal> {
        match self.floor {
            Some(FloorEvent::Rest) => Some(Terminal::Rest),
            Some(FloorEvent::Bounce) if !cfg.floor_bounce_continues => Some(Terminal::Ground),
            _ => None,
        }
    }
}

/// Substep-resolution object simulator shared by the reference trajectory
/// generator and the episode runner so both see identical flights.
#[derive(Clone, Debug)]
pub struct ObjectSim<'a> {
    spec: &'a ObjectSpec,
    room: &'a RoomGeometry,
    cfg: &'a SimConfig,
    pub state: ObjectState,
    in_contact: bool,
    pub collision_count: usize,
}

impl<'a> ObjectSim<'a> {
    pub fn new(spec: &'a ObjectSpec, room: &'a RoomGeometry, cfg: &'a SimConfig, initial: ObjectState) -> Self {
        Self { spec, room, cfg, state: initial, in_contact: false, collision_count: 0 }
    }

    /// Object touching the floor with negligible speed.
    pub fn at_rest_on_floor(&self) -> bool {
        self.state.o.y - self.spec.radius <= self.room.floor_y() + 1e-9 && self.state.v.norm() < self.cfg.rest_speed_epsilon
    }

    pub fn substep(&mut self) -> Result<SubstepReport> {
        let moved = integrate_object_step(&self.state, self.spec, self.cfg.substep_dt(), self.cfg.gravity);
        let (state, contacts) = resolve_contacts(&moved, self.spec, self.room)?;
        self.state = state;
        let collided = !contacts.is_empty();
        let floor = if contacts.iter().any(|c| c.surface == Surface::Floor) {
            if state.v.norm() < self.cfg.rest_speed_epsilon {
                Some(FloorEvent::Rest)
            } else {
                Some(FloorEvent::Bounce)
            }
        } else {
            None
        };
        let counted = contacts.iter().any(|c| c.surface != Surface::Floor)
            || (floor == Some(FloorEvent::Bounce) && self.cfg.floor_bounce_continues);
        let new_event = counted && !self.in_contact;
        if new_event {
            self.collision_count += 1;
        }
        self.in_contact = collided;
        Ok(SubstepReport { state, collided, new_event, floor })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// States at control-step boundaries; `states[0]` is the initial state.
    pub states: Vec<ObjectState>,
    /// State at the moment the flight ended (mid-step for floor contacts).
    pub end_state: ObjectState,
    pub collision_count: usize,
    pub terminal: Terminal,
    /// Control step during which the flight ended (`max_steps` for the cap).
    pub terminal_step: usize,
}

impl Trajectory {
    pub fn positions(&self) -> Vec<Vec3> {
        self.states.iter().map(|s| s.o).collect()
    }

    /// Position at control step `t`, holding the end state afterwards.
    pub fn position_at(&self, t: usize) -> Vec3 {
        self.states.get(t).map(|s| s.o).unwrap_or(self.end_state.o)
    }
}

/// Rolls the object forward at substep resolution until it reaches the
/// floor, comes to rest, or `max_steps` control steps elapse.
pub fn simulate_trajectory(
    spec: &ObjectSpec,
    initial: &ObjectState,
    room: &RoomGeometry,
    cfg: &SimConfig,
    max_steps: usize,
) -> Result<Trajectory> {
    spec.validate()?;
    cfg.validate()?;
    if !room.bounds().expanded(Vec3::repeat(spec.radius)).contains(&initial.o) {
        return Err(Error::InvalidConfig("initial position outside the room".into()));
    }
    let mut sim = ObjectSim::new(spec, room, cfg, *initial);
    let mut states = vec![*initial];
    if sim.at_rest_on_floor() {
        return Ok(Trajectory { states, end_state: *initial, collision_count: 0, terminal: Terminal::Rest, terminal_step: 0 });
    }
    for step in 0..max_steps {
        for _ in 0..cfg.physics_substeps {
            let report = sim.substep()?;
            if let Some(terminal) = report.terminal(cfg) {
                return Ok(Trajectory {
                    states,
                    end_state: report.state,
                    collision_count: sim.collision_count,
                    terminal,
                    terminal_step: step,
                });
            }
        }
        states.push(sim.state);
    }
    Ok(Trajectory {
        end_state: sim.state,
        states,
        collision_count: sim.collision_count,
        terminal: Terminal::StepCap,
        terminal_step: max_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ball(drag: f64, bounciness: f64) -> ObjectSpec {
        ObjectSpec { id: "ball".into(), mass: 0.5, bounciness, drag, angular_drag: 0.0, radius: 0.05 }
    }

    fn empty_room(size: f64) -> RoomGeometry {
        RoomGeometry { min_corner: Vec3::zeros(), max_corner: Vec3::repeat(size), obstacles: vec![] }
    }

    #[test]
    fn integrate_applies_recurrence() {
        let s = ObjectState::new(Vec3::new(0.0, 2.0, 0.0), Vec3::new(1.0, 3.0, 0.0), Vec3::new(0.0, -9.81, 0.0));
        let n = integrate_object_step(&s, &ball(0.0, 0.5), 0.02, 9.81);
        assert_abs_diff_eq!(n.o, Vec3::new(0.02, 2.06, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(n.v, Vec3::new(1.0, 2.8038, 0.0), epsilon = 1e-12);
        assert_eq!(n.a, Vec3::new(0.0, -9.81, 0.0));
    }

    #[test]
    fn drag_decays_velocity() {
        let s = ObjectState::new(Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0), Vec3::zeros());
        let n = integrate_object_step(&s, &ball(0.5, 0.5), 0.02, 0.0);
        assert_abs_diff_eq!(n.v, Vec3::new(9.9, 0.0, 0.0), epsilon = 1e-12);
        // decay factor never goes negative
        let n = integrate_object_step(&s, &ball(100.0, 0.5), 0.02, 0.0);
        assert_eq!(n.v, Vec3::zeros());
    }

    #[test]
    fn floor_bounce_scales_normal_velocity() {
        let room = empty_room(6.0);
        let s = ObjectState::new(Vec3::new(1.0, 0.04, 1.0), Vec3::new(0.0, -4.0, 0.0), Vec3::zeros());
        let (n, hit) = resolve_collision(&s, &ball(0.0, 0.5), &room).unwrap();
        assert!(hit);
        assert_abs_diff_eq!(n.v, Vec3::new(0.0, 2.0, 0.0), epsilon = 1e-12);
        assert_abs_diff_eq!(n.o.y, 0.06, epsilon = 1e-12);

        let s = ObjectState::new(Vec3::new(1.0, 0.04, 1.0), Vec3::new(3.0, -4.0, 0.0), Vec3::zeros());
        let (n, _) = resolve_collision(&s, &ball(0.0, 1.0), &room).unwrap();
        assert_abs_diff_eq!(n.v, Vec3::new(2.85, 4.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn free_space_is_identity() {
        let room = RoomGeometry::living_room();
        let s = ObjectState::new(Vec3::new(3.0, 1.5, 1.0), Vec3::new(3.0, -4.0, 1.0), Vec3::zeros());
        let (n, hit) = resolve_collision(&s, &ball(0.0, 0.5), &room).unwrap();
        assert!(!hit);
        assert_eq!(n, s);
    }

    #[test]
    fn opposing_faces_are_degenerate() {
        let room = RoomGeometry { min_corner: Vec3::zeros(), max_corner: Vec3::new(0.08, 3.0, 3.0), obstacles: vec![] };
        let s = ObjectState::new(Vec3::new(0.04, 1.0, 1.0), Vec3::zeros(), Vec3::zeros());
        let err = resolve_collision(&s, &ball(0.0, 0.5), &room).unwrap_err();
        assert!(matches!(err, Error::GeometryDegenerate { axis: 0, .. }));
    }

    #[test]
    fn obstacle_top_bounce() {
        let room = RoomGeometry::living_room();
        // just inside the coffee table's top face
        let s = ObjectState::new(Vec3::new(4.3, 0.48, 2.6), Vec3::new(0.0, -2.0, 0.0), Vec3::zeros());
        let (n, hit) = resolve_collision(&s, &ball(0.0, 0.5), &room).unwrap();
        assert!(hit);
        assert_abs_diff_eq!(n.v.y, 1.0, epsilon = 1e-12);
        assert!(n.o.y > 0.5 - 1e-12);
    }

    #[test]
    fn floor_flush_obstacle_pushes_sideways() {
        let room = RoomGeometry::living_room();
        // under the sofa's edge, below floor + radius
        let s = ObjectState::new(Vec3::new(0.30, 0.0, 5.3), Vec3::new(1.0, -1.0, 0.0), Vec3::zeros());
        let spec = ObjectSpec { radius: 0.06, ..ball(0.0, 0.5) };
        let (n, hit) = resolve_collision(&s, &spec, &room).unwrap();
        assert!(hit);
        assert!(n.o.x <= 0.24 + 1e-12);
        assert!(n.o.y >= 0.06 - 1e-12);
    }

    #[test]
    fn resting_start_terminates_immediately() {
        let room = empty_room(6.0);
        let spec = ball(0.0, 0.5);
        let s = ObjectState::new(Vec3::new(3.0, spec.radius, 3.0), Vec3::zeros(), Vec3::new(0.0, -9.81, 0.0));
        let t = simulate_trajectory(&spec, &s, &room, &SimConfig::default(), 50).unwrap();
        assert_eq!(t.terminal, Terminal::Rest);
        assert_eq!(t.terminal_step, 0);
        assert_eq!(t.collision_count, 0);
    }

    #[test]
    fn step_cap_without_gravity() {
        let room = empty_room(6.0);
        let cfg = SimConfig { gravity: 0.0, ..SimConfig::default() };
        let s = ObjectState::new(Vec3::repeat(3.0), Vec3::zeros(), Vec3::zeros());
        let t = simulate_trajectory(&ball(0.0, 0.5), &s, &room, &cfg, 50).unwrap();
        assert_eq!(t.terminal, Terminal::StepCap);
        assert_eq!(t.states.len(), 51);
        assert_eq!(t.collision_count, 0);
    }

    #[test]
    fn wall_throw_flips_x_velocity() {
        let room = empty_room(6.0);
        let spec = ball(0.0, 0.8);
        let s = ObjectState::new(Vec3::new(5.0, 1.5, 3.0), Vec3::new(6.0, 2.0, 0.0), Vec3::new(0.0, -9.81, 0.0));
        let t = simulate_trajectory(&spec, &s, &room, &SimConfig::default(), 50).unwrap();
        assert!(t.collision_count >= 1);
        let first_neg = t.states.iter().position(|s| s.v.x < 0.0).expect("x velocity never flipped");
        assert!(t.states[..first_neg].iter().all(|s| s.v.x > 0.0));
    }

    #[test]
    fn floor_bounce_can_continue() {
        let room = empty_room(6.0);
        let spec = ball(0.0, 0.8);
        let s = ObjectState::new(Vec3::new(3.0, 0.5, 3.0), Vec3::zeros(), Vec3::new(0.0, -9.81, 0.0));
        let cfg = SimConfig { floor_bounce_continues: true, ..SimConfig::default() };
        let t = simulate_trajectory(&spec, &s, &room, &cfg, 50).unwrap();
        assert_eq!(t.terminal, Terminal::StepCap);
        assert!(t.collision_count >= 1);
        let t = simulate_trajectory(&spec, &s, &room, &SimConfig::default(), 50).unwrap();
        assert_eq!(t.terminal, Terminal::Ground);
        assert_eq!(t.collision_count, 0);
    }

    #[test]
    fn living_room_is_valid() {
        RoomGeometry::living_room().validate().unwrap();
        let bad = RoomGeometry { min_corner: Vec3::zeros(), max_corner: Vec3::new(1.0, -1.0, 1.0), obstacles: vec![] };
        assert!(bad.validate().is_err());
    }
}
