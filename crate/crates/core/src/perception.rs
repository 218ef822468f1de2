//! Noisy, field-of-view gated object observations and the current-state
//! estimators built on them.

use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::environment::{AgentState, EpisodeRecord};
use crate::error::{Error, Result};
use crate::physics::{ObjectState, Vec3};

pub const DEFAULT_MEASUREMENT_VARIANCE: f64 = 3e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: usize,
    /// Noisy object position in the agent's start frame; `None` when the
    /// object was outside the camera's field of view.
    pub pos: Option<Vec3>,
    pub visible: bool,
}

impl Observation {
    pub fn seen(t: usize, pos: Vec3) -> Self {
        Self { t, pos: Some(pos), visible: true }
    }

    pub fn missing(t: usize) -> Self {
        Self { t, pos: None, visible: false }
    }
}

/// Unit vector of the camera's optical axis.
pub fn camera_axis(phi: f64, theta: f64) -> Vec3 {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    Vec3::new(cp * st, sp, cp * ct)
}

/// Whether `target` lies within `fov_deg / 2` of the camera axis at `eye`.
pub fn in_view(eye: &Vec3, phi: f64, theta: f64, target: &Vec3, fov_deg: f64) -> bool {
    let ray = target - eye;
    let len = ray.norm();
    if len == 0.0 {
        return true;
    }
    ray.dot(&camera_axis(phi, theta)) >= len * (0.5 * fov_deg).to_radians().cos()
}

/// Camera reading of the object. Three normal draws are consumed whether or
/// not the object is visible, so noise stays aligned across camera policies.
pub fn observe(agent: &AgentState, object: &ObjectState, sigma_obs: f64, fov_deg: f64, rng: &mut impl Rng) -> Observation {
    let mut noise = Vec3::zeros();
    for k in 0..3 {
        let n: f64 = StandardNormal.sample(rng);
        noise[k] = sigma_obs * n;
    }
    if in_view(&agent.d, agent.phi, agent.theta, &object.o, fov_deg) {
        Observation::seen(0, object.o + noise)
    } else {
        Observation::missing(0)
    }
}

/// The three most recent observations, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationWindow {
    pub obs: [Observation; 3],
}

impl ObservationWindow {
    pub fn new(obs: [Observation; 3]) -> Result<Self> {
        if obs[1].t != obs[0].t + 1 || obs[2].t != obs[1].t + 1 {
            return Err(Error::InvalidConfig("observation window must hold consecutive steps".into()));
        }
        Ok(Self { obs })
    }

    /// Last three entries of a history, if it has that many.
    pub fn latest(history: &[Observation]) -> Option<Self> {
        let n = history.len();
        if n < 3 {
            return None;
        }
        Self::new([history[n - 3].clone(), history[n - 2].clone(), history[n - 1].clone()]).ok()
    }

    pub fn positions(&self) -> Result<[Vec3; 3]> {
        match (self.obs[0].pos, self.obs[1].pos, self.obs[2].pos) {
            (Some(a), Some(b), Some(c)) => Ok([a, b, c]),
            _ => Err(Error::InsufficientObservations("window has a missing observation")),
        }
    }

    pub fn all_visible(&self) -> bool {
        self.obs.iter().all(|o| o.pos.is_some())
    }
}

/// State from three positions. The velocity is the one the discrete motion
/// recurrence carries at `t`, `(p_t − p_{t−1})/dt + a·dt`, so the estimate is
/// exact on positions generated by that recurrence.
pub fn finite_difference_estimate(window: &ObservationWindow, dt: f64) -> Result<ObjectState> {
    let [p0, p1, p2] = window.positions()?;
    Ok(finite_difference_from(&p0, &p1, &p2, dt))
}

pub(crate) fn finite_difference_from(p0: &Vec3, p1: &Vec3, p2: &Vec3, dt: f64) -> ObjectState {
    let a = (p2 - 2.0 * p1 + p0) / (dt * dt);
    let v = (p2 - p1) / dt + a * dt;
    ObjectState::new(*p2, v, a)
}

/// Latest observed position.
pub fn cpp_estimate(window: &ObservationWindow) -> Result<Vec3> {
    window.obs[2].pos.ok_or(Error::InsufficientObservations("latest observation missing"))
}

/// Per-axis Kalman filter with a constant-drift transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    pub mean: Vec3,
    pub covariance: Matrix3<f64>,
    /// Mean per-step object displacement.
    pub transition_drift: Vec3,
    /// Added to the covariance diagonal on every prediction.
    pub process_variance: Vec3,
    pub measurement_variance: f64,
    /// False until the first visible observation seeds the mean.
    pub initialized: bool,
}

impl KalmanState {
    pub fn new(transition_drift: Vec3, process_variance: Vec3, measurement_variance: f64) -> Self {
        Self {
            mean: Vec3::zeros(),
            covariance: Matrix3::zeros(),
            transition_drift,
            process_variance,
            measurement_variance,
            initialized: false,
        }
    }

    /// Fresh filter with the same model parameters.
    pub fn reset(&self) -> Self {
        Self::new(self.transition_drift, self.process_variance, self.measurement_variance)
    }
}

/// Filter prototype fitted from per-step displacements of the true object
/// positions in `records`.
pub fn kalman_init(records: &[EpisodeRecord]) -> Result<KalmanState> {
    let paths: Vec<Vec<Vec3>> = records.iter().map(|r| r.steps.iter().map(|s| s.object.o).collect()).collect();
    kalman_init_from_paths(&paths)
}

/// The process term is the per-axis standard deviation of the displacements,
/// used directly as a variance.
pub fn kalman_init_from_paths(paths: &[Vec<Vec3>]) -> Result<KalmanState> {
    let mut n = 0usize;
    let mut sum = Vec3::zeros();
    for p in paths {
        for w in p.windows(2) {
            sum += w[1] - w[0];
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mean = sum / n as f64;
    let mut sq = Vec3::zeros();
    for p in paths {
        for w in p.windows(2) {
            let dev = w[1] - w[0] - mean;
            sq += dev.component_mul(&dev);
        }
    }
    let std = (sq / n as f64).map(f64::sqrt);
    Ok(KalmanState::new(mean, std, DEFAULT_MEASUREMENT_VARIANCE))
}

pub fn kalman_predict(state: &KalmanState) -> KalmanState {
    let mut next = state.clone();
    if !state.initialized {
        return next;
    }
    next.mean += state.transition_drift;
    for k in 0..3 {
        next.covariance[(k, k)] += state.process_variance[k];
    }
    next
}

pub fn kalman_correct(state: &KalmanState, z: &Vec3) -> KalmanState {
    let mut next = state.clone();
    if !state.initialized {
        next.mean = *z;
        next.covariance = Matrix3::identity() * state.measurement_variance;
        next.initialized = true;
        return next;
    }
    for k in 0..3 {
        let p = state.covariance[(k, k)];
        let denom = p + state.measurement_variance;
        let gain = if denom > 0.0 { p / denom } else { 0.0 };
        next.mean[k] = state.mean[k] + gain * (z[k] - state.mean[k]);
        next.covariance[(k, k)] = (1.0 - gain) * p;
    }
    next
}

/// Predict, then correct if the observation is visible.
pub fn kalman_update(state: &KalmanState, obs: &Observation) -> KalmanState {
    let predicted = kalman_predict(state);
    match obs.pos {
        Some(z) => kalman_correct(&predicted, &z),
        None => predicted,
    }
}
