//! Sampling-based model-predictive control: roll out candidate acceleration
//! sequences for the drone, score them against the object forecast and keep
//! the best one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{kinematic_step, AgentState, DroneSpec};
use crate::error::{Error, Result};
use crate::forecaster::Forecast;
use crate::physics::{Aabb, ObjectState, Vec3};

/// Below this many candidates scoring stays on the calling thread.
const PARALLEL_THRESHOLD: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub accels: Vec<Vec3>,
}

/// `n` sequences of `horizon` accelerations stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub n: usize,
    pub horizon: usize,
    pub data: Vec<f64>,
}

impl CandidateSet {
    pub fn new(n: usize, horizon: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * horizon * 3 {
            return Err(Error::ShapeMismatch { expected: n * horizon * 3, got: data.len() });
        }
        Ok(Self { n, horizon, data })
    }

    pub fn from_sequences(seqs: &[ActionSequence]) -> Result<Self> {
        let horizon = seqs.first().map_or(0, |s| s.accels.len());
        let mut data = Vec::with_capacity(seqs.len() * horizon * 3);
        for s in seqs {
            if s.accels.len() != horizon {
                return Err(Error::ShapeMismatch { expected: horizon, got: s.accels.len() });
            }
            for a in &s.accels {
                data.extend_from_slice(a.as_slice());
            }
        }
        Self::new(seqs.len(), horizon, data)
    }

    pub fn raw(&self, j: usize) -> &[f64] {
        let w = self.horizon * 3;
        &self.data[j * w..(j + 1) * w]
    }

    pub fn sequence(&self, j: usize) -> ActionSequence {
        ActionSequence { accels: self.raw(j).chunks_exact(3).map(Vec3::from_column_slice).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Uniform,
    Policy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    Refreshed,
    MeOnly,
    CppStatic,
    KalmanStatic,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub n_samples: usize,
    pub horizon: usize,
    pub sampler: SamplerKind,
    pub forecast_mode: ForecastMode,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { n_samples: 1000, horizon: 3, sampler: SamplerKind::Uniform, forecast_mode: ForecastMode::Refreshed }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig("n_samples and horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Noise-free drone model used for planning.
#[derive(Clone, Debug)]
pub struct AgentModel {
    pub drone: DroneSpec,
    pub bounds: Aabb,
    pub dt: f64,
}

impl AgentModel {
    pub fn unbounded(drone: DroneSpec, dt: f64) -> Self {
        let big = Vec3::repeat(f64::MAX);
        Self { drone, bounds: Aabb::new(-big, big), dt }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub best_action: Vec3,
    /// Sum of the H agent-object distances, m.
    pub best_score: f64,
    pub best_index: usize,
    pub predicted_agent_path: Vec<Vec3>,
}

fn rollout_into(agent: &AgentState, raw: &[f64], model: &AgentModel, path: &mut Vec<Vec3>) {
    path.clear();
    let limit = model.drone.accel_limit();
    let mut s = *agent;
    for a in raw.chunks_exact(3) {
        let commanded = Vec3::new(a[0].clamp(-limit, limit), a[1].clamp(-limit, limit), a[2].clamp(-limit, limit));
        s = kinematic_step(&s, commanded, commanded, &model.drone, &model.bounds, model.dt);
        path.push(s.d);
    }
}

/// Positions `d_{t+1} ..= d_{t+H}` under `seq` with no movement noise.
pub fn rollout_agent(agent: &AgentState, seq: &ActionSequence, model: &AgentModel) -> Vec<Vec3> {
    let raw: Vec<f64> = seq.accels.iter().flat_map(|a| a.iter().copied()).collect();
    let mut path = Vec::with_capacity(seq.accels.len());
    rollout_into(agent, &raw, model, &mut path);
    path
}

pub fn score_sequence(path: &[Vec3], forecast: &Forecast) -> Result<f64> {
    if path.len() != forecast.positions.len() {
        return Err(Error::LengthMismatch { path: path.len(), forecast: forecast.positions.len() });
    }
    Ok(path.iter().zip(&forecast.positions).map(|(d, o)| (d - o).norm()).sum())
}

fn score_raw(agent: &AgentState, raw: &[f64], model: &AgentModel, target: &[Vec3]) -> f64 {
    let limit = model.drone.accel_limit();
    let mut s = *agent;
    let mut total = 0.0;
    for (a, o) in raw.chunks_exact(3).zip(target) {
        let commanded = Vec3::new(a[0].clamp(-limit, limit), a[1].clamp(-limit, limit), a[2].clamp(-limit, limit));
        s = kinematic_step(&s, commanded, commanded, &model.drone, &model.bounds, model.dt);
        total += (s.d - o).norm();
    }
    total
}

/// Scores every candidate and returns the lowest score, ties going to the
/// lowest index. The result does not depend on evaluation order.
pub fn plan_mpc(agent: &AgentState, forecast: &Forecast, candidates: &CandidateSet, model: &AgentModel) -> Result<PlanResult> {
    if candidates.n == 0 {
        return Err(Error::EmptyBatch);
    }
    if candidates.horizon != forecast.horizon() {
        return Err(Error::LengthMismatch { path: candidates.horizon, forecast: forecast.horizon() });
    }
    let target = &forecast.positions;
    let scores: Vec<f64> = if candidates.n >= PARALLEL_THRESHOLD {
        (0..candidates.n).into_par_iter().map(|j| score_raw(agent, candidates.raw(j), model, target)).collect()
    } else {
        (0..candidates.n).map(|j| score_raw(agent, candidates.raw(j), model, target)).collect()
    };
    let mut best = 0;
    for (j, s) in scores.iter().enumerate().skip(1) {
        if *s < scores[best] {
            best = j;
        }
    }
    let mut path = Vec::with_capacity(candidates.horizon);
    rollout_into(agent, candidates.raw(best), model, &mut path);
    let limit = model.drone.accel_limit();
    let first = candidates.raw(best);
    Ok(PlanResult {
        best_action: Vec3::new(first[0], first[1], first[2]).map(|c| c.clamp(-limit, limit)),
        best_score: scores[best],
        best_index: best,
        predicted_agent_path: path,
    })
}

/// Camera `(yaw, pitch)` pointing from `agent_pos` at `object_pos`.
pub fn camera_angles(object_pos: &Vec3, agent_pos: &Vec3) -> Result<(f64, f64)> {
    let p = object_pos - agent_pos;
    if p == Vec3::zeros() {
        return Err(Error::DegenerateDirection);
    }
    let theta = p.x.atan2(p.z);
    let phi = p.y.atan2(p.x.hypot(p.z));
    Ok((theta, phi))
}

/// `horizon` copies of a fixed target.
pub fn static_target_forecast(target: &Vec3, horizon: usize) -> Forecast {
    Forecast { positions: vec![*target; horizon], source_state: ObjectState::new(*target, Vec3::zeros(), Vec3::zeros()) }
}
