//! Object forecasting: constant-acceleration rollouts and a learned current
//! state estimator trained with an L1 loss.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::AgentState;
use crate::error::{Error, Result};
use crate::neural::{adam_step, AdamState, Mlp};
use crate::perception::ObservationWindow;
use crate::physics::{ObjectState, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    /// Predicted positions for steps `t+1 ..= t+H`.
    pub positions: Vec<Vec3>,
    pub source_state: ObjectState,
}

impl Forecast {
    pub fn horizon(&self) -> usize {
        self.positions.len()
    }

    /// `len` positions starting at `start`, repeating the last one past the end.
    pub fn slice(&self, start: usize, len: usize) -> Forecast {
        let last = self.positions.len().saturating_sub(1);
        let positions = (0..len).map(|k| self.positions[(start + k).min(last)]).collect();
        Forecast { positions, source_state: self.source_state }
    }
}

/// One step of the discrete motion recurrence.
pub fn nme_step(state: &ObjectState, dt: f64) -> ObjectState {
    ObjectState::new(state.o + state.v * dt, state.v + state.a * dt, state.a)
}

pub fn nme_rollout(state: &ObjectState, horizon: usize, dt: f64) -> Forecast {
    let mut positions = Vec::with_capacity(horizon);
    let mut s = *state;
    for _ in 0..horizon {
        s = nme_step(&s, dt);
        positions.push(s.o);
    }
    Forecast { positions, source_state: *state }
}

/// Whole-episode rollout from a single early estimate, never refreshed.
pub fn me_forecast_full(initial: &ObjectState, total_steps: usize, dt: f64) -> Forecast {
    nme_rollout(initial, total_steps, dt)
}

pub const ESTIMATOR_INPUTS: usize = 20;
pub const ESTIMATOR_OUTPUTS: usize = 9;

/// Window positions (latest, first and second differences) and the agent state.
pub fn estimator_features(window: &[Vec3; 3], agent: &AgentState) -> [f64; ESTIMATOR_INPUTS] {
    let [p0, p1, p2] = window;
    let d1 = p2 - p1;
    let d2 = p2 - 2.0 * p1 + p0;
    let mut f = [0.0; ESTIMATOR_INPUTS];
    f[..3].copy_from_slice(p2.as_slice());
    f[3..6].copy_from_slice(d1.as_slice());
    f[6..9].copy_from_slice(d2.as_slice());
    f[9..].copy_from_slice(&agent.to_array());
    f
}

/// Target layout: position offset from the latest observation, velocity,
/// acceleration.
fn estimator_target(window: &[Vec3; 3], truth: &ObjectState) -> [f64; ESTIMATOR_OUTPUTS] {
    let off = truth.o - window[2];
    let mut t = [0.0; ESTIMATOR_OUTPUTS];
    t[..3].copy_from_slice(off.as_slice());
    t[3..6].copy_from_slice(truth.v.as_slice());
    t[6..].copy_from_slice(truth.a.as_slice());
    t
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(n: usize) -> Self {
        Self { mean: vec![0.0; n], std: vec![1.0; n] }
    }

    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows[0].len();
        let m = rows.len() as f64;
        let mut mean = vec![0.0; n];
        for r in rows {
            for (a, x) in mean.iter_mut().zip(r) {
                *a += x;
            }
        }
        mean.iter_mut().for_each(|a| *a /= m);
        let mut var = vec![0.0; n];
        for r in rows {
            for k in 0..n {
                var[k] += (r[k] - mean[k]).powi(2);
            }
        }
        let std = var.iter().map(|v| (v / m).sqrt()).map(|s| if s > 1e-8 { s } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((z, m), s)| m + s * z).collect()
    }
}

/// Learned current-state estimator. The network works on standardized
/// features and standardized targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedEstimator {
    pub net: Mlp,
    pub inputs: Standardizer,
    pub outputs: Standardizer,
}

impl LearnedEstimator {
    pub fn new(hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            net: Mlp::new(&[ESTIMATOR_INPUTS, hidden, hidden, ESTIMATOR_OUTPUTS], rng)?,
            inputs: Standardizer::identity(ESTIMATOR_INPUTS),
            outputs: Standardizer::identity(ESTIMATOR_OUTPUTS),
        })
    }

    pub fn zeroed(hidden: usize) -> Result<Self> {
        Ok(Self {
            net: Mlp::zeros(&[ESTIMATOR_INPUTS, hidden, hidden, ESTIMATOR_OUTPUTS])?,
            inputs: Standardizer::identity(ESTIMATOR_INPUTS),
            outputs: Standardizer::identity(ESTIMATOR_OUTPUTS),
        })
    }

    pub fn estimate_positions(&self, window: &[Vec3; 3], agent: &AgentState) -> Result<ObjectState> {
        let x = self.inputs.forward(&estimator_features(window, agent));
        let y = self.outputs.inverse(&self.net.predict(&x)?);
        Ok(ObjectState::new(window[2] + Vec3::new(y[0], y[1], y[2]), Vec3::new(y[3], y[4], y[5]), Vec3::new(y[6], y[7], y[8])))
    }
}

pub fn learned_estimate(est: &LearnedEstimator, window: &ObservationWindow, agent: &AgentState) -> Result<ObjectState> {
    est.estimate_positions(&window.positions()?, agent)
}

/// One supervised example: noisy window, agent state and the true object state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSample {
    pub window: [Vec3; 3],
    pub agent: AgentState,
    pub truth: ObjectState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorTrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for EstimatorTrainConfig {
    fn default() -> Self {
        Self { hidden: 64, epochs: 12, batch_size: 64, lr: 1e-3 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    /// Mean L1 loss (standardized units) of each minibatch, in order.
    pub batch_loss: Vec<f64>,
    /// Mean minibatch loss per epoch.
    pub epoch_loss: Vec<f64>,
}

/// Mean absolute error over the 9 standardized outputs.
pub fn l1_loss(est: &LearnedEstimator, samples: &[EstimatorSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for s in samples {
        let x = est.inputs.forward(&estimator_features(&s.window, &s.agent));
        let y = est.net.predict(&x)?;
        let t = est.outputs.forward(&estimator_target(&s.window, &s.truth));
        total += y.iter().zip(&t).map(|(a, b)| (a - b).abs()).sum::<f64>() / ESTIMATOR_OUTPUTS as f64;
    }
    Ok(total / samples.len() as f64)
}

pub fn train_estimator(samples: &[EstimatorSample], cfg: &EstimatorTrainConfig, rng: &mut impl Rng) -> Result<(LearnedEstimator, TrainingCurve)> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let xs: Vec<Vec<f64>> = samples.iter().map(|s| estimator_features(&s.window, &s.agent).to_vec()).collect();
    let ts: Vec<Vec<f64>> = samples.iter().map(|s| estimator_target(&s.window, &s.truth).to_vec()).collect();
    let mut est = LearnedEstimator::new(cfg.hidden, rng)?;
    est.inputs = Standardizer::fit(&xs);
    est.outputs = Standardizer::fit(&ts);
    let xs: Vec<Vec<f64>> = xs.iter().map(|x| est.inputs.forward(x)).collect();
    let ts: Vec<Vec<f64>> = ts.iter().map(|t| est.outputs.forward(t)).collect();

    let mut adam = AdamState::for_net(&est.net, cfg.lr);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut curve = TrainingCurve::default();
    let mut grads = vec![0.0; est.net.n_params()];
    let mut g_out = vec![0.0; ESTIMATOR_OUTPUTS];
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / (chunk.len() * ESTIMATOR_OUTPUTS) as f64;
            let mut loss = 0.0;
            for &i in chunk {
                let (y, cache) = est.net.forward(&xs[i])?;
                for k in 0..ESTIMATOR_OUTPUTS {
                    let r = y[k] - ts[i][k];
                    loss += r.abs();
                    g_out[k] = scale * if r > 0.0 { 1.0 } else if r < 0.0 { -1.0 } else { 0.0 };
                }
                est.net.backward(&cache, &g_out, &mut grads)?;
            }
            adam_step(&mut est.net, &grads, &mut adam)?;
            let l = loss * scale;
            curve.batch_loss.push(l);
            epoch_sum += l;
            batches += 1;
        }
        curve.epoch_loss.push(epoch_sum / batches as f64);
    }
    Ok((est, curve))
}

/// Mean and std of L2 errors over a set of estimates, in SI units and in
/// per-control-step units (velocity × dt, acceleration × dt²).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub position: (f64, f64),
    pub velocity: (f64, f64),
    pub acceleration: (f64, f64),
    pub velocity_per_step: (f64, f64),
    pub acceleration_per_step: (f64, f64),
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Errors of `(estimate, truth)` pairs.
pub fn error_stats(pairs: &[(ObjectState, ObjectState)], dt: f64) -> ErrorStats {
    let p: Vec<f64> = pairs.iter().map(|(e, t)| (e.o - t.o).norm()).collect();
    let v: Vec<f64> = pairs.iter().map(|(e, t)| (e.v - t.v).norm()).collect();
    let a: Vec<f64> = pairs.iter().map(|(e, t)| (e.a - t.a).norm()).collect();
    let vs: Vec<f64> = v.iter().map(|x| x * dt).collect();
    let as_: Vec<f64> = a.iter().map(|x| x * dt * dt).collect();
    ErrorStats {
        count: pairs.len(),
        position: mean_std(&p),
        velocity: mean_std(&v),
        acceleration: mean_std(&a),
        velocity_per_step: mean_std(&vs),
        acceleration_per_step: mean_std(&as_),
    }
}
