//! Controllers for every benchmarked method, built from the estimator,
//! forecaster, sampler and planner pieces.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{stream_rng, AgentState, Command, ControlInput, Controller, DroneSpec, EpisodeContext, PolicyTrace, Stream};
use crate::error::{Error, Result};
use crate::forecaster::{me_forecast_full, nme_rollout, nme_step, Forecast, LearnedEstimator};
use crate::perception::{finite_difference_estimate, kalman_update, KalmanState, Observation, ObservationWindow};
use crate::physics::{ObjectState, Vec3};
use crate::planner::{camera_angles, plan_mpc, static_target_forecast, AgentModel, ForecastMode, PlannerConfig, SamplerKind};
use crate::policy::{model_free_act, model_free_sample, policy_features, policy_sample, uniform_sample, ModelFreeNet, PolicyContext, PolicyNet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Learned estimator, refreshed rollout, policy sampler.
    Full,
    /// Learned estimator, refreshed rollout, uniform sampler.
    UniformAs,
    /// One early estimate rolled out for the whole episode, uniform sampler.
    Me,
    /// Latest observation as a static target.
    Cpp,
    /// Kalman-filtered observation as a static target.
    CppKalman,
    ModelFree,
    /// True future trajectory, uniform sampler.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 7] = [Method::Full, Method::UniformAs, Method::Me, Method::Cpp, Method::CppKalman, Method::ModelFree, Method::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::UniformAs => "uniform-as",
            Method::Me => "me",
            Method::Cpp => "cpp",
            Method::CppKalman => "cpp-kalman",
            Method::ModelFree => "model-free",
            Method::Oracle => "oracle",
        }
    }

    pub fn forecast_mode(self) -> Option<ForecastMode> {
        match self {
            Method::Full | Method::UniformAs => Some(ForecastMode::Refreshed),
            Method::Me => Some(ForecastMode::MeOnly),
            Method::Cpp => Some(ForecastMode::CppStatic),
            Method::CppKalman => Some(ForecastMode::KalmanStatic),
            Method::Oracle => Some(ForecastMode::Oracle),
            Method::ModelFree => None,
        }
    }

    pub fn sampler(self) -> SamplerKind {
        if self == Method::Full {
            SamplerKind::Policy
        } else {
            SamplerKind::Uniform
        }
    }

    pub fn planner_config(self, n_samples: usize, horizon: usize) -> PlannerConfig {
        PlannerConfig { n_samples, horizon, sampler: self.sampler(), forecast_mode: self.forecast_mode().unwrap_or(ForecastMode::Refreshed) }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// Trained components a controller may need.
#[derive(Clone, Debug, Default)]
pub struct Models {
    /// `None` falls back to finite differences.
    pub estimator: Option<Arc<LearnedEstimator>>,
    pub policy: Option<Arc<PolicyNet>>,
    pub kalman: Option<KalmanState>,
    pub model_free: Option<Arc<ModelFreeNet>>,
}

fn missing(method: Method, what: &str) -> Error {
    Error::MissingCheckpoint { method: method.name().into(), what: what.into() }
}

/// Builds the controller for `method`. With `training` set, learned samplers
/// record traces of the executed action.
pub fn make_controller(method: Method, planner: &PlannerConfig, models: &Models, training: bool) -> Result<Box<dyn Controller + Send>> {
    planner.validate()?;
    match method {
        Method::ModelFree => {
            let net = models.model_free.clone().ok_or_else(|| missing(method, "model-free network"))?;
            Ok(Box::new(ModelFreeController::new(net, training)))
        }
        _ => {
            if planner.sampler == SamplerKind::Policy {
                let p = models.policy.as_ref().ok_or_else(|| missing(method, "policy network"))?;
                if p.horizon != planner.horizon {
                    return Err(Error::InvalidConfig(format!("policy trained for horizon {}, planner uses {}", p.horizon, planner.horizon)));
                }
            }
            if planner.forecast_mode == ForecastMode::KalmanStatic && models.kalman.is_none() {
                return Err(missing(method, "kalman filter parameters"));
            }
            Ok(Box::new(MpcController::new(planner.clone(), models.clone(), training)))
        }
    }
}

fn latest_visible(obs: &[Observation]) -> Option<Vec3> {
    obs.iter().rev().find_map(|o| o.pos)
}

/// Sampling MPC with a configurable forecast source.
pub struct MpcController {
    cfg: PlannerConfig,
    models: Models,
    training: bool,
    model: Option<AgentModel>,
    max_steps: usize,
    ground_truth: Option<Vec<Vec3>>,
    rng: Option<ChaCha8Rng>,
    last_estimate: Option<ObjectState>,
    me_forecast: Option<(usize, Forecast)>,
    kalman: Option<KalmanState>,
    last_target: Option<Vec3>,
}

impl MpcController {
    pub fn new(cfg: PlannerConfig, models: Models, training: bool) -> Self {
        Self {
            cfg,
            models,
            training,
            model: None,
            max_steps: 0,
            ground_truth: None,
            rng: None,
            last_estimate: None,
            me_forecast: None,
            kalman: None,
            last_target: None,
        }
    }

    fn estimate(&self, window: &ObservationWindow, agent: &AgentState, dt: f64) -> Result<ObjectState> {
        match &self.models.estimator {
            Some(est) => crate::forecaster::learned_estimate(est, window, agent),
            None => finite_difference_estimate(window, dt),
        }
    }

    /// Forecast for this step plus the object estimate it came from.
    fn forecast(&mut self, input: &ControlInput<'_>, dt: f64) -> Result<Option<(Forecast, ObjectState)>> {
        let h = self.cfg.horizon;
        let t = input.t;
        let window = ObservationWindow::latest(input.observations).filter(|w| w.all_visible());
        let static_fc = |p: Vec3| {
            let f = static_target_forecast(&p, h);
            let s = f.source_state;
            (f, s)
        };
        Ok(match self.cfg.forecast_mode {
            ForecastMode::Oracle => {
                let gt = self.ground_truth.as_ref().ok_or(Error::InsufficientObservations("oracle needs the true trajectory"))?;
                let last = gt.len() - 1;
                let positions = (1..=h).map(|k| gt[(t + k).min(last)]).collect();
                Some((Forecast { positions, source_state: ObjectState::new(gt[t.min(last)], Vec3::zeros(), Vec3::zeros()) }, ObjectState::new(gt[t.min(last)], Vec3::zeros(), Vec3::zeros())))
            }
            ForecastMode::CppStatic => {
                if let Some(p) = input.observations.last().and_then(|o| o.pos) {
                    self.last_target = Some(p);
                }
                self.last_target.map(static_fc)
            }
            ForecastMode::KalmanStatic => {
                let k = self.kalman.as_ref().expect("filter is set in begin");
                let k = kalman_update(k, input.observations.last().expect("one observation per step"));
                let target = k.initialized.then_some(k.mean);
                self.kalman = Some(k);
                target.map(static_fc)
            }
            ForecastMode::Refreshed => {
                let est = match window {
                    Some(w) => Some(self.estimate(&w, input.agent, dt)?),
                    None => self.last_estimate.map(|s| nme_step(&s, dt)),
                };
                match est {
                    Some(s) => {
                        self.last_estimate = Some(s);
                        Some((nme_rollout(&s, h, dt), s))
                    }
                    None => latest_visible(input.observations).map(static_fc),
                }
            }
            ForecastMode::MeOnly => {
                if self.me_forecast.is_none() {
                    if let Some(w) = window {
                        let s = self.estimate(&w, input.agent, dt)?;
                        self.me_forecast = Some((t, me_forecast_full(&s, self.max_steps + h, dt)));
                    }
                }
                match &self.me_forecast {
                    Some((t0, f)) => {
                        let fc = f.slice(t - t0, h);
                        let src = if t == *t0 { f.source_state } else { ObjectState::new(f.positions[(t - t0 - 1).min(f.positions.len() - 1)], Vec3::zeros(), Vec3::zeros()) };
                        Some((fc, src))
                    }
                    None => latest_visible(input.observations).map(static_fc),
                }
            }
        })
    }
}

impl Controller for MpcController {
    fn begin(&mut self, ctx: &EpisodeContext) -> Result<()> {
        self.model = Some(AgentModel { drone: ctx.drone.clone(), bounds: ctx.flight_box, dt: ctx.dt });
        self.max_steps = ctx.max_steps;
        self.ground_truth = ctx.ground_truth.clone();
        self.rng = Some(stream_rng(ctx.seed, Stream::Planner(ctx.repeat)));
        self.last_estimate = None;
        self.me_forecast = None;
        self.kalman = self.models.kalman.as_ref().map(|k| k.reset());
        self.last_target = None;
        if self.cfg.forecast_mode == ForecastMode::Oracle && self.ground_truth.is_none() {
            return Err(Error::InvalidConfig("oracle forecasting needs the true trajectory".into()));
        }
        Ok(())
    }

    fn act(&mut self, input: &ControlInput<'_>) -> Result<Command> {
        let dt = self.model.as_ref().expect("begin runs first").dt;
        let Some((forecast, source)) = self.forecast(input, dt)? else {
            return Ok(Command::hold());
        };
        let model = self.model.as_ref().expect("begin runs first");
        let rng = self.rng.as_mut().expect("begin runs first");
        let n = self.cfg.n_samples;
        let h = self.cfg.horizon;
        let (candidates, policy_draw) = match self.cfg.sampler {
            SamplerKind::Uniform => (uniform_sample(n, h, &model.drone, rng), None),
            SamplerKind::Policy => {
                let policy = self.models.policy.as_ref().expect("checked at construction");
                let input_vec = policy_features(&PolicyContext { agent: input.agent, forecast: &forecast.positions, object: &source });
                let (c, raw, dist) = policy_sample(policy, &input_vec, n, &model.drone, rng)?;
                (c, Some((policy, input_vec, raw, dist)))
            }
        };
        let plan = plan_mpc(input.agent, &forecast, &candidates, model)?;
        let trace = match policy_draw {
            Some((policy, input_vec, raw, dist)) if self.training => {
                let w = 3 * h;
                let first = raw[plan.best_index * w..plan.best_index * w + 3].to_vec();
                let log_prob = policy.head.log_prob(&dist, &first);
                Some(PolicyTrace { input: input_vec, raw_action: first, log_prob, candidates: raw })
            }
            _ => None,
        };
        let camera = camera_angles(&forecast.positions[0], &plan.predicted_agent_path[0]).ok();
        let estimate = match self.cfg.forecast_mode {
            ForecastMode::Oracle => None,
            _ => Some(source),
        };
        Ok(Command { action: plan.best_action, camera, estimate, trace })
    }

    fn wants_ground_truth(&self) -> bool {
        self.cfg.forecast_mode == ForecastMode::Oracle
    }
}

/// Direct window-to-action control.
pub struct ModelFreeController {
    net: Arc<ModelFreeNet>,
    training: bool,
    drone: DroneSpec,
    dt: f64,
    rng: Option<ChaCha8Rng>,
}

impl ModelFreeController {
    pub fn new(net: Arc<ModelFreeNet>, training: bool) -> Self {
        Self { net, training, drone: DroneSpec::default(), dt: 0.02, rng: None }
    }
}

impl Controller for ModelFreeController {
    fn begin(&mut self, ctx: &EpisodeContext) -> Result<()> {
        self.drone = ctx.drone.clone();
        self.dt = ctx.dt;
        self.rng = Some(stream_rng(ctx.seed, Stream::Planner(ctx.repeat)));
        Ok(())
    }

    fn act(&mut self, input: &ControlInput<'_>) -> Result<Command> {
        let window = ObservationWindow::latest(input.observations).and_then(|w| w.positions().ok());
        let next_d = input.agent.d + input.agent.v * self.dt;
        let camera = latest_visible(input.observations).and_then(|p| camera_angles(&p, &next_d).ok());
        let (action, trace) = match (&window, self.training) {
            (Some(w), true) => {
                let (a, tr) = model_free_sample(&self.net, w, input.agent, &self.drone, self.rng.as_mut().expect("begin runs first"))?;
                (a, Some(tr))
            }
            _ => (model_free_act(&self.net, window.as_ref(), input.agent, &self.drone)?, None),
        };
        Ok(Command { action, camera, estimate: None, trace })
    }
}
