//! Training loops: estimator supervision from simulated episodes and
//! actor-critic training of the learned sampler and the direct-control
//! baseline.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{make_controller, Method, Models, ModelFreeController};
use crate::environment::{run_episode, stream_rng, Controller, EpisodeConfig, EpisodeRecord, RunOptions, Stream};
use crate::error::{Error, Result};
use crate::forecaster::{train_estimator, EstimatorSample, EstimatorTrainConfig, LearnedEstimator, TrainingCurve};
use crate::perception::ObservationWindow;
use crate::policy::{actor_critic_update, policy_input_dim, ActorCritic, ActorCriticConfig, CriticNet, GaussianHead, ModelFreeNet, PolicyNet, MODEL_FREE_INPUTS};

/// Runs `configs` under controllers built by `make`, in parallel when asked,
/// returning records in input order.
pub fn run_many<F>(configs: &[(EpisodeConfig, RunOptions)], make: F, parallel: bool) -> Result<Vec<EpisodeRecord>>
where
    F: Fn() -> Result<Box<dyn Controller + Send>> + Sync,
{
    let one = |(cfg, opts): &(EpisodeConfig, RunOptions)| -> Result<EpisodeRecord> {
        let mut c = make()?;
        run_episode(cfg, c.as_mut(), opts)
    };
    if parallel {
        configs.par_iter().map(one).collect()
    } else {
        configs.iter().map(one).collect()
    }
}

/// Supervised windows from recorded episodes: every step whose three most
/// recent observations are visible, paired with the true object state.
pub fn estimator_samples(records: &[EpisodeRecord]) -> Vec<EstimatorSample> {
    let mut out = Vec::new();
    for r in records {
        let shift = -r.origin;
        let obs: Vec<_> = r.steps.iter().map(|s| s.observation.clone()).collect();
        for t in 2..r.steps.len() {
            let Some(w) = ObservationWindow::latest(&obs[..=t]) else { continue };
            let Ok(window) = w.positions() else { continue };
            let s = &r.steps[t];
            let mut truth = s.object;
            truth.o += shift;
            out.push(EstimatorSample { window, agent: s.agent.translated(&shift), truth });
        }
    }
    out
}

/// Episodes used to gather estimator data are flown by the static-target
/// baseline so agent states and camera angles look like deployment.
pub fn collect_estimator_samples(configs: &[EpisodeConfig], opts: &RunOptions, n_samples: usize, parallel: bool) -> Result<Vec<EstimatorSample>> {
    let runs: Vec<_> = configs.iter().map(|c| (c.clone(), opts.clone())).collect();
    let planner = Method::Cpp.planner_config(n_samples, 3);
    let models = Models::default();
    let records = run_many(&runs, || make_controller(Method::Cpp, &planner, &models, false), parallel)?;
    Ok(estimator_samples(&records))
}

pub fn train_forecaster(configs: &[EpisodeConfig], opts: &RunOptions, cfg: &EstimatorTrainConfig, seed: u64, parallel: bool) -> Result<(LearnedEstimator, TrainingCurve)> {
    let samples = collect_estimator_samples(configs, opts, 100, parallel)?;
    let mut rng = stream_rng(seed, Stream::Training(0));
    train_estimator(&samples, cfg, &mut rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyTrainConfig {
    pub episodes: usize,
    pub batch_episodes: usize,
    pub n_samples: usize,
    pub horizon: usize,
    pub hidden: usize,
    /// Episodes at the start drawn only from collision-free throws.
    pub curriculum_easy_episodes: usize,
    pub actor_critic: ActorCriticConfig,
    pub seed: u64,
}

impl Default for PolicyTrainConfig {
    fn default() -> Self {
        Self {
            episodes: 20_000,
            batch_episodes: 20,
            n_samples: 10,
            horizon: 3,
            hidden: 64,
            curriculum_easy_episodes: 5_000,
            actor_critic: ActorCriticConfig::default(),
            seed: 17,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainPoint {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub entropy: f64,
    pub critic_loss: f64,
}

/// Seeds of a training schedule: easy throws first, then the whole pool.
fn schedule(pool: &[EpisodeConfig], easy: &[bool], cfg: &PolicyTrainConfig) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let easy_idx: Vec<usize> = (0..pool.len()).filter(|&i| easy.get(i).copied().unwrap_or(false)).collect();
    let mut rng = stream_rng(cfg.seed, Stream::Training(1));
    Ok((0..cfg.episodes)
        .map(|e| {
            if e < cfg.curriculum_easy_episodes && !easy_idx.is_empty() {
                easy_idx[rng.random_range(0..easy_idx.len())]
            } else {
                rng.random_range(0..pool.len())
            }
        })
        .collect())
}

fn train_loop<F>(pool: &[EpisodeConfig], easy: &[bool], opts: &RunOptions, cfg: &PolicyTrainConfig, ac: &mut ActorCritic, make: F, parallel: bool) -> Result<Vec<TrainPoint>>
where
    F: Fn(&GaussianHead) -> Result<Box<dyn Controller + Send>> + Sync,
{
    let order = schedule(pool, easy, cfg)?;
    let mut curve = Vec::new();
    let mut done = 0;
    for batch in order.chunks(cfg.batch_episodes.max(1)) {
        let runs: Vec<_> = batch
            .iter()
            .enumerate()
            .map(|(k, &i)| (pool[i].clone(), RunOptions { repeat: (done + k) as u32 + 1, ..opts.clone() }))
            .collect();
        let head = ac.head.clone();
        let records = run_many(&runs, || make(&head), parallel)?;
        done += batch.len();
        let caught = records.iter().filter(|r| r.caught()).count();
        let diag = actor_critic_update(ac, &records, &cfg.actor_critic);
        let (mean_return, entropy, critic_loss) = match diag {
            Ok(d) => (d.mean_return, d.entropy, d.critic_loss),
            Err(Error::EmptyBatch) => (0.0, 0.0, 0.0),
            Err(e) => return Err(e),
        };
        curve.push(TrainPoint { episodes: done, success_rate: caught as f64 / batch.len() as f64, mean_return, entropy, critic_loss });
    }
    Ok(curve)
}

/// Trains the sampler with the forecaster frozen.
pub fn train_policy(pool: &[EpisodeConfig], easy: &[bool], models: &Models, opts: &RunOptions, cfg: &PolicyTrainConfig, parallel: bool) -> Result<(PolicyNet, CriticNet, Vec<TrainPoint>)> {
    let drone = pool.first().ok_or(Error::EmptyTrainingSet)?.drone.clone();
    let mut rng = stream_rng(cfg.seed, Stream::Training(2));
    let policy = PolicyNet::new(cfg.horizon, cfg.hidden, &drone, &mut rng)?;
    let critic = CriticNet::new(policy_input_dim(cfg.horizon), cfg.hidden, &mut rng)?;
    let mut ac = ActorCritic::new(policy.head, critic, &cfg.actor_critic);
    let planner = Method::Full.planner_config(cfg.n_samples, cfg.horizon);
    let horizon = cfg.horizon;
    let curve = train_loop(
        pool,
        easy,
        opts,
        cfg,
        &mut ac,
        |head| {
            let mut m = models.clone();
            m.policy = Some(Arc::new(PolicyNet { head: head.clone(), horizon }));
            make_controller(Method::Full, &planner, &m, true)
        },
        parallel,
    )?;
    Ok((PolicyNet { head: ac.head, horizon }, ac.critic, curve))
}

pub fn train_model_free(pool: &[EpisodeConfig], easy: &[bool], opts: &RunOptions, cfg: &PolicyTrainConfig, parallel: bool) -> Result<(ModelFreeNet, Vec<TrainPoint>)> {
    let drone = pool.first().ok_or(Error::EmptyTrainingSet)?.drone.clone();
    let mut rng = stream_rng(cfg.seed, Stream::Training(3));
    let net = ModelFreeNet::new(cfg.hidden, &drone, &mut rng)?;
    let critic = CriticNet::new(MODEL_FREE_INPUTS, cfg.hidden, &mut rng)?;
    let mut ac = ActorCritic::new(net.head, critic, &cfg.actor_critic);
    let curve = train_loop(
        pool,
        easy,
        opts,
        cfg,
        &mut ac,
        |head| Ok(Box::new(ModelFreeController::new(Arc::new(ModelFreeNet { head: head.clone() }), true)) as Box<dyn Controller + Send>),
        parallel,
    )?;
    Ok((ModelFreeNet { head: ac.head }, curve))
}

/// Means of consecutive non-overlapping windows.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    values.chunks(window.max(1)).filter(|c| c.len() == window.max(1)).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}
