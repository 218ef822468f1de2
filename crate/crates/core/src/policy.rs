//! Candidate action samplers (uniform and a learned Gaussian policy), the
//! actor-critic update and the direct-control baseline network.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::environment::{step_rewards, AgentState, DroneSpec, EpisodeRecord, PolicyTrace};
use crate::error::{Error, Result};
use crate::neural::{adam_step, AdamState, Mlp};
use crate::physics::{ObjectState, Vec3};
use crate::planner::CandidateSet;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardSpec {
    pub success_bonus: f64,
    pub distance_coefficient: f64,
    pub gamma: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self { success_bonus: 1.0, distance_coefficient: 0.01, gamma: 0.99 }
    }
}

/// `G_t = r_t + γ·G_{t+1}`, accumulated from the last step.
pub fn compute_returns(record: &EpisodeRecord, spec: &RewardSpec) -> Vec<f64> {
    discounted_returns(&step_rewards(&record.steps, record.caught(), spec), spec.gamma)
}

pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for t in (0..rewards.len()).rev() {
        g = rewards[t] + gamma * g;
        out[t] = g;
    }
    out
}

/// `n` sequences with every component uniform on `±accel_limit`.
pub fn uniform_sample(n: usize, horizon: usize, drone: &DroneSpec, rng: &mut impl Rng) -> CandidateSet {
    let limit = drone.accel_limit();
    let dist = Uniform::new_inclusive(-limit, limit).expect("positive acceleration limit");
    let data: Vec<f64> = (0..n * horizon * 3).map(|_| dist.sample(rng)).collect();
    CandidateSet { n, horizon, data }
}

/// Fixed input scaling shared by the policy and critic.
const POS_SCALE: f64 = 2.0;
const VEL_SCALE: f64 = 10.0;
const ACC_SCALE: f64 = 25.0;

/// What the sampler is conditioned on at one control step.
#[derive(Clone, Debug)]
pub struct PolicyContext<'a> {
    pub agent: &'a AgentState,
    /// Forecast positions `o_{t+1..t+H}`.
    pub forecast: &'a [Vec3],
    pub object: &'a ObjectState,
}

/// Agent state, forecast relative to the drone and the object estimate
/// relative to the drone, all rescaled to order one.
pub fn policy_features(ctx: &PolicyContext<'_>) -> Vec<f64> {
    let a = ctx.agent;
    let mut f = Vec::with_capacity(20 + 3 * ctx.forecast.len());
    f.extend(a.d.iter().map(|x| x / POS_SCALE));
    f.extend(a.v.iter().map(|x| x / VEL_SCALE));
    f.extend(a.a.iter().map(|x| x / ACC_SCALE));
    f.push(a.phi);
    f.push(a.theta);
    for p in ctx.forecast {
        f.extend((p - a.d).iter().map(|x| x / POS_SCALE));
    }
    f.extend((ctx.object.o - a.d).iter().map(|x| x / POS_SCALE));
    f.extend(ctx.object.v.iter().map(|x| x / VEL_SCALE));
    f.extend(ctx.object.a.iter().map(|x| x / ACC_SCALE));
    f
}

pub fn policy_input_dim(horizon: usize) -> usize {
    20 + 3 * horizon
}

/// Diagonal Gaussian over an action block, in units of `max_accel`. The
/// network emits `[mean; raw_log_std]`; the log-std used is the raw value plus
/// `log_std_offset`, clamped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianHead {
    pub net: Mlp,
    pub action_dim: usize,
    pub log_std_offset: f64,
    pub max_accel: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Whether the clamp was inactive (gradient flows).
    pub log_std_free: Vec<bool>,
}

impl GaussianHead {
    pub fn new(input_dim: usize, action_dim: usize, hidden: usize, log_std_offset: f64, max_accel: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Mlp::new(&[input_dim, hidden, hidden, 2 * action_dim], rng)?;
        net.zero_output_layer();
        Ok(Self { net, action_dim, log_std_offset, max_accel })
    }

    fn split(&self, out: &[f64]) -> GaussianParams {
        let k = self.action_dim;
        let mean = out[..k].to_vec();
        let mut log_std = Vec::with_capacity(k);
        let mut free = Vec::with_capacity(k);
        for raw in &out[k..] {
            let l = raw + self.log_std_offset;
            free.push((LOG_STD_MIN..=LOG_STD_MAX).contains(&l));
            log_std.push(l.clamp(LOG_STD_MIN, LOG_STD_MAX));
        }
        GaussianParams { mean, log_std, log_std_free: free }
    }

    pub fn distribution(&self, input: &[f64]) -> Result<GaussianParams> {
        Ok(self.split(&self.net.predict(input)?))
    }

    /// Log-density of the first `raw.len()` dimensions of a draw, with `raw`
    /// in m/s². Longer slices are read as consecutive whole draws.
    pub fn log_prob(&self, dist: &GaussianParams, raw: &[f64]) -> f64 {
        let n = self.action_dim;
        raw.iter()
            .enumerate()
            .map(|(i, a)| {
                let k = i % n;
                let z = (a / self.max_accel - dist.mean[k]) / dist.log_std[k].exp();
                -0.5 * z * z - dist.log_std[k] - 0.5 * LN_2PI
            })
            .sum()
    }

    /// Accumulates `weight·∇logπ(raw) + entropy_weight·∇H` into `grads`;
    /// `raw` covers a prefix of the action dimensions or several whole draws.
    fn accumulate(&self, input: &[f64], raw: &[f64], weight: f64, entropy_weight: f64, grads: &mut [f64]) -> Result<()> {
        self.accumulate_strided(input, raw, self.action_dim, weight, entropy_weight, grads)
    }

    /// As `accumulate`, with `raw` read as draws of the first `stride`
    /// dimensions each.
    fn accumulate_strided(&self, input: &[f64], raw: &[f64], stride: usize, weight: f64, entropy_weight: f64, grads: &mut [f64]) -> Result<()> {
        let (out, cache) = self.net.forward(input)?;
        let dist = self.split(&out);
        let k = self.action_dim;
        let mut g = vec![0.0; 2 * k];
        for (j, a) in raw.iter().enumerate() {
            let i = j % stride.min(k);
            let sigma = dist.log_std[i].exp();
            let z = (a / self.max_accel - dist.mean[i]) / sigma;
            g[i] += weight * z / sigma;
            if dist.log_std_free[i] {
                g[k + i] += weight * (z * z - 1.0);
            }
        }
        for i in 0..k {
            if dist.log_std_free[i] {
                g[k + i] += entropy_weight;
            }
        }
        self.net.backward(&cache, &g, grads)?;
        Ok(())
    }
}

/// Entropy of the full diagonal Gaussian.
pub fn gaussian_entropy(dist: &GaussianParams) -> f64 {
    dist.log_std.iter().map(|l| l + 0.5 * (LN_2PI + 1.0)).sum()
}

/// Gaussian sampler over whole H×3 sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub head: GaussianHead,
    pub horizon: usize,
}

impl PolicyNet {
    pub fn new(horizon: usize, hidden: usize, drone: &DroneSpec, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self { head: GaussianHead::new(policy_input_dim(horizon), 3 * horizon, hidden, 0.0, drone.max_accel, rng)?, horizon })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticNet {
    pub net: Mlp,
}

impl CriticNet {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Mlp::new(&[input_dim, hidden, hidden, 1], rng)?;
        net.zero_output_layer();
        Ok(Self { net })
    }

    pub fn value(&self, input: &[f64]) -> Result<f64> {
        Ok(self.net.predict(input)?[0])
    }
}

/// Candidates drawn from the policy. Returns the clamped set plus the raw
/// (pre-clamp) draws so the executed action's density can be evaluated.
pub fn policy_sample(policy: &PolicyNet, input: &[f64], n: usize, drone: &DroneSpec, rng: &mut impl Rng) -> Result<(CandidateSet, Vec<f64>, GaussianParams)> {
    let dist = policy.head.distribution(input)?;
    let w = 3 * policy.horizon;
    let limit = drone.accel_limit();
    let sigma: Vec<f64> = dist.log_std.iter().map(|l| l.exp()).collect();
    let mut raw = Vec::with_capacity(n * w);
    for _ in 0..n {
        for k in 0..w {
            let e: f64 = StandardNormal.sample(rng);
            raw.push(drone.max_accel * (dist.mean[k] + sigma[k] * e));
        }
    }
    let data = raw.iter().map(|a| a.clamp(-limit, limit)).collect();
    Ok((CandidateSet { n, horizon: policy.horizon, data }, raw, dist))
}

/// Which draws the policy gradient scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Credit {
    /// Only the first action of the sequence the planner executed.
    Executed,
    /// Every sequence the sampler proposed; the planner's choice is treated
    /// as part of the environment.
    CandidateSet,
    /// First action of every proposed sequence.
    CandidateFirst,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActorCriticConfig {
    pub policy_lr: f64,
    pub critic_lr: f64,
    pub entropy_coefficient: f64,
    /// Center and scale advantages within each batch before the policy step.
    pub normalize_advantages: bool,
    /// Weight on later TD errors in the advantage; 1 gives G − V.
    pub gae_lambda: f64,
    pub credit: Credit,
    pub reward: RewardSpec,
}

impl Default for ActorCriticConfig {
    fn default() -> Self {
        Self {
            policy_lr: 1e-3,
            critic_lr: 1e-3,
            entropy_coefficient: 0.01,
            normalize_advantages: true,
            gae_lambda: 1.0,
            credit: Credit::CandidateFirst,
            reward: RewardSpec::default(),
        }
    }
}

/// Optimizer state for a policy head and its critic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorCritic {
    pub head: GaussianHead,
    pub critic: CriticNet,
    pub policy_opt: AdamState,
    pub critic_opt: AdamState,
}

impl ActorCritic {
    pub fn new(head: GaussianHead, critic: CriticNet, cfg: &ActorCriticConfig) -> Self {
        let policy_opt = AdamState::for_net(&head.net, cfg.policy_lr);
        let critic_opt = AdamState::for_net(&critic.net, cfg.critic_lr);
        Self { head, critic, policy_opt, critic_opt }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub samples: usize,
    pub mean_return: f64,
    pub mean_advantage: f64,
    pub entropy: f64,
    pub critic_loss: f64,
}

/// One actor-critic step over every traced step in `records`, reduced in
/// record order. The critic regresses on discounted returns; the policy
/// advantage is the λ-weighted sum of TD errors between traced steps, which
/// is exactly G − V at λ = 1.
pub fn actor_critic_update(ac: &mut ActorCritic, records: &[EpisodeRecord], cfg: &ActorCriticConfig) -> Result<UpdateDiagnostics> {
    let gamma = cfg.reward.gamma;
    // (trace, return, reward to next traced step, discount to it)
    let mut items: Vec<(&PolicyTrace, f64, f64, f64)> = Vec::new();
    let mut ends = Vec::new();
    for r in records {
        let rewards = step_rewards(&r.steps, r.caught(), &cfg.reward);
        let g = discounted_returns(&rewards, gamma);
        let traced: Vec<usize> = (0..r.steps.len()).filter(|&t| r.steps[t].trace.is_some()).collect();
        for (i, &t) in traced.iter().enumerate() {
            let next = traced.get(i + 1).copied();
            let stop = next.unwrap_or(rewards.len());
            let chunk = rewards[t..stop].iter().rev().fold(0.0, |acc, x| x + gamma * acc);
            let disc = if next.is_some() { gamma.powi((stop - t) as i32) } else { 0.0 };
            items.push((r.steps[t].trace.as_ref().expect("traced"), g[t], chunk, disc));
        }
        ends.push(items.len());
    }
    if items.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let m = items.len() as f64;
    let mut pg = vec![0.0; ac.head.net.n_params()];
    let mut cg = vec![0.0; ac.critic.net.n_params()];
    let mut diag = UpdateDiagnostics { samples: items.len(), ..Default::default() };
    let mut values = Vec::with_capacity(items.len());
    for (tr, g, _, _) in &items {
        let (v_out, cache) = ac.critic.net.forward(&tr.input)?;
        let v = v_out[0];
        ac.critic.net.backward(&cache, &[2.0 * (v - g) / m], &mut cg)?;
        values.push(v);
        diag.mean_return += g / m;
        diag.critic_loss += (v - g) * (v - g) / m;
    }
    let mut adv = vec![0.0; items.len()];
    let mut start = 0;
    for &end in &ends {
        let mut acc = 0.0;
        for i in (start..end).rev() {
            let (_, g, chunk, disc) = items[i];
            adv[i] = if cfg.gae_lambda == 1.0 {
                g - values[i]
            } else {
                let next_v = if i + 1 < end { values[i + 1] } else { 0.0 };
                acc = chunk + disc * next_v - values[i] + disc * cfg.gae_lambda * acc;
                acc
            };
        }
        start = end;
    }
    diag.mean_advantage = adv.iter().sum::<f64>() / m;
    if cfg.normalize_advantages && items.len() > 1 {
        let mu = diag.mean_advantage;
        let sd = (adv.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        for a in &mut adv {
            *a = if sd > 1e-12 { (*a - mu) / sd } else { 0.0 };
        }
    }
    for ((tr, ..), a) in items.iter().zip(&adv) {
        // Gradient descent on −A·logπ − c·H, so ascend with weights A/m and c/m.
        let w = ac.head.action_dim;
        match cfg.credit {
            Credit::CandidateSet if !tr.candidates.is_empty() => ac.head.accumulate(&tr.input, &tr.candidates, -a / m, -cfg.entropy_coefficient / m, &mut pg)?,
            Credit::CandidateFirst if !tr.candidates.is_empty() => {
                let firsts: Vec<f64> = tr.candidates.chunks(w).flat_map(|c| c[..tr.raw_action.len()].to_vec()).collect();
                ac.head.accumulate_strided(&tr.input, &firsts, tr.raw_action.len(), -a / m, -cfg.entropy_coefficient / m, &mut pg)?
            }
            _ => ac.head.accumulate(&tr.input, &tr.raw_action, -a / m, -cfg.entropy_coefficient / m, &mut pg)?,
        }
        diag.entropy += gaussian_entropy(&ac.head.distribution(&tr.input)?) / m;
    }
    adam_step(&mut ac.head.net, &pg, &mut ac.policy_opt)?;
    adam_step(&mut ac.critic.net, &cg, &mut ac.critic_opt)?;
    Ok(diag)
}

pub const MODEL_FREE_INPUTS: usize = 20;

/// Noisy window (latest position and its first differences relative to the
/// drone) and agent state.
pub fn model_free_features(window: &[Vec3; 3], agent: &AgentState) -> Vec<f64> {
    let [p0, p1, p2] = window;
    let mut f = Vec::with_capacity(MODEL_FREE_INPUTS);
    f.extend((p2 - agent.d).iter().map(|x| x / POS_SCALE));
    f.extend((p2 - p1).iter().map(|x| x / (POS_SCALE * 0.1)));
    f.extend((p1 - p0).iter().map(|x| x / (POS_SCALE * 0.1)));
    f.extend(agent.d.iter().map(|x| x / POS_SCALE));
    f.extend(agent.v.iter().map(|x| x / VEL_SCALE));
    f.extend(agent.a.iter().map(|x| x / ACC_SCALE));
    f.push(agent.phi);
    f.push(agent.theta);
    f
}

/// Direct window-to-action policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFreeNet {
    pub head: GaussianHead,
}

impl ModelFreeNet {
    pub fn new(hidden: usize, drone: &DroneSpec, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self { head: GaussianHead::new(MODEL_FREE_INPUTS, 3, hidden, -0.5, drone.max_accel, rng)? })
    }
}

/// Deterministic action (clamped mean); zero when the window is incomplete.
pub fn model_free_act(net: &ModelFreeNet, window: Option<&[Vec3; 3]>, agent: &AgentState, drone: &DroneSpec) -> Result<Vec3> {
    let Some(w) = window else {
        return Ok(Vec3::zeros());
    };
    let dist = net.head.distribution(&model_free_features(w, agent))?;
    let limit = drone.accel_limit();
    Ok(Vec3::from_fn(|k, _| (drone.max_accel * dist.mean[k]).clamp(-limit, limit)))
}

/// Stochastic action for training; returns the clamped action and its trace.
pub fn model_free_sample(net: &ModelFreeNet, window: &[Vec3; 3], agent: &AgentState, drone: &DroneSpec, rng: &mut impl Rng) -> Result<(Vec3, PolicyTrace)> {
    let input = model_free_features(window, agent);
    let dist = net.head.distribution(&input)?;
    let raw: Vec<f64> = (0..3)
        .map(|k| {
            let e: f64 = StandardNormal.sample(rng);
            drone.max_accel * (dist.mean[k] + dist.log_std[k].exp() * e)
        })
        .collect();
    let log_prob = net.head.log_prob(&dist, &raw);
    let limit = drone.accel_limit();
    let action = Vec3::from_fn(|k, _| raw[k].clamp(-limit, limit));
    Ok((action, PolicyTrace { input, raw_action: raw, log_prob, candidates: Vec::new() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{stream_rng, Stream};
    use crate::environment::Outcome;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_samples_in_bounds_and_seeded() {
        let drone = DroneSpec::default();
        let a = uniform_sample(100, 3, &drone, &mut stream_rng(1, Stream::Planner(0)));
        assert!(a.data.iter().all(|x| x.abs() <= 25.0));
        assert_eq!(a, uniform_sample(100, 3, &drone, &mut stream_rng(1, Stream::Planner(0))));
        let big = uniform_sample(100_000, 1, &drone, &mut stream_rng(2, Stream::Planner(0)));
        for k in 0..3 {
            let m: f64 = big.data.iter().skip(k).step_by(3).sum::<f64>() / 100_000.0;
            assert!(m.abs() < 0.5);
        }
    }

    #[test]
    fn uniform_prefix_property() {
        let drone = DroneSpec::default();
        let small = uniform_sample(10, 3, &drone, &mut stream_rng(5, Stream::Planner(0)));
        let large = uniform_sample(1000, 3, &drone, &mut stream_rng(5, Stream::Planner(0)));
        assert_eq!(small.data[..], large.data[..small.data.len()]);
    }

    #[test]
    fn returns_examples() {
        assert_eq!(discounted_returns(&[0.0, 0.0, 1.0], 1.0), vec![1.0, 1.0, 1.0]);
        let r: Vec<f64> = vec![-0.01; 10];
        assert_abs_diff_eq!(discounted_returns(&r, 1.0)[0], -0.1, epsilon = 1e-15);
        let r: Vec<f64> = (0..50).map(|t| -0.01 * (t as f64).sin().abs()).collect();
        let g = discounted_returns(&r, 0.99)[0];
        let direct: f64 = r.iter().enumerate().map(|(t, x)| 0.99f64.powi(t as i32) * x).sum();
        assert_abs_diff_eq!(g, direct, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_policy_samples_at_mean() {
        // The std is in units of max_accel, so the floor is 25·e⁻⁵ ≈ 0.168 m/s².
        let drone = DroneSpec::default();
        let mut p = PolicyNet::new(3, 16, &drone, &mut stream_rng(0, Stream::Training(0))).unwrap();
        p.head.log_std_offset = -50.0;
        let input = vec![0.3; policy_input_dim(3)];
        let (c, _, dist) = policy_sample(&p, &input, 2000, &drone, &mut stream_rng(0, Stream::Planner(0))).unwrap();
        assert!(dist.log_std.iter().all(|&l| l == LOG_STD_MIN));
        let floor = 25.0 * LOG_STD_MIN.exp();
        let mut sq = 0.0;
        for j in 0..2000 {
            for (k, a) in c.raw(j).iter().enumerate() {
                let dev = a - 25.0 * dist.mean[k];
                assert!(dev.abs() < 6.0 * floor);
                sq += dev * dev;
            }
        }
        let std = (sq / 18_000.0).sqrt();
        assert!((std / floor - 1.0).abs() < 0.05, "{std}");
    }

    #[test]
    fn log_prob_matches_density() {
        let drone = DroneSpec::default();
        let mut rng = stream_rng(3, Stream::Training(0));
        let mut p = PolicyNet::new(1, 8, &drone, &mut rng).unwrap();
        let n = p.head.net.n_params();
        for (i, w) in p.head.net.params_mut()[n - 12..].iter_mut().enumerate() {
            *w = 0.1 * i as f64 - 0.4;
        }
        let input = vec![0.1; policy_input_dim(1)];
        let dist = p.head.distribution(&input).unwrap();
        let raw = [3.0, -7.0, 12.0];
        let lp = p.head.log_prob(&dist, &raw);
        let mut direct = 0.0;
        for k in 0..3 {
            let s = dist.log_std[k].exp();
            let x = raw[k] / 25.0;
            direct += ((-(x - dist.mean[k]).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())).ln();
        }
        assert_abs_diff_eq!(lp, direct, epsilon = 1e-10);
    }

    fn traced_record(raw: f64, outcome: Outcome, input: &[f64]) -> EpisodeRecord {
        let cfg = crate::environment::EpisodeConfig::new(3, crate::catalog::default_catalog()[9].clone());
        let mut r = crate::environment::run_episode(&cfg, &mut crate::environment::NullController, &Default::default()).unwrap();
        r.outcome = outcome;
        for s in &mut r.steps {
            s.trace = Some(PolicyTrace { input: input.to_vec(), raw_action: vec![raw; 3], log_prob: 0.0, candidates: Vec::new() });
        }
        r
    }

    #[test]
    fn rewarded_actions_pull_the_mean() {
        let drone = DroneSpec::default();
        let p = PolicyNet::new(1, 16, &drone, &mut stream_rng(4, Stream::Training(0))).unwrap();
        let critic = CriticNet::new(policy_input_dim(1), 16, &mut stream_rng(5, Stream::Training(0))).unwrap();
        let cfg = ActorCriticConfig { entropy_coefficient: 0.0, policy_lr: 1e-3, ..Default::default() };
        let mut ac = ActorCritic::new(p.head, critic, &cfg);
        let input = vec![0.2; policy_input_dim(1)];
        let batch = [traced_record(10.0, Outcome::Caught, &input), traced_record(-10.0, Outcome::Ground, &input)];
        for _ in 0..200 {
            actor_critic_update(&mut ac, &batch, &cfg).unwrap();
        }
        let mean = ac.head.distribution(&input).unwrap().mean;
        assert!(mean[..3].iter().all(|&m| m > 0.05), "{mean:?}");
    }

    #[test]
    fn zero_advantage_leaves_policy_unchanged() {
        let drone = DroneSpec::default();
        let p = PolicyNet::new(1, 16, &drone, &mut stream_rng(4, Stream::Training(0))).unwrap();
        let critic = CriticNet::new(policy_input_dim(1), 16, &mut stream_rng(5, Stream::Training(0))).unwrap();
        let cfg = ActorCriticConfig { entropy_coefficient: 0.0, normalize_advantages: false, ..Default::default() };
        let mut ac = ActorCritic::new(p.head.clone(), critic, &cfg);
        // Zero rewards and a zero-output critic give A = 0 everywhere.
        let cfg = ActorCriticConfig { reward: RewardSpec { distance_coefficient: 0.0, ..RewardSpec::default() }, ..cfg };
        let input = vec![0.2; policy_input_dim(1)];
        let batch = [traced_record(10.0, Outcome::Ground, &input), traced_record(-3.0, Outcome::StepCap, &input)];
        actor_critic_update(&mut ac, &batch, &cfg).unwrap();
        assert_eq!(ac.head.net.params(), p.head.net.params());
    }

    #[test]
    fn model_free_missing_window_is_zero() {
        let drone = DroneSpec::default();
        let net = ModelFreeNet::new(16, &drone, &mut stream_rng(0, Stream::Training(0))).unwrap();
        let agent = AgentState::at_rest(Vec3::zeros());
        assert_eq!(model_free_act(&net, None, &agent, &drone).unwrap(), Vec3::zeros());
        let w = [Vec3::new(0.0, 1.0, 2.0); 3];
        assert_eq!(model_free_act(&net, Some(&w), &agent, &drone).unwrap(), Vec3::zeros());
    }
}
