//! Reference computations shared by the oracle and acceptance targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dronecatch::environment::{AgentState, DroneSpec};
use dronecatch::forecaster::Forecast;
use dronecatch::neural::Mlp;
use dronecatch::physics::{ObjectSpec, ObjectState, RoomGeometry, Vec3};
use dronecatch::planner::{plan_mpc, AgentModel, CandidateSet};

pub const DT: f64 = 0.02;
pub const G: f64 = 9.81;

pub fn ball(drag: f64, bounciness: f64) -> ObjectSpec {
    ObjectSpec { id: "ball".into(), mass: 0.5, bounciness, drag, angular_drag: 0.0, radius: 0.05 }
}

pub fn big_room() -> RoomGeometry {
    RoomGeometry { min_corner: Vec3::new(-100.0, 0.0, -100.0), max_corner: Vec3::new(100.0, 100.0, 100.0), obstacles: vec![] }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `o_m = o_0 + m·v_0·h + a·h²·m(m−1)/2`, `v_m = v_0 + m·a·h`.
pub fn closed_form(o0: Vec3, v0: Vec3, a: Vec3, h: f64, m: usize) -> (Vec3, Vec3) {
    let m = m as f64;
    (o0 + v0 * (m * h) + a * (h * h * m * (m - 1.0) / 2.0), v0 + a * (m * h))
}

/// Sum of distances under the noise-free drone recurrence with speed cap.
pub fn oracle_score(agent: &AgentState, seq: &[Vec3], target: &[Vec3], drone: &DroneSpec) -> f64 {
    let mut d = agent.d;
    let mut v = agent.v;
    let mut total = 0.0;
    for (a, o) in seq.iter().zip(target) {
        d += v * DT;
        v += a * DT;
        let s = v.norm();
        if s > drone.max_velocity {
            v *= drone.max_velocity / s;
        }
        let e = d - o;
        total += (e.x * e.x + e.y * e.y + e.z * e.z).sqrt();
    }
    total
}

/// Every sequence of `horizon` actions with components drawn from `levels`.
pub fn enumerate_sequences(levels: &[f64], horizon: usize) -> Vec<Vec<Vec3>> {
    let mut per_step = Vec::new();
    for &x in levels {
        for &y in levels {
            for &z in levels {
                per_step.push(Vec3::new(x, y, z));
            }
        }
    }
    let mut seqs = vec![vec![]];
    for _ in 0..horizon {
        seqs = seqs.into_iter().flat_map(|s| per_step.iter().map(move |a| [s.clone(), vec![*a]].concat())).collect();
    }
    seqs
}

/// The enumerable candidate sets used for the planner check. Some entries are
/// repeated so that exact ties occur.
pub fn enumerable_sets() -> Vec<(usize, Vec<Vec<Vec3>>)> {
    let mut out = Vec::new();
    for (levels, horizon) in [(vec![-25.0, 0.0, 25.0], 1), (vec![-25.0, 0.0, 25.0], 2), (vec![-25.0, 25.0], 3), (vec![-25.0, -5.0, 5.0, 25.0], 2)] {
        let mut seqs = enumerate_sequences(&levels, horizon);
        let dup: Vec<_> = seqs.iter().step_by(7).cloned().collect();
        if seqs.len() + dup.len() <= 4096 {
            seqs.extend(dup);
        } else {
            let n = seqs.len();
            for (i, d) in dup.into_iter().enumerate() {
                seqs[n - 1 - i] = d;
            }
        }
        out.push((horizon, seqs));
    }
    out
}

/// Runs `per_set` random states per enumerable set; returns (states checked,
/// mismatches).
pub fn exhaustive_planner_check(per_set: usize, seed: u64) -> (usize, usize) {
    let drone = DroneSpec::default();
    let model = AgentModel::unbounded(drone.clone(), DT);
    let mut r = rng(seed);
    let (mut states, mut bad) = (0, 0);
    for (horizon, seqs) in enumerable_sets() {
        assert!(seqs.len() <= 4096);
        let data: Vec<f64> = seqs.iter().flat_map(|s| s.iter().flat_map(|a| a.iter().copied())).collect();
        let cands = CandidateSet::new(seqs.len(), horizon, data).unwrap();
        for _ in 0..per_set {
            let mut agent = AgentState::at_rest(Vec3::from_fn(|_, _| r.random_range(-2.0..2.0)));
            agent.v = Vec3::from_fn(|_, _| r.random_range(-8.0..8.0));
            let target: Vec<Vec3> = (0..horizon).map(|_| Vec3::from_fn(|_, _| r.random_range(-3.0..3.0))).collect();
            let forecast = Forecast { positions: target.clone(), source_state: ObjectState::new(target[0], Vec3::zeros(), Vec3::zeros()) };
            let plan = plan_mpc(&agent, &forecast, &cands, &model).unwrap();
            let scores: Vec<f64> = seqs.iter().map(|s| oracle_score(&agent, s, &target, &drone)).collect();
            let mut best = 0;
            for j in 1..scores.len() {
                if scores[j] < scores[best] {
                    best = j;
                }
            }
            if plan.best_index != best || plan.best_score != scores[best] || plan.best_action != seqs[best][0] {
                bad += 1;
            }
            states += 1;
        }
    }
    (states, bad)
}

/// Layer sizes of every network the pipeline trains, plus a small one.
pub const ARCHITECTURES: [&[usize]; 6] = [
    &[4, 5, 3],
    &[20, 64, 64, 9],
    &[29, 64, 64, 18],
    &[29, 64, 64, 1],
    &[20, 64, 64, 6],
    &[20, 64, 64, 1],
];

/// Scalar test loss `Σ c_k·y_k + ½·Σ y_k²` and its output gradient.
fn probe_loss(y: &[f64], c: &[f64]) -> (f64, Vec<f64>) {
    let l = y.iter().zip(c).map(|(y, c)| c * y + 0.5 * y * y).sum();
    (l, y.iter().zip(c).map(|(y, c)| c + y).collect())
}

/// Relative error with the denominator floored at 1e-3, so gradients that
/// are zero up to rounding do not divide by noise.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Largest relative error between backpropagated and central-difference
/// gradients, over every parameter and input.
pub fn max_gradient_error(sizes: &[usize], seed: u64) -> f64 {
    let eps = 1e-5;
    let mut r = rng(seed);
    let mut net = Mlp::new(sizes, &mut r).unwrap();
    let n = net.n_params();
    for p in net.params_mut().iter_mut() {
        *p += r.random_range(-0.05..0.05);
    }
    let x: Vec<f64> = (0..sizes[0]).map(|_| r.random_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| r.random_range(-1.0..1.0)).collect();
    let (y, cache) = net.forward(&x).unwrap();
    let (_, gy) = probe_loss(&y, &c);
    let mut grads = vec![0.0; n];
    let gx = net.backward(&cache, &gy, &mut grads).unwrap();

    let loss_at = |net: &Mlp, x: &[f64]| probe_loss(&net.predict(x).unwrap(), &c).0;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let orig = net.params()[j];
        net.params_mut()[j] = orig + eps;
        let lp = loss_at(&net, &x);
        net.params_mut()[j] = orig - eps;
        let lm = loss_at(&net, &x);
        net.params_mut()[j] = orig;
        worst = worst.max(rel_err(grads[j], (lp - lm) / (2.0 * eps)));
    }
    for k in 0..x.len() {
        let mut xp = x.clone();
        xp[k] += eps;
        let mut xm = x.clone();
        xm[k] -= eps;
        worst = worst.max(rel_err(gx[k], (loss_at(&net, &xp) - loss_at(&net, &xm)) / (2.0 * eps)));
    }
    worst
}
