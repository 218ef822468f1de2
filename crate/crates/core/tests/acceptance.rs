//! End-to-end acceptance run: trains every model on the default benchmark,
//! evaluates all twelve criteria and prints one PASS/FAIL line for each.
//! Exits nonzero if any criterion fails.

mod common;

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use dronecatch::agents::{Method, Models};
use dronecatch::bench::{generate_dataset, monotonic_violations, pooled_std, run_cell, sweep_cells, BenchmarkSpec, Cell, CellResult, Dataset, DatasetEntry, SweepAxis};
use dronecatch::environment::{stream_rng, CameraMode, EpisodeRecord, Stream};
use dronecatch::perception::{kalman_init_from_paths, kalman_update};
use dronecatch::physics::{integrate_object_step, simulate_trajectory, ObjectState, SimConfig, Terminal, Vec3};
use dronecatch::policy::PolicyNet;
use dronecatch::training::{smooth, train_forecaster, train_policy};

use common::*;

struct Runner {
    spec: BenchmarkSpec,
    ds: Dataset,
    models: Models,
    cache: HashMap<String, CellResult>,
    failed: Vec<usize>,
}

impl Runner {
    fn verdict(&mut self, n: usize, name: &str, pass: bool, detail: String) {
        println!("criterion {n:2} {name}: {}; {detail}", if pass { "PASS" } else { "FAIL" });
        std::io::stdout().flush().unwrap();
        if !pass {
            self.failed.push(n);
        }
    }

    /// Test-split result of `cell`, computed once.
    fn cell(&mut self, cell: &Cell) -> CellResult {
        let key = serde_json::to_string(cell).unwrap();
        if let Some(r) = self.cache.get(&key) {
            return r.clone();
        }
        let (r, _) = run_cell(&self.spec, &self.ds.test, cell, &self.models, true).unwrap();
        println!(
            "  {} N={} H={} mobility={} noise={} camera={:?}: {:.2} ± {:.2} %",
            cell.method, cell.n_samples, cell.horizon, cell.mobility, cell.move_noise, cell.camera, r.success_mean, r.success_std
        );
        self.cache.insert(key, r.clone());
        r
    }

    fn method(&mut self, method: Method, n: usize) -> CellResult {
        let c = Cell { n_samples: n, ..Cell::new(method, &self.spec) };
        self.cell(&c)
    }

    fn sweep(&mut self, axis: SweepAxis, method: Method) -> Vec<CellResult> {
        let base = Cell::new(method, &self.spec);
        sweep_cells(&self.spec, axis, &base).iter().map(|c| self.cell(c)).collect()
    }
}

fn curve(results: &[CellResult]) -> String {
    results.iter().map(|r| format!("{:.2}±{:.2}", r.success_mean, r.success_std)).collect::<Vec<_>>().join(", ")
}

fn integrator(r: &mut Runner) {
    let start = Instant::now();
    let a = Vec3::new(0.0, -G, 0.0);
    let mut worst: f64 = 0.0;
    for (o0, v0) in [(Vec3::new(0.0, 1.8, 0.0), Vec3::new(2.0, 5.0, 0.0)), (Vec3::new(-3.0, 2.5, 4.0), Vec3::new(6.0, 9.0, -7.0))] {
        let mut s = ObjectState::new(o0, v0, a);
        for n in 1..=50 {
            s = integrate_object_step(&s, &ball(0.0, 0.5), DT, G);
            let (o, v) = closed_form(o0, v0, a, DT, n);
            worst = worst.max((s.o - o).amax()).max((s.v - v).amax());
        }
        let cfg = SimConfig::default();
        let traj = simulate_trajectory(&ball(0.0, 0.5), &ObjectState::new(o0, v0, a), &big_room(), &cfg, 50).unwrap();
        assert_eq!(traj.terminal, Terminal::StepCap);
        assert_eq!(traj.collision_count, 0);
        for (n, st) in traj.states.iter().enumerate() {
            let (o, v) = closed_form(o0, v0, a, cfg.substep_dt(), n * cfg.physics_substeps);
            worst = worst.max((st.o - o).amax()).max((st.v - v).amax());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.verdict(1, "integrator", worst <= 1e-9 && secs < 1.0, format!("max abs error {worst:.2e} over 50 steps, {secs:.3} s"));
}

fn planner(r: &mut Runner) {
    let start = Instant::now();
    let (states, bad) = exhaustive_planner_check(30, 11);
    let secs = start.elapsed().as_secs_f64();
    r.verdict(2, "mpc equals exhaustive argmin", states >= 100 && bad == 0 && secs < 30.0, format!("{states} states, {bad} mismatches, {secs:.1} s"));
}

fn gradients(r: &mut Runner) {
    let errs: Vec<f64> = ARCHITECTURES.iter().enumerate().map(|(i, s)| max_gradient_error(s, i as u64)).collect();
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let detail = ARCHITECTURES.iter().zip(&errs).map(|(s, e)| format!("{s:?} {e:.1e}")).collect::<Vec<_>>().join(", ");
    r.verdict(3, "gradient checks", worst < 1e-4, detail);
}

fn kalman_benefit(r: &mut Runner) {
    let start = Instant::now();
    let proto = r.models.kalman.clone().unwrap();
    let spec = BenchmarkSpec { repeats: 1, ..r.spec.clone() };
    let cell = Cell::new(Method::CppKalman, &spec);
    let (_, records) = run_cell(&spec, &r.ds.test[..200], &cell, &r.models, true).unwrap();
    let (mut raw, mut filtered, mut n) = (0.0, 0.0, 0usize);
    for rec in &records {
        let mut k = proto.reset();
        for s in &rec.steps {
            k = kalman_update(&k, &s.observation);
            if let Some(z) = s.observation.pos {
                let truth = s.object.o - rec.origin;
                raw += (z - truth).norm_squared();
                filtered += (k.mean - truth).norm_squared();
                n += 1;
            }
        }
    }
    let (raw, filtered) = ((raw / n as f64).sqrt(), (filtered / n as f64).sqrt());
    let secs = start.elapsed().as_secs_f64();
    r.verdict(4, "kalman benefit", filtered < raw && secs < 60.0, format!("filtered RMSE {filtered:.4} m vs raw {raw:.4} m over {n} visible steps, {secs:.1} s"));
}

/// `a > b` beyond one pooled std.
fn clearly_above(a: &CellResult, b: &CellResult) -> bool {
    a.success_mean - b.success_mean > pooled_std(a, b)
}

/// `a ≥ b` within one pooled std.
fn not_below(a: &CellResult, b: &CellResult) -> bool {
    a.success_mean >= b.success_mean - pooled_std(a, b)
}

fn ordering(r: &mut Runner) {
    let start = Instant::now();
    let n = r.spec.n_samples;
    let oracle = r.method(Method::Oracle, n);
    let full = r.method(Method::Full, n);
    let uniform = r.method(Method::UniformAs, n);
    let kf = r.method(Method::CppKalman, n);
    let cpp = r.method(Method::Cpp, n);
    let me = r.method(Method::Me, n);
    let secs = start.elapsed().as_secs_f64();
    let checks = [
        ("oracle > full", clearly_above(&oracle, &full)),
        ("full >= uniform", not_below(&full, &uniform)),
        ("uniform > cpp-kalman", clearly_above(&uniform, &kf)),
        ("uniform > cpp", clearly_above(&uniform, &cpp)),
        ("cpp-kalman >= cpp", not_below(&kf, &cpp)),
        ("cpp-kalman > me", clearly_above(&kf, &me)),
        ("cpp > me", clearly_above(&cpp, &me)),
    ];
    let broken: Vec<_> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    r.verdict(
        5,
        "method ordering",
        broken.is_empty() && secs < 900.0,
        format!("oracle, full, uniform, cpp-kalman, cpp, me = {}; violated {broken:?}; {secs:.0} s", curve(&[oracle, full, uniform, kf, cpp, me])),
    );
}

fn low_n(r: &mut Runner) {
    let start = Instant::now();
    let full = r.method(Method::Full, 10);
    let uniform = r.method(Method::UniformAs, 10);
    let secs = start.elapsed().as_secs_f64();
    let gap = full.success_mean - uniform.success_mean;
    let p = pooled_std(&full, &uniform);
    r.verdict(6, "low-N sampler", gap > p && secs < 300.0, format!("full {} vs uniform {} at N=10, gap {gap:.2} vs pooled std {p:.2}, {secs:.0} s", curve(std::slice::from_ref(&full)), curve(std::slice::from_ref(&uniform))));
}

fn sweeps(r: &mut Runner) {
    let n = r.sweep(SweepAxis::NSamples, Method::UniformAs);
    let mobility = r.sweep(SweepAxis::Mobility, Method::UniformAs);
    let noise = r.sweep(SweepAxis::Noise, Method::UniformAs);
    let camera = r.sweep(SweepAxis::Camera, Method::Full);
    let v_n = monotonic_violations(&n, true, 1.0);
    let v_m = monotonic_violations(&mobility, false, 1.0);
    let v_s = monotonic_violations(&noise, false, 1.0);
    let rot = camera.iter().find(|c| c.cell.camera == CameraMode::Rotating).unwrap();
    let fixed = camera.iter().find(|c| c.cell.camera == CameraMode::Fixed).unwrap();
    let cam_ok = fixed.success_mean <= rot.success_mean + pooled_std(fixed, rot);
    r.verdict(
        7,
        "monotonic sweeps",
        v_n.is_empty() && v_m.is_empty() && v_s.is_empty() && cam_ok,
        format!(
            "N {:?}: [{}] violations {v_n:?}; mobility {:?}: [{}] violations {v_m:?}; noise {:?}: [{}] violations {v_s:?}; camera rotating {:.2} fixed {:.2} ground-truth {:.2}",
            r.spec.n_sweep,
            curve(&n),
            r.spec.mobility_sweep,
            curve(&mobility),
            r.spec.noise_sweep,
            curve(&noise),
            rot.success_mean,
            fixed.success_mean,
            camera.iter().find(|c| c.cell.camera == CameraMode::GroundTruth).map_or(f64::NAN, |c| c.success_mean),
        ),
    );
}

fn difficulty(r: &mut Runner) {
    let full = r.method(Method::Full, r.spec.n_samples);
    let [e, m, d] = full.difficulty.map(|b| b.rate());
    let counts = full.difficulty.map(|b| b.episodes);
    r.verdict(
        8,
        "difficulty ordering",
        e > m && m > d && d >= 0.0 && e - d > 10.0,
        format!("easy {e:.2} medium {m:.2} difficult {d:.2} % over {counts:?} episodes"),
    );
}

fn horizon(r: &mut Runner) {
    let hs = r.sweep(SweepAxis::Horizon, Method::UniformAs);
    let at = |h: usize| hs.iter().find(|c| c.cell.horizon == h).unwrap();
    let (h3, h6) = (at(3), at(6));
    let ok = not_below(h3, h6);
    r.verdict(
        9,
        "horizon",
        ok,
        format!("H {:?}: [{}]; H=3 {:.2} vs H=6 {:.2}, pooled std {:.2}", r.spec.horizon_sweep, curve(&hs), h3.success_mean, h6.success_mean, pooled_std(h3, h6)),
    );
}

fn errors(r: &mut Runner) {
    let full = r.method(Method::Full, r.spec.n_samples);
    let e = full.errors.unwrap();
    println!(
        "  position {:.4} ± {:.4} m; velocity {:.4} ± {:.4} m/s = {:.4} ± {:.4} m/step; acceleration {:.4} ± {:.4} m/s² = {:.5} ± {:.5} m/step²; {} estimates",
        e.position.0,
        e.position.1,
        e.velocity.0,
        e.velocity.1,
        e.velocity_per_step.0,
        e.velocity_per_step.1,
        e.acceleration.0,
        e.acceleration.1,
        e.acceleration_per_step.0,
        e.acceleration_per_step.1,
        e.count
    );
    r.verdict(
        10,
        "forecaster error report",
        e.count > 0 && e.velocity_per_step.0 < e.position.0,
        format!("velocity {:.4} m/step < position {:.4} m", e.velocity_per_step.0, e.position.0),
    );
}

fn records_json(recs: &[EpisodeRecord]) -> String {
    serde_json::to_string(recs).unwrap()
}

fn determinism(r: &mut Runner) {
    let subset: &[DatasetEntry] = &r.ds.test[..40];
    let mut same = true;
    let mut detail = Vec::new();
    for (method, n) in [(Method::Full, r.spec.n_samples), (Method::UniformAs, 10), (Method::Oracle, r.spec.n_samples)] {
        let cell = Cell { n_samples: n, ..Cell::new(method, &r.spec) };
        let (a, ra) = run_cell(&r.spec, subset, &cell, &r.models, false).unwrap();
        let (b, rb) = run_cell(&r.spec, subset, &cell, &r.models, true).unwrap();
        let eq = serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap() && records_json(&ra) == records_json(&rb);
        same &= eq;
        detail.push(format!("{method} N={n} {}", if eq { "identical" } else { "differs" }));
    }
    r.verdict(11, "serial vs parallel determinism", same, format!("{} records per cell: {}", subset.len() * r.spec.repeats as usize, detail.join(", ")));
}

fn training(r: &mut Runner, policy_curve: &[f64], forecaster_epochs: &[f64]) {
    let spec = r.spec.clone();
    let drone = spec.drone.clone();
    let cfg = &spec.policy;
    let untrained = PolicyNet::new(cfg.horizon, cfg.hidden, &drone, &mut stream_rng(cfg.seed, Stream::Training(2))).unwrap();
    let cell = Cell { n_samples: cfg.n_samples, horizon: cfg.horizon, ..Cell::new(Method::Full, &spec) };
    let before_models = Models { policy: Some(Arc::new(untrained)), ..r.models.clone() };
    let (before, _) = run_cell(&spec, &r.ds.val, &cell, &before_models, true).unwrap();
    let (after, _) = run_cell(&spec, &r.ds.val, &cell, &r.models, true).unwrap();
    let gain = after.success_mean - before.success_mean;
    let smoothed = smooth(policy_curve, 50);
    println!("  smoothed training success per 1000 episodes: {}", smoothed.iter().map(|s| format!("{:.1}", 100.0 * s)).collect::<Vec<_>>().join(" "));
    println!("  forecaster epoch L1 loss: {}", forecaster_epochs.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>().join(" "));
    let monotone = forecaster_epochs.windows(2).all(|w| w[1] <= w[0]);
    r.verdict(
        12,
        "training sanity",
        gain > 5.0 && monotone,
        format!(
            "val success at N={} untrained {:.2} -> trained {:.2} ({gain:+.2} pp) after {} episodes; forecaster loss {} over {} epochs",
            cfg.n_samples,
            before.success_mean,
            after.success_mean,
            cfg.episodes,
            if monotone { "non-increasing" } else { "not monotone" },
            forecaster_epochs.len()
        ),
    );
}

fn main() {
    let t0 = Instant::now();
    let spec = BenchmarkSpec::default();
    let ds = generate_dataset(&spec).unwrap();
    let p = ds.difficulty_proportions();
    println!(
        "dataset {} / {} / {} episodes, test split easy {:.1}% medium {:.1}% difficult {:.1}%",
        ds.train.len(),
        ds.val.len(),
        ds.test.len(),
        p[0],
        p[1],
        p[2]
    );
    let paths: Vec<_> = ds.train.iter().map(|e| e.reference.clone()).collect();
    let kalman = kalman_init_from_paths(&paths).unwrap();
    let opts = spec.run_options();
    let (est, fcurve) = train_forecaster(&Dataset::configs(&ds.train), &opts, &spec.forecaster, spec.base_seed, true).unwrap();
    let partial = Models { estimator: Some(Arc::new(est)), kalman: Some(kalman), ..Models::default() };
    let (policy, _, pcurve) = train_policy(&Dataset::configs(&ds.train), &Dataset::easy_mask(&ds.train), &partial, &opts, &spec.policy, true).unwrap();
    let models = Models { policy: Some(Arc::new(policy)), ..partial };
    println!("training done in {:.0} s", t0.elapsed().as_secs_f64());
    std::io::stdout().flush().unwrap();

    let mut r = Runner { spec, ds, models, cache: HashMap::new(), failed: Vec::new() };
    integrator(&mut r);
    planner(&mut r);
    gradients(&mut r);
    kalman_benefit(&mut r);
    ordering(&mut r);
    low_n(&mut r);
    sweeps(&mut r);
    difficulty(&mut r);
    horizon(&mut r);
    errors(&mut r);
    determinism(&mut r);
    let success: Vec<f64> = pcurve.iter().map(|p| p.success_rate).collect();
    training(&mut r, &success, &fcurve.epoch_loss);

    println!("{} of 12 criteria passed in {:.0} s", 12 - r.failed.len(), t0.elapsed().as_secs_f64());
    if !r.failed.is_empty() {
        println!("failed: {:?}", r.failed);
        std::process::exit(1);
    }
}
