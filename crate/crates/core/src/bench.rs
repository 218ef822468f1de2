//! Seeded datasets, benchmark cells, sweeps, metric tables and trajectory
//! export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{make_controller, Method, Models};
use crate::catalog::default_catalog;
use crate::environment::{
    check_catch, episode_reward, CameraMode, Difficulty, DroneSpec, EpisodeConfig, EpisodeRecord, LauncherConfig, Outcome, RunOptions, StepLog,
};
use crate::error::{Error, Result};
use crate::forecaster::{error_stats, ErrorStats, EstimatorTrainConfig};
use crate::physics::{simulate_trajectory, ObjectSpec, ObjectState, RoomGeometry, SimConfig, Terminal};
use crate::policy::RewardSpec;
use crate::training::{run_many, PolicyTrainConfig};

pub const EXPORT_FORMAT: &str = "dronecatch-trajectories";
pub const EXPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for DatasetSizes {
    fn default() -> Self {
        Self { train: 2000, val: 500, test: 500 }
    }
}

impl DatasetSizes {
    /// Ten times the default split sizes.
    pub fn large() -> Self {
        Self { train: 20_000, val: 5_000, test: 5_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub sizes: DatasetSizes,
    pub repeats: u32,
    pub base_seed: u64,
    pub n_samples: usize,
    pub horizon: usize,
    pub sigma_obs: f64,
    pub fov_deg: f64,
    pub n_sweep: Vec<usize>,
    pub mobility_sweep: Vec<f64>,
    pub noise_sweep: Vec<f64>,
    pub horizon_sweep: Vec<usize>,
    pub camera_modes: Vec<CameraMode>,
    pub catalog: Vec<ObjectSpec>,
    /// Object ids kept out of the train and val splits.
    pub held_out: Vec<String>,
    pub room: RoomGeometry,
    pub drone: DroneSpec,
    pub launcher: LauncherConfig,
    pub sim: SimConfig,
    pub max_control_steps: usize,
    pub forecaster: EstimatorTrainConfig,
    pub policy: PolicyTrainConfig,
    pub parallel: bool,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            sizes: DatasetSizes::default(),
            repeats: 3,
            base_seed: 1,
            n_samples: 1000,
            horizon: 3,
            sigma_obs: 0.1,
            fov_deg: 90.0,
            n_sweep: vec![10, 100, 1000, 10_000],
            mobility_sweep: vec![1.0, 0.8, 0.6, 0.4, 0.2],
            noise_sweep: vec![0.01, 0.05, 0.1, 0.15],
            horizon_sweep: vec![1, 2, 3, 4, 5, 6],
            camera_modes: vec![CameraMode::Rotating, CameraMode::Fixed, CameraMode::GroundTruth],
            catalog: default_catalog(),
            held_out: Vec::new(),
            room: RoomGeometry::default(),
            drone: DroneSpec::default(),
            launcher: LauncherConfig::default(),
            sim: SimConfig::default(),
            max_control_steps: 50,
            forecaster: EstimatorTrainConfig::default(),
            policy: PolicyTrainConfig::default(),
            parallel: true,
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        let s = &self.sizes;
        if s.train == 0 || s.val == 0 || s.test == 0 || self.repeats == 0 {
            return Err(Error::InvalidConfig("dataset sizes and repeats must be positive".into()));
        }
        if self.mobility_sweep.iter().any(|m| !(*m > 0.0 && *m <= 1.0)) {
            return Err(Error::InvalidConfig("mobility fractions must lie in (0, 1]".into()));
        }
        if self.noise_sweep.iter().any(|n| *n < 0.0) || self.n_sweep.contains(&0) || self.horizon_sweep.contains(&0) {
            return Err(Error::InvalidConfig("sweep values out of range".into()));
        }
        if self.catalog.is_empty() || self.catalog.iter().all(|o| self.held_out.contains(&o.id)) {
            return Err(Error::InvalidConfig("catalog has no training objects".into()));
        }
        for o in &self.catalog {
            o.validate()?;
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| Error::parse("<toml>", e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions { sigma_obs: self.sigma_obs, fov_deg: self.fov_deg, camera: CameraMode::Rotating, repeat: 0 }
    }

    fn episode(&self, seed: u64, object: &ObjectSpec) -> EpisodeConfig {
        EpisodeConfig {
            seed,
            object: object.clone(),
            room: self.room.clone(),
            drone: self.drone.clone(),
            launcher: self.launcher.clone(),
            sim: self.sim.clone(),
            max_control_steps: self.max_control_steps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    fn seed_offset(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => 1 << 32,
            Split::Test => 2 << 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub split: Split,
    pub index: usize,
    pub config: EpisodeConfig,
    /// Agent-free reference flight.
    pub collision_count: usize,
    pub difficulty: Difficulty,
    pub terminal: Terminal,
    pub steps: usize,
    pub reference: Vec<crate::physics::Vec3>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<DatasetEntry>,
    pub val: Vec<DatasetEntry>,
    pub test: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn configs(entries: &[DatasetEntry]) -> Vec<EpisodeConfig> {
        entries.iter().map(|e| e.config.clone()).collect()
    }

    pub fn easy_mask(entries: &[DatasetEntry]) -> Vec<bool> {
        entries.iter().map(|e| e.difficulty == Difficulty::Easy).collect()
    }

    pub fn all(&self) -> impl Iterator<Item = &DatasetEntry> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    /// Share of each difficulty bucket over the whole dataset, in percent.
    pub fn difficulty_proportions(&self) -> [f64; 3] {
        let mut c = [0usize; 3];
        for e in self.all() {
            c[e.difficulty as usize] += 1;
        }
        let n = c.iter().sum::<usize>().max(1) as f64;
        c.map(|x| 100.0 * x as f64 / n)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        for e in self.all() {
            let line = serde_json::to_string(e).map_err(|e| Error::parse(path, e))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut ds = Dataset::default();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: DatasetEntry = serde_json::from_str(&line).map_err(|e| Error::parse(path, e))?;
            match e.split {
                Split::Train => ds.train.push(e),
                Split::Val => ds.val.push(e),
                Split::Test => ds.test.push(e),
            }
        }
        Ok(ds)
    }
}

fn make_split(spec: &BenchmarkSpec, split: Split, count: usize, objects: &[&ObjectSpec]) -> Result<Vec<DatasetEntry>> {
    (0..count)
        .map(|i| {
            let object = objects[i % objects.len()];
            let config = spec.episode(spec.base_seed.wrapping_add(split.seed_offset()).wrapping_add(i as u64), object);
            let (_, initial, _) = crate::environment::initial_conditions(&config)?;
            let traj = simulate_trajectory(&config.object, &initial, &config.room, &config.sim, config.max_control_steps)?;
            Ok(DatasetEntry {
                split,
                index: i,
                collision_count: traj.collision_count,
                difficulty: Difficulty::from_collisions(traj.collision_count),
                terminal: traj.terminal,
                steps: traj.terminal_step,
                reference: traj.positions(),
                config,
            })
        })
        .collect()
}

/// Seeded train/val/test episodes with disjoint seed ranges, cycling through
/// the catalog so every object gets the same number of throws.
pub fn generate_dataset(spec: &BenchmarkSpec) -> Result<Dataset> {
    spec.validate()?;
    let seen: Vec<&ObjectSpec> = spec.catalog.iter().filter(|o| !spec.held_out.contains(&o.id)).collect();
    let all: Vec<&ObjectSpec> = spec.catalog.iter().collect();
    Ok(Dataset {
        train: make_split(spec, Split::Train, spec.sizes.train, &seen)?,
        val: make_split(spec, Split::Val, spec.sizes.val, &seen)?,
        test: make_split(spec, Split::Test, spec.sizes.test, &all)?,
    })
}

/// One benchmark configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: Method,
    pub n_samples: usize,
    pub horizon: usize,
    pub mobility: f64,
    pub move_noise: f64,
    pub camera: CameraMode,
}

impl Cell {
    pub fn new(method: Method, spec: &BenchmarkSpec) -> Self {
        Self {
            method,
            n_samples: spec.n_samples,
            horizon: spec.horizon,
            mobility: spec.drone.mobility,
            move_noise: spec.drone.movement_noise_sigma,
            camera: CameraMode::Rotating,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub episodes: usize,
    pub caught: usize,
}

impl Bucket {
    pub fn rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            100.0 * self.caught as f64 / self.episodes as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub object_id: String,
    pub repeat: u32,
    pub outcome: Outcome,
    pub collision_count: usize,
    pub reward: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: Cell,
    pub episodes_per_repeat: usize,
    /// Success rate in percent per repeat.
    pub success: Vec<f64>,
    pub success_mean: f64,
    pub success_std: f64,
    /// Easy, Medium, Difficult over all repeats.
    pub difficulty: [Bucket; 3],
    pub errors: Option<ErrorStats>,
    pub episodes: Vec<EpisodeSummary>,
}

impl CellResult {
    pub fn difficulty_proportions(&self) -> [f64; 3] {
        let n = self.difficulty.iter().map(|b| b.episodes).sum::<usize>().max(1) as f64;
        self.difficulty.map(|b| 100.0 * b.episodes as f64 / n)
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

pub fn pooled_std(a: &CellResult, b: &CellResult) -> f64 {
    ((a.success_std.powi(2) + b.success_std.powi(2)) / 2.0).sqrt()
}

/// Start-frame estimate/truth pairs logged by a controller.
pub fn estimate_pairs(records: &[EpisodeRecord]) -> Vec<(ObjectState, ObjectState)> {
    let mut out = Vec::new();
    for r in records {
        for s in &r.steps {
            if let Some(e) = s.estimate {
                let mut truth = s.object;
                truth.o -= r.origin;
                out.push((e, truth));
            }
        }
    }
    out
}

/// Runs every test episode once per repeat.
pub fn run_cell(spec: &BenchmarkSpec, test: &[DatasetEntry], cell: &Cell, models: &Models, parallel: bool) -> Result<(CellResult, Vec<EpisodeRecord>)> {
    if test.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let planner = cell.method.planner_config(cell.n_samples, cell.horizon);
    let mut runs = Vec::with_capacity(test.len() * spec.repeats as usize);
    for repeat in 0..spec.repeats {
        for e in test {
            let mut cfg = e.config.clone();
            cfg.drone.mobility = cell.mobility;
            cfg.drone.movement_noise_sigma = cell.move_noise;
            let opts = RunOptions { sigma_obs: spec.sigma_obs, fov_deg: spec.fov_deg, camera: cell.camera, repeat };
            runs.push((cfg, opts));
        }
    }
    make_controller(cell.method, &planner, models, false)?;
    let records = run_many(&runs, || make_controller(cell.method, &planner, models, false), parallel)?;
    let n = test.len();
    let success: Vec<f64> = records.chunks(n).map(|rs| 100.0 * rs.iter().filter(|r| r.caught()).count() as f64 / n as f64).collect();
    let (success_mean, success_std) = mean_std(&success);
    let mut difficulty = [Bucket::default(); 3];
    for r in &records {
        let b = &mut difficulty[r.difficulty() as usize];
        b.episodes += 1;
        b.caught += r.caught() as usize;
    }
    let pairs = estimate_pairs(&records);
    let errors = (!pairs.is_empty()).then(|| error_stats(&pairs, spec.sim.control_dt));
    let episodes = records
        .iter()
        .map(|r| EpisodeSummary {
            seed: r.seed,
            object_id: r.object_id.clone(),
            repeat: r.repeat,
            outcome: r.outcome,
            collision_count: r.collision_count,
            reward: r.reward,
            steps: r.steps.len(),
        })
        .collect();
    let result = CellResult { cell: cell.clone(), episodes_per_repeat: n, success, success_mean, success_std, difficulty, errors, episodes };
    Ok((result, records))
}

pub fn run_benchmark(spec: &BenchmarkSpec, dataset: &Dataset, cell: &Cell, models: &Models) -> Result<CellResult> {
    Ok(run_cell(spec, &dataset.test, cell, models, spec.parallel)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NSamples,
    Mobility,
    Noise,
    Horizon,
    Camera,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_samples" | "n-samples" | "n" => Ok(SweepAxis::NSamples),
            "mobility" => Ok(SweepAxis::Mobility),
            "noise" | "move-noise" => Ok(SweepAxis::Noise),
            "horizon" => Ok(SweepAxis::Horizon),
            "camera" => Ok(SweepAxis::Camera),
            _ => Err(Error::InvalidConfig(format!("unknown sweep axis {s:?}"))),
        }
    }
}

/// The cells of a sweep, derived from `base`.
pub fn sweep_cells(spec: &BenchmarkSpec, axis: SweepAxis, base: &Cell) -> Vec<Cell> {
    match axis {
        SweepAxis::NSamples => spec.n_sweep.iter().map(|&n| Cell { n_samples: n, ..base.clone() }).collect(),
        SweepAxis::Mobility => spec.mobility_sweep.iter().map(|&m| Cell { mobility: m, ..base.clone() }).collect(),
        SweepAxis::Noise => spec.noise_sweep.iter().map(|&s| Cell { move_noise: s, ..base.clone() }).collect(),
        SweepAxis::Horizon => spec.horizon_sweep.iter().map(|&h| Cell { horizon: h, ..base.clone() }).collect(),
        SweepAxis::Camera => spec.camera_modes.iter().map(|&c| Cell { camera: c, ..base.clone() }).collect(),
    }
}

pub fn run_sweep(spec: &BenchmarkSpec, dataset: &Dataset, axis: SweepAxis, base: &Cell, models: &Models) -> Result<Vec<CellResult>> {
    sweep_cells(spec, axis, base).iter().map(|c| run_benchmark(spec, dataset, c, models)).collect()
}

/// Adjacent pairs of `results` that violate "next ≤ previous + tolerance·pooled std"
/// (or the reverse when `increasing`).
pub fn monotonic_violations(results: &[CellResult], increasing: bool, tolerance: f64) -> Vec<(usize, usize)> {
    results
        .windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let slack = tolerance * pooled_std(&w[0], &w[1]);
            if increasing {
                w[1].success_mean < w[0].success_mean - slack
            } else {
                w[1].success_mean > w[0].success_mean + slack
            }
        })
        .map(|(i, _)| (i, i + 1))
        .collect()
}

fn camera_name(c: CameraMode) -> &'static str {
    match c {
        CameraMode::Rotating => "rotating",
        CameraMode::Fixed => "fixed",
        CameraMode::GroundTruth => "ground-truth",
    }
}

pub const TABLE_HEADER: [&str; 28] = [
    "method", "n_samples", "horizon", "mobility", "move_noise", "camera", "episodes", "repeats", "success_mean", "success_std",
    "easy_episodes", "easy_success", "medium_episodes", "medium_success", "difficult_episodes", "difficult_success",
    "easy_share", "medium_share", "difficult_share", "pos_err_mean", "pos_err_std", "vel_err_mean", "vel_err_std",
    "acc_err_mean", "acc_err_std", "vel_err_step_mean", "acc_err_step_mean", "error_samples",
];

/// CSV metric table, one row per cell.
pub fn write_metrics_table(path: &Path, results: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    w.write_record(TABLE_HEADER).map_err(|e| Error::parse(path, e))?;
    for r in results {
        let c = &r.cell;
        let p = r.difficulty_proportions();
        let e = r.errors.unwrap_or_default();
        let row = vec![
            c.method.name().to_string(),
            c.n_samples.to_string(),
            c.horizon.to_string(),
            c.mobility.to_string(),
            c.move_noise.to_string(),
            camera_name(c.camera).to_string(),
            r.episodes_per_repeat.to_string(),
            r.success.len().to_string(),
            format!("{:.2}", r.success_mean),
            format!("{:.2}", r.success_std),
            r.difficulty[0].episodes.to_string(),
            format!("{:.2}", r.difficulty[0].rate()),
            r.difficulty[1].episodes.to_string(),
            format!("{:.2}", r.difficulty[1].rate()),
            r.difficulty[2].episodes.to_string(),
            format!("{:.2}", r.difficulty[2].rate()),
            format!("{:.1}", p[0]),
            format!("{:.1}", p[1]),
            format!("{:.1}", p[2]),
            format!("{:.4}", e.position.0),
            format!("{:.4}", e.position.1),
            format!("{:.4}", e.velocity.0),
            format!("{:.4}", e.velocity.1),
            format!("{:.4}", e.acceleration.0),
            format!("{:.4}", e.acceleration.1),
            format!("{:.4}", e.velocity_per_step.0),
            format!("{:.4}", e.acceleration_per_step.0),
            e.count.to_string(),
        ];
        w.write_record(&row).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ExportLine {
    Header { format: String, version: u32, episodes: usize },
    Episode { seed: u64, object_id: String, repeat: u32, origin: crate::physics::Vec3, outcome: Outcome, collision_count: usize, reward: f64, steps: usize },
    Step(StepLog),
    End { final_agent: crate::environment::AgentState, final_object: ObjectState },
}

/// Line-delimited export: a header line, then per episode a summary line,
/// one line per step and an end line with the terminal states. A CSV
/// summary with one row per episode is written next to it.
pub fn export_trajectories(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let mut put = |line: &ExportLine| -> Result<()> {
        let s = serde_json::to_string(line).map_err(|e| Error::parse(path, e))?;
        writeln!(w, "{s}").map_err(|e| Error::io(path, e))
    };
    put(&ExportLine::Header { format: EXPORT_FORMAT.into(), version: EXPORT_VERSION, episodes: records.len() })?;
    for r in records {
        put(&ExportLine::Episode {
            seed: r.seed,
            object_id: r.object_id.clone(),
            repeat: r.repeat,
            origin: r.origin,
            outcome: r.outcome,
            collision_count: r.collision_count,
            reward: r.reward,
            steps: r.steps.len(),
        })?;
        for s in &r.steps {
            put(&ExportLine::Step(s.clone()))?;
        }
        put(&ExportLine::End { final_agent: r.final_agent, final_object: r.final_object })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_episode_summary(&path.with_extension("summary.csv"), records)
}

pub fn write_episode_summary(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    w.write_record(["seed", "object_id", "repeat", "outcome", "collision_count", "difficulty", "reward", "steps"]).map_err(|e| Error::parse(path, e))?;
    for r in records {
        w.write_record([
            r.seed.to_string(),
            r.object_id.clone(),
            r.repeat.to_string(),
            format!("{:?}", r.outcome),
            r.collision_count.to_string(),
            format!("{:?}", r.difficulty()),
            r.reward.to_string(),
            r.steps.len().to_string(),
        ])
        .map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn import_trajectories(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let parse = |s: &str| -> Result<ExportLine> { serde_json::from_str(s).map_err(|e| Error::parse(path, e)) };
    let header = lines.next().ok_or_else(|| Error::parse(path, "missing header"))?.map_err(|e| Error::io(path, e))?;
    let expected = match parse(&header)? {
        ExportLine::Header { format, version, episodes } => {
            if format != EXPORT_FORMAT {
                return Err(Error::parse(path, format!("unknown format {format}")));
            }
            if version != EXPORT_VERSION {
                return Err(Error::CheckpointVersion(version));
            }
            episodes
        }
        _ => return Err(Error::parse(path, "first line is not a header")),
    };
    let mut out: Vec<EpisodeRecord> = Vec::with_capacity(expected);
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse(&line)? {
            ExportLine::Header { .. } => return Err(Error::parse(path, "repeated header")),
            ExportLine::Episode { seed, object_id, repeat, origin, outcome, collision_count, reward, steps } => out.push(EpisodeRecord {
                seed,
                object_id,
                repeat,
                origin,
                steps: Vec::with_capacity(steps),
                outcome,
                collision_count,
                reward,
                final_agent: crate::environment::AgentState::at_rest(origin),
                final_object: ObjectState::new(origin, origin * 0.0, origin * 0.0),
            }),
            ExportLine::Step(s) => out.last_mut().ok_or_else(|| Error::parse(path, "step before episode"))?.steps.push(s),
            ExportLine::End { final_agent, final_object } => {
                let r = out.last_mut().ok_or_else(|| Error::parse(path, "end before episode"))?;
                r.final_agent = final_agent;
                r.final_object = final_object;
            }
        }
    }
    if out.len() != expected {
        return Err(Error::parse(path, format!("header announces {expected} episodes, found {}", out.len())));
    }
    Ok(out)
}

/// Re-checks exported records: stored reward against the log, the catch
/// predicate on caught episodes' end states, and step numbering.
pub fn validate_records(records: &[EpisodeRecord], drone: &DroneSpec) -> Vec<String> {
    let mut problems = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let reward = episode_reward(&r.steps, r.caught(), &RewardSpec::default());
        if reward != r.reward {
            problems.push(format!("episode {i} (seed {}): stored reward {} != recomputed {reward}", r.seed, r.reward));
        }
        if r.caught() != check_catch(&r.final_agent, &r.final_object, drone) {
            problems.push(format!("episode {i} (seed {}): outcome {:?} disagrees with the catch predicate", r.seed, r.outcome));
        }
        if r.steps.iter().enumerate().any(|(t, s)| s.t != t) {
            problems.push(format!("episode {i} (seed {}): step indices are not consecutive", r.seed));
        }
    }
    problems
}
