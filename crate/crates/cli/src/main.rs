use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dronecatch::agents::{Method, Models};
use dronecatch::bench::{
    export_trajectories, generate_dataset, import_trajectories, monotonic_violations, run_benchmark, run_cell, sweep_cells, validate_records,
    write_metrics_table, BenchmarkSpec, Cell, CellResult, Dataset, SweepAxis,
};
use dronecatch::environment::CameraMode;
use dronecatch::forecaster::LearnedEstimator;
use dronecatch::neural::{load_checkpoint, save_checkpoint};
use dronecatch::perception::{kalman_init_from_paths, KalmanState};
use dronecatch::policy::{CriticNet, ModelFreeNet, PolicyNet};
use dronecatch::training::{train_forecaster, train_model_free, train_policy, TrainPoint};

const DATASET: &str = "dataset.jsonl";
const FORECASTER: &str = "forecaster.json";
const KALMAN: &str = "kalman.json";
const POLICY: &str = "policy.json";
const CRITIC: &str = "critic.json";
const MODEL_FREE: &str = "model_free.json";

#[derive(Parser)]
#[command(name = "dronecatch", about = "Drone catching benchmark: data generation, training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the seeded train/val/test episodes.
    GenData(Common),
    /// Train the learned state estimator and fit the Kalman filter.
    TrainForecaster(Common),
    /// Train the action sampler (or the model-free baseline with --method model-free).
    TrainPolicy(Common),
    /// Evaluate one method on the test split.
    Bench(Common),
    /// Evaluate one method along a sweep axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
    },
    /// Run one method on the test split and write line-delimited trajectories.
    Export(Common),
    /// Re-read an exported trajectory file and re-check every episode.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Benchmark configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    method: String,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    mobility: Option<f64>,
    #[arg(long)]
    move_noise: Option<f64>,
    #[arg(long, value_enum)]
    camera: Option<Camera>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<u32>,
    /// Output directory (or file for export).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Directory holding the dataset and checkpoints; defaults to --out.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Run episodes on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Camera {
    Rotating,
    Fixed,
    GroundTruth,
}

impl From<Camera> for CameraMode {
    fn from(c: Camera) -> Self {
        match c {
            Camera::Rotating => CameraMode::Rotating,
            Camera::Fixed => CameraMode::Fixed,
            Camera::GroundTruth => CameraMode::GroundTruth,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    NSamples,
    Mobility,
    Noise,
    Horizon,
    Camera,
}

impl From<Axis> for SweepAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::NSamples => SweepAxis::NSamples,
            Axis::Mobility => SweepAxis::Mobility,
            Axis::Noise => SweepAxis::Noise,
            Axis::Horizon => SweepAxis::Horizon,
            Axis::Camera => SweepAxis::Camera,
        }
    }
}

impl Common {
    fn spec(&self) -> Result<BenchmarkSpec> {
        let mut spec = match &self.config {
            Some(p) => BenchmarkSpec::load(p)?,
            None => BenchmarkSpec::default(),
        };
        if let Some(s) = self.seed {
            spec.base_seed = s;
        }
        if let Some(r) = self.repeats {
            spec.repeats = r;
        }
        if let Some(n) = self.n_samples {
            spec.n_samples = n;
        }
        if let Some(h) = self.horizon {
            spec.horizon = h;
            spec.policy.horizon = h;
        }
        if let Some(m) = self.mobility {
            spec.drone.mobility = m;
        }
        if let Some(s) = self.move_noise {
            spec.drone.movement_noise_sigma = s;
        }
        if self.serial {
            spec.parallel = false;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn method(&self) -> Result<Method> {
        Ok(self.method.parse()?)
    }

    fn cell(&self, spec: &BenchmarkSpec) -> Result<Cell> {
        let mut cell = Cell::new(self.method()?, spec);
        if let Some(c) = self.camera {
            cell.camera = c.into();
        }
        Ok(cell)
    }

    fn model_dir(&self) -> &Path {
        self.models.as_deref().unwrap_or(&self.out)
    }
}

fn out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Loads the dataset from the model directory, generating it when absent.
fn dataset(common: &Common, spec: &BenchmarkSpec) -> Result<Dataset> {
    let path = common.model_dir().join(DATASET);
    if path.exists() {
        return Ok(Dataset::load(&path)?);
    }
    Ok(generate_dataset(spec)?)
}

/// Loads whichever checkpoints `method` needs from the model directory.
fn load_models(dir: &Path, method: Method) -> Result<Models> {
    let mut m = Models::default();
    let learned = matches!(method, Method::Full | Method::UniformAs | Method::Me);
    let est = dir.join(FORECASTER);
    if learned && est.exists() {
        m.estimator = Some(Arc::new(load_checkpoint::<LearnedEstimator>(&est, "estimator")?));
    }
    let kalman = dir.join(KALMAN);
    if kalman.exists() {
        m.kalman = Some(load_checkpoint::<KalmanState>(&kalman, "kalman")?);
    }
    let policy = dir.join(POLICY);
    if method == Method::Full && policy.exists() {
        m.policy = Some(Arc::new(load_checkpoint::<PolicyNet>(&policy, "policy")?));
    }
    let mf = dir.join(MODEL_FREE);
    if method == Method::ModelFree && mf.exists() {
        m.model_free = Some(Arc::new(load_checkpoint::<ModelFreeNet>(&mf, "model-free")?));
    }
    Ok(m)
}

fn write_curve(path: &Path, curve: &[TrainPoint]) -> Result<()> {
    let mut text = String::from("episodes,success_rate,mean_return,entropy,critic_loss\n");
    for p in curve {
        text.push_str(&format!("{},{},{},{},{}\n", p.episodes, p.success_rate, p.mean_return, p.entropy, p.critic_loss));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_result(r: &CellResult) {
    let c = &r.cell;
    println!(
        "{} N={} H={} mobility={} move_noise={} camera={:?}: {:.2} ± {:.2} % over {} episodes x {} repeats",
        c.method, c.n_samples, c.horizon, c.mobility, c.move_noise, c.camera, r.success_mean, r.success_std, r.episodes_per_repeat, r.success.len()
    );
    let names = ["easy", "medium", "difficult"];
    for (n, b) in names.iter().zip(&r.difficulty) {
        println!("  {n:9} {:5} episodes  {:6.2} %", b.episodes, b.rate());
    }
    if let Some(e) = &r.errors {
        println!(
            "  forecaster error: position {:.4} ± {:.4} m, velocity {:.4} ± {:.4} m/s ({:.4} m/step), acceleration {:.4} ± {:.4} m/s² ({:.5} m/step²) over {} estimates",
            e.position.0, e.position.1, e.velocity.0, e.velocity.1, e.velocity_per_step.0, e.acceleration.0, e.acceleration.1, e.acceleration_per_step.0, e.count
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(c) => {
            let spec = c.spec()?;
            out_dir(&c.out)?;
            let ds = generate_dataset(&spec)?;
            ds.save(&c.out.join(DATASET))?;
            let p = ds.difficulty_proportions();
            println!(
                "wrote {} train / {} val / {} test episodes; easy {:.1}% medium {:.1}% difficult {:.1}%",
                ds.train.len(),
                ds.val.len(),
                ds.test.len(),
                p[0],
                p[1],
                p[2]
            );
        }
        Command::TrainForecaster(c) => {
            let spec = c.spec()?;
            out_dir(&c.out)?;
            let ds = dataset(&c, &spec)?;
            let paths: Vec<_> = ds.train.iter().map(|e| e.reference.clone()).collect();
            let kalman = kalman_init_from_paths(&paths)?;
            save_checkpoint(&c.out.join(KALMAN), "kalman", &kalman)?;
            let (est, curve) = train_forecaster(&Dataset::configs(&ds.train), &spec.run_options(), &spec.forecaster, spec.base_seed, spec.parallel)?;
            save_checkpoint(&c.out.join(FORECASTER), "estimator", &est)?;
            let mut text = String::from("epoch,l1_loss\n");
            for (i, l) in curve.epoch_loss.iter().enumerate() {
                text.push_str(&format!("{},{}\n", i + 1, l));
            }
            std::fs::write(c.out.join("forecaster_curve.csv"), text)?;
            println!("estimator trained; final epoch L1 loss {:.4}", curve.epoch_loss.last().copied().unwrap_or(f64::NAN));
        }
        Command::TrainPolicy(c) => {
            let spec = c.spec()?;
            out_dir(&c.out)?;
            let ds = dataset(&c, &spec)?;
            let pool = Dataset::configs(&ds.train);
            let easy = Dataset::easy_mask(&ds.train);
            let mut cfg = spec.policy.clone();
            if let Some(n) = c.n_samples {
                cfg.n_samples = n;
            }
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let curve = if c.method()? == Method::ModelFree {
                let (net, curve) = train_model_free(&pool, &easy, &spec.run_options(), &cfg, spec.parallel)?;
                save_checkpoint(&c.out.join(MODEL_FREE), "model-free", &net)?;
                curve
            } else {
                let models = load_models(c.model_dir(), Method::UniformAs)?;
                if models.estimator.is_none() {
                    bail!("no trained estimator in {}; run train-forecaster first", c.model_dir().display());
                }
                let (policy, critic, curve) = train_policy(&pool, &easy, &models, &spec.run_options(), &cfg, spec.parallel)?;
                save_checkpoint(&c.out.join(POLICY), "policy", &policy)?;
                save_checkpoint::<CriticNet>(&c.out.join(CRITIC), "critic", &critic)?;
                curve
            };
            write_curve(&c.out.join("policy_curve.csv"), &curve)?;
            println!("trained for {} episodes", curve.last().map(|p| p.episodes).unwrap_or(0));
        }
        Command::Bench(c) => {
            let spec = c.spec()?;
            out_dir(&c.out)?;
            let ds = dataset(&c, &spec)?;
            let cell = c.cell(&spec)?;
            let models = load_models(c.model_dir(), cell.method)?;
            let r = run_benchmark(&spec, &ds, &cell, &models)?;
            print_result(&r);
            write_metrics_table(&c.out.join(format!("metrics_{}.csv", cell.method)), std::slice::from_ref(&r))?;
        }
        Command::Sweep { common: c, axis } => {
            let spec = c.spec()?;
            out_dir(&c.out)?;
            let ds = dataset(&c, &spec)?;
            let base = c.cell(&spec)?;
            let axis: SweepAxis = axis.into();
            let models = load_models(c.model_dir(), base.method)?;
            let mut results = Vec::new();
            for cell in sweep_cells(&spec, axis, &base) {
                let r = run_benchmark(&spec, &ds, &cell, &models)?;
                print_result(&r);
                results.push(r);
            }
            let name = format!("sweep_{:?}_{}.csv", axis, base.method).to_lowercase();
            write_metrics_table(&c.out.join(name), &results)?;
            let bad = if axis == SweepAxis::Camera {
                // Only the rotating-versus-fixed ordering is expected.
                let pick: Vec<CellResult> = results.iter().filter(|r| matches!(r.cell.camera, CameraMode::Rotating | CameraMode::Fixed)).cloned().collect();
                monotonic_violations(&pick, false, 1.0)
            } else {
                monotonic_violations(&results, axis == SweepAxis::NSamples, 1.0)
            };
            if bad.is_empty() {
                println!("monotone within 1 pooled std");
            } else {
                println!("monotonicity violations at adjacent pairs {bad:?}");
            }
        }
        Command::Export(c) => {
            let spec = c.spec()?;
            let ds = dataset(&c, &spec)?;
            let cell = c.cell(&spec)?;
            let models = load_models(c.model_dir(), cell.method)?;
            let (r, records) = run_cell(&spec, &ds.test, &cell, &models, spec.parallel)?;
            let path = if c.out.extension().is_some() { c.out.clone() } else { c.out.join(format!("trajectories_{}.jsonl", cell.method)) };
            if let Some(dir) = path.parent() {
                out_dir(dir)?;
            }
            export_trajectories(&records, &path)?;
            print_result(&r);
            println!("wrote {}", path.display());
        }
        Command::Replay { common: c, input } => {
            let spec = c.spec()?;
            let records = import_trajectories(&input)?;
            let problems = validate_records(&records, &spec.drone);
            let caught = records.iter().filter(|r| r.caught()).count();
            println!("{} episodes, {} caught", records.len(), caught);
            if !problems.is_empty() {
                for p in &problems {
                    eprintln!("{p}");
                }
                bail!("{} inconsistent episodes", problems.len());
            }
            println!("all episodes consistent");
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
