//! Experiment dispatch and artifact layout.
//!
//! Random streams are children of `Prng::new(seed, 0)` with fixed tags, so
//! every artifact except the manifest is a pure function of the config.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use dftns::baselines::{hmc_run, langevin_run, svgd_run, ChainConfig, Init};
use dftns::dft::{train_dft, DftOutcome, TrainStatus};
use dftns::metrics::{eval_protocol, ksd, KsdReport, NetSampler, SamplePool, SampleSource};
use dftns::nn::FeedForwardNet;
use dftns::targets::{blr_accuracy, load_blr_csv, make_target, synthetic_blr, BlrPosterior, Target};
use dftns::Prng;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, Method, Preset};
use crate::error::{CliError, Result};
use crate::output::{json_string, samples_csv, FileRecord, OutputDir};
use crate::svg::scatter_svg;

pub const OUTPUT_ROOT_ENV: &str = "DFTNS_OUTPUT_ROOT";
const CENTERING_BATCH: usize = 5000;

mod stream {
    pub const INIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const OUTPUT: u64 = 3;
    pub const EVAL: u64 = 4;
    pub const DATA: u64 = 5;
    pub const BASELINE: u64 = 6;
    /// Repeat `r` of run_mcmc uses `REPEAT + r`.
    pub const REPEAT: u64 = 100;
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted,
    Failed,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub status: RunStatus,
    pub aborted_at: Option<usize>,
    pub files: Vec<FileRecord>,
    /// Experiment-specific numbers, also stored in the manifest.
    pub summary: serde_json::Value,
}

/// Applies every configuration layer and validates the result.
pub fn resolve_options(opts: &RunOptions) -> Result<ExperimentConfig> {
    let mut config = crate::config::resolve(opts.config.as_deref(), opts.preset, &opts.overrides)?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(out) = &opts.out {
        config.output_dir = Some(out.clone());
    }
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(CliError::Validation(problems));
    }
    Ok(config)
}

/// `output_dir` if set, else `<root>/<config stem>-seed<seed>` under
/// `$DFTNS_OUTPUT_ROOT` (default `runs`).
pub fn output_dir_for(config: &ExperimentConfig, config_path: Option<&Path>) -> PathBuf {
    if let Some(dir) = &config.output_dir {
        return dir.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    let stem = config_path
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    root.join(format!("{stem}-seed{}", config.seed))
}

struct Outcome {
    status: RunStatus,
    aborted_at: Option<usize>,
    summary: serde_json::Value,
    notes: Vec<String>,
}

fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Runs one experiment into `output_dir`. The manifest is written last, also
/// when the experiment fails.
pub fn run(config: &ExperimentConfig, output_dir: &Path) -> Result<RunReport> {
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(CliError::Validation(problems));
    }
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut out = OutputDir::create(output_dir)?;
    out.write("config.toml", config.snapshot().as_bytes())?;

    let result = match config.experiment {
        Experiment::TrainDft => train_dft_experiment(config, &mut out),
        Experiment::RunMcmc => run_mcmc_experiment(config, &mut out),
        Experiment::EvalKsd => eval_ksd_experiment(config, &mut out),
        Experiment::Blr => blr_experiment(config, &mut out),
    };
    let (outcome, error) = match result {
        Ok(outcome) => (outcome, None),
        Err(e) => (
            Outcome {
                status: RunStatus::Failed,
                aborted_at: None,
                summary: serde_json::Value::Null,
                notes: Vec::new(),
            },
            Some(e),
        ),
    };

    let files = out.records()?;
    let mut manifest = serde_json::json!({
        "format": "dftns-manifest/1",
        "status": outcome.status,
        "experiment": config.experiment,
        "version": concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")),
        "started_unix": unix_seconds(started),
        "finished_unix": unix_seconds(SystemTime::now()),
        "wall_seconds": clock.elapsed().as_secs_f64(),
        "config_file": "config.toml",
        "config": config,
        "files": files,
        "summary": outcome.summary,
        "notes": outcome.notes,
    });
    if let Some(iter) = outcome.aborted_at {
        manifest["aborted_at"] = iter.into();
    }
    if let Some(e) = &error {
        manifest["error"] = e.to_record();
    }
    let manifest_path = output_dir.join("manifest.json");
    std::fs::write(&manifest_path, json_string(&manifest)?).map_err(|e| CliError::io(&manifest_path, e))?;
    if let Some(e) = error {
        return Err(e);
    }
    Ok(RunReport {
        output_dir: output_dir.to_path_buf(),
        status: outcome.status,
        aborted_at: outcome.aborted_at,
        files,
        summary: outcome.summary,
    })
}

/// One run per seed, at most `jobs` at a time, into `<root>/seed-<seed>`.
/// Results come back in the order of `seeds`.
pub fn run_sweep(base: &ExperimentConfig, seeds: &[u64], root: &Path, jobs: usize) -> Vec<Result<RunReport>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunReport>>>> = Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, seeds.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = seeds.get(i) else { break };
                let mut config = base.clone();
                config.seed = seed;
                let dir = root.join(format!("seed-{seed}"));
                config.output_dir = Some(dir.clone());
                let result = run(&config, &dir);
                results.lock().expect("no worker panicked")[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect()
}

fn build_nets(config: &ExperimentConfig, dim: usize, prng: &mut Prng) -> Result<(FeedForwardNet, FeedForwardNet)> {
    let latent = if config.latent_dim == 0 { dim } else { config.latent_dim };
    let mut sampler = FeedForwardNet::init(
        &ExperimentConfig::layer_dims(latent, config.sampler_width, config.sampler_depth, dim),
        config.sampler_activation,
        prng,
    )?;
    if config.center_sampler {
        let z = prng.normal_matrix(CENTERING_BATCH, latent);
        sampler.center_output(z.view())?;
    }
    let score = FeedForwardNet::init(
        &ExperimentConfig::layer_dims(dim, config.score_width, config.score_depth, dim),
        config.score_activation,
        prng,
    )?;
    Ok((sampler, score))
}

fn write_checkpoint(out: &mut OutputDir, name: &str, net: &FeedForwardNet) -> Result<()> {
    out.write(name, net.to_checkpoint_string().as_bytes())
}

fn write_scatter(out: &mut OutputDir, samples: &ndarray::Array2<f64>, target: &dyn Target) -> Result<()> {
    if target.dim() == 2 {
        out.write("scatter.svg", scatter_svg(samples.view(), target)?.as_bytes())?;
    }
    Ok(())
}

/// Trains, then writes checkpoints, the trace and draws from the best sampler.
fn train_and_record(
    config: &ExperimentConfig,
    target: &dyn Target,
    out: &mut OutputDir,
) -> Result<(DftOutcome, ndarray::Array2<f64>, Outcome)> {
    let root = Prng::new(config.seed, 0);
    let (sampler, score) = build_nets(config, target.dim(), &mut root.child(stream::INIT))?;
    let dft = train_dft(target, sampler, score, &config.dft_config(), &mut root.child(stream::TRAIN))?;

    write_checkpoint(out, "sampler.best.json", &dft.best_sampler)?;
    write_checkpoint(out, "sampler.final.json", &dft.sampler)?;
    write_checkpoint(out, "score.final.json", &dft.score_net)?;
    out.write("trace.jsonl", dft.trace.to_jsonl()?.as_bytes())?;
    let samples = NetSampler { net: &dft.best_sampler }.draw(config.output_samples, &mut root.child(stream::OUTPUT))?;
    out.write("samples.csv", samples_csv(samples.view()).as_bytes())?;

    let (status, aborted_at) = match dft.status {
        TrainStatus::Completed => (RunStatus::Completed, None),
        TrainStatus::Aborted { iter } => (RunStatus::Aborted, Some(iter)),
    };
    let skipped = dft.trace.records().iter().filter(|r| r.skipped).count();
    let outcome = Outcome {
        status,
        aborted_at,
        summary: serde_json::json!({
            "best_ksd": dft.best_ksd,
            "best_iter": dft.best_iter,
            "ksd_checkpoints": dft.trace.ksd_checkpoints().iter().map(|c| serde_json::json!([c.0, c.1, c.2])).collect::<Vec<_>>(),
            "skipped_iterations": skipped,
        }),
        notes: Vec::new(),
    };
    Ok((dft, samples, outcome))
}

fn train_dft_experiment(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome> {
    let target = make_target(&config.target)?;
    let (dft, samples, outcome) = train_and_record(config, &target, out)?;
    write_scatter(out, &samples, &target)?;
    if outcome.status == RunStatus::Completed {
        let estimator = config.ksd_estimator();
        let report = eval_protocol(
            &estimator,
            &target,
            &mut NetSampler { net: &dft.best_sampler },
            config.eval_samples,
            config.eval_repeats,
            &mut Prng::new(config.seed, 0).child(stream::EVAL),
        )?;
        out.write("metrics.json", json_string(&report.to_json(&estimator))?.as_bytes())?;
    }
    Ok(outcome)
}

fn run_mcmc_experiment(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome> {
    let target = make_target(&config.target)?;
    let estimator = config.ksd_estimator();
    let chain = config.chain_config();
    let root = Prng::new(config.seed, 0);
    let mut values = Vec::with_capacity(config.eval_repeats);
    let mut trace = String::new();
    let mut first = None;
    for r in 0..config.eval_repeats {
        let mut prng = root.child(stream::REPEAT + r as u64);
        let run = match config.method {
            Method::Langevin => langevin_run(&target, &chain, &mut prng)?,
            Method::Hmc => hmc_run(&target, &chain, &mut prng)?,
            Method::Svgd => svgd_run(&target, &chain, &mut prng)?,
        };
        let value = ksd(&estimator, &target, run.samples.points.view())?;
        values.push(value);
        trace.push_str(&serde_json::to_string(&serde_json::json!({
            "repeat": r,
            "ksd": value,
            "diagnostics": run.diagnostics,
        }))
        .map_err(dftns::Error::from)?);
        trace.push('\n');
        first.get_or_insert(run.samples.points);
    }
    let samples = first.expect("eval_repeats is positive");
    let report = KsdReport::from_values(values, config.n_particles);
    out.write("samples.csv", samples_csv(samples.view()).as_bytes())?;
    out.write("metrics.json", json_string(&report.to_json(&estimator))?.as_bytes())?;
    out.write("trace.jsonl", trace.as_bytes())?;
    write_scatter(out, &samples, &target)?;
    Ok(Outcome {
        status: RunStatus::Completed,
        aborted_at: None,
        summary: serde_json::json!({ "method": config.method.as_str(), "ksd_values": report.values }),
        notes: Vec::new(),
    })
}

/// Scores the file in `eval_repeats` consecutive equal blocks; leftover rows
/// are not used.
fn eval_ksd_experiment(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome> {
    let target = make_target(&config.target)?;
    let path = config.samples_path.as_ref().expect("validated");
    let points = crate::output::read_samples_csv(path)?;
    if points.ncols() != target.dim() {
        return Err(dftns::Error::Shape(format!(
            "{path:?} has {} columns, target {} has dimension {}",
            points.ncols(),
            config.target,
            target.dim()
        ))
        .into());
    }
    let block = points.nrows() / config.eval_repeats;
    if block < 2 {
        return Err(dftns::Error::Config(format!(
            "{} rows cannot be split into {} blocks of at least 2",
            points.nrows(),
            config.eval_repeats
        ))
        .into());
    }
    let estimator = config.ksd_estimator();
    let report = eval_protocol(
        &estimator,
        &target,
        &mut SamplePool::new(points.clone()),
        block,
        config.eval_repeats,
        &mut Prng::new(config.seed, 0),
    )?;
    let mut trace = String::new();
    for (r, v) in report.values.iter().enumerate() {
        trace.push_str(&serde_json::to_string(&serde_json::json!({ "repeat": r, "ksd": v })).map_err(dftns::Error::from)?);
        trace.push('\n');
    }
    out.write("samples.csv", samples_csv(points.view()).as_bytes())?;
    out.write("metrics.json", json_string(&report.to_json(&estimator))?.as_bytes())?;
    out.write("trace.jsonl", trace.as_bytes())?;
    write_scatter(out, &points, &target)?;
    let unused = points.nrows() - block * config.eval_repeats;
    Ok(Outcome {
        status: RunStatus::Completed,
        aborted_at: None,
        summary: serde_json::json!({ "rows": points.nrows(), "block": block }),
        notes: if unused > 0 {
            vec![format!("{unused} trailing rows not scored")]
        } else {
            Vec::new()
        },
    })
}

fn blr_experiment(config: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome> {
    let root = Prng::new(config.seed, 0);
    let mut data_prng = root.child(stream::DATA);
    let dataset = if config.data == "synthetic" {
        synthetic_blr(config.synthetic_rows, config.synthetic_features, config.test_fraction, &mut data_prng)?.0
    } else {
        load_blr_csv(&config.data, &config.label_column, config.test_fraction, &mut data_prng)?
    };
    let posterior = BlrPosterior::new(&dataset, config.minibatch)?;
    let (dft, _, mut outcome) = train_and_record(config, &posterior, out)?;
    outcome.notes.extend(dataset.warnings.iter().cloned());

    let draws = NetSampler { net: &dft.best_sampler }.draw(config.accuracy_samples, &mut root.child(stream::EVAL))?;
    let dft_accuracy = blr_accuracy(&posterior, draws.view())?;
    let chain = ChainConfig {
        n_particles: config.accuracy_samples,
        n_steps: config.langevin_steps,
        step_size: config.langevin_step_size,
        leapfrog_steps: 1,
        init: Init::StandardNormal,
    };
    let ld = langevin_run(&posterior, &chain, &mut root.child(stream::BASELINE))?;
    let langevin_accuracy = blr_accuracy(&posterior, ld.samples.points.view())?;
    let metrics = serde_json::json!({
        "metric": "blr_accuracy",
        "dft_accuracy": dft_accuracy,
        "langevin_accuracy": langevin_accuracy,
        "n_train": dataset.train.len(),
        "n_test": dataset.test.len(),
        "accuracy_samples": config.accuracy_samples,
        "langevin_steps": config.langevin_steps,
        "langevin_step_size": config.langevin_step_size,
        "langevin_reinitialized": ld.diagnostics.reinitialized,
    });
    out.write("metrics.json", json_string(&metrics)?.as_bytes())?;
    outcome.summary["dft_accuracy"] = dft_accuracy.into();
    outcome.summary["langevin_accuracy"] = langevin_accuracy.into();
    Ok(outcome)
}
