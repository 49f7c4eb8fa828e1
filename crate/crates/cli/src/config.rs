//! Flat TOML experiment configuration.
//!
//! Resolution order, later entries winning: built-in defaults, the preset,
//! the config file, `--set` overrides, then the `--seed`/`--out` flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dftns::baselines::{ChainConfig, Init};
use dftns::dft::{DftConfig, GradMode};
use dftns::metrics::{KsdEstimator, KsdStatistic};
use dftns::nn::Activation;
use dftns::score_matching::ScoreObjective;
use dftns::targets::TargetName;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    TrainDft,
    RunMcmc,
    EvalKsd,
    Blr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Langevin,
    Hmc,
    Svgd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Langevin => "langevin",
            Method::Hmc => "hmc",
            Method::Svgd => "svgd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(format!("unknown preset {other:?} (expected desk or paper)")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        })
    }
}

impl Preset {
    /// Keys the preset sets on top of the defaults.
    pub fn table(self) -> toml::Table {
        let text = match self {
            // The defaults are the desk profile; restated so the preset is explicit.
            Preset::Desk => {
                r#"
                batch_size = 1000
                max_iter = 20000
                sampler_lr = 5e-5
                score_lr = 1e-3
                sampler_width = 32
                sampler_depth = 3
                sampler_activation = "elu"
                score_width = 32
                score_depth = 3
                score_activation = "gelu"
                "#
            }
            Preset::Paper => {
                r#"
                batch_size = 5000
                max_iter = 20000
                sampler_lr = 2e-5
                score_lr = 2e-5
                sampler_width = 200
                sampler_depth = 3
                sampler_activation = "leaky_relu:0.2"
                score_width = 200
                score_depth = 3
                score_activation = "gelu"
                "#
            }
        };
        text.parse().expect("preset tables are valid TOML")
    }
}

/// Every key of the config file. All keys are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// One of the six 2D target names; unused by `blr`.
    pub target: String,
    pub seed: u64,
    /// Defaults to `$DFTNS_OUTPUT_ROOT/<config stem>-seed<seed>`.
    pub output_dir: Option<PathBuf>,

    // DFT training (train_dft, blr)
    pub sigma: f64,
    pub grad_mode: GradMode,
    pub lambda1: f64,
    pub lambda2: f64,
    pub score_steps: usize,
    pub score_objective: ScoreObjective,
    pub batch_size: usize,
    pub max_iter: usize,
    pub sampler_lr: f64,
    pub score_lr: f64,
    pub sampler_beta1: f64,
    pub sampler_beta2: f64,
    pub score_beta1: f64,
    pub score_beta2: f64,

    // Networks. Depth counts hidden layers; latent_dim 0 means the target dimension.
    pub latent_dim: usize,
    pub sampler_width: usize,
    pub sampler_depth: usize,
    pub sampler_activation: Activation,
    /// Shift the initial sampler output to zero mean.
    pub center_sampler: bool,
    pub score_width: usize,
    pub score_depth: usize,
    pub score_activation: Activation,

    // KSD evaluation. eval_every 0 disables checkpoints during training.
    pub eval_every: usize,
    pub eval_samples: usize,
    pub eval_repeats: usize,
    pub ksd_c: f64,
    pub ksd_beta: f64,
    pub ksd_statistic: KsdStatistic,
    /// Rows written to samples.csv by train_dft and blr.
    pub output_samples: usize,

    // Baselines (run_mcmc). eval_repeats independent runs are scored.
    pub method: Method,
    pub n_particles: usize,
    pub n_steps: usize,
    pub step_size: f64,
    pub leapfrog_steps: usize,

    /// Input of eval_ksd: a CSV with header x0,x1,...
    pub samples_path: Option<PathBuf>,

    // Bayesian logistic regression
    /// `synthetic` or the path of a numeric CSV with a header row.
    pub data: String,
    pub label_column: String,
    pub test_fraction: f64,
    pub synthetic_rows: usize,
    pub synthetic_features: usize,
    /// Data rows per likelihood estimate during training.
    pub minibatch: usize,
    /// Parameter samples averaged by the predictive classifier.
    pub accuracy_samples: usize,
    pub langevin_steps: usize,
    pub langevin_step_size: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let dft = DftConfig::default();
        let chain = ChainConfig::default();
        let ksd = KsdEstimator::default();
        Self {
            experiment: Experiment::TrainDft,
            target: "gaussian".into(),
            seed: 0,
            output_dir: None,
            sigma: dft.sigma,
            grad_mode: dft.grad_mode,
            lambda1: dft.lambda1,
            lambda2: dft.lambda2,
            score_steps: dft.score_steps,
            score_objective: dft.score_objective,
            batch_size: dft.batch_size,
            max_iter: dft.max_iter,
            sampler_lr: 5e-5,
            score_lr: 1e-3,
            sampler_beta1: dft.sampler_betas.0,
            sampler_beta2: dft.sampler_betas.1,
            score_beta1: dft.score_betas.0,
            score_beta2: dft.score_betas.1,
            latent_dim: 0,
            sampler_width: 32,
            sampler_depth: 3,
            sampler_activation: Activation::Elu,
            center_sampler: true,
            score_width: 32,
            score_depth: 3,
            score_activation: Activation::Gelu,
            eval_every: dft.eval_every,
            eval_samples: dft.eval_samples,
            eval_repeats: dft.eval_repeats,
            ksd_c: ksd.c,
            ksd_beta: ksd.beta,
            ksd_statistic: ksd.statistic,
            output_samples: 500,
            method: Method::Svgd,
            n_particles: chain.n_particles,
            n_steps: chain.n_steps,
            step_size: chain.step_size,
            leapfrog_steps: chain.leapfrog_steps,
            samples_path: None,
            data: "synthetic".into(),
            label_column: "label".into(),
            test_fraction: 0.2,
            synthetic_rows: 2000,
            synthetic_features: 10,
            minibatch: 500,
            accuracy_samples: 100,
            langevin_steps: 1000,
            langevin_step_size: 1e-4,
        }
    }
}

fn parse_override(raw: &str) -> Result<(String, toml::Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Validation(vec![format!("override {raw:?} is not key=value")]))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Validation(vec![format!("override {raw:?} has an empty key")]));
    }
    let value = value.trim();
    // TOML literal if it parses as one, otherwise a bare string.
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

/// Merges the layers into one table, then checks keys and types one at a time
/// so that every problem is reported together.
pub fn resolve(file: Option<&Path>, preset: Option<Preset>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table = preset.map(Preset::table).unwrap_or_default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let parsed: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::ConfigParse {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
        table.extend(parsed);
    }
    for raw in overrides {
        let (key, value) = parse_override(raw)?;
        table.insert(key, value);
    }

    let mut problems = Vec::new();
    for (key, value) in &table {
        let mut single = toml::Table::new();
        single.insert(key.clone(), value.clone());
        if let Err(e) = ExperimentConfig::deserialize(toml::Value::Table(single)) {
            problems.push(format!("{key}: {}", e.message().trim()));
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Validation(problems));
    }
    ExperimentConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| CliError::Validation(vec![e.message().trim().to_string()]))
}

impl ExperimentConfig {
    pub fn dft_config(&self) -> DftConfig {
        DftConfig {
            sigma: self.sigma,
            grad_mode: self.grad_mode,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            score_steps: self.score_steps,
            batch_size: self.batch_size,
            max_iter: self.max_iter,
            sampler_lr: self.sampler_lr,
            score_lr: self.score_lr,
            sampler_betas: (self.sampler_beta1, self.sampler_beta2),
            score_betas: (self.score_beta1, self.score_beta2),
            score_objective: self.score_objective,
            eval_every: self.eval_every,
            eval_samples: self.eval_samples,
            eval_repeats: self.eval_repeats,
            ksd: self.ksd_estimator(),
        }
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            n_particles: self.n_particles,
            n_steps: self.n_steps,
            step_size: self.step_size,
            leapfrog_steps: self.leapfrog_steps,
            init: Init::StandardNormal,
        }
    }

    pub fn ksd_estimator(&self) -> KsdEstimator {
        KsdEstimator {
            c: self.ksd_c,
            beta: self.ksd_beta,
            statistic: self.ksd_statistic,
        }
    }

    pub fn target_name(&self) -> Option<TargetName> {
        self.target.parse().ok()
    }

    /// Hidden sizes followed by the output, for an input of `input` columns.
    pub fn layer_dims(input: usize, width: usize, depth: usize, output: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(width, depth));
        dims.push(output);
        dims
    }

    /// Every semantic problem with the configuration.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut positive_real = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be positive and finite, got {v}"));
            }
        };
        positive_real("ksd_c", self.ksd_c);
        let uses_dft = matches!(self.experiment, Experiment::TrainDft | Experiment::Blr);
        if uses_dft {
            positive_real("sigma", self.sigma);
            positive_real("sampler_lr", self.sampler_lr);
            positive_real("score_lr", self.score_lr);
        }
        if self.experiment == Experiment::RunMcmc {
            positive_real("step_size", self.step_size);
        }
        if self.experiment == Experiment::Blr {
            positive_real("langevin_step_size", self.langevin_step_size);
        }

        let mut positive_int = |name: &str, v: usize| {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        };
        positive_int("eval_repeats", self.eval_repeats);
        if uses_dft {
            for (name, v) in [
                ("score_steps", self.score_steps),
                ("batch_size", self.batch_size),
                ("sampler_width", self.sampler_width),
                ("score_width", self.score_width),
                ("eval_samples", self.eval_samples),
                ("output_samples", self.output_samples),
            ] {
                positive_int(name, v);
            }
        }
        match self.experiment {
            Experiment::RunMcmc => {
                positive_int("n_particles", self.n_particles);
                if self.method == Method::Hmc {
                    positive_int("leapfrog_steps", self.leapfrog_steps);
                }
            }
            Experiment::Blr => {
                for (name, v) in [
                    ("minibatch", self.minibatch),
                    ("accuracy_samples", self.accuracy_samples),
                    ("synthetic_rows", self.synthetic_rows),
                    ("synthetic_features", self.synthetic_features),
                ] {
                    positive_int(name, v);
                }
            }
            _ => {}
        }

        if uses_dft {
            for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
                if !(v >= 0.0 && v.is_finite()) {
                    problems.push(format!("{name} must be non-negative, got {v}"));
                }
            }
            for (name, v) in [
                ("sampler_beta1", self.sampler_beta1),
                ("sampler_beta2", self.sampler_beta2),
                ("score_beta1", self.score_beta1),
                ("score_beta2", self.score_beta2),
            ] {
                if !(0.0..1.0).contains(&v) {
                    problems.push(format!("{name} must lie in [0, 1), got {v}"));
                }
            }
        }
        if !(self.ksd_beta < 0.0 && self.ksd_beta > -1.0) {
            problems.push(format!("ksd_beta must lie in (-1, 0), got {}", self.ksd_beta));
        }
        if self.experiment != Experiment::Blr && self.target_name().is_none() {
            problems.push(format!("unknown target {:?}", self.target));
        }
        if self.experiment == Experiment::EvalKsd && self.samples_path.is_none() {
            problems.push("eval_ksd needs samples_path".into());
        }
        if self.experiment == Experiment::Blr && !(0.0..1.0).contains(&self.test_fraction) {
            problems.push(format!("test_fraction must lie in [0, 1), got {}", self.test_fraction));
        }
        problems
    }

    /// The snapshot written next to the outputs. It omits `output_dir` so that
    /// re-running it with `--out` reproduces the run elsewhere.
    pub fn snapshot(&self) -> String {
        let mut copy = self.clone();
        copy.output_dir = None;
        toml::to_string(&copy).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("run.toml");
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = ExperimentConfig::default();
        assert!(c.validate().is_empty(), "{:?}", c.validate());
        let back: ExperimentConfig = toml::from_str(&c.snapshot()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn layers_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "target = \"donut\"\nbatch_size = 64\nsigma = 0.2\n");
        let c = resolve(Some(&path), Some(Preset::Paper), &["sigma=0.05".into(), "grad_mode=partial".into()]).unwrap();
        assert_eq!(c.target, "donut");
        assert_eq!(c.batch_size, 64);
        assert_eq!(c.sigma, 0.05);
        assert_eq!(c.grad_mode, GradMode::Partial);
        assert_eq!(c.sampler_lr, 2e-5);
        assert_eq!(c.sampler_width, 200);
    }

    #[test]
    fn every_bad_key_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "bogus = 1\nsigma = \"wide\"\nmax_iter = -3\n");
        match resolve(Some(&path), None, &["also_bogus=2".into()]) {
            Err(CliError::Validation(problems)) => {
                assert_eq!(problems.len(), 4, "{problems:?}");
                for key in ["bogus", "sigma", "max_iter", "also_bogus"] {
                    assert!(problems.iter().any(|p| p.starts_with(key)), "{key} missing from {problems:?}");
                }
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn semantic_problems_are_collected() {
        let c = ExperimentConfig {
            sigma: 0.0,
            batch_size: 0,
            target: "banana".into(),
            ksd_beta: 0.5,
            ..ExperimentConfig::default()
        };
        let problems = c.validate();
        assert_eq!(problems.len(), 4, "{problems:?}");
    }

    #[test]
    fn eval_ksd_requires_samples() {
        let c = ExperimentConfig {
            experiment: Experiment::EvalKsd,
            ..ExperimentConfig::default()
        };
        assert_eq!(c.validate(), vec!["eval_ksd needs samples_path".to_string()]);
    }

    #[test]
    fn overrides_fall_back_to_strings() {
        let c = resolve(None, None, &["target=funnel".into(), "max_iter=7".into()]).unwrap();
        assert_eq!(c.target, "funnel");
        assert_eq!(c.max_iter, 7);
        assert!(matches!(resolve(None, None, &["max_iter".into()]), Err(CliError::Validation(_))));
    }

    #[test]
    fn desk_preset_matches_defaults() {
        assert_eq!(resolve(None, Some(Preset::Desk), &[]).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn layer_dims_shape() {
        assert_eq!(ExperimentConfig::layer_dims(2, 8, 3, 2), vec![2, 8, 8, 8, 2]);
        assert_eq!(ExperimentConfig::layer_dims(4, 8, 0, 2), vec![4, 2]);
    }
}
