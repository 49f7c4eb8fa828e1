//! Denoising Fisher training of a one-step sampler `x = g_theta(z)`.
//!
//! The Fisher divergence between the noised sampler distribution and the
//! target is minimized through a surrogate whose `x`-gradient only needs the
//! target score, its Hessian-vector product and a score network fitted by
//! denoising score matching:
//!
//! ```text
//! L1 = |s_q(x) - s_phi(x)|^2
//! L2 = 2 (s_q(x) - s_phi(x))^T (s_phi(x) - c),   c = -eps / sigma
//! ```
//!
//! evaluated at `x = g_theta(z) + sigma eps`. The score network's parameters
//! and `c` are held fixed while differentiating; `x` enters everywhere else.
//! In "partial" mode only the `L2` path is used.

mod verify;

pub use verify::{
    verify_grad2_identity, verify_lemma1, Grad2Check, Grad2Report, Lemma1Report, LinearGaussianSampler,
    VerificationStatus,
};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{eval_protocol, KsdEstimator, NetSampler};
use crate::nn::{AdamState, FeedForwardNet, ForwardTape};
use crate::rng::Prng;
use crate::score_matching::{conditional_score, perturb, score_step, NoiseModel, PerturbedBatch, ScoreObjective};
use crate::targets::{score_batch, score_vjp_batch, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    #[default]
    Full,
    Partial,
}

impl fmt::Display for GradMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradMode::Full => "full",
            GradMode::Partial => "partial",
        })
    }
}

impl FromStr for GradMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(GradMode::Full),
            "partial" => Ok(GradMode::Partial),
            other => Err(Error::Config(format!("unknown grad mode `{other}` (expected full or partial)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DftConfig {
    pub sigma: f64,
    pub grad_mode: GradMode,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Score-network updates per sampler update.
    pub score_steps: usize,
    pub batch_size: usize,
    pub max_iter: usize,
    pub sampler_lr: f64,
    pub score_lr: f64,
    pub sampler_betas: (f64, f64),
    pub score_betas: (f64, f64),
    pub score_objective: ScoreObjective,
    /// KSD checkpoint period in iterations; 0 disables evaluation.
    pub eval_every: usize,
    pub eval_samples: usize,
    pub eval_repeats: usize,
    pub ksd: KsdEstimator,
}

impl Default for DftConfig {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            grad_mode: GradMode::Full,
            lambda1: 1.0,
            lambda2: 1.0,
            score_steps: 2,
            batch_size: 1000,
            max_iter: 20_000,
            sampler_lr: 1e-4,
            score_lr: 1e-4,
            sampler_betas: (0.9, 0.999),
            score_betas: (0.9, 0.999),
            score_objective: ScoreObjective::Dsm,
            eval_every: 1000,
            eval_samples: 500,
            eval_repeats: 20,
            ksd: KsdEstimator::default(),
        }
    }
}

impl DftConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            problems.push(format!("sigma must be positive, got {}", self.sigma));
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("score_steps", self.score_steps),
            ("batch_size", self.batch_size),
            ("eval_samples", self.eval_samples),
            ("eval_repeats", self.eval_repeats),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        for (name, v) in [("sampler_lr", self.sampler_lr), ("score_lr", self.score_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// `(lambda1, lambda2)` after applying the gradient mode.
    pub fn effective_lambdas(&self) -> (f64, f64) {
        match self.grad_mode {
            GradMode::Full => (self.lambda1, self.lambda2),
            GradMode::Partial => (0.0, self.lambda2),
        }
    }
}

/// The `x`-space cotangent of the surrogate, one row per perturbed sample,
/// plus the batch means of `L1` and `L2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateGradient {
    pub g_x: Array2<f64>,
    pub l1: f64,
    pub l2: f64,
}

/// Row-wise `lambda1 L1 + lambda2 L2` at `x_sigma` with `c` given.
pub fn surrogate_objective(
    target: &dyn Target,
    score_net: &FeedForwardNet,
    x_sigma: ArrayView2<'_, f64>,
    c: ArrayView2<'_, f64>,
    lambdas: (f64, f64),
) -> Result<Array1<f64>> {
    let s_q = score_batch(target, x_sigma)?;
    let s_phi = score_net.apply(x_sigma)?;
    let r = &s_q - &s_phi;
    let m = &s_phi - &c;
    Ok(Zip::from(r.rows())
        .and(m.rows())
        .map_collect(|r, m| lambdas.0 * r.dot(&r) + lambdas.1 * 2.0 * r.dot(&m)))
}

fn first_non_finite_row(m: &Array2<f64>) -> Option<usize> {
    m.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite()))
}

/// Per-sample `d(lambda1 L1 + lambda2 L2)/dx` at the perturbed points.
///
/// Uses one target Hessian-vector product and one score-network VJP:
/// `2 H_q (l1 r + l2 m) + 2 J_phi^T (l2 r - l1 r - l2 m)` with
/// `r = s_q - s_phi` and `m = s_phi - c`.
pub fn surrogate_gradient(
    target: &dyn Target,
    score_net: &FeedForwardNet,
    batch: &PerturbedBatch,
    lambdas: (f64, f64),
) -> Result<SurrogateGradient> {
    let (l1w, l2w) = lambdas;
    let x = batch.x_sigma.view();
    let s_q = score_batch(target, x)?;
    let (s_phi, tape) = score_net.forward(x)?;
    let r = &s_q - &s_phi;
    let m = &s_phi - &conditional_score(batch);

    let hess_cot = &r * l1w + &m * l2w;
    let net_cot = &r * (l2w - l1w) - &m * l2w;
    let g_x = (score_vjp_batch(target, x, hess_cot.view())? + score_net.vjp_input(&tape, net_cot.view())?) * 2.0;
    if let Some(row) = first_non_finite_row(&g_x) {
        return Err(Error::NonFiniteRow {
            row,
            message: "non-finite surrogate gradient".into(),
        });
    }
    let n = batch.len() as f64;
    let l1 = r.rows().into_iter().map(|r| r.dot(&r)).sum::<f64>() / n;
    let l2 = Zip::from(r.rows()).and(m.rows()).fold(0.0, |acc, r, m| acc + 2.0 * r.dot(&m)) / n;
    Ok(SurrogateGradient { g_x, l1, l2 })
}

/// Pathwise sampler gradient `mean_i (dx_i/dtheta)^T g_x[i]`; the tape must
/// come from the forward pass that produced the clean points of the batch.
pub fn sampler_grad(sampler: &FeedForwardNet, tape: &ForwardTape, g_x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let n = tape.batch_size();
    let mut grad = sampler.backward_params(tape, g_x)?;
    grad.iter_mut().for_each(|g| *g /= n as f64);
    Ok(grad)
}

/// One JSON-lines record of the training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dsm_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ksd_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ksd_std: Option<f64>,
    /// Set when the iteration's batch was dropped because of non-finite values.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub skipped: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn push(&mut self, record: TraceRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.iter <= last.iter {
                return Err(Error::State(format!(
                    "trace iterations must increase: {} after {}",
                    record.iter, last.iter
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(iter, mean, std)` of every KSD checkpoint.
    pub fn ksd_checkpoints(&self) -> Vec<(usize, f64, f64)> {
        self.records
            .iter()
            .filter_map(|r| Some((r.iter, r.ksd_mean?, r.ksd_std.unwrap_or(0.0))))
            .collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStatus {
    Completed,
    /// Two consecutive iterations produced non-finite values.
    Aborted { iter: usize },
}

#[derive(Debug, Clone)]
pub struct DftOutcome {
    pub sampler: FeedForwardNet,
    pub score_net: FeedForwardNet,
    /// Sampler parameters at the lowest mean KSD checkpoint; the final
    /// sampler when no checkpoint was taken.
    pub best_sampler: FeedForwardNet,
    pub best_ksd: Option<f64>,
    pub best_iter: Option<usize>,
    pub trace: TrainTrace,
    pub status: TrainStatus,
}

fn is_numeric_failure(e: &Error) -> bool {
    matches!(e, Error::NonFiniteRow { .. } | Error::Numeric(_))
}

fn check_dims(target: &dyn Target, sampler: &FeedForwardNet, score_net: &FeedForwardNet) -> Result<()> {
    let d = target.dim();
    if sampler.output_dim() != d || score_net.input_dim() != d || score_net.output_dim() != d {
        return Err(Error::Config(format!(
            "dimension mismatch: target {d}, sampler output {}, score net {} -> {}",
            sampler.output_dim(),
            score_net.input_dim(),
            score_net.output_dim()
        )));
    }
    Ok(())
}

struct StepLosses {
    l1: f64,
    l2: f64,
    dsm: f64,
}

struct Trainer<'a> {
    target: &'a dyn Target,
    config: &'a DftConfig,
    noise: NoiseModel,
    lambdas: (f64, f64),
    sampler_adam: AdamState,
    score_adam: AdamState,
}

impl Trainer<'_> {
    fn iteration(
        &mut self,
        sampler: &mut FeedForwardNet,
        score_net: &mut FeedForwardNet,
        prng: &mut Prng,
    ) -> Result<StepLosses> {
        let n = self.config.batch_size;
        let latent = sampler.input_dim();

        // score phase: sampler frozen, clean samples detached
        let mut dsm = f64::NAN;
        for _ in 0..self.config.score_steps {
            let z = prng.normal_matrix(n, latent);
            let x0 = sampler.apply(z.view())?;
            dsm = score_step(
                self.config.score_objective,
                score_net,
                x0.view(),
                &self.noise,
                &mut self.score_adam,
                prng,
            )?;
        }

        // sampler phase: score net frozen, fresh latents
        let view = self.target.minibatch(prng);
        let target: &dyn Target = view.as_deref().unwrap_or(self.target);
        let z = prng.normal_matrix(n, latent);
        let (x0, tape) = sampler.forward(z.view())?;
        let batch = perturb(x0.view(), &self.noise, prng)?;
        let sg = surrogate_gradient(target, score_net, &batch, self.lambdas)?;
        let grad = sampler_grad(sampler, &tape, sg.g_x.view())?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite sampler gradient".into()));
        }
        self.sampler_adam.step(sampler.params_mut(), &grad)?;
        Ok(StepLosses {
            l1: sg.l1,
            l2: sg.l2,
            dsm,
        })
    }
}

/// Alternates score fitting and sampler updates for `config.max_iter`
/// iterations, with a KSD checkpoint every `config.eval_every` iterations.
///
/// A single non-finite iteration is dropped and recorded as skipped; two in a
/// row stop training with [`TrainStatus::Aborted`]. Parameter updates of a
/// dropped iteration that happened before the failure are kept.
pub fn train_dft(
    target: &dyn Target,
    mut sampler: FeedForwardNet,
    mut score_net: FeedForwardNet,
    config: &DftConfig,
    prng: &mut Prng,
) -> Result<DftOutcome> {
    config.validate()?;
    check_dims(target, &sampler, &score_net)?;
    let mut trainer = Trainer {
        target,
        config,
        noise: NoiseModel::new(config.sigma)?,
        lambdas: config.effective_lambdas(),
        sampler_adam: AdamState::with_betas(
            sampler.num_params(),
            config.sampler_lr,
            config.sampler_betas.0,
            config.sampler_betas.1,
            1e-8,
        )?,
        score_adam: AdamState::with_betas(
            score_net.num_params(),
            config.score_lr,
            config.score_betas.0,
            config.score_betas.1,
            1e-8,
        )?,
    };
    // evaluation draws never disturb the training stream
    let mut eval_prng = prng.child(0x6b_7364);

    let mut trace = TrainTrace::default();
    let mut best: Option<(f64, usize, FeedForwardNet)> = None;
    let mut consecutive_failures = 0;
    let mut status = TrainStatus::Completed;

    for iter in 0..config.max_iter {
        let mut record = TraceRecord {
            iter,
            l1: None,
            l2: None,
            dsm_loss: None,
            ksd_mean: None,
            ksd_std: None,
            skipped: false,
        };
        match trainer.iteration(&mut sampler, &mut score_net, prng) {
            Ok(losses) => {
                consecutive_failures = 0;
                record.l1 = Some(losses.l1);
                record.l2 = Some(losses.l2);
                record.dsm_loss = Some(losses.dsm).filter(|v| v.is_finite());
            }
            Err(e) if is_numeric_failure(&e) => {
                consecutive_failures += 1;
                record.skipped = true;
                if consecutive_failures >= 2 {
                    trace.push(record)?;
                    status = TrainStatus::Aborted { iter };
                    break;
                }
            }
            Err(e) => return Err(e),
        }

        if config.eval_every > 0 && (iter + 1) % config.eval_every == 0 {
            let mut source = NetSampler { net: &sampler };
            match eval_protocol(
                &config.ksd,
                target,
                &mut source,
                config.eval_samples,
                config.eval_repeats,
                &mut eval_prng,
            ) {
                Ok(report) => {
                    record.ksd_mean = Some(report.mean);
                    record.ksd_std = Some(report.std);
                    if report.mean.is_finite() && best.as_ref().is_none_or(|(b, _, _)| report.mean < *b) {
                        best = Some((report.mean, iter, sampler.clone()));
                    }
                }
                Err(e) if is_numeric_failure(&e) => {}
                Err(e) => return Err(e),
            }
        }
        trace.push(record)?;
    }

    let (best_ksd, best_iter, best_sampler) = match best {
        Some((k, i, net)) => (Some(k), Some(i), net),
        None => (None, None, sampler.clone()),
    };
    Ok(DftOutcome {
        sampler,
        score_net,
        best_sampler,
        best_ksd,
        best_iter,
        trace,
        status,
    })
}
