//! Fitting the online score network to samples.
//!
//! Denoising score matching regresses `s(x0 + sigma eps)` onto the conditional
//! score `-eps / sigma`; in expectation this matches the score of the noised
//! sample distribution. Standard score matching (`|s|^2 + 2 div s`) is kept as
//! an alternative for small dimensions, with the divergence computed exactly.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamState, FeedForwardNet};
use crate::rng::Prng;

/// Largest dimension for which the exact-divergence objective is allowed.
pub const SM_MAX_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma must be positive and finite, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// `x_sigma = x0 + sigma * eps`, with the noise kept around.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedBatch {
    pub x0: Array2<f64>,
    pub eps: Array2<f64>,
    pub x_sigma: Array2<f64>,
    pub sigma: f64,
}

impl PerturbedBatch {
    pub fn from_parts(x0: Array2<f64>, eps: Array2<f64>, noise: &NoiseModel) -> Result<Self> {
        if x0.dim() != eps.dim() {
            return Err(Error::Shape(format!("x0 {:?} and eps {:?} differ in shape", x0.dim(), eps.dim())));
        }
        let sigma = noise.sigma();
        let x_sigma = &x0 + &(&eps * sigma);
        Ok(Self {
            x0,
            eps,
            x_sigma,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.x0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.nrows() == 0
    }
}

pub fn perturb(x0: ArrayView2<'_, f64>, noise: &NoiseModel, prng: &mut Prng) -> Result<PerturbedBatch> {
    if let Some(row) = x0.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteRow {
            row,
            message: "non-finite clean sample".into(),
        });
    }
    let eps = prng.normal_matrix(x0.nrows(), x0.ncols());
    PerturbedBatch::from_parts(x0.to_owned(), eps, noise)
}

/// `grad log N(x_sigma; x0, sigma^2 I) = -eps / sigma`, row-wise.
pub fn conditional_score(batch: &PerturbedBatch) -> Array2<f64> {
    batch.eps.mapv(|e| -e / batch.sigma)
}

fn first_bad_row(per_row: &Array1<f64>) -> Option<usize> {
    per_row.iter().position(|v| !v.is_finite())
}

/// Mean of `|s(x_sigma) - (-eps / sigma)|^2` and its parameter gradient.
pub fn dsm_loss(net: &FeedForwardNet, batch: &PerturbedBatch) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let (s, tape) = net.forward(batch.x_sigma.view())?;
    let mut resid = s - conditional_score(batch);
    let per_row: Array1<f64> = resid.rows().into_iter().map(|r| r.dot(&r)).collect();
    if let Some(row) = first_bad_row(&per_row) {
        return Err(Error::NonFiniteRow {
            row,
            message: "non-finite denoising score matching loss".into(),
        });
    }
    let n = batch.len() as f64;
    let loss = per_row.sum() / n;
    resid.mapv_inplace(|r| 2.0 * r / n);
    let grad = net.backward_params(&tape, resid.view())?;
    Ok((loss, grad))
}

/// Perturbs `x0`, takes one Adam step on the denoising loss and returns the
/// loss before the step.
///
/// `x0` must be detached from the sampler's parameters.
pub fn dsm_step(
    net: &mut FeedForwardNet,
    x0: ArrayView2<'_, f64>,
    noise: &NoiseModel,
    adam: &mut AdamState,
    prng: &mut Prng,
) -> Result<f64> {
    let batch = perturb(x0, noise, prng)?;
    let (loss, grad) = dsm_loss(net, &batch)?;
    adam.step(net.params_mut(), &grad)?;
    Ok(loss)
}

fn check_sm_dim(net: &FeedForwardNet) -> Result<()> {
    if net.input_dim() > SM_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "exact score matching is limited to dimension {SM_MAX_DIM} (got {}); use denoising score matching",
            net.input_dim()
        )));
    }
    Ok(())
}

/// Batch mean of `|s(x)|^2 + 2 div s(x)`.
pub fn sm_loss(net: &FeedForwardNet, x: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(sm_loss_and_grad(net, x)?.0)
}

pub fn sm_loss_and_grad(net: &FeedForwardNet, x: ArrayView2<'_, f64>) -> Result<(f64, Vec<f64>)> {
    check_sm_dim(net)?;
    if x.nrows() == 0 {
        return Err(Error::Config("empty batch".into()));
    }
    let n = x.nrows() as f64;
    let (s, tape) = net.forward(x)?;
    let weights = Array1::from_elem(x.nrows(), 2.0 / n);
    let (div, mut grad) = net.jacobian_trace(x, weights.view())?;
    let per_row: Array1<f64> = s
        .rows()
        .into_iter()
        .zip(&div)
        .map(|(r, &dv)| r.dot(&r) + 2.0 * dv)
        .collect();
    if let Some(row) = first_bad_row(&per_row) {
        return Err(Error::NonFiniteRow {
            row,
            message: "non-finite score matching loss".into(),
        });
    }
    let cot = s.mapv(|v| 2.0 * v / n);
    let sq_grad = net.backward_params(&tape, cot.view())?;
    for (g, q) in grad.iter_mut().zip(sq_grad) {
        *g += q;
    }
    Ok((per_row.sum() / n, grad))
}

pub fn sm_step(net: &mut FeedForwardNet, x: ArrayView2<'_, f64>, adam: &mut AdamState) -> Result<f64> {
    let (loss, grad) = sm_loss_and_grad(net, x)?;
    adam.step(net.params_mut(), &grad)?;
    Ok(loss)
}

/// Which objective fits the score network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreObjective {
    #[default]
    Dsm,
    Sm,
}

/// One score-network update on samples `x0` with the chosen objective.
///
/// With [`ScoreObjective::Sm`] the samples are perturbed first, so the net
/// still estimates the score of the noised distribution.
pub fn score_step(
    objective: ScoreObjective,
    net: &mut FeedForwardNet,
    x0: ArrayView2<'_, f64>,
    noise: &NoiseModel,
    adam: &mut AdamState,
    prng: &mut Prng,
) -> Result<f64> {
    match objective {
        ScoreObjective::Dsm => dsm_step(net, x0, noise, adam, prng),
        ScoreObjective::Sm => {
            check_sm_dim(net)?;
            let batch = perturb(x0, noise, prng)?;
            sm_step(net, batch.x_sigma.view(), adam)
        }
    }
}
