//! Kernelized Stein discrepancy with the inverse multiquadric kernel.
//!
//! For `k(x, y) = (c^2 + |x - y|^2)^beta` the Stein kernel is
//!
//! ```text
//! u(x, y) = s(x).s(y) k + s(x).grad_y k + s(y).grad_x k + tr(grad_x grad_y k)
//! ```
//!
//! and the reported discrepancy is the square root of its U- (or V-)
//! statistic average, clipped at zero. Only scores enter, so normalizing
//! constants of the target never matter.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::FeedForwardNet;
use crate::rng::Prng;
use crate::targets::{score_batch, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsdStatistic {
    /// Off-diagonal pairs only; unbiased for the squared discrepancy.
    #[default]
    UStatistic,
    /// All pairs, diagonal included.
    VStatistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsdEstimator {
    pub c: f64,
    pub beta: f64,
    pub statistic: KsdStatistic,
}

impl Default for KsdEstimator {
    fn default() -> Self {
        Self {
            c: 1.0,
            beta: -0.5,
            statistic: KsdStatistic::UStatistic,
        }
    }
}

impl KsdEstimator {
    pub fn new(c: f64, beta: f64, statistic: KsdStatistic) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("IMQ offset c must be positive, got {c}")));
        }
        if !(beta > -1.0 && beta < 0.0) {
            return Err(Error::Config(format!("IMQ exponent beta must lie in (-1, 0), got {beta}")));
        }
        Ok(Self { c, beta, statistic })
    }

    /// Stein kernel from precomputed scores.
    #[inline]
    pub fn stein_kernel_with_scores(
        &self,
        x: ArrayView1<'_, f64>,
        y: ArrayView1<'_, f64>,
        sx: ArrayView1<'_, f64>,
        sy: ArrayView1<'_, f64>,
    ) -> f64 {
        let d = x.len();
        let mut r2 = 0.0;
        let mut ss = 0.0;
        let mut proj = 0.0; // (s(y) - s(x)) . (x - y)
        for i in 0..d {
            let r = x[i] - y[i];
            r2 += r * r;
            ss += sx[i] * sy[i];
            proj += (sy[i] - sx[i]) * r;
        }
        let beta = self.beta;
        let a = self.c * self.c + r2;
        let k = a.powf(beta);
        let a1 = k / a; // a^(beta - 1)
        let a2 = a1 / a; // a^(beta - 2)
        let trace = -4.0 * beta * (beta - 1.0) * a2 * r2 - 2.0 * beta * d as f64 * a1;
        k * ss + 2.0 * beta * a1 * proj + trace
    }

    /// Average of the Stein kernel over sample pairs (the squared discrepancy,
    /// before clipping).
    pub fn quadratic_form_with_scores(&self, x: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Result<f64> {
        let n = x.nrows();
        let min_n = match self.statistic {
            KsdStatistic::UStatistic => 2,
            KsdStatistic::VStatistic => 1,
        };
        if n < min_n {
            return Err(Error::Config(format!(
                "{:?} needs at least {min_n} samples, got {n}",
                self.statistic
            )));
        }
        let include_diag = self.statistic == KsdStatistic::VStatistic;
        let row_sums: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (xi, si) = (x.row(i), s.row(i));
                let mut acc = 0.0;
                for j in 0..n {
                    if j != i || include_diag {
                        acc += self.stein_kernel_with_scores(xi, x.row(j), si, s.row(j));
                    }
                }
                acc
            })
            .collect();
        // fixed ascending order
        let total: f64 = row_sums.iter().sum();
        let pairs = if include_diag {
            (n * n) as f64
        } else {
            (n * (n - 1)) as f64
        };
        Ok(total / pairs)
    }
}

pub fn stein_kernel(estimator: &KsdEstimator, target: &dyn Target, x: &[f64], y: &[f64]) -> f64 {
    let mut sx = vec![0.0; x.len()];
    let mut sy = vec![0.0; y.len()];
    target.score(x, &mut sx);
    target.score(y, &mut sy);
    estimator.stein_kernel_with_scores(
        ArrayView1::from(x),
        ArrayView1::from(y),
        ArrayView1::from(&sx),
        ArrayView1::from(&sy),
    )
}

/// The raw (unclipped) squared discrepancy.
pub fn ksd_quadratic(estimator: &KsdEstimator, target: &dyn Target, samples: ArrayView2<'_, f64>) -> Result<f64> {
    let scores = score_batch(target, samples)?;
    estimator.quadratic_form_with_scores(samples, scores.view())
}

/// `sqrt(max(0, quadratic form))`.
pub fn ksd(estimator: &KsdEstimator, target: &dyn Target, samples: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(ksd_quadratic(estimator, target, samples)?.max(0.0).sqrt())
}

/// Something that can hand out batches of samples.
pub trait SampleSource {
    fn draw(&mut self, n: usize, prng: &mut Prng) -> Result<Array2<f64>>;
}

/// Pushes standard-normal latents through a sampler network.
pub struct NetSampler<'a> {
    pub net: &'a FeedForwardNet,
}

impl SampleSource for NetSampler<'_> {
    fn draw(&mut self, n: usize, prng: &mut Prng) -> Result<Array2<f64>> {
        let z = prng.normal_matrix(n, self.net.input_dim());
        self.net.apply(z.view())
    }
}

/// Consecutive, non-overlapping slices of a fixed pool of points.
pub struct SamplePool {
    points: Array2<f64>,
    cursor: usize,
}

impl SamplePool {
    pub fn new(points: Array2<f64>) -> Self {
        Self { points, cursor: 0 }
    }
}

impl SampleSource for SamplePool {
    fn draw(&mut self, n: usize, _prng: &mut Prng) -> Result<Array2<f64>> {
        let available = self.points.nrows() - self.cursor;
        if n > available {
            return Err(Error::Exhausted {
                requested: n,
                available,
            });
        }
        let out = self.points.slice(ndarray::s![self.cursor..self.cursor + n, ..]).to_owned();
        self.cursor += n;
        Ok(out)
    }
}

/// The same batch every time.
pub struct RepeatedBatch(pub Array2<f64>);

impl SampleSource for RepeatedBatch {
    fn draw(&mut self, n: usize, _prng: &mut Prng) -> Result<Array2<f64>> {
        if n > self.0.nrows() {
            return Err(Error::Exhausted {
                requested: n,
                available: self.0.nrows(),
            });
        }
        Ok(self.0.slice(ndarray::s![..n, ..]).to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsdReport {
    pub mean: f64,
    /// Sample standard deviation across repeats; 0 when there is one repeat.
    pub std: f64,
    pub n_repeats: usize,
    pub n_samples_per_repeat: usize,
    /// Set when `std` is 0 only because there was a single repeat.
    pub single_repeat: bool,
    pub values: Vec<f64>,
}

impl KsdReport {
    pub fn from_values(values: Vec<f64>, n_samples_per_repeat: usize) -> Self {
        let k = values.len();
        let mean = values.iter().sum::<f64>() / k as f64;
        let std = if k > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            n_repeats: k,
            n_samples_per_repeat,
            single_repeat: k == 1,
            values,
        }
    }

    /// The fixed `metrics.json` record for this report.
    pub fn to_json(&self, estimator: &KsdEstimator) -> serde_json::Value {
        serde_json::json!({
            "metric": "ksd",
            "mean": self.mean,
            "std": self.std,
            "n_samples": self.n_samples_per_repeat,
            "n_repeats": self.n_repeats,
            "kernel": { "c": estimator.c, "beta": estimator.beta },
            "statistic": estimator.statistic,
        })
    }
}

/// KSD on `n_repeats` fresh batches of `n_samples` points each.
pub fn eval_protocol(
    estimator: &KsdEstimator,
    target: &dyn Target,
    source: &mut dyn SampleSource,
    n_samples: usize,
    n_repeats: usize,
    prng: &mut Prng,
) -> Result<KsdReport> {
    if n_repeats == 0 {
        return Err(Error::Config("n_repeats must be positive".into()));
    }
    let mut values = Vec::with_capacity(n_repeats);
    for _ in 0..n_repeats {
        let batch = source.draw(n_samples, prng)?;
        values.push(ksd(estimator, target, batch.view())?);
    }
    Ok(KsdReport::from_values(values, n_samples))
}
