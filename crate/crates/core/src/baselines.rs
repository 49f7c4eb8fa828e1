//! Particle and MCMC baselines: unadjusted Langevin, HMC with a Metropolis
//! correction, and SVGD with an RBF kernel whose bandwidth follows the
//! median heuristic.
//!
//! All particles move synchronously from a frozen snapshot of the previous
//! step, so runs are reproducible for a given seed regardless of threading.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::sample::SampleBatch;
use crate::targets::{score_batch, Target};

/// Bandwidth used when every pairwise distance is zero.
pub const MIN_BANDWIDTH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    #[default]
    StandardNormal,
    Provided(Array2<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_particles: usize,
    pub n_steps: usize,
    pub step_size: f64,
    /// Leapfrog steps per HMC transition; ignored by the other samplers.
    pub leapfrog_steps: usize,
    pub init: Init,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            n_steps: 500,
            step_size: 0.01,
            leapfrog_steps: 5,
            init: Init::StandardNormal,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::Config("n_particles must be positive".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step_size must be positive and finite, got {}", self.step_size)));
        }
        if let Init::Provided(points) = &self.init {
            if points.nrows() != self.n_particles {
                return Err(Error::Shape(format!(
                    "{} initial points for {} particles",
                    points.nrows(),
                    self.n_particles
                )));
            }
        }
        Ok(())
    }

    fn initial_points(&self, dim: usize, prng: &mut Prng) -> Result<Array2<f64>> {
        match &self.init {
            Init::StandardNormal => Ok(prng.normal_matrix(self.n_particles, dim)),
            Init::Provided(points) => {
                if points.ncols() != dim {
                    return Err(Error::Shape(format!(
                        "initial points have {} columns, target dimension is {dim}",
                        points.ncols()
                    )));
                }
                Ok(points.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Langevin particles that went non-finite and were put back at their start.
    pub reinitialized: usize,
    /// HMC proposals rejected because they were non-finite.
    pub non_finite_rejections: usize,
    /// HMC only.
    pub acceptance_rate: Option<f64>,
    /// SVGD steps whose bandwidth hit [`MIN_BANDWIDTH`].
    pub floored_bandwidth_steps: usize,
    pub final_bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub samples: SampleBatch,
    pub diagnostics: ChainDiagnostics,
}

fn row_is_finite(x: &Array2<f64>, i: usize) -> bool {
    x.row(i).iter().all(|v| v.is_finite())
}

fn checked_init(target: &dyn Target, config: &ChainConfig, prng: &mut Prng) -> Result<Array2<f64>> {
    config.validate()?;
    let x = config.initial_points(target.dim(), prng)?;
    let s = score_batch(target, x.view())?;
    if let Some(row) = s.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteRow {
            row,
            message: "target score is not finite at the initial point".into(),
        });
    }
    Ok(x)
}

/// `x <- x + eps s(x) + sqrt(2 eps) xi`, without a Metropolis correction.
pub fn langevin_run(target: &dyn Target, config: &ChainConfig, prng: &mut Prng) -> Result<ChainRun> {
    let start = checked_init(target, config, prng)?;
    let mut x = start.clone();
    let eps = config.step_size;
    let noise_scale = (2.0 * eps).sqrt();
    let mut diagnostics = ChainDiagnostics::default();
    for _ in 0..config.n_steps {
        let s = target.score_rows(x.view());
        let xi = prng.normal_matrix(x.nrows(), x.ncols());
        x = &x + &(s * eps) + &(xi * noise_scale);
        for i in 0..x.nrows() {
            if !row_is_finite(&x, i) {
                x.row_mut(i).assign(&start.row(i));
                diagnostics.reinitialized += 1;
            }
        }
    }
    Ok(ChainRun {
        samples: SampleBatch::new(x, "langevin", config.n_steps, prng.seed()),
        diagnostics,
    })
}

fn log_density_rows(target: &dyn Target, x: ArrayView2<'_, f64>) -> Array1<f64> {
    x.rows().into_iter().map(|r| target.log_density(&r.to_vec())).collect()
}

/// One independent HMC chain per particle, identity mass matrix.
pub fn hmc_run(target: &dyn Target, config: &ChainConfig, prng: &mut Prng) -> Result<ChainRun> {
    if config.leapfrog_steps == 0 {
        return Err(Error::Config("HMC needs at least one leapfrog step".into()));
    }
    let mut x = checked_init(target, config, prng)?;
    let (n, d) = x.dim();
    let eps = config.step_size;
    let mut log_q = log_density_rows(target, x.view());
    let mut accepted = 0usize;
    let mut diagnostics = ChainDiagnostics::default();

    for _ in 0..config.n_steps {
        let p0 = prng.normal_matrix(n, d);
        let mut q = x.clone();
        let mut p = &p0 + &(target.score_rows(q.view()) * (0.5 * eps));
        for l in 0..config.leapfrog_steps {
            q = &q + &(&p * eps);
            let s = target.score_rows(q.view());
            let half = if l + 1 == config.leapfrog_steps { 0.5 } else { 1.0 };
            p = &p + &(s * (half * eps));
        }
        let log_q_new = log_density_rows(target, q.view());
        for i in 0..n {
            let k0 = 0.5 * p0.row(i).dot(&p0.row(i));
            let k1 = 0.5 * p.row(i).dot(&p.row(i));
            // -dH = (log q' - K') - (log q - K)
            let log_ratio = (log_q_new[i] - k1) - (log_q[i] - k0);
            let u = prng.uniform();
            if !log_ratio.is_finite() || !row_is_finite(&q, i) {
                diagnostics.non_finite_rejections += 1;
                continue;
            }
            if u.ln() < log_ratio.min(0.0) {
                x.row_mut(i).assign(&q.row(i));
                log_q[i] = log_q_new[i];
                accepted += 1;
            }
        }
    }
    let proposals = n * config.n_steps;
    diagnostics.acceptance_rate = (proposals > 0).then(|| accepted as f64 / proposals as f64);
    Ok(ChainRun {
        samples: SampleBatch::new(x, "hmc", config.n_steps, prng.seed()),
        diagnostics,
    })
}

/// Lower median of the pairwise squared distances, divided by `log(n + 1)`.
/// Not floored.
pub fn median_bandwidth(points: ArrayView2<'_, f64>) -> Result<f64> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::Config(format!("median bandwidth needs at least 2 points, got {n}")));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = points.row(i);
        for j in (i + 1)..n {
            let xj = points.row(j);
            dists.push(xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        }
    }
    let mid = (dists.len() - 1) / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    Ok(*median / ((n + 1) as f64).ln())
}

/// The SVGD velocity `mean_j [k(x_j, x_i) s_j + grad_{x_j} k(x_j, x_i)]`
/// for `k(x, y) = exp(-|x - y|^2 / h)`.
pub fn svgd_direction(x: ArrayView2<'_, f64>, scores: ArrayView2<'_, f64>, h: f64) -> Array2<f64> {
    let (n, d) = x.dim();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut phi = vec![0.0; d];
            for j in 0..n {
                let xj = x.row(j);
                let r2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                let k = (-r2 / h).exp();
                let sj = scores.row(j);
                for c in 0..d {
                    phi[c] += k * sj[c] - 2.0 / h * (xj[c] - xi[c]) * k;
                }
            }
            phi.iter_mut().for_each(|v| *v /= n as f64);
            phi
        })
        .collect();
    let mut out = Array2::zeros((n, d));
    for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(rows) {
        dst.assign(&Array1::from(src));
    }
    out
}

pub fn svgd_run(target: &dyn Target, config: &ChainConfig, prng: &mut Prng) -> Result<ChainRun> {
    let mut x = checked_init(target, config, prng)?;
    let mut diagnostics = ChainDiagnostics::default();
    for _ in 0..config.n_steps {
        let h = if x.nrows() < 2 { 0.0 } else { median_bandwidth(x.view())? };
        let h = if h < MIN_BANDWIDTH {
            diagnostics.floored_bandwidth_steps += 1;
            MIN_BANDWIDTH
        } else {
            h
        };
        diagnostics.final_bandwidth = Some(h);
        let s = score_batch(target, x.view())?;
        let phi = svgd_direction(x.view(), s.view(), h);
        x = &x + &(phi * config.step_size);
    }
    Ok(ChainRun {
        samples: SampleBatch::new(x, "svgd", config.n_steps, prng.seed()),
        diagnostics,
    })
}
