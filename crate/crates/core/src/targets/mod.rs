//! Un-normalized target densities.
//!
//! Every target exposes its log-density (up to an additive constant), its
//! score `grad log q` and the score VJP `v^T H(x)` with `H` the Hessian of
//! `log q`. The six 2D benchmarks and the logistic-regression posterior all
//! have analytic Hessians; other implementors get a central-difference
//! fallback.

mod blr;
mod toy;

pub use blr::{blr_accuracy, blr_score, load_blr_csv, synthetic_blr, BlrDataset, BlrMinibatch, BlrPosterior};
pub use toy::{make_target, TargetName, Toy2d};

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::rng::Prng;

pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    fn score(&self, x: &[f64], out: &mut [f64]);

    /// `v^T H(x)`. The default differentiates the score numerically along `v`.
    fn score_vjp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        finite_difference_score_vjp(self, x, v, out)
    }

    fn has_analytic_hessian(&self) -> bool {
        false
    }

    /// Scores of every row of `x`.
    fn score_rows(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.raw_dim());
        let mut buf = vec![0.0; self.dim()];
        for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            self.score(&row.to_vec(), &mut buf);
            dst.assign(&ndarray::ArrayView1::from(&buf));
        }
        out
    }

    /// Row-wise `v_i^T H(x_i)`.
    fn score_vjp_rows(&self, x: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros(x.raw_dim());
        let mut buf = vec![0.0; self.dim()];
        for ((xr, vr), mut dst) in x.rows().into_iter().zip(v.rows()).zip(out.rows_mut()) {
            self.score_vjp(&xr.to_vec(), &vr.to_vec(), &mut buf);
            dst.assign(&ndarray::ArrayView1::from(&buf));
        }
        out
    }

    /// A stochastic view (for example a data minibatch) used for one training
    /// step. `None` means the target is already exact and cheap.
    fn minibatch(&self, _prng: &mut Prng) -> Option<Box<dyn Target + '_>> {
        None
    }
}

/// Central difference of the score along `v` with step `1e-5 (1 + |x|)`.
pub fn finite_difference_score_vjp<T: Target + ?Sized>(target: &T, x: &[f64], v: &[f64], out: &mut [f64]) {
    let vnorm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if vnorm == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let xnorm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let t = 1e-5 * (1.0 + xnorm) / vnorm;
    let plus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + t * b).collect();
    let minus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - t * b).collect();
    let mut sp = vec![0.0; x.len()];
    let mut sm = vec![0.0; x.len()];
    target.score(&plus, &mut sp);
    target.score(&minus, &mut sm);
    for ((o, a), b) in out.iter_mut().zip(&sp).zip(&sm) {
        *o = (a - b) / (2.0 * t);
    }
}

fn check_rows(target: &dyn Target, x: &ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if x.ncols() != target.dim() {
        return Err(Error::Shape(format!(
            "{what} has {} columns, target dimension is {}",
            x.ncols(),
            target.dim()
        )));
    }
    for (row, r) in x.rows().into_iter().enumerate() {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRow {
                row,
                message: format!("non-finite {what}"),
            });
        }
    }
    Ok(())
}

/// Scores of a batch, with shape and finiteness checks.
pub fn score_batch(target: &dyn Target, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_rows(target, &x, "point")?;
    Ok(target.score_rows(x))
}

/// Row-wise score VJPs of a batch, with shape and finiteness checks.
pub fn score_vjp_batch(target: &dyn Target, x: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_rows(target, &x, "point")?;
    check_rows(target, &v, "cotangent")?;
    if x.nrows() != v.nrows() {
        return Err(Error::Shape(format!("{} points but {} cotangents", x.nrows(), v.nrows())));
    }
    Ok(target.score_vjp_rows(x, v))
}

/// `v^T H(x)` for a single point.
pub fn score_vjp(target: &dyn Target, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if x.len() != target.dim() || v.len() != target.dim() {
        return Err(Error::Shape(format!(
            "score_vjp on a {}-dimensional target with |x| = {}, |v| = {}",
            target.dim(),
            x.len(),
            v.len()
        )));
    }
    if x.iter().chain(v).any(|a| !a.is_finite()) {
        return Err(Error::Numeric("non-finite input to score_vjp".into()));
    }
    let mut out = vec![0.0; x.len()];
    target.score_vjp(x, v, &mut out);
    Ok(out)
}

/// `N(mean, precision^-1)`, un-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    pub mean: Array1<f64>,
    /// Symmetric positive definite.
    pub precision: Array2<f64>,
}

impl GaussianTarget {
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            precision: Array2::eye(dim),
        }
    }

    pub fn new(mean: Array1<f64>, precision: Array2<f64>) -> Result<Self> {
        let d = mean.len();
        if precision.dim() != (d, d) {
            return Err(Error::Shape(format!("precision {:?} for mean of length {d}", precision.dim())));
        }
        if (&precision - &precision.t()).iter().any(|v| v.abs() > 1e-12) {
            return Err(Error::Config("precision matrix is not symmetric".into()));
        }
        Ok(Self { mean, precision })
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let r = Array1::from(x.to_vec()) - &self.mean;
        -0.5 * r.dot(&self.precision.dot(&r))
    }

    fn score(&self, x: &[f64], out: &mut [f64]) {
        let r = Array1::from(x.to_vec()) - &self.mean;
        for (o, v) in out.iter_mut().zip(self.precision.dot(&r)) {
            *o = -v;
        }
    }

    fn score_vjp(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        let hv = self.precision.dot(&Array1::from(v.to_vec()));
        for (o, h) in out.iter_mut().zip(hv) {
            *o = -h;
        }
    }

    fn has_analytic_hessian(&self) -> bool {
        true
    }
}

/// A target whose log-density is offset by a constant; scores are untouched.
pub struct Shifted<'a> {
    pub inner: &'a dyn Target,
    pub offset: f64,
}

impl Target for Shifted<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.inner.log_density(x) + self.offset
    }

    fn score(&self, x: &[f64], out: &mut [f64]) {
        self.inner.score(x, out)
    }

    fn score_vjp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        self.inner.score_vjp(x, v, out)
    }

    fn has_analytic_hessian(&self) -> bool {
        self.inner.has_analytic_hessian()
    }
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use ndarray::array;

    #[test]
    fn gaussian_target_is_consistent() {
        let t = GaussianTarget::new(array![1.0, -0.5], array![[2.0, 0.3], [0.3, 1.0]]).unwrap();
        let x = [0.3, 0.7];
        let mut s = [0.0; 2];
        t.score(&x, &mut s);
        assert!(rel_close(&s, &fd_gradient(&t, &x), 1e-6));
        let vjp = score_vjp(&t, &x, &[1.0, 0.0]).unwrap();
        assert_eq!(vjp, vec![-2.0, -0.3]);
        assert!(GaussianTarget::new(array![0.0, 0.0], array![[1.0, 0.5], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn finite_difference_fallback_matches_analytic() {
        struct NoHessian(GaussianTarget);
        impl Target for NoHessian {
            fn dim(&self) -> usize {
                2
            }
            fn log_density(&self, x: &[f64]) -> f64 {
                self.0.log_density(x)
            }
            fn score(&self, x: &[f64], out: &mut [f64]) {
                self.0.score(x, out)
            }
        }
        let g = GaussianTarget::new(array![0.0, 1.0], array![[1.5, 0.2], [0.2, 0.7]]).unwrap();
        let t = NoHessian(g.clone());
        let v = [0.4, -1.3];
        let x = [2.0, -1.0];
        assert!(rel_close(
            &score_vjp(&t, &x, &v).unwrap(),
            &score_vjp(&g, &x, &v).unwrap(),
            1e-7
        ));
        assert_eq!(score_vjp(&t, &x, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn batch_helpers_check_inputs() {
        let t = GaussianTarget::standard(2);
        let bad = array![[0.0, 1.0], [f64::INFINITY, 0.0]];
        assert!(matches!(score_batch(&t, bad.view()), Err(Error::NonFiniteRow { row: 1, .. })));
        assert!(matches!(score_batch(&t, array![[0.0]].view()), Err(Error::Shape(_))));
        assert!(matches!(score_vjp(&t, &[f64::NAN, 0.0], &[0.0, 0.0]), Err(Error::Numeric(_))));
    }
}
