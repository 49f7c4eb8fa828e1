//! Bayesian logistic regression posterior.
//!
//! Parameters are `xi = (w, bias, log_alpha)` with prior `w ~ N(0, alpha^-1 I)`,
//! `alpha ~ Gamma(shape 1, rate 0.01)` and a flat prior on the bias. The chain
//! runs on `log_alpha`, so the change-of-variables term `+log_alpha` is part of
//! the density.

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index;

use super::Target;
use crate::error::{Error, Result};
use crate::rng::Prng;

const PRIOR_SHAPE: f64 = 1.0;
const PRIOR_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct BlrDataset {
    /// Standardized with train-split statistics.
    pub features: Array2<f64>,
    /// 0 / 1.
    pub labels: Array1<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Non-fatal events during loading (dropped columns, remapped labels).
    pub warnings: Vec<String>,
}

impl BlrDataset {
    /// Splits, standardizes and validates raw data.
    ///
    /// Columns that are constant on the train split are dropped and recorded in
    /// `warnings`.
    pub fn from_raw(
        features: Array2<f64>,
        labels: Array1<f64>,
        feature_names: Vec<String>,
        test_fraction: f64,
        prng: &mut Prng,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || feature_names.len() != features.ncols() {
            return Err(Error::Shape(format!(
                "{n} feature rows, {} labels, {} names for {} columns",
                labels.len(),
                feature_names.len(),
                features.ncols()
            )));
        }
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Config(format!("test_fraction must lie in [0, 1), got {test_fraction}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Config("labels must be 0 or 1".into()));
        }

        let n_test = (n as f64 * test_fraction).round() as usize;
        let perm = index::sample(prng, n, n).into_vec();
        let mut test = perm[..n_test].to_vec();
        let mut train = perm[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        if train.is_empty() {
            return Err(Error::Config("training split is empty".into()));
        }

        let train_rows = features.select(Axis(0), &train);
        let mean = train_rows.mean_axis(Axis(0)).expect("non-empty");
        let std = train_rows.std_axis(Axis(0), 0.0);

        let mut warnings = Vec::new();
        let keep: Vec<usize> = (0..features.ncols())
            .filter(|&j| {
                if std[j] > 0.0 {
                    true
                } else {
                    warnings.push(format!("dropped constant column {:?}", feature_names[j]));
                    false
                }
            })
            .collect();
        let mut out = features.select(Axis(1), &keep);
        for (c, &j) in keep.iter().enumerate() {
            out.column_mut(c).mapv_inplace(|v| (v - mean[j]) / std[j]);
        }
        Ok(Self {
            features: out,
            labels,
            train,
            test,
            feature_names: keep.iter().map(|&j| feature_names[j].clone()).collect(),
            warnings,
        })
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }
}

/// Reads a numeric CSV with a header row; `label_column` names the label.
///
/// Labels in `{1, 2}` are remapped to `{0, 1}` with a warning.
pub fn load_blr_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    test_fraction: f64,
    prng: &mut Prng,
) -> Result<BlrDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Config(format!("cannot open {path:?}: {other:?}")),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Config(format!("cannot read header of {path:?}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Config(format!("label column {label_column:?} not found in {path:?}")))?;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // 1-based file line, header is line 1
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: headers[j].clone(),
                message: format!("not a finite number: {cell:?}"),
            })?;
            if j == label_idx {
                labels.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let n = labels.len();
    let d = headers.len() - 1;
    if n == 0 {
        return Err(Error::Config(format!("{path:?} has no data rows")));
    }

    let mut warnings = Vec::new();
    let distinct_12 = labels.iter().all(|&y| y == 1.0 || y == 2.0);
    if distinct_12 && labels.iter().any(|&y| y == 2.0) {
        for y in labels.iter_mut() {
            *y -= 1.0;
        }
        warnings.push("labels {1, 2} remapped to {0, 1}".to_string());
    }
    if let Some(bad) = labels.iter().position(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: bad + 2,
            column: label_column.to_string(),
            message: format!("label {} is not binary", labels[bad]),
        });
    }

    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let features = Array2::from_shape_vec((n, d), values).expect("row-major fill");
    let mut ds = BlrDataset::from_raw(features, Array1::from(labels), names, test_fraction, prng)?;
    warnings.append(&mut ds.warnings);
    ds.warnings = warnings;
    Ok(ds)
}

/// Logistic data with standard-normal features and weights drawn from
/// `N(0, I)`. Returns the dataset and the generating weights.
pub fn synthetic_blr(
    n_rows: usize,
    n_features: usize,
    test_fraction: f64,
    prng: &mut Prng,
) -> Result<(BlrDataset, Array1<f64>)> {
    if n_rows < 2 || n_features == 0 {
        return Err(Error::Config(format!(
            "synthetic data needs at least 2 rows and 1 feature, got {n_rows} x {n_features}"
        )));
    }
    let true_w = Array1::from_shape_simple_fn(n_features, || prng.normal());
    let x = prng.normal_matrix(n_rows, n_features);
    let logits = x.dot(&true_w);
    let labels = logits.mapv(|eta| if prng.uniform() < sigmoid(eta) { 1.0 } else { 0.0 });
    let names = (0..n_features).map(|j| format!("f{j}")).collect();
    let ds = BlrDataset::from_raw(x, labels, names, test_fraction, prng)?;
    Ok((ds, true_w))
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Likelihood rows with their weight `N / |B|`, plus the prior.
struct Terms<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    scale: f64,
}

impl Terms<'_> {
    fn d(&self) -> usize {
        self.x.ncols()
    }

    fn log_density(&self, xi: &[f64]) -> f64 {
        let d = self.d();
        let w = ArrayView1::from(&xi[..d]);
        let (bias, log_alpha) = (xi[d], xi[d + 1]);
        let alpha = log_alpha.exp();
        let eta = self.x.dot(&w) + bias;
        let lik: f64 = eta.iter().zip(self.y).map(|(&e, &y)| y * e - softplus(e)).sum();
        self.scale * lik + 0.5 * d as f64 * log_alpha - 0.5 * alpha * w.dot(&w) + PRIOR_SHAPE * log_alpha
            - PRIOR_RATE * alpha
    }

    /// Scores for a batch of parameter rows.
    fn score_rows(&self, xi: ArrayView2<'_, f64>) -> Array2<f64> {
        let d = self.d();
        let w = xi.slice(s![.., ..d]);
        let bias = xi.column(d);
        let alpha = xi.column(d + 1).mapv(f64::exp);
        let mut eta = w.dot(&self.x.t());
        for (mut row, &b) in eta.rows_mut().into_iter().zip(bias) {
            row += b;
        }
        // residuals y - sigmoid(eta)
        let mut resid = eta;
        for mut row in resid.rows_mut() {
            for (r, &y) in row.iter_mut().zip(self.y) {
                *r = y - sigmoid(*r);
            }
        }
        let mut out = Array2::zeros((xi.nrows(), d + 2));
        let gw = resid.dot(&self.x) * self.scale;
        for i in 0..xi.nrows() {
            let wi = w.row(i);
            let a = alpha[i];
            for j in 0..d {
                out[[i, j]] = gw[[i, j]] - a * wi[j];
            }
            out[[i, d]] = self.scale * resid.row(i).sum();
            out[[i, d + 1]] = 0.5 * d as f64 + PRIOR_SHAPE - PRIOR_RATE * a - 0.5 * a * wi.dot(&wi);
        }
        out
    }

    fn score_vjp_rows(&self, xi: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>) -> Array2<f64> {
        let d = self.d();
        let w = xi.slice(s![.., ..d]);
        let bias = xi.column(d);
        let alpha = xi.column(d + 1).mapv(f64::exp);
        let vw = v.slice(s![.., ..d]);
        let eta = w.dot(&self.x.t());
        // t = -scale * sigma (1 - sigma) * (x . v_w + v_b)
        let mut t = vw.dot(&self.x.t());
        for i in 0..xi.nrows() {
            let (b, vb) = (bias[i], v[[i, d]]);
            for (p, &e) in t.row_mut(i).iter_mut().zip(eta.row(i)) {
                let sg = sigmoid(e + b);
                *p = -self.scale * sg * (1.0 - sg) * (*p + vb);
            }
        }
        let hw = t.dot(&self.x);
        let mut out = Array2::zeros((xi.nrows(), d + 2));
        for i in 0..xi.nrows() {
            let a = alpha[i];
            let wi = w.row(i);
            let vwi = vw.row(i);
            let vl = v[[i, d + 1]];
            for j in 0..d {
                out[[i, j]] = hw[[i, j]] - a * vwi[j] - a * wi[j] * vl;
            }
            out[[i, d]] = t.row(i).sum();
            out[[i, d + 1]] = -a * wi.dot(&vwi) + (-PRIOR_RATE * a - 0.5 * a * wi.dot(&wi)) * vl;
        }
        out
    }
}

fn single_row<F: Fn(ArrayView2<'_, f64>) -> Array2<f64>>(xi: &[f64], out: &mut [f64], f: F) {
    let m = ArrayView2::from_shape((1, xi.len()), xi).expect("row");
    out.copy_from_slice(f(m).as_slice().expect("contiguous"));
}

#[derive(Debug, Clone)]
pub struct BlrPosterior {
    train_x: Array2<f64>,
    train_y: Array1<f64>,
    test_x: Array2<f64>,
    test_y: Array1<f64>,
    minibatch_size: usize,
}

impl BlrPosterior {
    pub fn new(dataset: &BlrDataset, minibatch_size: usize) -> Result<Self> {
        if minibatch_size == 0 {
            return Err(Error::Config("minibatch_size must be positive".into()));
        }
        Ok(Self {
            train_x: dataset.features.select(Axis(0), &dataset.train),
            train_y: dataset.labels.select(Axis(0), &dataset.train),
            test_x: dataset.features.select(Axis(0), &dataset.test),
            test_y: dataset.labels.select(Axis(0), &dataset.test),
            minibatch_size,
        })
    }

    pub fn n_features(&self) -> usize {
        self.train_x.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.train_x.nrows()
    }

    pub fn minibatch_size(&self) -> usize {
        self.minibatch_size
    }

    fn full_terms(&self) -> Terms<'_> {
        Terms {
            x: self.train_x.view(),
            y: self.train_y.view(),
            scale: 1.0,
        }
    }

    /// The posterior with its likelihood restricted to the given train rows and
    /// rescaled by `N / |B|`.
    pub fn minibatch_view(&self, indices: &[usize]) -> Result<BlrMinibatch> {
        if indices.is_empty() {
            return Err(Error::Config("empty minibatch".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_train()) {
            return Err(Error::Config(format!(
                "minibatch index {bad} outside the {} training rows",
                self.n_train()
            )));
        }
        Ok(BlrMinibatch {
            x: self.train_x.select(Axis(0), indices),
            y: self.train_y.select(Axis(0), indices),
            scale: self.n_train() as f64 / indices.len() as f64,
        })
    }
}

impl Target for BlrPosterior {
    fn dim(&self) -> usize {
        self.n_features() + 2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.full_terms().log_density(x)
    }

    fn score(&self, x: &[f64], out: &mut [f64]) {
        single_row(x, out, |m| self.full_terms().score_rows(m))
    }

    fn score_vjp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let vm = ArrayView2::from_shape((1, v.len()), v).expect("row");
        single_row(x, out, |m| self.full_terms().score_vjp_rows(m, vm))
    }

    fn has_analytic_hessian(&self) -> bool {
        true
    }

    fn score_rows(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.full_terms().score_rows(x)
    }

    fn score_vjp_rows(&self, x: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>) -> Array2<f64> {
        self.full_terms().score_vjp_rows(x, v)
    }

    fn minibatch(&self, prng: &mut Prng) -> Option<Box<dyn Target + '_>> {
        if self.minibatch_size >= self.n_train() {
            return None;
        }
        let mut idx = index::sample(prng, self.n_train(), self.minibatch_size).into_vec();
        idx.sort_unstable();
        Some(Box::new(self.minibatch_view(&idx).expect("indices in range")))
    }
}

/// A data-subsampled posterior; see [`BlrPosterior::minibatch_view`].
#[derive(Debug, Clone)]
pub struct BlrMinibatch {
    x: Array2<f64>,
    y: Array1<f64>,
    scale: f64,
}

impl BlrMinibatch {
    fn terms(&self) -> Terms<'_> {
        Terms {
            x: self.x.view(),
            y: self.y.view(),
            scale: self.scale,
        }
    }
}

impl Target for BlrMinibatch {
    fn dim(&self) -> usize {
        self.x.ncols() + 2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.terms().log_density(x)
    }

    fn score(&self, x: &[f64], out: &mut [f64]) {
        single_row(x, out, |m| self.terms().score_rows(m))
    }

    fn score_vjp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let vm = ArrayView2::from_shape((1, v.len()), v).expect("row");
        single_row(x, out, |m| self.terms().score_vjp_rows(m, vm))
    }

    fn has_analytic_hessian(&self) -> bool {
        true
    }

    fn score_rows(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.terms().score_rows(x)
    }

    fn score_vjp_rows(&self, x: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>) -> Array2<f64> {
        self.terms().score_vjp_rows(x, v)
    }
}

/// Score of the posterior with its likelihood estimated on `minibatch_indices`
/// (indices into the training split).
pub fn blr_score(posterior: &BlrPosterior, xi: &[f64], minibatch_indices: &[usize]) -> Result<Vec<f64>> {
    if xi.len() != posterior.dim() {
        return Err(Error::Shape(format!("xi has length {}, expected {}", xi.len(), posterior.dim())));
    }
    let view = posterior.minibatch_view(minibatch_indices)?;
    let mut out = vec![0.0; xi.len()];
    view.score(xi, &mut out);
    Ok(out)
}

/// Test accuracy of the posterior-predictive classifier: the predictive
/// probability is averaged over the parameter samples, then thresholded at 1/2.
pub fn blr_accuracy(posterior: &BlrPosterior, samples: ArrayView2<'_, f64>) -> Result<f64> {
    let d = posterior.n_features();
    if samples.nrows() == 0 {
        return Err(Error::Config("need at least one parameter sample".into()));
    }
    if samples.ncols() != d + 2 {
        return Err(Error::Shape(format!("samples have {} columns, expected {}", samples.ncols(), d + 2)));
    }
    if posterior.test_x.nrows() == 0 {
        return Err(Error::Config("test split is empty".into()));
    }
    let mut logits = posterior.test_x.dot(&samples.slice(s![.., ..d]).t());
    for mut row in logits.rows_mut() {
        for (v, b) in row.iter_mut().zip(samples.column(d)) {
            *v = sigmoid(*v + b);
        }
    }
    let k = samples.nrows() as f64;
    let correct = logits
        .rows()
        .into_iter()
        .zip(&posterior.test_y)
        .filter(|(probs, &y)| {
            let p = probs.sum() / k;
            (p > 0.5) == (y == 1.0)
        })
        .count();
    Ok(correct as f64 / posterior.test_y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn small_dataset(seed: u64) -> BlrDataset {
        synthetic_blr(60, 3, 0.25, &mut Prng::new(seed, 0)).unwrap().0
    }

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_split_sizes_and_determinism() {
        let mut text = String::from("a,b,label\n");
        for i in 0..10 {
            text.push_str(&format!("{},{},{}\n", i, (i * i) % 7, i % 2));
        }
        let f = write_csv(&text);
        let a = load_blr_csv(f.path(), "label", 0.2, &mut Prng::new(4, 0)).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (8, 2));
        assert!(a.train.iter().all(|i| !a.test.contains(i)));
        let b = load_blr_csv(f.path(), "label", 0.2, &mut Prng::new(4, 0)).unwrap();
        assert_eq!(a, b);
        let train = a.features.select(Axis(0), &a.train);
        for m in train.mean_axis(Axis(0)).unwrap() {
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn csv_errors_name_row_and_column() {
        let f = write_csv("a,b,label\n1,2,0\n3,oops,1\n");
        match load_blr_csv(f.path(), "label", 0.2, &mut Prng::new(0, 0)) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            load_blr_csv("/nonexistent/file.csv", "label", 0.2, &mut Prng::new(0, 0)),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn constant_column_dropped_and_labels_remapped() {
        let f = write_csv("a,c,label\n1,5,1\n2,5,2\n3,5,1\n4,5,2\n5,5,2\n");
        let ds = load_blr_csv(f.path(), "label", 0.2, &mut Prng::new(1, 0)).unwrap();
        assert_eq!(ds.feature_names, vec!["a".to_string()]);
        assert_eq!(ds.warnings.len(), 2);
        assert!(ds.labels.iter().all(|&y| y == 0.0 || y == 1.0));
    }

    #[test]
    fn score_matches_finite_differences() {
        let ds = small_dataset(1);
        let post = BlrPosterior::new(&ds, 10).unwrap();
        let mut prng = Prng::new(2, 0);
        for _ in 0..10 {
            let xi: Vec<f64> = (0..post.dim()).map(|_| 0.7 * prng.normal()).collect();
            let mut s = vec![0.0; post.dim()];
            post.score(&xi, &mut s);
            assert!(rel_close(&s, &fd_gradient(&post, &xi), 1e-5));
            let all: Vec<usize> = (0..post.n_train()).collect();
            assert_eq!(blr_score(&post, &xi, &all).unwrap(), s);
        }
    }

    #[test]
    fn hessian_vjp_matches_score_differences() {
        let ds = small_dataset(3);
        let post = BlrPosterior::new(&ds, 10).unwrap();
        let mut prng = Prng::new(4, 0);
        for _ in 0..10 {
            let xi: Vec<f64> = (0..post.dim()).map(|_| 0.5 * prng.normal()).collect();
            let v: Vec<f64> = (0..post.dim()).map(|_| prng.normal()).collect();
            let mut analytic = vec![0.0; post.dim()];
            post.score_vjp(&xi, &v, &mut analytic);
            let mut fd = vec![0.0; post.dim()];
            super::super::finite_difference_score_vjp(&post, &xi, &v, &mut fd);
            assert!(rel_close(&analytic, &fd, 1e-5));
        }
    }

    #[test]
    fn zero_weights_give_centered_residual_score() {
        let x = array![[1.0, 2.0], [-1.0, -2.0], [0.5, -0.5], [-0.5, 0.5]];
        let y = array![1.0, 0.0, 1.0, 0.0];
        let ds = BlrDataset {
            features: x.clone(),
            labels: y.clone(),
            train: vec![0, 1, 2, 3],
            test: vec![],
            feature_names: vec!["a".into(), "b".into()],
            warnings: vec![],
        };
        let post = BlrPosterior::new(&ds, 2).unwrap();
        let batch = [0, 2];
        let s = blr_score(&post, &[0.0, 0.0, 0.0, 0.0], &batch).unwrap();
        let scale = 4.0 / 2.0;
        for j in 0..2 {
            let expected: f64 = batch.iter().map(|&i| (y[i] - 0.5) * x[[i, j]]).sum::<f64>() * scale;
            assert!((s[j] - expected).abs() < 1e-12);
        }
        assert!(matches!(blr_score(&post, &[0.0; 4], &[]), Err(Error::Config(_))));
    }

    #[test]
    fn disjoint_minibatches_average_to_full_score() {
        let ds = synthetic_blr(50, 3, 0.2, &mut Prng::new(8, 0)).unwrap().0;
        let post = BlrPosterior::new(&ds, 10).unwrap();
        assert_eq!(post.n_train(), 40);
        let xi = [0.3, -0.2, 0.1, 0.05, 0.4];
        let mut full = vec![0.0; 5];
        post.score(&xi, &mut full);
        let mut mean = [0.0; 5];
        let batches: Vec<Vec<usize>> = (0..4).map(|b| (b * 10..(b + 1) * 10).collect()).collect();
        for b in &batches {
            for (m, s) in mean.iter_mut().zip(blr_score(&post, &xi, b).unwrap()) {
                *m += s / 4.0;
            }
        }
        assert!(rel_close(&mean, &full, 1e-12));
    }

    #[test]
    fn accuracy_of_constant_classifiers() {
        let ds = small_dataset(5);
        let post = BlrPosterior::new(&ds, 10).unwrap();
        let d = post.n_features();
        let mut xi = Array2::<f64>::zeros((1, d + 2));
        xi[[0, d]] = 50.0;
        let positives = post.test_y.iter().filter(|&&y| y == 1.0).count() as f64 / post.test_y.len() as f64;
        assert_eq!(blr_accuracy(&post, xi.view()).unwrap(), positives);

        let row = Array1::from(vec![0.3, -1.0, 0.8, 0.1, 0.0]);
        let one = row.clone().insert_axis(Axis(0));
        let many = ndarray::stack(Axis(0), &[row.view(), row.view(), row.view()]).unwrap();
        assert_eq!(blr_accuracy(&post, one.view()).unwrap(), blr_accuracy(&post, many.view()).unwrap());
        assert!(blr_accuracy(&post, Array2::zeros((0, d + 2)).view()).is_err());
    }
}
