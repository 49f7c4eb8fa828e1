//! Dense feed-forward networks with hand-written reverse mode.
//!
//! Parameters live in one flat `Vec<f64>`: for each layer the weight matrix
//! (row-major, shape `out x in`) followed by its bias. Gradients and optimizer
//! moments use the same layout, so they are plain slices as well.

mod activation;
mod adam;
mod checkpoint;

pub use activation::Activation;
pub use adam::{adam_step, AdamState};
pub use checkpoint::NetCheckpoint;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Zip};

use crate::error::{Error, Result};
use crate::rng::Prng;

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardNet {
    layer_dims: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    /// `(weight_offset, bias_offset)` per layer.
    offsets: Vec<(usize, usize)>,
}

/// Intermediate values of one forward pass, enough for both reverse passes.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    layer_dims: Vec<usize>,
    /// Input of every layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    /// Activation derivatives at the hidden pre-activations.
    slopes: Vec<Array2<f64>>,
}

impl ForwardTape {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }

    pub fn input(&self) -> ArrayView2<'_, f64> {
        self.inputs[0].view()
    }
}

fn layout(layer_dims: &[usize]) -> Result<(Vec<(usize, usize)>, usize)> {
    if layer_dims.len() < 2 {
        return Err(Error::Config(format!(
            "layer_dims needs at least an input and an output size, got {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::Config(format!("layer_dims contains a zero: {layer_dims:?}")));
    }
    let mut offsets = Vec::with_capacity(layer_dims.len() - 1);
    let mut at = 0;
    for w in layer_dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        offsets.push((at, at + fan_in * fan_out));
        at += fan_in * fan_out + fan_out;
    }
    Ok((offsets, at))
}

impl FeedForwardNet {
    /// All-zero parameters.
    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Result<Self> {
        let (offsets, n) = layout(layer_dims)?;
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            activation,
            params: vec![0.0; n],
            offsets,
        })
    }

    /// Gaussian weights with standard deviation `sqrt(2 / fan_in)` and zero biases.
    pub fn init(layer_dims: &[usize], activation: Activation, prng: &mut Prng) -> Result<Self> {
        let mut net = Self::zeros(layer_dims, activation)?;
        for layer in 0..net.num_layers() {
            let scale = (2.0 / net.layer_dims[layer] as f64).sqrt();
            for w in net.weight_mut(layer).iter_mut() {
                *w = scale * prng.normal();
            }
        }
        Ok(net)
    }

    pub fn from_layers(
        activation: Activation,
        weights: &[Array2<f64>],
        biases: &[Array1<f64>],
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape(format!(
                "{} weight matrices for {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut dims = vec![weights[0].ncols()];
        for (i, (w, b)) in weights.iter().zip(biases).enumerate() {
            if w.ncols() != *dims.last().unwrap() || b.len() != w.nrows() {
                return Err(Error::Shape(format!(
                    "layer {i}: weight {:?} and bias {} do not chain",
                    w.dim(),
                    b.len()
                )));
            }
            dims.push(w.nrows());
        }
        let mut net = Self::zeros(&dims, activation)?;
        for (i, (w, b)) in weights.iter().zip(biases).enumerate() {
            net.weight_mut(i).assign(w);
            let (_, bo) = net.offsets[i];
            net.params[bo..bo + b.len()].copy_from_slice(b.as_slice().unwrap_or(&b.to_vec()));
        }
        Ok(net)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_layers(&self) -> usize {
        self.offsets.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite parameter value".into()));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (wo, bo) = self.offsets[layer];
        let shape = (self.layer_dims[layer + 1], self.layer_dims[layer]);
        ArrayView2::from_shape(shape, &self.params[wo..bo]).expect("layout")
    }

    pub fn weight_mut(&mut self, layer: usize) -> ArrayViewMut2<'_, f64> {
        let (wo, bo) = self.offsets[layer];
        let shape = (self.layer_dims[layer + 1], self.layer_dims[layer]);
        ArrayViewMut2::from_shape(shape, &mut self.params[wo..bo]).expect("layout")
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (_, bo) = self.offsets[layer];
        ArrayView1::from(&self.params[bo..bo + self.layer_dims[layer + 1]])
    }

    /// Shifts the output bias so the mean output over `x` is zero.
    pub fn center_output(&mut self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.nrows() == 0 {
            return Err(Error::Config("cannot center on an empty batch".into()));
        }
        let mean = self.apply(x)?.mean_axis(ndarray::Axis(0)).expect("non-empty");
        let (_, bo) = self.offsets[self.num_layers() - 1];
        for (b, m) in self.params[bo..].iter_mut().zip(mean.iter()) {
            *b -= m;
        }
        Ok(())
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, net expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        if let Some((row, _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()).map(|(i, v)| (i.0, v)) {
            return Err(Error::NonFiniteRow {
                row,
                message: "non-finite network input".into(),
            });
        }
        Ok(())
    }

    fn affine(&self, layer: usize, a: &ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = a.dot(&self.weight(layer).t());
        z += &self.bias(layer);
        z
    }

    /// Evaluates the net on a batch (one point per row) and records a tape.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardTape)> {
        self.check_input(&x)?;
        let last = self.num_layers() - 1;
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut pre_activations = Vec::with_capacity(self.num_layers());
        let mut slopes = Vec::with_capacity(last);
        let mut a = x.to_owned();
        for layer in 0..self.num_layers() {
            let z = self.affine(layer, &a.view());
            let next = if layer == last {
                z.clone()
            } else {
                let act = self.activation;
                let mut out = Array2::zeros(z.raw_dim());
                let mut slope = Array2::zeros(z.raw_dim());
                Zip::from(&mut out).and(&mut slope).and(&z).for_each(|o, d, &v| {
                    (*o, *d) = act.apply_with_derivative(v);
                });
                slopes.push(slope);
                out
            };
            inputs.push(std::mem::replace(&mut a, next));
            pre_activations.push(z);
        }
        Ok((
            a,
            ForwardTape {
                layer_dims: self.layer_dims.clone(),
                inputs,
                pre_activations,
                slopes,
            },
        ))
    }

    /// Forward pass without a tape.
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let last = self.num_layers() - 1;
        let mut a = x.to_owned();
        for layer in 0..self.num_layers() {
            let mut z = self.affine(layer, &a.view());
            if layer != last {
                let act = self.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            a = z;
        }
        Ok(a)
    }

    fn check_tape(&self, tape: &ForwardTape, cotangent: &ArrayView2<'_, f64>) -> Result<()> {
        if tape.layer_dims != self.layer_dims {
            return Err(Error::State(format!(
                "tape recorded for layer_dims {:?}, net has {:?}",
                tape.layer_dims, self.layer_dims
            )));
        }
        if cotangent.dim() != (tape.batch_size(), self.output_dim()) {
            return Err(Error::Shape(format!(
                "cotangent {:?} does not match outputs ({}, {})",
                cotangent.dim(),
                tape.batch_size(),
                self.output_dim()
            )));
        }
        Ok(())
    }

    fn backward_impl(
        &self,
        tape: &ForwardTape,
        cotangent: ArrayView2<'_, f64>,
        want_params: bool,
    ) -> Result<(Option<Vec<f64>>, Array2<f64>)> {
        self.check_tape(tape, &cotangent)?;
        let last = self.num_layers() - 1;
        let mut grad = want_params.then(|| vec![0.0; self.params.len()]);
        let mut g = cotangent.to_owned();
        for layer in (0..self.num_layers()).rev() {
            if layer != last {
                g *= &tape.slopes[layer];
            }
            if let Some(grad) = grad.as_mut() {
                let (wo, bo) = self.offsets[layer];
                let fan_out = self.layer_dims[layer + 1];
                let dw = g.t().dot(&tape.inputs[layer]);
                grad[wo..bo].copy_from_slice(dw.as_slice().expect("standard layout"));
                let db = &mut grad[bo..bo + fan_out];
                for row in g.rows() {
                    for (acc, v) in db.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
            g = g.dot(&self.weight(layer));
        }
        Ok((grad, g))
    }

    /// Gradient of `sum_rows <cotangent_row, output_row>` with respect to the parameters.
    pub fn backward_params(&self, tape: &ForwardTape, cotangent: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self.backward_impl(tape, cotangent, true)?.0.expect("requested"))
    }

    /// Row `i` is `cotangent_i^T J(x_i)` where `J` is the input Jacobian.
    pub fn vjp_input(&self, tape: &ForwardTape, cotangent: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.backward_impl(tape, cotangent, false)?.1)
    }

    /// Parameter gradient and input VJP from a single reverse sweep.
    pub fn backward(&self, tape: &ForwardTape, cotangent: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        let (grad, vjp) = self.backward_impl(tape, cotangent, true)?;
        Ok((grad.expect("requested"), vjp))
    }

    /// Exact trace of the input Jacobian for each row, together with the
    /// parameter gradient of `sum_i row_weights[i] * trace_i`.
    ///
    /// Requires a square net (`input_dim == output_dim`). Costs one tangent
    /// sweep plus one reverse sweep per input dimension.
    pub fn jacobian_trace(
        &self,
        x: ArrayView2<'_, f64>,
        row_weights: ArrayView1<'_, f64>,
    ) -> Result<(Array1<f64>, Vec<f64>)> {
        let d = self.input_dim();
        if self.output_dim() != d {
            return Err(Error::Shape(format!(
                "Jacobian trace needs a square net, got {d} -> {}",
                self.output_dim()
            )));
        }
        if row_weights.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "{} row weights for {} rows",
                row_weights.len(),
                x.nrows()
            )));
        }
        let (_, tape) = self.forward(x)?;
        let n = x.nrows();
        let last = self.num_layers() - 1;
        let act = self.activation;
        let mut trace = Array1::<f64>::zeros(n);
        let mut grad = vec![0.0; self.params.len()];

        for j in 0..d {
            // Tangent sweep along e_j; keep the tangent input and pre-activation of each layer.
            let mut da = Array2::<f64>::zeros((n, d));
            da.column_mut(j).fill(1.0);
            let mut tangent_inputs = Vec::with_capacity(self.num_layers());
            let mut tangent_pre = Vec::with_capacity(self.num_layers());
            for layer in 0..self.num_layers() {
                let dz = da.dot(&self.weight(layer).t());
                let next = if layer == last {
                    dz.clone()
                } else {
                    let mut t = dz.clone();
                    Zip::from(&mut t)
                        .and(&tape.pre_activations[layer])
                        .for_each(|t, &z| *t *= act.derivative(z));
                    t
                };
                tangent_inputs.push(std::mem::replace(&mut da, next));
                tangent_pre.push(dz);
            }
            trace += &da.column(j);

            // Reverse sweep over the primal + tangent graph.
            let mut g_a = Array2::<f64>::zeros((n, d));
            let mut g_da = Array2::<f64>::zeros((n, d));
            g_da.column_mut(j).assign(&row_weights);
            for layer in (0..self.num_layers()).rev() {
                let (g_z, g_dz) = if layer == last {
                    (g_a, g_da)
                } else {
                    let z = &tape.pre_activations[layer];
                    let dz = &tangent_pre[layer];
                    let mut g_z = g_a;
                    Zip::from(&mut g_z)
                        .and(&g_da)
                        .and(z)
                        .and(dz)
                        .for_each(|gz, &gda, &z, &dz| {
                            *gz = act.derivative(z) * *gz + act.second_derivative(z) * dz * gda;
                        });
                    let mut g_dz = g_da;
                    Zip::from(&mut g_dz).and(z).for_each(|g, &z| *g *= act.derivative(z));
                    (g_z, g_dz)
                };
                let (wo, bo) = self.offsets[layer];
                let fan_out = self.layer_dims[layer + 1];
                let dw = g_z.t().dot(&tape.inputs[layer]) + g_dz.t().dot(&tangent_inputs[layer]);
                for (acc, v) in grad[wo..bo].iter_mut().zip(dw.iter()) {
                    *acc += v;
                }
                let db = &mut grad[bo..bo + fan_out];
                for row in g_z.rows() {
                    for (acc, v) in db.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                if layer > 0 {
                    g_a = g_z.dot(&self.weight(layer));
                    g_da = g_dz.dot(&self.weight(layer));
                } else {
                    break;
                }
            }
        }
        Ok((trace, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};

    fn all_activations() -> Vec<Activation> {
        vec![
            Activation::Elu,
            Activation::leaky_relu(),
            Activation::Gelu,
            Activation::Identity,
        ]
    }

    /// sum_rows <cot, net(x)> with explicit parameters.
    fn pairing(net: &FeedForwardNet, x: &Array2<f64>, cot: &Array2<f64>) -> f64 {
        (net.apply(x.view()).unwrap() * cot).sum()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = FeedForwardNet::init(&[2, 2], Activation::Elu, &mut Prng::new(3, 0)).unwrap();
        let b = FeedForwardNet::init(&[2, 2], Activation::Elu, &mut Prng::new(3, 0)).unwrap();
        assert_eq!(a, b);
        let big = FeedForwardNet::init(&[2, 400, 400, 400, 2], Activation::Elu, &mut Prng::new(1, 0)).unwrap();
        for layer in 0..big.num_layers() {
            assert!(big.bias(layer).iter().all(|&b| b == 0.0));
        }
        assert_eq!(big.num_params(), 2 * 400 + 400 + 2 * (400 * 400 + 400) + 400 * 2 + 2);
    }

    #[test]
    fn init_scale_follows_fan_in() {
        let net = FeedForwardNet::init(&[200, 300], Activation::Elu, &mut Prng::new(9, 0)).unwrap();
        let w = net.weight(0);
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 2.0 / 200.0).abs() < 0.05 * 2.0 / 200.0, "var {var}");
    }

    #[test]
    fn bad_dims_are_config_errors() {
        assert!(matches!(FeedForwardNet::zeros(&[2], Activation::Elu), Err(Error::Config(_))));
        assert!(matches!(FeedForwardNet::zeros(&[2, 0, 2], Activation::Elu), Err(Error::Config(_))));
    }

    #[test]
    fn affine_forward_examples() {
        let id = FeedForwardNet::from_layers(Activation::Identity, &[Array2::eye(2)], &[Array1::zeros(2)]).unwrap();
        assert_eq!(id.apply(array![[1.0, 2.0]].view()).unwrap(), array![[1.0, 2.0]]);

        let net = FeedForwardNet::from_layers(
            Activation::Identity,
            &[array![[2.0, 0.0], [0.0, 3.0]]],
            &[array![1.0, 1.0]],
        )
        .unwrap();
        assert_eq!(net.apply(array![[1.0, 1.0]].view()).unwrap(), array![[3.0, 4.0]]);
    }

    #[test]
    fn leaky_hidden_layer_value() {
        // 1 -> 1 -> 1, hidden pre-activation -1, output reads the hidden unit.
        let net = FeedForwardNet::from_layers(
            Activation::leaky_relu(),
            &[array![[1.0]], array![[1.0]]],
            &[array![-2.0], array![0.0]],
        )
        .unwrap();
        assert!((net.apply(array![[1.0]].view()).unwrap()[[0, 0]] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = FeedForwardNet::zeros(&[2, 3], Activation::Elu).unwrap();
        assert!(matches!(net.forward(array![[1.0, 2.0, 3.0]].view()), Err(Error::Shape(_))));
        assert!(matches!(
            net.forward(array![[1.0, 2.0], [f64::NAN, 0.0]].view()),
            Err(Error::NonFiniteRow { row: 1, .. })
        ));
    }

    #[test]
    fn linear_layer_gradients() {
        let w = array![[1.0, 2.0], [3.0, 4.0]];
        let net = FeedForwardNet::from_layers(Activation::Identity, &[w.clone()], &[Array1::zeros(2)]).unwrap();
        let (_, tape) = net.forward(array![[1.0, 0.0]].view()).unwrap();
        let g = net.backward_params(&tape, array![[1.0, 0.0]].view()).unwrap();
        assert_eq!(g, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

        let v = array![[0.5, -1.0]];
        let vjp = net.vjp_input(&tape, v.view()).unwrap();
        assert_eq!(vjp.row(0), w.t().dot(&v.row(0)));

        let zero = net.backward(&tape, Array2::zeros((1, 2)).view()).unwrap();
        assert!(zero.0.iter().all(|&v| v == 0.0));
        assert!(zero.1.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tape_mismatch_is_state_error() {
        let a = FeedForwardNet::zeros(&[2, 3, 2], Activation::Elu).unwrap();
        let b = FeedForwardNet::zeros(&[2, 4, 2], Activation::Elu).unwrap();
        let (_, tape) = a.forward(array![[0.1, 0.2]].view()).unwrap();
        assert!(matches!(b.backward_params(&tape, array![[1.0, 1.0]].view()), Err(Error::State(_))));
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-4;
        for (k, act) in all_activations().into_iter().enumerate() {
            let mut prng = Prng::new(100 + k as u64, 0);
            let net = FeedForwardNet::init(&[4, 8, 8, 4], act, &mut prng).unwrap();
            let x = prng.normal_matrix(3, 4);
            let cot = prng.normal_matrix(3, 4);
            let (_, tape) = net.forward(x.view()).unwrap();
            let (grad, vjp) = net.backward(&tape, cot.view()).unwrap();

            for i in 0..net.num_params() {
                let mut plus = net.clone();
                plus.params_mut()[i] += h;
                let mut minus = net.clone();
                minus.params_mut()[i] -= h;
                let fd = (pairing(&plus, &x, &cot) - pairing(&minus, &x, &cot)) / (2.0 * h);
                assert!(rel_err(fd, grad[i]) < 1e-4, "{act} param {i}: fd {fd} vs {}", grad[i]);
            }
            for r in 0..3 {
                for c in 0..4 {
                    let mut xp = x.clone();
                    xp[[r, c]] += h;
                    let mut xm = x.clone();
                    xm[[r, c]] -= h;
                    let fd = (pairing(&net, &xp, &cot) - pairing(&net, &xm, &cot)) / (2.0 * h);
                    assert!(rel_err(fd, vjp[[r, c]]) < 1e-4, "{act} vjp ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn jacobian_trace_and_its_gradient() {
        let h = 1e-4;
        for (k, act) in all_activations().into_iter().enumerate() {
            let mut prng = Prng::new(200 + k as u64, 0);
            let net = FeedForwardNet::init(&[3, 6, 6, 3], act, &mut prng).unwrap();
            let x = prng.normal_matrix(4, 3);
            let w = Array1::from(vec![0.5, -1.0, 2.0, 0.25]);
            let (trace, grad) = net.jacobian_trace(x.view(), w.view()).unwrap();

            // Trace against finite-difference Jacobians.
            for r in 0..4 {
                let mut fd_trace = 0.0;
                for c in 0..3 {
                    let mut xp = x.row(r).to_owned().insert_axis(Axis(0));
                    let mut xm = xp.clone();
                    xp[[0, c]] += h;
                    xm[[0, c]] -= h;
                    let yp = net.apply(xp.view()).unwrap();
                    let ym = net.apply(xm.view()).unwrap();
                    fd_trace += (yp[[0, c]] - ym[[0, c]]) / (2.0 * h);
                }
                assert!(rel_err(fd_trace, trace[r]) < 1e-6, "{act} trace row {r}");
            }

            let objective = |n: &FeedForwardNet| {
                let (t, _) = n.jacobian_trace(x.view(), w.view()).unwrap();
                t.dot(&w)
            };
            for i in 0..net.num_params() {
                let mut plus = net.clone();
                plus.params_mut()[i] += h;
                let mut minus = net.clone();
                minus.params_mut()[i] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                assert!(
                    (fd - grad[i]).abs() < 1e-4 * fd.abs().max(1e-2),
                    "{act} trace grad {i}: fd {fd} vs {}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn centered_output_has_zero_mean() {
        let mut prng = Prng::new(4, 0);
        let mut net = FeedForwardNet::init(&[3, 8, 2], Activation::Elu, &mut prng).unwrap();
        net.set_params(&net.params().iter().map(|p| p + 0.3).collect::<Vec<_>>()).unwrap();
        let z = prng.normal_matrix(200, 3);
        net.center_output(z.view()).unwrap();
        let mean = net.apply(z.view()).unwrap().mean_axis(Axis(0)).unwrap();
        assert!(mean.iter().all(|m| m.abs() < 1e-12), "{mean}");
        assert!(net.center_output(z.slice(ndarray::s![..0, ..])).is_err());
    }

    #[test]
    fn vjp_is_linear_in_cotangent() {
        let mut prng = Prng::new(5, 1);
        let net = FeedForwardNet::init(&[3, 8, 8, 2], Activation::Gelu, &mut prng).unwrap();
        let x = prng.normal_matrix(5, 3);
        let u = prng.normal_matrix(5, 2);
        let v = prng.normal_matrix(5, 2);
        let (_, tape) = net.forward(x.view()).unwrap();
        let (a, b) = (1.7, -0.3);
        let lhs = net.vjp_input(&tape, (&u * a + &v * b).view()).unwrap();
        let rhs = net.vjp_input(&tape, u.view()).unwrap() * a + net.vjp_input(&tape, v.view()).unwrap() * b;
        assert!((lhs - rhs).iter().all(|d| d.abs() < 1e-12));
    }
}
