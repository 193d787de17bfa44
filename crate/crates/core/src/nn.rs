//! Dense feed-forward networks with hand-written reverse-mode gradients.
//!
//! Inputs are batched row-wise: a batch is a `batch x features` matrix.
//! Layer weights are stored `fan_in x fan_out` so a layer is `x.dot(w) + b`.
//!
//! The flat parameter view lists, layer by layer, the weight matrix in
//! row-major order followed by the bias vector.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the activation derivative, given the
    /// pre-activation `z` and the activation output `a`. ReLU uses 0 at 0.
    fn backprop(self, grad: &mut Array2<f64>, z: &Array2<f64>, a: &Array2<f64>) {
        match self {
            Activation::Relu => Zip::from(grad).and(z).for_each(|g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Tanh => Zip::from(grad).and(a).for_each(|g, &a| *g *= 1.0 - a * a),
            Activation::Identity => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl DenseSpec {
    pub fn new(layer_sizes: Vec<usize>, output_activation: Activation) -> Self {
        Self {
            layer_sizes,
            hidden_activation: Activation::Relu,
            output_activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::invalid("network.layer_sizes", "need at least 2 layers"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::invalid("network.layer_sizes", "sizes must be >= 1"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 2 == self.layer_sizes.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }
}

/// Activations recorded by [`Network::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (layer 0 gets the network input).
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl ForwardCache {
    /// Output before the head activation.
    pub fn output_pre_activation(&self) -> Option<&Array2<f64>> {
        self.pre_activations.last()
    }
}

/// Gradients with the same layout as the network, plus the input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
    pub input: Array2<f64>,
}

impl Gradients {
    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.w *= s;
            l.b *= s;
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.w.iter().copied());
        out.extend(l.b.iter().copied());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: DenseSpec,
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn zeros(spec: DenseSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(Self { spec, layers })
    }

    /// Uniform `+-1/sqrt(fan_in)` initialization; the last layer is further
    /// multiplied by `final_scale`.
    pub fn init<R: Rng + ?Sized>(spec: DenseSpec, final_scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        let n_layers = net.layers.len();
        for (idx, layer) in net.layers.iter_mut().enumerate() {
            let bound = 1.0 / (layer.w.nrows() as f64).sqrt();
            let scale = if idx + 1 == n_layers { final_scale } else { 1.0 };
            layer.w.mapv_inplace(|_| rng.random_range(-bound..=bound) * scale);
            layer.b.mapv_inplace(|_| rng.random_range(-bound..=bound) * scale);
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<ForwardCache> {
        check_len("network input", self.input_dim(), input.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.w);
            z += &layer.b;
            let mut a = z.clone();
            self.spec.activation(idx).apply(&mut a);
            inputs.push(x);
            pre_activations.push(z);
            x = a;
        }
        Ok(ForwardCache {
            inputs,
            pre_activations,
            output: x,
        })
    }

    /// Forward pass without keeping intermediate activations.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_len("network input", self.input_dim(), input.ncols())?;
        let mut x = input.to_owned();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.w);
            z += &layer.b;
            self.spec.activation(idx).apply(&mut z);
            x = z;
        }
        Ok(x)
    }

    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|_| Error::ShapeMismatch {
                what: "network input",
                expected: self.input_dim(),
                got: input.len(),
            })?;
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    /// Reverse-mode gradients of `sum_rows <upstream_row, output_row>`.
    ///
    /// Parameter gradients are summed over the batch; callers averaging a
    /// loss should pass an upstream already divided by the batch size.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Array2<f64>) -> Result<Gradients> {
        self.backward_inner(cache, upstream, None)
    }

    /// [`Network::backward`] with `extra` added to the gradient at the
    /// output pre-activation, for losses defined before the head activation.
    pub fn backward_with_pre_output(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
        extra: &Array2<f64>,
    ) -> Result<Gradients> {
        self.backward_inner(cache, upstream, Some(extra))
    }

    fn backward_inner(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
        extra: Option<&Array2<f64>>,
    ) -> Result<Gradients> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::MissingCache);
        }
        check_len("upstream gradient columns", self.output_dim(), upstream.ncols())?;
        check_len("upstream gradient rows", cache.output.nrows(), upstream.nrows())?;
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        let mut activated = cache.output.clone();
        for idx in (0..self.layers.len()).rev() {
            let z = &cache.pre_activations[idx];
            self.spec.activation(idx).backprop(&mut delta, z, &activated);
            if let Some(extra) = extra.filter(|_| idx + 1 == self.layers.len()) {
                check_len("pre-activation gradient rows", z.nrows(), extra.nrows())?;
                check_len("pre-activation gradient columns", z.ncols(), extra.ncols())?;
                delta += extra;
            }
            let x = &cache.inputs[idx];
            let gw = x.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            let next = delta.dot(&self.layers[idx].w.t());
            grads.push(Layer { w: gw, b: gb });
            delta = next;
            activated = x.clone();
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: delta,
        })
    }

    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        check_len("flat parameter vector", self.spec.parameter_count(), flat.len())?;
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|v| *v = it.next().unwrap());
            l.b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    fn check_same_shape(&self, other: &Network) -> Result<()> {
        check_len("layer count", self.layers.len(), other.layers.len())?;
        for (a, b) in self.layers.iter().zip(&other.layers) {
            check_len("layer weights", a.w.len(), b.w.len())?;
            check_len("layer bias", a.b.len(), b.b.len())?;
        }
        Ok(())
    }
}

/// `target <- (1 - tau) * target + tau * online`, elementwise.
pub fn soft_update(target: &mut Network, online: &Network, tau: f64) -> Result<()> {
    target.check_same_shape(online)?;
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        Zip::from(&mut t.w)
            .and(&o.w)
            .for_each(|t, &o| *t = (1.0 - tau) * *t + tau * o);
        Zip::from(&mut t.b)
            .and(&o.b)
            .for_each(|t, &o| *t = (1.0 - tau) * *t + tau * o);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Layer>,
    pub v: Vec<Layer>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        let zeros: Vec<Layer> = net
            .layers
            .iter()
            .map(|l| Layer::zeros(l.w.nrows(), l.w.ncols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam step descending `grads`.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients, lr: f64) -> Result<()> {
        check_len("gradient layers", net.layers.len(), grads.layers.len())?;
        check_len("optimizer layers", net.layers.len(), self.m.len())?;
        for (p, g) in net.layers.iter().zip(&grads.layers) {
            check_len("gradient weights", p.w.len(), g.w.len())?;
            check_len("gradient bias", p.b.len(), g.b.len())?;
        }
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for ((p, g), (m, v)) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            Zip::from(&mut p.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .and(&g.w)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut p.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .and(&g.b)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub passed: bool,
}

/// Smallest denominator used for relative errors, so gradients that are
/// zero up to rounding compare on an absolute scale.
pub const FD_REL_FLOOR: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FD_REL_FLOOR)
}

/// Checks `Network::backward` against central differences of the scalar
/// `sum(projection * output)` at `input`, for every parameter and every
/// input coordinate.
pub fn finite_difference_check(
    net: &Network,
    input: ArrayView2<f64>,
    projection: &Array2<f64>,
    tolerance: f64,
) -> Result<GradientCheck> {
    let cache = net.forward(input)?;
    let analytic = net.backward(&cache, projection)?;
    check_gradients(net, input, projection, &analytic, tolerance)
}

/// Compares a supplied analytic gradient against central differences.
pub fn check_gradients(
    net: &Network,
    input: ArrayView2<f64>,
    projection: &Array2<f64>,
    analytic: &Gradients,
    tolerance: f64,
) -> Result<GradientCheck> {
    let loss = |n: &Network, x: ArrayView2<f64>| -> Result<f64> {
        Ok((n.predict(x)? * projection).sum())
    };
    let mut max_rel: f64 = 0.0;
    let mut checked = 0;

    let base = net.flat_params();
    let flat_grad = analytic.flat();
    check_len("analytic gradient", base.len(), flat_grad.len())?;
    let mut probe = net.clone();
    let mut shifted = base.clone();
    for (i, &g) in flat_grad.iter().enumerate() {
        shifted[i] = base[i] + FD_STEP;
        probe.set_flat_params(&shifted)?;
        let up = loss(&probe, input)?;
        shifted[i] = base[i] - FD_STEP;
        probe.set_flat_params(&shifted)?;
        let down = loss(&probe, input)?;
        shifted[i] = base[i];
        max_rel = max_rel.max(rel_error(g, (up - down) / (2.0 * FD_STEP)));
        checked += 1;
    }

    let mut x = input.to_owned();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = x[[r, c]];
        x[[r, c]] = orig + FD_STEP;
        let up = loss(net, x.view())?;
        x[[r, c]] = orig - FD_STEP;
        let down = loss(net, x.view())?;
        x[[r, c]] = orig;
        max_rel = max_rel.max(rel_error(analytic.input[[r, c]], (up - down) / (2.0 * FD_STEP)));
        checked += 1;
    }

    Ok(GradientCheck {
        max_rel_error: max_rel,
        checked,
        passed: max_rel < tolerance,
    })
}

/// Serializable network: spec, flat parameters and optional optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub spec: DenseSpec,
    pub params: Vec<f64>,
    pub adam: Option<AdamSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamSnapshot {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl NetworkSnapshot {
    pub fn capture(net: &Network, adam: Option<&AdamState>) -> Self {
        Self {
            spec: net.spec.clone(),
            params: net.flat_params(),
            adam: adam.map(|a| AdamSnapshot {
                m: flatten(&a.m),
                v: flatten(&a.v),
                t: a.t,
                beta1: a.beta1,
                beta2: a.beta2,
                eps: a.eps,
            }),
        }
    }

    pub fn restore(&self) -> Result<(Network, Option<AdamState>)> {
        let mut net = Network::zeros(self.spec.clone())?;
        net.set_flat_params(&self.params)?;
        let adam = match &self.adam {
            None => None,
            Some(s) => {
                let mut m = net.clone();
                m.set_flat_params(&s.m)?;
                let mut v = net.clone();
                v.set_flat_params(&s.v)?;
                Some(AdamState {
                    m: m.layers,
                    v: v.layers,
                    t: s.t,
                    beta1: s.beta1,
                    beta2: s.beta2,
                    eps: s.eps,
                })
            }
        };
        Ok((net, adam))
    }
}
