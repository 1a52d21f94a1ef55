//! Dense layers with hand-written backward passes.
//!
//! Activations are `batch x features` matrices. A [`Dense`] layer is
//! `linear -> [batch norm] -> leaky relu -> [dropout]`, and a
//! [`ResidualBlock`] is two dense layers with an identity skip.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Named view of one parameter or buffer tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
    pub trainable: bool,
}

pub struct TensorMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
    pub trainable: bool,
}

/// Uniform access to every tensor of a network, in a fixed order.
pub trait Tensors {
    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>);
    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>);

    fn tensor_list(&self) -> Vec<TensorRef<'_>> {
        let mut v = Vec::new();
        self.tensors("", &mut v);
        v
    }

    fn tensor_list_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut v = Vec::new();
        self.tensors_mut("", &mut v);
        v
    }

    fn param_count(&self) -> usize {
        self.tensor_list().iter().filter(|t| t.trainable).map(|t| t.data.len()).sum()
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

fn r1<'a>(prefix: &str, name: &str, a: &'a Array1<f64>, trainable: bool) -> TensorRef<'a> {
    TensorRef {
        name: join(prefix, name),
        shape: vec![a.len()],
        data: a.as_slice().expect("contiguous"),
        trainable,
    }
}

fn r2<'a>(prefix: &str, name: &str, a: &'a Array2<f64>, trainable: bool) -> TensorRef<'a> {
    TensorRef {
        name: join(prefix, name),
        shape: a.shape().to_vec(),
        data: a.as_slice().expect("contiguous"),
        trainable,
    }
}

fn m1<'a>(prefix: &str, name: &str, a: &'a mut Array1<f64>, trainable: bool) -> TensorMut<'a> {
    TensorMut {
        name: join(prefix, name),
        shape: vec![a.len()],
        data: a.as_slice_mut().expect("contiguous"),
        trainable,
    }
}

fn m2<'a>(prefix: &str, name: &str, a: &'a mut Array2<f64>, trainable: bool) -> TensorMut<'a> {
    TensorMut {
        name: join(prefix, name),
        shape: a.shape().to_vec(),
        data: a.as_slice_mut().expect("contiguous"),
        trainable,
    }
}

pub(crate) fn check_finite(a: &Array2<f64>, location: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(location))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `in x out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Linear {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    /// Normal weights with the given standard deviation, zero bias.
    pub fn normal<R: Rng + ?Sized>(input: usize, output: usize, std: f64, rng: &mut R) -> Self {
        let dist = Normal::new(0.0, std).expect("valid std");
        Linear {
            weight: Array2::from_shape_simple_fn((input, output), || dist.sample(rng)),
            bias: Array1::zeros(output),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Accumulates parameter gradients into `grad` and returns `d input`.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grad: &mut Linear) -> Array2<f64> {
        grad.weight += &x.t().dot(dy);
        grad.bias += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight.t())
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        out.push(r2(prefix, "weight", &self.weight, true));
        out.push(r1(prefix, "bias", &self.bias, true));
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        out.push(m2(prefix, "weight", &mut self.weight, true));
        out.push(m1(prefix, "bias", &mut self.bias, true));
    }
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Array1<f64>,
    /// Unbiased, as accumulated into the running estimate.
    pub var: Array1<f64>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    stats: Option<BatchStats>,
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }

    fn forward(&self, z: &Array2<f64>, mode: Mode) -> (Array2<f64>, BnCache) {
        let (mean, var_biased, stats) = match mode {
            Mode::Train => {
                let n = z.nrows() as f64;
                let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
                let centred = z - &mean;
                let var = (&centred * &centred).sum_axis(Axis(0)) / n;
                let unbiased = if n > 1.0 { &var * (n / (n - 1.0)) } else { Array1::zeros(var.len()) };
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: unbiased,
                };
                (mean, var, Some(stats))
            }
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone(), None),
        };
        let inv_std = var_biased.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let xhat = (z - &mean) * &inv_std;
        let y = &xhat * &self.gamma + &self.beta;
        (y, BnCache { xhat, inv_std, stats })
    }

    fn backward(&self, cache: &BnCache, dy: &Array2<f64>, grad: &mut BatchNorm) -> Array2<f64> {
        grad.gamma += &(dy * &cache.xhat).sum_axis(Axis(0));
        grad.beta += &dy.sum_axis(Axis(0));
        let dxhat = dy * &self.gamma;
        match cache.stats {
            None => dxhat * &cache.inv_std,
            Some(_) => {
                let n = dy.nrows() as f64;
                let sum_dxhat = dxhat.sum_axis(Axis(0));
                let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
                let mut dz = dxhat * n - &sum_dxhat - &(&cache.xhat * &sum_dxhat_xhat);
                dz *= &(&cache.inv_std / n);
                dz
            }
        }
    }

    fn update_running(&mut self, stats: &BatchStats) {
        let m = BN_MOMENTUM;
        self.running_mean = &self.running_mean * (1.0 - m) + &stats.mean * m;
        self.running_var = &self.running_var * (1.0 - m) + &stats.var * m;
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        out.push(r1(prefix, "gamma", &self.gamma, true));
        out.push(r1(prefix, "beta", &self.beta, true));
        out.push(r1(prefix, "running_mean", &self.running_mean, false));
        out.push(r1(prefix, "running_var", &self.running_var, false));
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        out.push(m1(prefix, "gamma", &mut self.gamma, true));
        out.push(m1(prefix, "beta", &mut self.beta, true));
        out.push(m1(prefix, "running_mean", &mut self.running_mean, false));
        out.push(m1(prefix, "running_var", &mut self.running_var, false));
    }
}

/// Hyperparameters shared by the dense layers of one network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub batchnorm: bool,
    pub dropout: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub linear: Linear,
    pub bn: Option<BatchNorm>,
    pub dropout: f64,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Array2<f64>,
    bn: Option<BnCache>,
    /// Leaky-relu slope per activation (1 or `slope`).
    gate: Array2<f64>,
    /// Inverted-dropout multipliers, present only in train mode with dropout.
    keep: Option<Array2<f64>>,
}

impl DenseCache {
    pub fn gate(&self) -> &Array2<f64> {
        &self.gate
    }
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, spec: LayerSpec, rng: &mut R) -> Self {
        // He initialisation for leaky rectifiers
        let std = (2.0 / ((1.0 + spec.slope * spec.slope) * input as f64)).sqrt();
        Dense {
            linear: Linear::normal(input, output, std, rng),
            bn: spec.batchnorm.then(|| BatchNorm::new(output)),
            dropout: spec.dropout,
            slope: spec.slope,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let (i, o) = self.linear.weight.dim();
        Dense {
            linear: Linear::zeros(i, o),
            bn: self.bn.as_ref().map(|b| BatchNorm {
                gamma: Array1::zeros(o),
                beta: Array1::zeros(o),
                running_mean: b.running_mean.clone(),
                running_var: b.running_var.clone(),
            }),
            dropout: self.dropout,
            slope: self.slope,
        }
    }

    pub fn forward<R: Rng + ?Sized>(&self, x: &Array2<f64>, mode: Mode, rng: &mut R) -> (Array2<f64>, DenseCache) {
        let z = self.linear.forward(x);
        let (pre, bn) = match &self.bn {
            Some(bn) => {
                let (y, c) = bn.forward(&z, mode);
                (y, Some(c))
            }
            None => (z, None),
        };
        let slope = self.slope;
        let gate = pre.mapv(|v| if v > 0.0 { 1.0 } else { slope });
        let mut out = &pre * &gate;
        let keep = if mode == Mode::Train && self.dropout > 0.0 {
            let p = self.dropout;
            let scale = 1.0 / (1.0 - p);
            let mask = Array2::from_shape_simple_fn(out.raw_dim(), || if rng.random::<f64>() < p { 0.0 } else { scale });
            out *= &mask;
            Some(mask)
        } else {
            None
        };
        let cache = DenseCache {
            input: x.clone(),
            bn,
            gate,
            keep,
        };
        (out, cache)
    }

    pub fn backward(&self, cache: &DenseCache, dy: &Array2<f64>, grad: &mut Dense) -> Array2<f64> {
        let mut d = match &cache.keep {
            Some(k) => dy * k,
            None => dy.clone(),
        };
        d *= &cache.gate;
        let dz = match (&self.bn, &cache.bn, grad.bn.as_mut()) {
            (Some(bn), Some(c), Some(g)) => bn.backward(c, &d, g),
            _ => d,
        };
        self.linear.backward(&cache.input, &dz, &mut grad.linear)
    }

    pub(crate) fn update_running(&mut self, cache: &DenseCache) {
        if let (Some(bn), Some(BnCache { stats: Some(s), .. })) = (self.bn.as_mut(), cache.bn.as_ref()) {
            bn.update_running(s);
        }
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        self.linear.tensors(&join(prefix, "linear"), out);
        if let Some(bn) = &self.bn {
            bn.tensors(&join(prefix, "bn"), out);
        }
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        self.linear.tensors_mut(&join(prefix, "linear"), out);
        if let Some(bn) = &mut self.bn {
            bn.tensors_mut(&join(prefix, "bn"), out);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub a: Dense,
    pub b: Dense,
}

#[derive(Debug, Clone)]
pub struct ResidualCache {
    pub a: DenseCache,
    pub b: DenseCache,
}

impl ResidualBlock {
    pub fn new<R: Rng + ?Sized>(width: usize, spec: LayerSpec, rng: &mut R) -> Self {
        ResidualBlock {
            a: Dense::new(width, width, spec, rng),
            b: Dense::new(width, width, spec, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ResidualBlock {
            a: self.a.zeros_like(),
            b: self.b.zeros_like(),
        }
    }

    pub fn forward<R: Rng + ?Sized>(&self, x: &Array2<f64>, mode: Mode, rng: &mut R) -> (Array2<f64>, ResidualCache) {
        let (h, a) = self.a.forward(x, mode, rng);
        let (y, b) = self.b.forward(&h, mode, rng);
        (x + &y, ResidualCache { a, b })
    }

    pub fn backward(&self, cache: &ResidualCache, dy: &Array2<f64>, grad: &mut ResidualBlock) -> Array2<f64> {
        let dh = self.b.backward(&cache.b, dy, &mut grad.b);
        let dx = self.a.backward(&cache.a, &dh, &mut grad.a);
        dx + dy
    }

    pub fn update_running(&mut self, cache: &ResidualCache) {
        self.a.update_running(&cache.a);
        self.b.update_running(&cache.b);
    }

    pub fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        self.a.tensors(&join(prefix, "a"), out);
        self.b.tensors(&join(prefix, "b"), out);
    }

    pub fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        self.a.tensors_mut(&join(prefix, "a"), out);
        self.b.tensors_mut(&join(prefix, "b"), out);
    }
}

impl Tensors for Linear {
    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        Linear::tensors(self, prefix, out)
    }
    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        Linear::tensors_mut(self, prefix, out)
    }
}

impl Tensors for Dense {
    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        Dense::tensors(self, prefix, out)
    }
    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        Dense::tensors_mut(self, prefix, out)
    }
}

/// Stand-in random source for forward passes that never draw (eval mode,
/// or networks without dropout).
pub struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("forward pass without dropout drew a random number")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("forward pass without dropout drew a random number")
    }
    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("forward pass without dropout drew a random number")
    }
}
