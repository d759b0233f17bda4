//! Dense multilayer perceptron with ReLU hidden layers, exact reverse-mode
//! gradients and the Adam optimizer. Batches are row-major: one sample per
//! row.

use std::io::{self, Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("input has {got} features, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("corrupt network data: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

impl OutputActivation {
    fn code(self) -> u8 {
        match self {
            Self::Identity => 0,
            Self::Tanh => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self, NnError> {
        match c {
            0 => Ok(Self::Identity),
            1 => Ok(Self::Tanh),
            other => Err(NnError::Corrupt(format!("unknown output activation {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Shape `(out, in)`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output: OutputActivation,
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl ForwardCache {
    /// Pre-activation of every layer, batch-major.
    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre
    }
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl Mlp {
    /// Layers of sizes `sizes[0] → … → sizes[n]`, weights and biases uniform in
    /// `±1/√fan_in`. The last layer is additionally scaled by `final_scale`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, final_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let scale = if i + 1 == n { final_scale } else { 1.0 };
                let weight = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-bound..bound) * scale);
                let bias = Array1::from_shape_fn(fan_out, |_| rng.gen_range(-bound..bound) * scale);
                Dense { weight, bias }
            })
            .collect();
        Self { layers, output }
    }

    /// Network with all parameters zero.
    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                weight: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self { layers, output }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.nrows()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.weight.nrows()));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn check_input(&self, cols: usize) -> Result<(), NnError> {
        if cols != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: cols,
            });
        }
        Ok(())
    }

    fn affine(layer: &Dense, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&layer.weight.t());
        z += &layer.bias;
        z
    }

    fn finish(&self, z: &mut Array2<f64>, last: bool) {
        if !last {
            z.mapv_inplace(|v| v.max(0.0));
        } else if self.output == OutputActivation::Tanh {
            z.mapv_inplace(f64::tanh);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x.len())?;
        let view = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(x.ncols())?;
        let n = self.layers.len();
        let mut h = Self::affine(&self.layers[0], &x);
        self.finish(&mut h, n == 1);
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            h = Self::affine(layer, &h.view());
            self.finish(&mut h, i + 1 == n);
        }
        Ok(h)
    }

    /// Forward pass that records what [`Mlp::backward`] needs.
    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache, NnError> {
        self.check_input(x.ncols())?;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = Self::affine(layer, &h.view());
            let mut a = z.clone();
            self.finish(&mut a, i + 1 == n);
            inputs.push(h);
            pre.push(z);
            h = a;
        }
        Ok(ForwardCache { inputs, pre, output: h })
    }

    /// Parameter gradients and input gradient for the upstream gradient
    /// `grad_out` (∂L/∂output, same shape as the cached output).
    pub fn backward(&self, cache: &ForwardCache, grad_out: ArrayView2<f64>) -> (Gradients, Array2<f64>) {
        let n = self.layers.len();
        let mut delta = grad_out.to_owned();
        if self.output == OutputActivation::Tanh {
            Zip::from(&mut delta).and(&cache.output).for_each(|d, &y| *d *= 1.0 - y * y);
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(n);
        for i in (0..n).rev() {
            if i + 1 < n {
                Zip::from(&mut delta).and(&cache.pre[i]).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let weight = delta.t().dot(&cache.inputs[i]);
            let bias = delta.sum_axis(Axis(0));
            grads.push(Dense { weight, bias });
            delta = delta.dot(&self.layers[i].weight);
        }
        grads.reverse();
        (Gradients { layers: grads }, delta)
    }

    /// `self ← (1 - tau) self + tau src`.
    pub fn soft_update(&mut self, src: &Mlp, tau: f64) {
        for (dst, s) in self.layers.iter_mut().zip(&src.layers) {
            Zip::from(&mut dst.weight).and(&s.weight).for_each(|d, &v| *d += tau * (v - *d));
            Zip::from(&mut dst.bias).and(&s.bias).for_each(|d, &v| *d += tau * (v - *d));
        }
    }

    /// Euclidean distance between the flattened parameters of two networks.
    pub fn param_distance(&self, other: &Mlp) -> f64 {
        self.layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| {
                let dw: f64 = Zip::from(&a.weight).and(&b.weight).fold(0.0, |s, x, y| s + (x - y) * (x - y));
                let db: f64 = Zip::from(&a.bias).and(&b.bias).fold(0.0, |s, x, y| s + (x - y) * (x - y));
                dw + db
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Architecture header followed by row-major little-endian parameters.
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let sizes = self.sizes();
        w.write_all(&(sizes.len() as u32).to_le_bytes())?;
        for s in &sizes {
            w.write_all(&(*s as u32).to_le_bytes())?;
        }
        w.write_all(&[self.output.code()])?;
        for l in &self.layers {
            write_f64s(w, l.weight.iter())?;
            write_f64s(w, l.bias.iter())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, NnError> {
        let count = read_u32(r)? as usize;
        if !(2..=64).contains(&count) {
            return Err(NnError::Corrupt(format!("implausible layer count {count}")));
        }
        let sizes = (0..count).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
        if sizes.iter().any(|&s| s == 0 || s > 1 << 20) {
            return Err(NnError::Corrupt(format!("implausible layer sizes {sizes:?}")));
        }
        let mut code = [0u8];
        r.read_exact(&mut code)?;
        let mut net = Mlp::zeros(&sizes, OutputActivation::from_code(code[0])?);
        for l in &mut net.layers {
            read_f64s(r, l.weight.iter_mut())?;
            read_f64s(r, l.bias.iter_mut())?;
        }
        Ok(net)
    }
}

pub(crate) fn write_f64s<'a, W: Write>(w: &mut W, vals: impl Iterator<Item = &'a f64>) -> io::Result<()> {
    let mut buf = Vec::new();
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub(crate) fn read_f64s<'a, R: Read>(r: &mut R, vals: impl Iterator<Item = &'a mut f64>) -> io::Result<()> {
    let mut b = [0u8; 8];
    for v in vals {
        r.read_exact(&mut b)?;
        *v = f64::from_le_bytes(b);
    }
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self::with_params(net, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_params(net: &Mlp, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    /// One descent step along `grads`.
    pub fn update(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        let step_size = self.lr / bc1;
        let eps = self.eps;
        let bc2_sqrt = bc2.sqrt();
        for (((p, g), m), v) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            let upd = |p: &mut f64, &g: &f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= step_size * *m / (v.sqrt() / bc2_sqrt + eps);
            };
            Zip::from(&mut p.weight).and(&g.weight).and(&mut m.weight).and(&mut v.weight).for_each(upd);
            Zip::from(&mut p.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(upd);
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for x in [self.lr, self.beta1, self.beta2, self.eps] {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&self.step.to_le_bytes())?;
        for g in [&self.m, &self.v] {
            for l in &g.layers {
                write_f64s(w, l.weight.iter())?;
                write_f64s(w, l.bias.iter())?;
            }
        }
        Ok(())
    }

    /// Reads a state written by [`Adam::write_to`] for a network shaped like `net`.
    pub fn read_from<R: Read>(r: &mut R, net: &Mlp) -> Result<Self, NnError> {
        let lr = read_f64(r)?;
        let beta1 = read_f64(r)?;
        let beta2 = read_f64(r)?;
        let eps = read_f64(r)?;
        let mut adam = Self::with_params(net, lr, beta1, beta2, eps);
        adam.step = read_u64(r)?;
        for g in [&mut adam.m, &mut adam.v] {
            for l in &mut g.layers {
                read_f64s(r, l.weight.iter_mut())?;
                read_f64s(r, l.bias.iter_mut())?;
            }
        }
        Ok(adam)
    }
}
