//! Hand-rolled neural net layers on f64 tensors: dense, same-padded conv2d,
//! sigmoid/tanh/relu and batch normalization, each with a cached forward and an
//! explicit backward. No computation graph; composites wire layers by hand.

mod adam;
mod gradcheck;

pub use adam::{AdamParams, AdamState};
pub use gradcheck::{fd_check_random_layer, finite_difference_check, FdReport};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::RngExt;

/// Forward mode; only batch normalization distinguishes the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A named view over one parameter tensor and its gradient accumulator.
pub struct ParamBlock<'a> {
    pub name: String,
    pub values: &'a mut [f64],
    pub grads: &'a mut [f64],
}

/// Layer construction descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense { input: usize, output: usize },
    Conv2d { in_ch: usize, out_ch: usize, kh: usize, kw: usize },
    Sigmoid,
    Tanh,
    Relu,
    BatchNorm { features: usize },
}

pub fn build(spec: &LayerSpec) -> Layer {
    match *spec {
        LayerSpec::Dense { input, output } => Layer::Dense(Dense::new(input, output)),
        LayerSpec::Conv2d { in_ch, out_ch, kh, kw } => {
            Layer::Conv2d(Conv2d::new(in_ch, out_ch, kh, kw))
        }
        LayerSpec::Sigmoid => Layer::Sigmoid(Activation::new(ActKind::Sigmoid)),
        LayerSpec::Tanh => Layer::Tanh(Activation::new(ActKind::Tanh)),
        LayerSpec::Relu => Layer::Relu(Activation::new(ActKind::Relu)),
        LayerSpec::BatchNorm { features } => Layer::BatchNorm(BatchNorm::new(features)),
    }
}

pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    Sigmoid(Activation),
    Tanh(Activation),
    Relu(Activation),
    BatchNorm(BatchNorm),
}

impl Layer {
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::Conv2d(l) => l.forward(x),
            Layer::Sigmoid(l) | Layer::Tanh(l) | Layer::Relu(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode),
        }
    }

    /// Propagates `upstream` through the cached forward; accumulates parameter
    /// gradients internally and returns the input gradient.
    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.backward(upstream),
            Layer::Conv2d(l) => l.backward(upstream),
            Layer::Sigmoid(l) | Layer::Tanh(l) | Layer::Relu(l) => l.backward(upstream),
            Layer::BatchNorm(l) => l.backward(upstream),
        }
    }

    pub fn init(&mut self, rng: &mut impl rand::Rng) {
        match self {
            Layer::Dense(l) => l.init(rng),
            Layer::Conv2d(l) => l.init(rng),
            Layer::BatchNorm(_) | Layer::Sigmoid(_) | Layer::Tanh(_) | Layer::Relu(_) => {}
        }
    }

    /// Trainable parameter blocks in a stable order.
    pub fn param_blocks(&mut self) -> Vec<ParamBlock<'_>> {
        match self {
            Layer::Dense(l) => vec![
                ParamBlock { name: "w".into(), values: l.w.data_mut_raw(), grads: l.gw.data_mut_raw() },
                ParamBlock { name: "b".into(), values: l.b.data_mut_raw(), grads: l.gb.data_mut_raw() },
            ],
            Layer::Conv2d(l) => vec![
                ParamBlock { name: "w".into(), values: l.w.data_mut_raw(), grads: l.gw.data_mut_raw() },
                ParamBlock { name: "b".into(), values: l.b.data_mut_raw(), grads: l.gb.data_mut_raw() },
            ],
            Layer::BatchNorm(l) => vec![
                ParamBlock { name: "gamma".into(), values: l.gamma.data_mut_raw(), grads: l.g_gamma.data_mut_raw() },
                ParamBlock { name: "beta".into(), values: l.beta.data_mut_raw(), grads: l.g_beta.data_mut_raw() },
            ],
            Layer::Sigmoid(_) | Layer::Tanh(_) | Layer::Relu(_) => Vec::new(),
        }
    }

    /// Non-trainable state that still belongs in checkpoints (batch-norm
    /// running statistics), as (name, values) pairs.
    pub fn state_blocks(&mut self) -> Vec<(String, &mut [f64])> {
        if let Layer::BatchNorm(l) = self {
            vec![
                ("running_mean".into(), l.running_mean.data_mut_raw()),
                ("running_var".into(), l.running_var.data_mut_raw()),
            ]
        } else {
            Vec::new()
        }
    }

    /// Visits trainable parameter blocks in a stable order, names prefixed by `prefix`.
    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamBlock)) {
        for mut b in self.param_blocks() {
            b.name = format!("{prefix}.{}", b.name);
            f(b);
        }
    }

    /// Visits non-trainable state that still belongs in checkpoints
    /// (batch-norm running statistics).
    pub fn visit_state(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (name, values) in self.state_blocks() {
            f(&format!("{prefix}.{name}"), values);
        }
    }

    pub fn zero_grads(&mut self) {
        self.visit_params("", &mut |b| b.grads.iter_mut().for_each(|g| *g = 0.0));
    }
}

// Tensor needs raw mutable access for block visitation without borrowing issues.
impl Tensor {
    pub(crate) fn data_mut_raw(&mut self) -> &mut [f64] {
        self.data_mut()
    }
}

/// Fully connected layer, weights `[output, input]` row-major.
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
    pub gw: Tensor,
    pub gb: Tensor,
    input: usize,
    output: usize,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(input: usize, output: usize) -> Dense {
        Dense {
            w: Tensor::zeros(&[output, input]),
            b: Tensor::zeros(&[output]),
            gw: Tensor::zeros(&[output, input]),
            gb: Tensor::zeros(&[output]),
            input,
            output,
            cache: None,
        }
    }

    /// Uniform init in ±1/sqrt(fan_in) for weights and biases.
    pub fn init(&mut self, rng: &mut impl rand::Rng) {
        let bound = 1.0 / (self.input as f64).sqrt();
        for v in self.w.data_mut().iter_mut().chain(self.b.data_mut().iter_mut()) {
            *v = rng.random_range(-bound..bound);
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let s = x.shape();
        if s.len() != 2 || s[1] != self.input {
            return Err(Error::ShapeMismatch {
                expected: vec![0, self.input],
                got: s.to_vec(),
            });
        }
        Ok(s[0])
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let batch = self.check_input(x)?;
        let mut y = Tensor::zeros(&[batch, self.output]);
        let (w, b) = (self.w.data(), self.b.data());
        for bi in 0..batch {
            let xr = &x.data()[bi * self.input..(bi + 1) * self.input];
            let yr = &mut y.data_mut()[bi * self.output..(bi + 1) * self.output];
            for (o, yo) in yr.iter_mut().enumerate() {
                let wr = &w[o * self.input..(o + 1) * self.input];
                let mut acc = b[o];
                for (wi, xi) in wr.iter().zip(xr.iter()) {
                    acc += wi * xi;
                }
                *yo = acc;
            }
        }
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let x = self.cache.as_ref().ok_or_else(|| Error::state("dense backward before forward"))?;
        let batch = x.shape()[0];
        upstream.expect_shape(&[batch, self.output])?;
        let mut dx = Tensor::zeros(&[batch, self.input]);
        for bi in 0..batch {
            let xr = &x.data()[bi * self.input..(bi + 1) * self.input];
            let ur = &upstream.data()[bi * self.output..(bi + 1) * self.output];
            let dxr = &mut dx.data_mut()[bi * self.input..(bi + 1) * self.input];
            for (o, &uo) in ur.iter().enumerate() {
                self.gb.data_mut()[o] += uo;
                let gwr = &mut self.gw.data_mut()[o * self.input..(o + 1) * self.input];
                for (g, xi) in gwr.iter_mut().zip(xr.iter()) {
                    *g += uo * xi;
                }
                let wr = &self.w.data()[o * self.input..(o + 1) * self.input];
                for (d, wi) in dxr.iter_mut().zip(wr.iter()) {
                    *d += uo * wi;
                }
            }
        }
        Ok(dx)
    }
}

/// 2-D convolution with stride 1 and zero "same" padding.
/// Weights `[out_ch, in_ch, kh, kw]`; input `[batch, in_ch, h, w]`.
pub struct Conv2d {
    pub w: Tensor,
    pub b: Tensor,
    pub gw: Tensor,
    pub gb: Tensor,
    in_ch: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    cache: Option<Tensor>,
}

impl Conv2d {
    pub fn new(in_ch: usize, out_ch: usize, kh: usize, kw: usize) -> Conv2d {
        Conv2d {
            w: Tensor::zeros(&[out_ch, in_ch, kh, kw]),
            b: Tensor::zeros(&[out_ch]),
            gw: Tensor::zeros(&[out_ch, in_ch, kh, kw]),
            gb: Tensor::zeros(&[out_ch]),
            in_ch,
            out_ch,
            kh,
            kw,
            cache: None,
        }
    }

    pub fn init(&mut self, rng: &mut impl rand::Rng) {
        let bound = 1.0 / ((self.in_ch * self.kh * self.kw) as f64).sqrt();
        for v in self.w.data_mut().iter_mut().chain(self.b.data_mut().iter_mut()) {
            *v = rng.random_range(-bound..bound);
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let s = x.shape();
        if s.len() != 4 || s[1] != self.in_ch {
            return Err(Error::ShapeMismatch {
                expected: vec![0, self.in_ch, 0, 0],
                got: s.to_vec(),
            });
        }
        Ok((s[0], s[2], s[3]))
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (batch, h, w) = self.check_input(x)?;
        let mut y = Tensor::zeros(&[batch, self.out_ch, h, w]);
        let plane = h * w;
        let (pt, pl) = ((self.kh - 1) / 2, (self.kw - 1) / 2);
        for bi in 0..batch {
            for oc in 0..self.out_ch {
                let out_off = (bi * self.out_ch + oc) * plane;
                y.data_mut()[out_off..out_off + plane].fill(self.b.data()[oc]);
                for ic in 0..self.in_ch {
                    let in_off = (bi * self.in_ch + ic) * plane;
                    for ky in 0..self.kh {
                        for kx in 0..self.kw {
                            let alpha =
                                self.w.data()[((oc * self.in_ch + ic) * self.kh + ky) * self.kw + kx];
                            if alpha == 0.0 {
                                continue;
                            }
                            let dy = ky as isize - pt as isize;
                            let dx = kx as isize - pl as isize;
                            let r0 = (-dy).max(0) as usize;
                            let r1 = ((h as isize - dy).min(h as isize)).max(0) as usize;
                            let c0 = (-dx).max(0) as usize;
                            let c1 = ((w as isize - dx).min(w as isize)).max(0) as usize;
                            if c0 >= c1 {
                                continue;
                            }
                            for r in r0..r1 {
                                let sr = (r as isize + dy) as usize;
                                let src = &x.data()[in_off + sr * w + (c0 as isize + dx) as usize
                                    ..in_off + sr * w + (c1 as isize + dx) as usize];
                                let dst = &mut y.data_mut()[out_off + r * w + c0..out_off + r * w + c1];
                                for (d, s) in dst.iter_mut().zip(src.iter()) {
                                    *d += alpha * s;
                                }
                            }
                        }
                    }
                }
            }
        }
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let x = self.cache.as_ref().ok_or_else(|| Error::state("conv2d backward before forward"))?;
        let (batch, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
        upstream.expect_shape(&[batch, self.out_ch, h, w])?;
        let mut dx = Tensor::zeros(&[batch, self.in_ch, h, w]);
        let plane = h * w;
        let (pt, pl) = ((self.kh - 1) / 2, (self.kw - 1) / 2);
        for bi in 0..batch {
            for oc in 0..self.out_ch {
                let up_off = (bi * self.out_ch + oc) * plane;
                let up_plane = &upstream.data()[up_off..up_off + plane];
                self.gb.data_mut()[oc] += up_plane.iter().sum::<f64>();
                for ic in 0..self.in_ch {
                    let in_off = (bi * self.in_ch + ic) * plane;
                    for ky in 0..self.kh {
                        for kx in 0..self.kw {
                            let widx = ((oc * self.in_ch + ic) * self.kh + ky) * self.kw + kx;
                            let alpha = self.w.data()[widx];
                            let dy = ky as isize - pt as isize;
                            let dx_ = kx as isize - pl as isize;
                            let r0 = (-dy).max(0) as usize;
                            let r1 = ((h as isize - dy).min(h as isize)).max(0) as usize;
                            let c0 = (-dx_).max(0) as usize;
                            let c1 = ((w as isize - dx_).min(w as isize)).max(0) as usize;
                            if c0 >= c1 {
                                continue;
                            }
                            let mut wgrad = 0.0;
                            for r in r0..r1 {
                                let sr = (r as isize + dy) as usize;
                                let sc0 = (c0 as isize + dx_) as usize;
                                let sc1 = (c1 as isize + dx_) as usize;
                                let up_row = &up_plane[r * w + c0..r * w + c1];
                                let x_row = &x.data()[in_off + sr * w + sc0..in_off + sr * w + sc1];
                                for (u, xv) in up_row.iter().zip(x_row.iter()) {
                                    wgrad += u * xv;
                                }
                                if alpha != 0.0 {
                                    let dx_row = &mut dx.data_mut()
                                        [in_off + sr * w + sc0..in_off + sr * w + sc1];
                                    for (d, u) in dx_row.iter_mut().zip(up_row.iter()) {
                                        *d += alpha * u;
                                    }
                                }
                            }
                            self.gw.data_mut()[widx] += wgrad;
                        }
                    }
                }
            }
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ActKind {
    Sigmoid,
    Tanh,
    Relu,
}

/// Elementwise activation; caches its own output (sigmoid/tanh) or the input
/// sign (relu) for the backward pass.
pub struct Activation {
    kind: ActKind,
    cache: Option<Tensor>,
}

impl Activation {
    pub fn new(kind: ActKind) -> Activation {
        Activation { kind, cache: None }
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = match self.kind {
            ActKind::Sigmoid => x.map(sigmoid),
            ActKind::Tanh => x.map(f64::tanh),
            ActKind::Relu => x.map(|v| if v > 0.0 { v } else { 0.0 }),
        };
        self.cache = Some(y.clone());
        Ok(y)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let y = self.cache.as_ref().ok_or_else(|| Error::state("activation backward before forward"))?;
        upstream.expect_shape(y.shape())?;
        let mut dx = upstream.clone();
        match self.kind {
            ActKind::Sigmoid => {
                for (d, &yv) in dx.data_mut().iter_mut().zip(y.data().iter()) {
                    *d *= yv * (1.0 - yv);
                }
            }
            ActKind::Tanh => {
                for (d, &yv) in dx.data_mut().iter_mut().zip(y.data().iter()) {
                    *d *= 1.0 - yv * yv;
                }
            }
            ActKind::Relu => {
                for (d, &yv) in dx.data_mut().iter_mut().zip(y.data().iter()) {
                    if yv <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
        }
        Ok(dx)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn sample_standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    use rand_distr::Distribution;
    rand_distr::StandardNormal.sample(rng)
}

/// A named weight tensor paired with its gradient accumulator. Building block
/// for the hand-written recurrent models, which keep their own activation
/// traces instead of using the layer containers.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub w: Tensor,
    pub g: Tensor,
}

impl Param {
    pub fn new(name: &str, shape: &[usize]) -> Param {
        Param { name: name.to_string(), w: Tensor::zeros(shape), g: Tensor::zeros(shape) }
    }

    pub fn init_uniform<R: rand::Rng + ?Sized>(&mut self, rng: &mut R, bound: f64) {
        for v in self.w.data_mut() {
            *v = rng.random_range(-bound..bound);
        }
    }

    pub fn block(&mut self) -> ParamBlock<'_> {
        ParamBlock {
            name: self.name.clone(),
            values: self.w.data_mut(),
            grads: self.g.data_mut(),
        }
    }

    pub fn zero_grad(&mut self) {
        self.g.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.len() == 0
    }
}

/// y = W x + b for one sample, with a row-major [out, in] weight.
pub fn linear_forward(w: &Tensor, b: &Tensor, x: &[f64], y: &mut [f64]) {
    let inp = w.shape()[1];
    let wd = w.data();
    let bd = b.data();
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &wd[o * inp..(o + 1) * inp];
        let mut acc = bd[o];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *yo = acc;
    }
}

/// y += W x, for joining a second input into a pre-activation sum.
pub fn matvec_acc(w: &Tensor, x: &[f64], y: &mut [f64]) {
    let inp = w.shape()[1];
    let wd = w.data();
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &wd[o * inp..(o + 1) * inp];
        let mut acc = 0.0;
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *yo += acc;
    }
}

/// Accumulates gw += dy (x) x, gb += dy and, when requested, dx += W^T dy.
/// `gb` is None for weights applied without their own bias term.
pub fn linear_backward(
    w: &Tensor,
    x: &[f64],
    dy: &[f64],
    gw: &mut Tensor,
    gb: Option<&mut Tensor>,
    dx: Option<&mut [f64]>,
) {
    let inp = w.shape()[1];
    let gwd = gw.data_mut();
    for (o, &d) in dy.iter().enumerate() {
        let row = &mut gwd[o * inp..(o + 1) * inp];
        for (gi, xi) in row.iter_mut().zip(x) {
            *gi += d * xi;
        }
    }
    if let Some(gb) = gb {
        for (gbo, &d) in gb.data_mut().iter_mut().zip(dy) {
            *gbo += d;
        }
    }
    if let Some(dx) = dx {
        let wd = w.data();
        for (o, &d) in dy.iter().enumerate() {
            let row = &wd[o * inp..(o + 1) * inp];
            for (dxi, wi) in dx.iter_mut().zip(row) {
                *dxi += d * wi;
            }
        }
    }
}

/// y += w * x, a stride-1 cross-correlation with zero same-padding.
/// w is [co, ci, k, k] with odd k; x is [ci, h, w]; y is [co, h, w].
pub fn conv_acc(w: &Tensor, x: &Tensor, y: &mut Tensor) {
    let (co, ci, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let (h, wd_) = (x.shape()[1], x.shape()[2]);
    let pad = (k - 1) / 2;
    let plane = h * wd_;
    for oc in 0..co {
        let out = &mut y.data_mut()[oc * plane..(oc + 1) * plane];
        for ic in 0..ci {
            let xin = &x.data()[ic * plane..(ic + 1) * plane];
            for ky in 0..k {
                for kx in 0..k {
                    let alpha = w.data()[((oc * ci + ic) * k + ky) * k + kx];
                    if alpha == 0.0 {
                        continue;
                    }
                    let (dy, dx) = (ky as isize - pad as isize, kx as isize - pad as isize);
                    let r0 = (-dy).max(0) as usize;
                    let r1 = ((h as isize - dy).min(h as isize)).max(0) as usize;
                    let c0 = (-dx).max(0) as usize;
                    let c1 = ((wd_ as isize - dx).min(wd_ as isize)).max(0) as usize;
                    for r in r0..r1 {
                        let sr = (r as isize + dy) as usize;
                        let sc = (c0 as isize + dx) as usize;
                        let src = &xin[sr * wd_ + sc..sr * wd_ + sc + (c1 - c0)];
                        let dst = &mut out[r * wd_ + c0..r * wd_ + c1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += alpha * s;
                        }
                    }
                }
            }
        }
    }
}

/// dx += correlation adjoint of `conv_acc` with respect to its input.
pub fn conv_grad_input(w: &Tensor, dy: &Tensor, dx: &mut Tensor) {
    let (co, ci, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let (h, wd_) = (dx.shape()[1], dx.shape()[2]);
    let pad = (k - 1) / 2;
    let plane = h * wd_;
    for oc in 0..co {
        let up = &dy.data()[oc * plane..(oc + 1) * plane];
        for ic in 0..ci {
            let dst_plane_off = ic * plane;
            for ky in 0..k {
                for kx in 0..k {
                    let alpha = w.data()[((oc * ci + ic) * k + ky) * k + kx];
                    if alpha == 0.0 {
                        continue;
                    }
                    let (dyo, dxo) = (ky as isize - pad as isize, kx as isize - pad as isize);
                    let r0 = (-dyo).max(0) as usize;
                    let r1 = ((h as isize - dyo).min(h as isize)).max(0) as usize;
                    let c0 = (-dxo).max(0) as usize;
                    let c1 = ((wd_ as isize - dxo).min(wd_ as isize)).max(0) as usize;
                    for r in r0..r1 {
                        let sr = (r as isize + dyo) as usize;
                        let sc = (c0 as isize + dxo) as usize;
                        let up_row = &up[r * wd_ + c0..r * wd_ + c1];
                        let dst = &mut dx.data_mut()
                            [dst_plane_off + sr * wd_ + sc..dst_plane_off + sr * wd_ + sc + (c1 - c0)];
                        for (d, u) in dst.iter_mut().zip(up_row) {
                            *d += alpha * u;
                        }
                    }
                }
            }
        }
    }
}

/// gw += correlation adjoint of `conv_acc` with respect to its weights, and
/// gb += the per-channel sums of dy when a bias gradient is wanted.
pub fn conv_grad_weights(x: &Tensor, dy: &Tensor, gw: &mut Tensor, gb: Option<&mut Tensor>) {
    let (co, ci, k) = (gw.shape()[0], gw.shape()[1], gw.shape()[2]);
    let (h, wd_) = (x.shape()[1], x.shape()[2]);
    let pad = (k - 1) / 2;
    let plane = h * wd_;
    for oc in 0..co {
        let up = &dy.data()[oc * plane..(oc + 1) * plane];
        for ic in 0..ci {
            let xin = &x.data()[ic * plane..(ic + 1) * plane];
            for ky in 0..k {
                for kx in 0..k {
                    let (dyo, dxo) = (ky as isize - pad as isize, kx as isize - pad as isize);
                    let r0 = (-dyo).max(0) as usize;
                    let r1 = ((h as isize - dyo).min(h as isize)).max(0) as usize;
                    let c0 = (-dxo).max(0) as usize;
                    let c1 = ((wd_ as isize - dxo).min(wd_ as isize)).max(0) as usize;
                    let mut acc = 0.0;
                    for r in r0..r1 {
                        let sr = (r as isize + dyo) as usize;
                        let sc = (c0 as isize + dxo) as usize;
                        let up_row = &up[r * wd_ + c0..r * wd_ + c1];
                        let x_row = &xin[sr * wd_ + sc..sr * wd_ + sc + (c1 - c0)];
                        for (u, xv) in up_row.iter().zip(x_row) {
                            acc += u * xv;
                        }
                    }
                    gw.data_mut()[((oc * ci + ic) * k + ky) * k + kx] += acc;
                }
            }
        }
    }
    if let Some(gb) = gb {
        for oc in 0..co {
            gb.data_mut()[oc] += dy.data()[oc * plane..(oc + 1) * plane].iter().sum::<f64>();
        }
    }
}

/// Batch normalization over the batch axis of `[batch, features]` input.
/// Training mode normalizes with batch statistics and updates running stats
/// with momentum; eval mode uses the running statistics.
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub g_gamma: Tensor,
    pub g_beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub eps: f64,
    features: usize,
    cache: Option<BnCache>,
}

struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    // Eval normalizes with running statistics, which are constants under
    // differentiation, so its backward has no batch-coupling terms.
    train: bool,
}

impl BatchNorm {
    pub fn new(features: usize) -> BatchNorm {
        BatchNorm {
            gamma: Tensor::full(&[features], 1.0),
            beta: Tensor::zeros(&[features]),
            g_gamma: Tensor::zeros(&[features]),
            g_beta: Tensor::zeros(&[features]),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::full(&[features], 1.0),
            momentum: 0.9,
            eps: 1e-5,
            features,
            cache: None,
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let s = x.shape();
        if s.len() != 2 || s[1] != self.features {
            return Err(Error::ShapeMismatch { expected: vec![0, self.features], got: s.to_vec() });
        }
        Ok(s[0])
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let batch = self.check_input(x)?;
        if batch == 0 {
            return Err(Error::invalid("batchnorm forward on empty batch"));
        }
        let f = self.features;
        let mut y = Tensor::zeros(&[batch, f]);
        match mode {
            Mode::Train => {
                let n = batch as f64;
                let mut mean = vec![0.0; f];
                let mut var = vec![0.0; f];
                for bi in 0..batch {
                    for (j, &v) in x.data()[bi * f..(bi + 1) * f].iter().enumerate() {
                        mean[j] += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                for bi in 0..batch {
                    for (j, &v) in x.data()[bi * f..(bi + 1) * f].iter().enumerate() {
                        let d = v - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= n);
                let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + self.eps).sqrt()).collect();
                let mut xhat = Tensor::zeros(&[batch, f]);
                for bi in 0..batch {
                    for j in 0..f {
                        let xh = (x.data()[bi * f + j] - mean[j]) * inv_std[j];
                        xhat.data_mut()[bi * f + j] = xh;
                        y.data_mut()[bi * f + j] = self.gamma.data()[j] * xh + self.beta.data()[j];
                    }
                }
                for j in 0..f {
                    let rm = self.running_mean.data_mut();
                    rm[j] = self.momentum * rm[j] + (1.0 - self.momentum) * mean[j];
                    let rv = self.running_var.data_mut();
                    rv[j] = self.momentum * rv[j] + (1.0 - self.momentum) * var[j];
                }
                self.cache = Some(BnCache { xhat, inv_std, train: true });
            }
            Mode::Eval => {
                let inv_std: Vec<f64> = self
                    .running_var
                    .data()
                    .iter()
                    .map(|&v| 1.0 / (v + self.eps).sqrt())
                    .collect();
                let mut xhat = Tensor::zeros(&[batch, f]);
                for bi in 0..batch {
                    for j in 0..f {
                        let xh =
                            (x.data()[bi * f + j] - self.running_mean.data()[j]) * inv_std[j];
                        xhat.data_mut()[bi * f + j] = xh;
                        y.data_mut()[bi * f + j] = self.gamma.data()[j] * xh + self.beta.data()[j];
                    }
                }
                self.cache = Some(BnCache { xhat, inv_std, train: false });
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::state("batchnorm backward requires a cached forward"))?;
        let batch = cache.xhat.shape()[0];
        let f = self.features;
        upstream.expect_shape(&[batch, f])?;
        let n = batch as f64;
        let mut sum_d = vec![0.0; f];
        let mut sum_dxh = vec![0.0; f];
        for bi in 0..batch {
            for j in 0..f {
                let u = upstream.data()[bi * f + j];
                let xh = cache.xhat.data()[bi * f + j];
                self.g_beta.data_mut()[j] += u;
                self.g_gamma.data_mut()[j] += u * xh;
                let dxh = u * self.gamma.data()[j];
                sum_d[j] += dxh;
                sum_dxh[j] += dxh * xh;
            }
        }
        let mut dx = Tensor::zeros(&[batch, f]);
        for bi in 0..batch {
            for j in 0..f {
                let u = upstream.data()[bi * f + j];
                let xh = cache.xhat.data()[bi * f + j];
                let dxh = u * self.gamma.data()[j];
                dx.data_mut()[bi * f + j] = if cache.train {
                    cache.inv_std[j] / n * (n * dxh - sum_d[j] - xh * sum_dxh[j])
                } else {
                    dxh * cache.inv_std[j]
                };
            }
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn dense_forward_matches_hand_case() {
        // y = Wx + b with W = [[1,2,3],[4,5,6]], x = [1,1,2], b = [0.5, -0.5]
        let mut d = Dense::new(3, 2);
        d.w = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        d.b = Tensor::from_vec(&[2], vec![0.5, -0.5]).unwrap();
        let x = Tensor::from_vec(&[1, 3], vec![1.0, 1.0, 2.0]).unwrap();
        let y = d.forward(&x).unwrap();
        assert_eq!(y.data(), &[9.5, 20.5]);
    }

    #[test]
    fn dense_adjoints_match_hand_case() {
        // For y = Wx, upstream g: input grad = W^T g, weight grad = g x^T.
        let mut d = Dense::new(2, 2);
        d.w = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = Tensor::from_vec(&[1, 2], vec![5.0, 7.0]).unwrap();
        d.forward(&x).unwrap();
        let g = Tensor::from_vec(&[1, 2], vec![1.0, 10.0]).unwrap();
        let dx = d.backward(&g).unwrap();
        assert_eq!(dx.data(), &[1.0 + 30.0, 2.0 + 40.0]);
        assert_eq!(d.gw.data(), &[5.0, 7.0, 50.0, 70.0]);
        assert_eq!(d.gb.data(), &[1.0, 10.0]);
    }

    #[test]
    fn backward_before_forward_is_a_state_error() {
        let mut d = Dense::new(2, 2);
        let g = Tensor::zeros(&[1, 2]);
        assert!(matches!(d.backward(&g), Err(crate::error::Error::State(_))));
        let mut a = Activation::new(ActKind::Relu);
        assert!(a.backward(&g).is_err());
        let mut bn = BatchNorm::new(2);
        assert!(bn.backward(&g).is_err());
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let mut d = Dense::new(3, 2);
        let x = Tensor::zeros(&[1, 4]);
        let err = d.forward(&x).unwrap_err();
        assert!(err.to_string().contains("[1, 4]"));
    }

    #[test]
    fn conv_identity_kernel_reproduces_image() {
        let mut c = Conv2d::new(1, 1, 3, 3);
        c.w.data_mut()[4] = 1.0; // center tap
        let x = Tensor::from_vec(&[1, 1, 4, 4], (0..16).map(|i| i as f64).collect()).unwrap();
        let y = c.forward(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_shift_kernel_shifts_and_zero_pads() {
        // Kernel with a single tap one column to the right shifts content left,
        // zero-filling the last column.
        let mut c = Conv2d::new(1, 1, 3, 3);
        c.w.data_mut()[5] = 1.0; // (ky=1, kx=2) -> dx = +1
        let x = Tensor::from_vec(&[1, 1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = c.forward(&x).unwrap();
        assert_eq!(y.data(), &[2.0, 3.0, 0.0, 5.0, 6.0, 0.0]);
    }

    #[test]
    fn activation_derivatives_at_zero() {
        let x = Tensor::from_vec(&[1, 1], vec![0.0]).unwrap();
        let mut s = Activation::new(ActKind::Sigmoid);
        let y = s.forward(&x).unwrap();
        assert_eq!(y.data()[0], 0.5);
        let d = s.backward(&Tensor::from_vec(&[1, 1], vec![1.0]).unwrap()).unwrap();
        assert!((d.data()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn relu_blocks_negative_inputs() {
        let x = Tensor::from_vec(&[1, 4], vec![-2.0, -0.5, 0.5, 2.0]).unwrap();
        let mut r = Activation::new(ActKind::Relu);
        let y = r.forward(&x).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 0.5, 2.0]);
        let d = r.backward(&Tensor::full(&[1, 4], 1.0)).unwrap();
        assert_eq!(d.data(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn batchnorm_normalizes_batch_in_train_mode() {
        let mut bn = BatchNorm::new(2);
        let x = Tensor::from_vec(&[4, 2], vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]).unwrap();
        let y = bn.forward(&x, Mode::Train).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = (0..4).map(|b| y.data()[b * 2 + j]).collect();
            let mean: f64 = col.iter().sum::<f64>() / 4.0;
            let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-9, "feature {j} mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "feature {j} var {var}");
        }
    }

    #[test]
    fn batchnorm_running_stats_follow_momentum() {
        let mut bn = BatchNorm::new(1);
        let x = Tensor::from_vec(&[2, 1], vec![2.0, 6.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        // batch mean 4, biased var 4; running starts at (0, 1), momentum 0.9.
        assert!((bn.running_mean.data()[0] - 0.4).abs() < 1e-12);
        assert!((bn.running_var.data()[0] - (0.9 + 0.4)).abs() < 1e-12);
        // Eval mode must use running stats, independent of the eval batch.
        let y = bn.forward(&Tensor::from_vec(&[1, 1], vec![0.4]).unwrap(), Mode::Eval).unwrap();
        assert!(y.data()[0].abs() < 1e-9);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut d = Dense::new(16, 8);
        d.init(&mut rng);
        let bound = 1.0 / 4.0;
        assert!(d.w.data().iter().all(|v| v.abs() <= bound));
        assert!(d.w.data().iter().any(|v| v.abs() > 1e-4));
    }
}
