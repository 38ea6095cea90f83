//! Reverse-mode differentiation over a recorded operation list.
//!
//! Every op appends a node holding its output value. `backward` walks the
//! nodes in reverse and accumulates vector-Jacobian products into the
//! inputs. A tape is single-use: build one per forward pass.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::scalar::{gemm, View};
use super::{Scalar, Tensor};
use crate::dsp::stft::{hann, reflect_index, SpectrogramConfig};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Magnitude floor used when dividing by |z| in the STFT backward pass.
pub const MAGNITUDE_GUARD: f64 = 1e-12;

enum Op<T> {
    Leaf,
    Conv1d {
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
    },
    UpsampleLinear {
        input: Var,
    },
    Concat {
        a: Var,
        b: Var,
    },
    LeakyRelu {
        input: Var,
        alpha: T,
    },
    Tanh {
        input: Var,
    },
    Softplus {
        input: Var,
    },
    CropTime {
        input: Var,
        start: usize,
    },
    StftMagnitude {
        input: Var,
        config: SpectrogramConfig,
        spectra: Vec<Complex<T>>,
    },
    L1 {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        input: Var,
        factor: T,
    },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv1d { .. } => "conv1d",
            Op::UpsampleLinear { .. } => "upsample_linear",
            Op::Concat { .. } => "concat_channels",
            Op::LeakyRelu { .. } => "leaky_relu",
            Op::Tanh { .. } => "tanh",
            Op::Softplus { .. } => "softplus",
            Op::CropTime { .. } => "crop_time",
            Op::StftMagnitude { .. } => "stft_magnitude",
            Op::L1 { .. } => "l1",
            Op::Add { .. } => "add",
            Op::Scale { .. } => "scale",
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    check_finite: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients indexed by [`Var`]; `None` where nothing flowed.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl<T: Scalar> Tape<T> {
    /// Finiteness of every op output is checked in debug builds.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            check_finite: cfg!(debug_assertions),
        }
    }

    pub fn with_finite_checks(mut self, on: bool) -> Self {
        self.check_finite = on;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable input; gradients are kept for it.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn scalar_value(&self, var: Var) -> f64 {
        self.value(var).data()[0].as_f64()
    }

    fn requires(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push_raw(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        if self.check_finite && !value.all_finite() {
            return Err(Error::NonFinite {
                op: op.name().to_string(),
            });
        }
        let requires = inputs.iter().any(|&v| self.requires(v));
        Ok(self.push_raw(value, op, requires))
    }

    /// Name of the first op whose output holds a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.nodes
            .iter()
            .find(|n| !n.value.all_finite())
            .map(|n| n.op.name())
    }

    fn channels_by_len(&self, var: Var, op: &'static str) -> Result<(usize, usize)> {
        match self.value(var).shape() {
            [c, l] => Ok((*c, *l)),
            [l] => Ok((1, *l)),
            s => Err(Error::shape(op, format!("expected channels × length, got {s:?}"))),
        }
    }

    /// Cross-correlation with zero "same" padding: output length is
    /// `ceil(len / stride)`, tap `k` of output `o` reads input
    /// `o * stride + k - kernel / 2`.
    pub fn conv1d(&mut self, input: Var, weight: Var, bias: Var, stride: usize) -> Result<Var> {
        let (c_in, len) = self.channels_by_len(input, "conv1d")?;
        let w = self.value(weight);
        let (c_out, w_in, kernel) = match w.shape() {
            [a, b, c] => (*a, *b, *c),
            s => return Err(Error::shape("conv1d", format!("weight shape {s:?}"))),
        };
        if w_in != c_in {
            return Err(Error::shape(
                "conv1d",
                format!("weight expects {w_in} input channels, input has {c_in}"),
            ));
        }
        if self.value(bias).len() != c_out {
            return Err(Error::shape("conv1d", "bias length differs from output channels"));
        }
        if stride == 0 {
            return Err(Error::invalid("conv1d stride must be positive"));
        }
        if len == 0 {
            return Err(Error::shape("conv1d", "empty time axis"));
        }
        let out_len = len.div_ceil(stride);
        let geo = ConvGeometry::new(c_in, len, kernel, stride, out_len);
        let xp = geo.pad(self.value(input).data());
        let mut out = vec![T::zero(); c_out * out_len];
        let b = self.value(bias).data();
        for (o, row) in out.chunks_mut(out_len).enumerate() {
            row.fill(b[o]);
        }
        for k in 0..kernel {
            gemm(
                w.data(),
                geo.weight_tap(c_out, k),
                &xp,
                geo.input_tap(k),
                T::one(),
                &mut out,
                View::dense(c_out, out_len),
            );
        }
        let value = Tensor::new(vec![c_out, out_len], out)?;
        self.push(
            value,
            Op::Conv1d {
                input,
                weight,
                bias,
                stride,
            },
            &[input, weight, bias],
        )
    }

    /// Doubles the time axis: even outputs copy, odd outputs average
    /// neighbours, the final odd output repeats the last input.
    pub fn upsample_linear(&mut self, input: Var) -> Result<Var> {
        let (c, len) = self.channels_by_len(input, "upsample_linear")?;
        if len < 1 {
            return Err(Error::shape("upsample_linear", "empty time axis"));
        }
        let x = self.value(input).data();
        let half = T::lit(0.5);
        let mut out = vec![T::zero(); c * 2 * len];
        for ch in 0..c {
            let src = &x[ch * len..(ch + 1) * len];
            let dst = &mut out[ch * 2 * len..(ch + 1) * 2 * len];
            for i in 0..len {
                dst[2 * i] = src[i];
                dst[2 * i + 1] = if i + 1 < len {
                    (src[i] + src[i + 1]) * half
                } else {
                    src[i]
                };
            }
        }
        let value = Tensor::new(vec![c, 2 * len], out)?;
        self.push(value, Op::UpsampleLinear { input }, &[input])
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ca, la) = self.channels_by_len(a, "concat_channels")?;
        let (cb, lb) = self.channels_by_len(b, "concat_channels")?;
        if la != lb && ca > 0 && cb > 0 {
            return Err(Error::shape(
                "concat_channels",
                format!("lengths {la} and {lb} differ"),
            ));
        }
        let len = if ca > 0 { la } else { lb };
        let mut data = Vec::with_capacity((ca + cb) * len);
        data.extend_from_slice(self.value(a).data());
        data.extend_from_slice(self.value(b).data());
        let value = Tensor::new(vec![ca + cb, len], data)?;
        self.push(value, Op::Concat { a, b }, &[a, b])
    }

    pub fn leaky_relu(&mut self, input: Var, alpha: f64) -> Result<Var> {
        let alpha = T::lit(alpha);
        let v = self.value(input);
        let data = v
            .data()
            .iter()
            .map(|&x| if x >= T::zero() { x } else { x * alpha })
            .collect();
        let value = Tensor::new(v.shape().to_vec(), data)?;
        self.push(value, Op::LeakyRelu { input, alpha }, &[input])
    }

    pub fn tanh(&mut self, input: Var) -> Result<Var> {
        let v = self.value(input);
        let value = Tensor::new(v.shape().to_vec(), v.data().iter().map(|x| x.tanh()).collect())?;
        self.push(value, Op::Tanh { input }, &[input])
    }

    /// `ln(1 + e^x)`, computed without overflow.
    pub fn softplus(&mut self, input: Var) -> Result<Var> {
        let v = self.value(input);
        let data = v
            .data()
            .iter()
            .map(|&x| x.max(T::zero()) + (-x.abs()).exp().ln_1p())
            .collect();
        let value = Tensor::new(v.shape().to_vec(), data)?;
        self.push(value, Op::Softplus { input }, &[input])
    }

    /// Keeps time steps `start..start + len` of every channel.
    pub fn crop_time(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let (c, full) = self.channels_by_len(input, "crop_time")?;
        if start + len > full {
            return Err(Error::shape(
                "crop_time",
                format!("crop {start}+{len} exceeds length {full}"),
            ));
        }
        let x = self.value(input).data();
        let mut data = Vec::with_capacity(c * len);
        for ch in 0..c {
            data.extend_from_slice(&x[ch * full + start..ch * full + start + len]);
        }
        let value = Tensor::new(vec![c, len], data)?;
        self.push(value, Op::CropTime { input, start }, &[input])
    }

    /// Centered Hann-window STFT magnitudes of a single-channel signal,
    /// shaped frames × bins.
    pub fn stft_magnitude(&mut self, input: Var, config: SpectrogramConfig) -> Result<Var> {
        let (c, len) = self.channels_by_len(input, "stft_magnitude")?;
        if c != 1 {
            return Err(Error::shape("stft_magnitude", "expects one channel"));
        }
        if len == 0 {
            return Err(Error::EmptySignal);
        }
        let n = config.fft_size;
        let bins = config.bins();
        let frames = config.frame_count(len);
        let pad = config.pad();
        let window: Vec<T> = hann(n).into_iter().map(T::lit).collect();
        let fft = plan(n, false);
        let x = self.value(input).data();

        let mut spectra = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        for t in 0..frames {
            let start = t * config.hop_size;
            for (k, slot) in buf.iter_mut().enumerate() {
                let s = x[reflect_index(start + k, pad, len)];
                *slot = Complex::new(s * window[k], T::zero());
            }
            fft.process(&mut buf);
            spectra.extend_from_slice(&buf[..bins]);
        }
        let mags = spectra.iter().map(|z| z.norm()).collect();
        let value = Tensor::new(vec![frames, bins], mags)?;
        self.push(
            value,
            Op::StftMagnitude {
                input,
                config,
                spectra,
            },
            &[input],
        )
    }

    /// Mean absolute difference, as a one-element tensor.
    pub fn l1(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(Error::shape(
                "l1",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        if va.is_empty() {
            return Err(Error::shape("l1", "empty operands"));
        }
        let sum: f64 = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| (x - y).abs().as_f64())
            .sum();
        let value = Tensor::scalar(T::lit(sum / va.len() as f64));
        self.push(value, Op::L1 { a, b }, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        self.push(value, Op::Add { a, b }, &[a, b])
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Result<Var> {
        let factor = T::lit(factor);
        let v = self.value(input);
        let value = Tensor::new(
            v.shape().to_vec(),
            v.data().iter().map(|&x| x * factor).collect(),
        )?;
        self.push(value, Op::Scale { input, factor }, &[input])
    }

    /// Gradients of the one-element `output` with respect to every node that
    /// requires them. Intermediate gradients are dropped once propagated;
    /// leaf gradients are kept.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        if self.value(output).len() != 1 {
            return Err(Error::shape("backward", "output must be a scalar"));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(T::one()));

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], var: Var, g: Tensor<T>) {
        if !self.requires(var) {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let shaped = |var: Var, data: Vec<T>| {
            Tensor::new(self.value(var).shape().to_vec(), data).expect("gradient matches value shape")
        };
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d {
                input,
                weight,
                bias,
                stride,
            } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (c_out, c_in, kernel) = (w.shape()[0], w.shape()[1], w.shape()[2]);
                let len = x.width();
                let out_len = g.width();
                let gd = g.data();

                if self.requires(*bias) {
                    let db = gd
                        .chunks(out_len)
                        .map(|row| row.iter().fold(T::zero(), |a, &v| a + v))
                        .collect();
                    self.accumulate(grads, *bias, shaped(*bias, db));
                }
                let need_w = self.requires(*weight);
                let need_x = self.requires(*input);
                let geo = ConvGeometry::new(c_in, len, kernel, *stride, out_len);
                let g_view = View::dense(c_out, out_len);
                if need_w {
                    // One GEMM over all taps: column `k * c_in + c` of the
                    // time-major input is row `t * stride` shifted by `k`.
                    let xpt = geo.pad_transposed(x.data());
                    let mut dw_kc = vec![T::zero(); c_out * kernel * c_in];
                    gemm(
                        gd,
                        g_view,
                        &xpt,
                        geo.unfolded_input(),
                        T::zero(),
                        &mut dw_kc,
                        View::dense(c_out, kernel * c_in),
                    );
                    let mut dw = vec![T::zero(); w.len()];
                    for o in 0..c_out {
                        for k in 0..kernel {
                            for c in 0..c_in {
                                dw[(o * c_in + c) * kernel + k] =
                                    dw_kc[(o * kernel + k) * c_in + c];
                            }
                        }
                    }
                    self.accumulate(grads, *weight, shaped(*weight, dw));
                }
                if need_x {
                    let mut dxp = vec![T::zero(); c_in * geo.padded];
                    for k in 0..kernel {
                        gemm(
                            w.data(),
                            geo.weight_tap(c_out, k).t(),
                            gd,
                            g_view,
                            T::one(),
                            &mut dxp,
                            geo.input_tap(k),
                        );
                    }
                    let dx = geo.unpad(&dxp);
                    self.accumulate(grads, *input, shaped(*input, dx));
                }
            }
            Op::UpsampleLinear { input } => {
                let len = self.value(*input).width();
                let c = self.value(*input).rows();
                let half = T::lit(0.5);
                let gd = g.data();
                let mut dx = vec![T::zero(); c * len];
                for ch in 0..c {
                    let src = &gd[ch * 2 * len..(ch + 1) * 2 * len];
                    let dst = &mut dx[ch * len..(ch + 1) * len];
                    for i in 0..len {
                        dst[i] = dst[i] + src[2 * i];
                        if i + 1 < len {
                            dst[i] = dst[i] + src[2 * i + 1] * half;
                            dst[i + 1] = dst[i + 1] + src[2 * i + 1] * half;
                        } else {
                            dst[i] = dst[i] + src[2 * i + 1];
                        }
                    }
                }
                self.accumulate(grads, *input, shaped(*input, dx));
            }
            Op::Concat { a, b } => {
                let na = self.value(*a).len();
                let (ga, gb) = g.data().split_at(na);
                self.accumulate(grads, *a, shaped(*a, ga.to_vec()));
                self.accumulate(grads, *b, shaped(*b, gb.to_vec()));
            }
            Op::LeakyRelu { input, alpha } => {
                let x = self.value(*input).data();
                let dx = x
                    .iter()
                    .zip(g.data())
                    .map(|(&xi, &gi)| if xi >= T::zero() { gi } else { gi * *alpha })
                    .collect();
                self.accumulate(grads, *input, shaped(*input, dx));
            }
            Op::Tanh { input } => {
                let dx = node
                    .value
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&y, &gi)| gi * (T::one() - y * y))
                    .collect();
                self.accumulate(grads, *input, shaped(*input, dx));
            }
            Op::Softplus { input } => {
                let dx = self
                    .value(*input)
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&x, &gi)| gi / (T::one() + (-x).exp()))
                    .collect();
                self.accumulate(grads, *input, shaped(*input, dx));
            }
            Op::CropTime { input, start } => {
                let full = self.value(*input).width();
                let c = self.value(*input).rows();
                let len = g.width();
                let mut dx = vec![T::zero(); c * full];
                for ch in 0..c {
                    dx[ch * full + start..ch * full + start + len]
                        .copy_from_slice(&g.data()[ch * len..(ch + 1) * len]);
                }
                self.accumulate(grads, *input, shaped(*input, dx));
            }
            Op::StftMagnitude {
                input,
                config,
                spectra,
            } => {
                let dx = stft_magnitude_backward(
                    spectra,
                    g.data(),
                    *config,
                    self.value(*input).width(),
                );
                self.accumulate(grads, *input, shaped(*input, dx));
            }
            Op::L1 { a, b } => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let scale = g.data()[0] / T::lit(va.len() as f64);
                let sign: Vec<T> = va
                    .iter()
                    .zip(vb)
                    .map(|(&x, &y)| {
                        if x > y {
                            scale
                        } else if x < y {
                            -scale
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                if self.requires(*b) {
                    let neg = sign.iter().map(|&s| -s).collect();
                    self.accumulate(grads, *b, shaped(*b, neg));
                }
                self.accumulate(grads, *a, shaped(*a, sign));
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Scale { input, factor } => {
                let mut dx = g.clone();
                dx.scale_in_place(*factor);
                self.accumulate(grads, *input, dx);
            }
        }
    }
}

fn plan<T: Scalar>(n: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Index arithmetic of a "same" convolution run as one strided GEMM per
/// kernel tap over a zero-padded copy of the input.
struct ConvGeometry {
    c_in: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    out_len: usize,
    /// Row length of the padded input: `(out_len - 1) * stride + kernel`.
    padded: usize,
}

impl ConvGeometry {
    fn new(c_in: usize, len: usize, kernel: usize, stride: usize, out_len: usize) -> Self {
        Self {
            c_in,
            len,
            kernel,
            stride,
            out_len,
            padded: (out_len - 1) * stride + kernel,
        }
    }

    fn pad<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let left = self.kernel / 2;
        let mut xp = vec![T::zero(); self.c_in * self.padded];
        for (src, dst) in x.chunks(self.len).zip(xp.chunks_mut(self.padded)) {
            let n = self.len.min(self.padded - left);
            dst[left..left + n].copy_from_slice(&src[..n]);
        }
        xp
    }

    /// Padded input stored time-major: `padded × c_in`.
    fn pad_transposed<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let left = self.kernel / 2;
        let mut xpt = vec![T::zero(); self.padded * self.c_in];
        for (c, src) in x.chunks(self.len).enumerate() {
            for (t, &v) in src.iter().enumerate() {
                xpt[(t + left) * self.c_in + c] = v;
            }
        }
        xpt
    }

    fn unpad<T: Scalar>(&self, xp: &[T]) -> Vec<T> {
        let left = self.kernel / 2;
        let n = self.len.min(self.padded - left);
        let mut x = vec![T::zero(); self.c_in * self.len];
        for (src, dst) in xp.chunks(self.padded).zip(x.chunks_mut(self.len)) {
            dst[..n].copy_from_slice(&src[left..left + n]);
        }
        x
    }

    /// `c_out × c_in` slice of the weights at tap `k`.
    fn weight_tap(&self, c_out: usize, k: usize) -> View {
        View {
            offset: k,
            rows: c_out,
            cols: self.c_in,
            rs: self.c_in * self.kernel,
            cs: self.kernel,
        }
    }

    /// `out_len × (kernel · c_in)` view of the time-major padded input;
    /// consecutive rows overlap when `stride < kernel`.
    fn unfolded_input(&self) -> View {
        View {
            offset: 0,
            rows: self.out_len,
            cols: self.kernel * self.c_in,
            rs: self.stride * self.c_in,
            cs: 1,
        }
    }

    /// `c_in × out_len` view of the padded input read by tap `k`.
    fn input_tap(&self, k: usize) -> View {
        View {
            offset: k,
            rows: self.c_in,
            cols: self.out_len,
            rs: self.padded,
            cs: self.stride,
        }
    }
}

/// Pulls a magnitude gradient back through |FFT|, the window, framing and
/// the reflect padding.
fn stft_magnitude_backward<T: Scalar>(
    spectra: &[Complex<T>],
    g: &[T],
    config: SpectrogramConfig,
    len: usize,
) -> Vec<T> {
    let n = config.fft_size;
    let bins = config.bins();
    let frames = spectra.len() / bins;
    let pad = config.pad();
    let window: Vec<T> = hann(n).into_iter().map(T::lit).collect();
    let guard = T::lit(MAGNITUDE_GUARD);
    let ifft = plan::<T>(n, true);

    let mut dx = vec![T::zero(); len];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for t in 0..frames {
        buf.fill(Complex::new(T::zero(), T::zero()));
        for k in 0..bins {
            let z = spectra[t * bins + k];
            let scale = g[t * bins + k] / z.norm().max(guard);
            buf[k] = z * scale;
        }
        // Re(Σ_k G_k e^{+iθ}) is the gradient w.r.t. the windowed frame.
        ifft.process(&mut buf);
        let start = t * config.hop_size;
        for k in 0..n {
            let src = reflect_index(start + k, pad, len);
            dx[src] = dx[src] + buf[k].re * window[k];
        }
    }
    dx
}
