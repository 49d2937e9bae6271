//! Dense, 1-D convolution and (bi)LSTM layers on batched row-major buffers.
//!
//! Sequence activations are laid out `(batch, time, channels)`. Each layer exposes a
//! forward pass that records what its backward pass needs, and a backward pass that
//! accumulates parameter gradients and returns the gradient w.r.t. its input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::scalar::{gemm, Scalar};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Linear,
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(T::zero()),
            Activation::LeakyRelu(a) => {
                if z > T::zero() {
                    z
                } else {
                    z * T::of(a)
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and the output `y`.
    #[inline]
    fn grad<T: Scalar>(self, z: T, y: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu(a) => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::of(a)
                }
            }
            Activation::Tanh => T::one() - y * y,
        }
    }

    fn code(self) -> (u32, f64) {
        match self {
            Activation::Linear => (0, 0.0),
            Activation::Relu => (1, 0.0),
            Activation::LeakyRelu(a) => (2, a),
            Activation::Tanh => (3, 0.0),
        }
    }

    pub(crate) fn to_code(self) -> u32 {
        let (c, a) = self.code();
        // alpha stored in hundredths so the descriptor stays integral
        c | (((a * 100.0).round() as u32) << 8)
    }

    pub(crate) fn from_code(code: u32) -> Result<Self> {
        let a = (code >> 8) as f64 / 100.0;
        Ok(match code & 0xFF {
            0 => Activation::Linear,
            1 => Activation::Relu,
            2 => Activation::LeakyRelu(a),
            3 => Activation::Tanh,
            c => return Err(invalid(format!("unknown activation code {c}"))),
        })
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Linear => f.write_str("linear"),
            Activation::Relu => f.write_str("relu"),
            Activation::LeakyRelu(a) if (*a - 0.2).abs() < 1e-12 => f.write_str("leaky_relu"),
            Activation::LeakyRelu(a) => write!(f, "leaky_relu({a})"),
            Activation::Tanh => f.write_str("tanh"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(rest) = s.strip_prefix("leaky_relu(") {
            let a: f64 = rest
                .strip_suffix(')')
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| invalid(format!("bad activation `{s}`")))?;
            return Ok(Activation::LeakyRelu(a));
        }
        match s.as_str() {
            "linear" => Ok(Activation::Linear),
            "relu" => Ok(Activation::Relu),
            "leaky_relu" | "leakyrelu" => Ok(Activation::LeakyRelu(0.2)),
            "tanh" => Ok(Activation::Tanh),
            _ => Err(invalid(format!("unknown activation `{s}`; expected linear, relu, leaky_relu, tanh"))),
        }
    }
}

impl Serialize for Activation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Activation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize, activation: Activation },
    /// Same-padded convolution over time.
    Conv1d { in_channels: usize, filters: usize, kernel: usize, activation: Activation },
    Lstm { inputs: usize, hidden: usize, bidirectional: bool },
    /// `(b, M, C) -> (b, M C)`, timestep-major.
    Flatten,
}

/// Per-sample activation shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatShape {
    Seq { len: usize, channels: usize },
    Flat(usize),
}

impl FeatShape {
    pub fn size(self) -> usize {
        match self {
            FeatShape::Seq { len, channels } => len * channels,
            FeatShape::Flat(n) => n,
        }
    }

    pub fn with_batch(self, b: usize) -> Vec<usize> {
        match self {
            FeatShape::Seq { len, channels } => vec![b, len, channels],
            FeatShape::Flat(n) => vec![b, n],
        }
    }
}

impl LayerSpec {
    pub fn n_params(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => outputs * inputs + outputs,
            LayerSpec::Conv1d { in_channels, filters, kernel, .. } => filters * kernel * in_channels + filters,
            LayerSpec::Lstm { inputs, hidden, bidirectional } => {
                let dirs = if bidirectional { 2 } else { 1 };
                dirs * (4 * hidden * inputs + 4 * hidden * hidden + 4 * hidden)
            }
            LayerSpec::Flatten => 0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Lstm { bidirectional: true, .. } => "bilstm",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Flatten => "flatten",
        }
    }

    pub fn output_shape(&self, input: FeatShape) -> Result<FeatShape> {
        let mismatch = |what: String| Err(invalid(format!("{} layer: {what}", self.name())));
        match (*self, input) {
            (LayerSpec::Dense { inputs, outputs, .. }, FeatShape::Flat(n)) => {
                if n != inputs {
                    return mismatch(format!("expects {inputs} inputs, got {n}"));
                }
                Ok(FeatShape::Flat(outputs))
            }
            (LayerSpec::Conv1d { in_channels, filters, kernel, .. }, FeatShape::Seq { len, channels }) => {
                if channels != in_channels || kernel == 0 {
                    return mismatch(format!("expects {in_channels} channels, got {channels}"));
                }
                Ok(FeatShape::Seq { len, channels: filters })
            }
            (LayerSpec::Lstm { inputs, hidden, bidirectional }, FeatShape::Seq { len, channels }) => {
                if channels != inputs {
                    return mismatch(format!("expects {inputs} features, got {channels}"));
                }
                Ok(FeatShape::Seq { len, channels: if bidirectional { 2 * hidden } else { hidden } })
            }
            (LayerSpec::Flatten, s) => Ok(FeatShape::Flat(s.size())),
            (_, s) => mismatch(format!("incompatible input shape {s:?}")),
        }
    }

    /// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.
    pub(crate) fn init<T: Scalar, R: rand::Rng>(&self, p: &mut [T], rng: &mut R) {
        let mut glorot = |dst: &mut [T], fan_in: usize, fan_out: usize| {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in dst.iter_mut() {
                *v = T::of(rng.random_range(-lim..lim));
            }
        };
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => {
                let (w, b) = p.split_at_mut(outputs * inputs);
                glorot(w, inputs, outputs);
                b.fill(T::zero());
            }
            LayerSpec::Conv1d { in_channels, filters, kernel, .. } => {
                let (w, b) = p.split_at_mut(filters * kernel * in_channels);
                glorot(w, kernel * in_channels, kernel * filters);
                b.fill(T::zero());
            }
            LayerSpec::Lstm { inputs, hidden, .. } => {
                let per_dir = 4 * hidden * inputs + 4 * hidden * hidden + 4 * hidden;
                for d in p.chunks_mut(per_dir) {
                    let (w_ih, rest) = d.split_at_mut(4 * hidden * inputs);
                    let (w_hh, b) = rest.split_at_mut(4 * hidden * hidden);
                    glorot(w_ih, inputs, 4 * hidden);
                    glorot(w_hh, hidden, 4 * hidden);
                    b.fill(T::zero());
                    b[hidden..2 * hidden].fill(T::one());
                }
            }
            LayerSpec::Flatten => {}
        }
    }
}

/// What a layer's backward pass needs beyond its input and output.
pub(crate) enum LayerCache<T> {
    None,
    Pre(Vec<T>),
    Conv { pre: Vec<T>, patches: Vec<T> },
    Lstm(Vec<LstmDirCache<T>>),
}

pub(crate) struct LstmDirCache<T> {
    /// Time-major input `(M, b, C)`.
    x_tm: Vec<T>,
    /// Activated gates `(M, b, 4H)` in `[i, f, g, o]` order, indexed by real time.
    gates: Vec<T>,
    /// Cell state `(M, b, H)`.
    c: Vec<T>,
    /// `tanh(c)` `(M, b, H)`.
    tc: Vec<T>,
    /// Hidden state `(M, b, H)`.
    h: Vec<T>,
}

// ---------------------------------------------------------------- dense

pub(crate) fn dense_forward<T: Scalar>(
    p: &[T], x: &[T], b: usize, n_in: usize, n_out: usize, act: Activation,
) -> (Vec<T>, LayerCache<T>) {
    let (w, bias) = p.split_at(n_out * n_in);
    let mut z = Vec::with_capacity(b * n_out);
    for _ in 0..b {
        z.extend_from_slice(bias);
    }
    gemm(false, true, b, n_out, n_in, T::one(), x, w, T::one(), &mut z);
    if let Activation::Linear = act {
        return (z, LayerCache::None);
    }
    let y = z.iter().map(|&v| act.apply(v)).collect();
    (y, LayerCache::Pre(z))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward<T: Scalar>(
    p: &[T], g: &mut [T], x: &[T], y: &[T], cache: &LayerCache<T>, dy: &[T],
    b: usize, n_in: usize, n_out: usize, act: Activation,
) -> Vec<T> {
    let dz: Vec<T> = match cache {
        LayerCache::Pre(z) => dy.iter().zip(z).zip(y).map(|((&d, &z), &y)| d * act.grad(z, y)).collect(),
        _ => dy.to_vec(),
    };
    let (w, _) = p.split_at(n_out * n_in);
    let (gw, gb) = g.split_at_mut(n_out * n_in);
    gemm(true, false, n_out, n_in, b, T::one(), &dz, x, T::one(), gw);
    for row in dz.chunks_exact(n_out) {
        gb.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
    }
    let mut dx = vec![T::zero(); b * n_in];
    gemm(false, false, b, n_in, n_out, T::one(), &dz, w, T::zero(), &mut dx);
    dx
}

// ---------------------------------------------------------------- conv1d

fn pad_left(kernel: usize) -> usize {
    (kernel - 1) / 2
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_forward<T: Scalar>(
    p: &[T], x: &[T], b: usize, len: usize, c_in: usize, filters: usize, kernel: usize, act: Activation,
) -> (Vec<T>, LayerCache<T>) {
    let kc = kernel * c_in;
    let pl = pad_left(kernel) as isize;
    let mut patches = vec![T::zero(); b * len * kc];
    for s in 0..b {
        for t in 0..len {
            let row = &mut patches[(s * len + t) * kc..(s * len + t + 1) * kc];
            for k in 0..kernel {
                let tt = t as isize + k as isize - pl;
                if tt >= 0 && (tt as usize) < len {
                    let src = &x[(s * len + tt as usize) * c_in..(s * len + tt as usize + 1) * c_in];
                    row[k * c_in..(k + 1) * c_in].copy_from_slice(src);
                }
            }
        }
    }
    let (w, bias) = p.split_at(filters * kc);
    let mut z = Vec::with_capacity(b * len * filters);
    for _ in 0..b * len {
        z.extend_from_slice(bias);
    }
    gemm(false, true, b * len, filters, kc, T::one(), &patches, w, T::one(), &mut z);
    let y = z.iter().map(|&v| act.apply(v)).collect();
    (y, LayerCache::Conv { pre: z, patches })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<T: Scalar>(
    p: &[T], g: &mut [T], y: &[T], cache: &LayerCache<T>, dy: &[T],
    b: usize, len: usize, c_in: usize, filters: usize, kernel: usize, act: Activation,
) -> Vec<T> {
    let LayerCache::Conv { pre, patches } = cache else { unreachable!("conv cache") };
    let kc = kernel * c_in;
    let dz: Vec<T> = dy.iter().zip(pre).zip(y).map(|((&d, &z), &y)| d * act.grad(z, y)).collect();
    let (w, _) = p.split_at(filters * kc);
    let (gw, gb) = g.split_at_mut(filters * kc);
    gemm(true, false, filters, kc, b * len, T::one(), &dz, patches, T::one(), gw);
    for row in dz.chunks_exact(filters) {
        gb.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
    }
    let mut dpatch = vec![T::zero(); b * len * kc];
    gemm(false, false, b * len, kc, filters, T::one(), &dz, w, T::zero(), &mut dpatch);
    let pl = pad_left(kernel) as isize;
    let mut dx = vec![T::zero(); b * len * c_in];
    for s in 0..b {
        for t in 0..len {
            let row = &dpatch[(s * len + t) * kc..(s * len + t + 1) * kc];
            for k in 0..kernel {
                let tt = t as isize + k as isize - pl;
                if tt >= 0 && (tt as usize) < len {
                    let dst = &mut dx[(s * len + tt as usize) * c_in..(s * len + tt as usize + 1) * c_in];
                    dst.iter_mut().zip(&row[k * c_in..(k + 1) * c_in]).for_each(|(a, &v)| *a += v);
                }
            }
        }
    }
    dx
}

// ---------------------------------------------------------------- lstm

#[inline]
fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn to_time_major<T: Scalar>(x: &[T], b: usize, len: usize, c: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for s in 0..b {
        for t in 0..len {
            out[(t * b + s) * c..(t * b + s + 1) * c].copy_from_slice(&x[(s * len + t) * c..(s * len + t + 1) * c]);
        }
    }
    out
}

fn time_order(len: usize, reverse: bool) -> Vec<usize> {
    if reverse {
        (0..len).rev().collect()
    } else {
        (0..len).collect()
    }
}

/// Forward pass of an LSTM layer. Output is `(b, M, H)` or, bidirectional, `(b, M, 2H)`
/// with the forward state in the first `H` channels of each timestep.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_forward<T: Scalar>(
    p: &[T], x: &[T], b: usize, len: usize, c_in: usize, hidden: usize, bidirectional: bool,
) -> (Vec<T>, LayerCache<T>) {
    let h4 = 4 * hidden;
    let per_dir = h4 * c_in + h4 * hidden + h4;
    let dirs = if bidirectional { 2 } else { 1 };
    let width = dirs * hidden;
    let x_tm = to_time_major(x, b, len, c_in);
    let mut out = vec![T::zero(); b * len * width];
    let mut caches = Vec::with_capacity(dirs);
    for d in 0..dirs {
        let pd = &p[d * per_dir..(d + 1) * per_dir];
        let (w_ih, rest) = pd.split_at(h4 * c_in);
        let (w_hh, bias) = rest.split_at(h4 * hidden);
        // input projection for every timestep at once: (M b, 4H)
        let mut gates = Vec::with_capacity(len * b * h4);
        for _ in 0..len * b {
            gates.extend_from_slice(bias);
        }
        gemm(false, true, len * b, h4, c_in, T::one(), &x_tm, w_ih, T::one(), &mut gates);
        let mut c_all = vec![T::zero(); len * b * hidden];
        let mut tc_all = vec![T::zero(); len * b * hidden];
        let mut h_all = vec![T::zero(); len * b * hidden];
        let mut prev: Option<usize> = None;
        for t in time_order(len, d == 1) {
            let g_t = &mut gates[t * b * h4..(t + 1) * b * h4];
            if let Some(tp) = prev {
                let h_prev = &h_all[tp * b * hidden..(tp + 1) * b * hidden];
                gemm(false, true, b, h4, hidden, T::one(), h_prev, w_hh, T::one(), g_t);
            }
            for s in 0..b {
                let gs = &mut g_t[s * h4..(s + 1) * h4];
                for j in 0..hidden {
                    let i = sigmoid(gs[j]);
                    let f = sigmoid(gs[hidden + j]);
                    let g = gs[2 * hidden + j].tanh();
                    let o = sigmoid(gs[3 * hidden + j]);
                    gs[j] = i;
                    gs[hidden + j] = f;
                    gs[2 * hidden + j] = g;
                    gs[3 * hidden + j] = o;
                    let c_prev = match prev {
                        Some(tp) => c_all[(tp * b + s) * hidden + j],
                        None => T::zero(),
                    };
                    let c = f * c_prev + i * g;
                    let tc = c.tanh();
                    let idx = (t * b + s) * hidden + j;
                    c_all[idx] = c;
                    tc_all[idx] = tc;
                    h_all[idx] = o * tc;
                }
            }
            prev = Some(t);
        }
        for s in 0..b {
            for t in 0..len {
                let src = &h_all[(t * b + s) * hidden..(t * b + s + 1) * hidden];
                let o = (s * len + t) * width + d * hidden;
                out[o..o + hidden].copy_from_slice(src);
            }
        }
        caches.push(LstmDirCache { x_tm: Vec::new(), gates, c: c_all, tc: tc_all, h: h_all });
    }
    caches[0].x_tm = x_tm;
    (out, LayerCache::Lstm(caches))
}

/// Backpropagation through time for both directions.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_backward<T: Scalar>(
    p: &[T], g: &mut [T], cache: &LayerCache<T>, dy: &[T],
    b: usize, len: usize, c_in: usize, hidden: usize, bidirectional: bool,
) -> Vec<T> {
    let LayerCache::Lstm(caches) = cache else { unreachable!("lstm cache") };
    let h4 = 4 * hidden;
    let per_dir = h4 * c_in + h4 * hidden + h4;
    let dirs = if bidirectional { 2 } else { 1 };
    let width = dirs * hidden;
    let x_tm = &caches[0].x_tm;
    let mut dx_tm = vec![T::zero(); len * b * c_in];
    for (d, cd) in caches.iter().enumerate() {
        let pd = &p[d * per_dir..(d + 1) * per_dir];
        let (w_ih, rest) = pd.split_at(h4 * c_in);
        let (w_hh, _) = rest.split_at(h4 * hidden);
        let gd = &mut g[d * per_dir..(d + 1) * per_dir];
        let (g_ih, rest) = gd.split_at_mut(h4 * c_in);
        let (g_hh, g_b) = rest.split_at_mut(h4 * hidden);

        let order = time_order(len, d == 1);
        let mut dgates = vec![T::zero(); len * b * h4];
        let mut dh_rec = vec![T::zero(); b * hidden];
        let mut dc_rec = vec![T::zero(); b * hidden];
        for (pos, &t) in order.iter().enumerate().rev() {
            let prev = if pos > 0 { Some(order[pos - 1]) } else { None };
            let acts = &cd.gates[t * b * h4..(t + 1) * b * h4];
            let dg_t = &mut dgates[t * b * h4..(t + 1) * b * h4];
            for s in 0..b {
                for j in 0..hidden {
                    let a = &acts[s * h4..(s + 1) * h4];
                    let (i, f, gg, o) = (a[j], a[hidden + j], a[2 * hidden + j], a[3 * hidden + j]);
                    let idx = (t * b + s) * hidden + j;
                    let tc = cd.tc[idx];
                    let dh = dy[(s * len + t) * width + d * hidden + j] + dh_rec[s * hidden + j];
                    let d_o = dh * tc;
                    let dc = dc_rec[s * hidden + j] + dh * o * (T::one() - tc * tc);
                    let c_prev = match prev {
                        Some(tp) => cd.c[(tp * b + s) * hidden + j],
                        None => T::zero(),
                    };
                    dc_rec[s * hidden + j] = dc * f;
                    let row = &mut dg_t[s * h4..(s + 1) * h4];
                    row[j] = dc * gg * i * (T::one() - i);
                    row[hidden + j] = dc * c_prev * f * (T::one() - f);
                    row[2 * hidden + j] = dc * i * (T::one() - gg * gg);
                    row[3 * hidden + j] = d_o * o * (T::one() - o);
                }
            }
            for row in dg_t.chunks_exact(h4) {
                g_b.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
            }
            match prev {
                Some(tp) => {
                    let h_prev = &cd.h[tp * b * hidden..(tp + 1) * b * hidden];
                    gemm(true, false, h4, hidden, b, T::one(), dg_t, h_prev, T::one(), g_hh);
                    gemm(false, false, b, hidden, h4, T::one(), dg_t, w_hh, T::zero(), &mut dh_rec);
                }
                None => dh_rec.fill(T::zero()),
            }
        }
        gemm(true, false, h4, c_in, len * b, T::one(), &dgates, x_tm, T::one(), g_ih);
        gemm(false, false, len * b, c_in, h4, T::one(), &dgates, w_ih, T::one(), &mut dx_tm);
    }
    // back to (b, M, C)
    let mut dx = vec![T::zero(); b * len * c_in];
    for s in 0..b {
        for t in 0..len {
            dx[(s * len + t) * c_in..(s * len + t + 1) * c_in]
                .copy_from_slice(&dx_tm[(t * b + s) * c_in..(t * b + s + 1) * c_in]);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_round_trip() {
        for a in [Activation::Linear, Activation::Relu, Activation::LeakyRelu(0.2), Activation::Tanh, Activation::LeakyRelu(0.35)] {
            assert_eq!(a.to_string().parse::<Activation>().unwrap(), a);
            assert_eq!(Activation::from_code(a.to_code()).unwrap(), a);
        }
        assert!("swish".parse::<Activation>().is_err());
    }

    #[test]
    fn shapes() {
        let conv = LayerSpec::Conv1d { in_channels: 4, filters: 7, kernel: 3, activation: Activation::Linear };
        let s = conv.output_shape(FeatShape::Seq { len: 9, channels: 4 }).unwrap();
        assert_eq!(s, FeatShape::Seq { len: 9, channels: 7 });
        assert!(conv.output_shape(FeatShape::Seq { len: 9, channels: 3 }).is_err());
        assert!(conv.output_shape(FeatShape::Flat(36)).is_err());
        let l = LayerSpec::Lstm { inputs: 7, hidden: 5, bidirectional: true };
        assert_eq!(l.output_shape(s).unwrap(), FeatShape::Seq { len: 9, channels: 10 });
        assert_eq!(LayerSpec::Flatten.output_shape(FeatShape::Seq { len: 9, channels: 10 }).unwrap(), FeatShape::Flat(90));
    }
}
