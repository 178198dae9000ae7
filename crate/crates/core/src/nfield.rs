//! Coordinate network: sinusoidal encoding, tanh MLP with a complex SH head,
//! a hand-written reverse pass, Adam and the learning-rate schedule.
//!
//! Inputs are 7-vectors `(ω, s_x, s_y, s_z, m_x, m_y, m_z)`. Every trainable
//! weight sits in one flat `Vec<f64>` so optimizers and serializers see a
//! single slice; [`NfLayout`] gives the offsets.

use core::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::prelude::*;
use crate::sphharm::{sh_len, ShCoefficients};

/// Input dimension.
pub const INPUT_DIM: usize = 7;

/// Coordinate in physical units (rad/s and meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawCoord(pub [f64; INPUT_DIM]);

/// Coordinate after the per-axis affine map to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormCoord(pub [f64; INPUT_DIM]);

impl RawCoord {
    pub fn new(omega: f64, src: Vec3, mic: Vec3) -> Self {
        Self([omega, src[0], src[1], src[2], mic[0], mic[1], mic[2]])
    }
}

/// Anything that can be brought into network coordinates.
pub trait Coordinate {
    fn normalized(&self, n: &Normalizer) -> NormCoord;
}

impl Coordinate for RawCoord {
    fn normalized(&self, n: &Normalizer) -> NormCoord {
        n.apply(self)
    }
}

impl Coordinate for NormCoord {
    /// Already normalized: identity, so a second pass cannot rescale.
    fn normalized(&self, _: &Normalizer) -> NormCoord {
        *self
    }
}

/// Per-axis affine map of dataset bounds onto `[-1, 1]`. Axes without spread
/// map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub lo: [f64; INPUT_DIM],
    pub hi: [f64; INPUT_DIM],
}

impl Normalizer {
    pub fn new(lo: [f64; INPUT_DIM], hi: [f64; INPUT_DIM]) -> Result<Self> {
        for k in 0..INPUT_DIM {
            if !lo[k].is_finite() || !hi[k].is_finite() || hi[k] < lo[k] {
                return Err(Error::invalid(format!("bad bounds on axis {k}: [{}, {}]", lo[k], hi[k])));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a RawCoord>) -> Result<Self> {
        let mut lo = [f64::INFINITY; INPUT_DIM];
        let mut hi = [f64::NEG_INFINITY; INPUT_DIM];
        for p in points {
            for k in 0..INPUT_DIM {
                lo[k] = lo[k].min(p.0[k]);
                hi[k] = hi[k].max(p.0[k]);
            }
        }
        if lo[0] > hi[0] {
            return Err(Error::invalid("cannot derive bounds from an empty point set"));
        }
        Self::new(lo, hi)
    }

    pub fn apply(&self, z: &RawCoord) -> NormCoord {
        let mut out = [0.0; INPUT_DIM];
        for k in 0..INPUT_DIM {
            let span = self.hi[k] - self.lo[k];
            out[k] = if span > 0.0 { 2.0 * (z.0[k] - self.lo[k]) / span - 1.0 } else { 0.0 };
        }
        NormCoord(out)
    }
}

/// Layer widths and output order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NfArchitecture {
    pub encoding: usize,
    pub hidden: Vec<usize>,
    pub order: usize,
}

impl NfArchitecture {
    pub fn new(encoding: usize, hidden: Vec<usize>, order: usize) -> Result<Self> {
        if encoding == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(Self { encoding, hidden, order })
    }

    /// Real head outputs, re/im interleaved per `(l, m)`.
    pub fn outputs(&self) -> usize {
        2 * sh_len(self.order)
    }

    pub fn layout(&self) -> NfLayout {
        let mut off = 0;
        let mut take = |n: usize| {
            let r = off..off + n;
            off += n;
            r
        };
        let e = self.encoding;
        let w1 = take(e * INPUT_DIM);
        let b1 = take(e);
        let mut prev = e;
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for &h in &self.hidden {
            hidden.push(Dense { rows: h, cols: prev, w: take(h * prev), b: take(h) });
            prev = h;
        }
        let out = self.outputs();
        let head = Dense { rows: out, cols: prev, w: take(out * prev), b: take(out) };
        NfLayout { w1, b1, hidden, head, len: off }
    }
}

/// Offsets of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub w: core::ops::Range<usize>,
    pub b: core::ops::Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NfLayout {
    pub w1: core::ops::Range<usize>,
    pub b1: core::ops::Range<usize>,
    pub hidden: Vec<Dense>,
    pub head: Dense,
    pub len: usize,
}

/// Network weights plus the fixed input gains.
#[derive(Debug, Clone, PartialEq)]
pub struct NfParams {
    pub arch: NfArchitecture,
    pub gains: [f64; INPUT_DIM],
    pub theta: Vec<f64>,
    layout: NfLayout,
}

impl NfParams {
    /// `W1 ~ N(0,1)/√7`, `b1 ~ U(0, 2π)`, Xavier-uniform hidden layers with zero
    /// bias, and a zero head.
    pub fn init<R: Rng + ?Sized>(arch: NfArchitecture, gains: [f64; INPUT_DIM], rng: &mut R) -> Self {
        let layout = arch.layout();
        let mut theta = vec![0.0; layout.len];
        let s = 1.0 / (INPUT_DIM as f64).sqrt();
        for w in &mut theta[layout.w1.clone()] {
            let g: f64 = StandardNormal.sample(rng);
            *w = g * s;
        }
        for b in &mut theta[layout.b1.clone()] {
            *b = rng.random_range(0.0..TAU);
        }
        for d in &layout.hidden {
            let a = (6.0 / (d.rows + d.cols) as f64).sqrt();
            for w in &mut theta[d.w.clone()] {
                *w = rng.random_range(-a..a);
            }
        }
        Self { arch, gains, theta, layout }
    }

    pub fn from_theta(arch: NfArchitecture, gains: [f64; INPUT_DIM], theta: Vec<f64>) -> Result<Self> {
        let layout = arch.layout();
        if theta.len() != layout.len {
            return Err(Error::invalid(format!("network expects {} parameters, got {}", layout.len, theta.len())));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("non-finite network parameter"));
        }
        Ok(Self { arch, gains, theta, layout })
    }

    pub fn layout(&self) -> &NfLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Intermediate values kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct Tape {
    x: [f64; INPUT_DIM],
    pre: Vec<f64>,
    acts: Vec<Vec<f64>>,
}

fn scaled_input(p: &NfParams, z: &NormCoord) -> [f64; INPUT_DIM] {
    let mut x = z.0;
    for (v, g) in x.iter_mut().zip(&p.gains) {
        *v *= g;
    }
    x
}

fn encoding_preactivation(p: &NfParams, x: &[f64; INPUT_DIM]) -> Vec<f64> {
    let l = &p.layout;
    let w1 = &p.theta[l.w1.clone()];
    let b1 = &p.theta[l.b1.clone()];
    (0..p.arch.encoding)
        .map(|e| {
            let row = &w1[e * INPUT_DIM..(e + 1) * INPUT_DIM];
            2.0 * PI * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[e]
        })
        .collect()
}

/// `sin(2π W1 (g ⊙ z) + b1)`.
pub fn positional_encoding(p: &NfParams, z: &NormCoord) -> Vec<f64> {
    let x = scaled_input(p, z);
    encoding_preactivation(p, &x).into_iter().map(f64::sin).collect()
}

fn affine(theta: &[f64], d: &Dense, input: &[f64]) -> Vec<f64> {
    let w = &theta[d.w.clone()];
    let b = &theta[d.b.clone()];
    (0..d.rows).map(|r| b[r] + w[r * d.cols..(r + 1) * d.cols].iter().zip(input).map(|(a, x)| a * x).sum::<f64>()).collect()
}

/// Forward pass returning the interleaved head output and the tape.
pub fn nf_forward_tape(p: &NfParams, z: &NormCoord) -> (Vec<f64>, Tape) {
    let x = scaled_input(p, z);
    let pre = encoding_preactivation(p, &x);
    let mut acts = Vec::with_capacity(p.layout.hidden.len() + 1);
    acts.push(pre.iter().map(|v| v.sin()).collect::<Vec<_>>());
    for d in &p.layout.hidden {
        let h: Vec<f64> = affine(&p.theta, d, acts.last().unwrap()).into_iter().map(f64::tanh).collect();
        acts.push(h);
    }
    let out = affine(&p.theta, &p.layout.head, acts.last().unwrap());
    (out, Tape { x, pre, acts })
}

/// De-interleave head outputs into complex values.
pub fn to_complex(out: &[f64]) -> Vec<Complex64> {
    out.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// SH coefficients predicted at `z`.
pub fn nf_forward(p: &NfParams, z: &NormCoord) -> ShCoefficients {
    let (out, _) = nf_forward_tape(p, z);
    // finite by construction: tanh-bounded activations and finite weights
    ShCoefficients::new(p.arch.order, to_complex(&out)).expect("network output has the head's shape")
}

/// Adds `∂/∂θ Re Σ_k conj(u_k) o_k` to `grad`, i.e. the real gradient of a loss
/// whose cotangent is `u_k = ∂L/∂Re o_k + j ∂L/∂Im o_k`.
pub fn nf_backward_tape(p: &NfParams, tape: &Tape, upstream: &[Complex64], grad: &mut [f64]) -> Result<()> {
    let l = &p.layout;
    if upstream.len() * 2 != l.head.rows || grad.len() != l.len {
        return Err(Error::invalid(format!(
            "cotangent length {} / gradient length {} do not match the network",
            upstream.len(),
            grad.len()
        )));
    }
    let mut delta: Vec<f64> = upstream.iter().flat_map(|u| [u.re, u.im]).collect();
    let mut layers: Vec<&Dense> = l.hidden.iter().collect();
    layers.push(&l.head);
    for (k, d) in layers.iter().enumerate().rev() {
        let input = &tape.acts[k];
        let w = &p.theta[d.w.clone()];
        {
            let (gw, rest) = grad.split_at_mut(d.b.start);
            let gw = &mut gw[d.w.clone()];
            let gb = &mut rest[..d.rows];
            for r in 0..d.rows {
                let dr = delta[r];
                if dr == 0.0 {
                    continue;
                }
                gb[r] += dr;
                for (g, x) in gw[r * d.cols..(r + 1) * d.cols].iter_mut().zip(input) {
                    *g += dr * x;
                }
            }
        }
        let mut back = vec![0.0; d.cols];
        for r in 0..d.rows {
            let dr = delta[r];
            if dr == 0.0 {
                continue;
            }
            for (b, a) in back.iter_mut().zip(&w[r * d.cols..(r + 1) * d.cols]) {
                *b += dr * a;
            }
        }
        if k > 0 {
            // through tanh
            for (b, a) in back.iter_mut().zip(input) {
                *b *= 1.0 - a * a;
            }
        } else {
            // through sin
            for (b, pre) in back.iter_mut().zip(&tape.pre) {
                *b *= pre.cos();
            }
        }
        delta = back;
    }
    for (e, de) in delta.iter().enumerate() {
        grad[l.b1.start + e] += de;
        let row = &mut grad[l.w1.start + e * INPUT_DIM..l.w1.start + (e + 1) * INPUT_DIM];
        for (g, x) in row.iter_mut().zip(&tape.x) {
            *g += 2.0 * PI * de * x;
        }
    }
    Ok(())
}

/// Gradient of `Re Σ_k conj(u_k) NF(z)_k` with respect to every parameter.
pub fn nf_backward(p: &NfParams, z: &NormCoord, upstream: &[Complex64]) -> Result<Vec<f64>> {
    let (_, tape) = nf_forward_tape(p, z);
    let mut g = vec![0.0; p.len()];
    nf_backward_tape(p, &tape, upstream, &mut g)?;
    Ok(g)
}

/// Linear warm-up followed by exponential decay with a floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub lr_start: f64,
    pub lr_base: f64,
    pub warmup_steps: u64,
    pub decay_rate: f64,
    pub decay_every: f64,
    pub lr_floor: f64,
}

impl LrSchedule {
    pub fn new(lr_start: f64, lr_base: f64, warmup_steps: u64, lr_floor: f64) -> Self {
        Self { lr_start, lr_base, warmup_steps, decay_rate: 0.9, decay_every: 1000.0, lr_floor }
    }

    pub fn at(&self, step: u64) -> f64 {
        if step < self.warmup_steps {
            let t = step as f64 / self.warmup_steps as f64;
            return self.lr_start + t * (self.lr_base - self.lr_start);
        }
        let k = (step - self.warmup_steps) as f64 / self.decay_every;
        (self.lr_base * self.decay_rate.powf(k)).max(self.lr_floor)
    }
}

/// Adam without weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "optimizer holds {} moments, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let mh = self.m[k] / bc1;
            let vh = self.v[k] / bc2;
            params[k] -= lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Scales `grads` in place so the global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_gradients(grads: &mut [f64], max_norm: f64) -> f64 {
    let n = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if n > max_norm && max_norm > 0.0 {
        let s = max_norm / n;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    n
}
