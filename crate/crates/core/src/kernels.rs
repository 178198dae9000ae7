//! Covariance functions and Gram assembly.
//!
//! Kernels expose a per-point feature so Gram assembly evaluates expensive
//! parts (free field, network, SH basis) once per point instead of per pair.

use crate::geom::{chordal_distance, sub, CollocationPoint, Direction};
use crate::linalg::{Matrix, Scalar};
use crate::nfield::{nf_forward, Coordinate, NfParams, Normalizer, RawCoord};
use crate::physics::{free_field, Medium};
use crate::prelude::*;
use crate::sphharm::{sh_basis, sh_len, ShCoefficients};

/// A covariance function evaluated through per-point features.
pub trait Kernel {
    type Value: Scalar;
    type Feature;

    fn feature(&self, z: &CollocationPoint) -> Result<Self::Feature>;

    fn eval_features(&self, a: &Self::Feature, b: &Self::Feature) -> Self::Value;

    fn eval(&self, a: &CollocationPoint, b: &CollocationPoint) -> Result<Self::Value> {
        Ok(self.eval_features(&self.feature(a)?, &self.feature(b)?))
    }
}

/// `α / (ℓ² + (ω−ω')²)`.
#[inline]
pub fn spectral_kernel(omega: f64, omega2: f64, alpha: f64, ell: f64) -> f64 {
    let d = omega - omega2;
    alpha / (ell * ell + d * d)
}

/// `h^d(z) conj(h^d(z'))`.
pub fn directional_kernel(a: &CollocationPoint, b: &CollocationPoint, medium: Medium) -> Result<Complex64> {
    Ok(free_field(a.omega, a.mic, a.src, medium)? * free_field(b.omega, b.mic, b.src, medium)?.conj())
}

/// `(1 + √3 C/ℓ_d) e^{−√3 C/ℓ_d}` with `C` the chordal distance.
pub fn chordal_matern_kernel(a: Direction, b: Direction, ell_d: f64) -> f64 {
    matern32(chordal_distance(a, b), ell_d)
}

#[inline]
fn matern32(c: f64, ell_d: f64) -> f64 {
    let s = 3f64.sqrt() * c / ell_d;
    (1.0 + s) * (-s).exp()
}

/// Direction of `src` seen from the reference centre.
pub fn source_direction(src: Vec3, centre: Vec3) -> Result<Direction> {
    Direction::from_vector(sub(src, centre))
}

/// Low-order SH coefficients tabulated per (frequency knot, microphone),
/// linearly interpolated over ω between knots.
#[derive(Debug, Clone, PartialEq)]
pub struct ShTables {
    pub order: usize,
    /// Angular-frequency knots, strictly increasing.
    pub knots: Vec<f64>,
    pub mics: Vec<Vec3>,
    /// `coeffs[f * mics.len() + i]`.
    pub coeffs: Vec<ShCoefficients>,
}

impl ShTables {
    pub fn new(order: usize, knots: Vec<f64>, mics: Vec<Vec3>, coeffs: Vec<ShCoefficients>) -> Result<Self> {
        if knots.is_empty() || mics.is_empty() || coeffs.len() != knots.len() * mics.len() {
            return Err(Error::invalid(format!("table needs {}×{} coefficient sets, got {}", knots.len(), mics.len(), coeffs.len())));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("table frequency knots must be strictly increasing"));
        }
        if coeffs.iter().any(|c| c.order() != order) {
            return Err(Error::invalid("table entries disagree on SH order"));
        }
        Ok(Self { order, knots, mics, coeffs })
    }

    pub fn mic_index(&self, mic: Vec3) -> Result<usize> {
        self.mics
            .iter()
            .position(|m| *m == mic)
            .ok_or_else(|| Error::invalid(format!("microphone {mic:?} is not in the coefficient table")))
    }

    /// Interpolated coefficient values at `(omega, mic)`, `(order+1)²` long.
    pub fn lookup(&self, omega: f64, mic: Vec3) -> Result<Vec<Complex64>> {
        let i = self.mic_index(mic)?;
        let n_mic = self.mics.len();
        let (lo, hi) = (self.knots[0], self.knots[self.knots.len() - 1]);
        // knots are stored in f64; allow the last-ulp slack that unit conversions introduce
        let tol = 1e-9 * hi.abs().max(1.0);
        if !(omega >= lo - tol && omega <= hi + tol) {
            return Err(Error::Extrapolation { query: omega, min: lo, max: hi });
        }
        if self.knots.len() == 1 {
            return Ok(self.coeffs[i].values().to_vec());
        }
        let k = self.knots.partition_point(|&x| x <= omega).clamp(1, self.knots.len() - 1);
        let (w0, w1) = (self.knots[k - 1], self.knots[k]);
        let t = ((omega - w0) / (w1 - w0)).clamp(0.0, 1.0);
        let a = self.coeffs[(k - 1) * n_mic + i].values();
        let b = self.coeffs[k * n_mic + i].values();
        Ok(a.iter().zip(b).map(|(x, y)| x * (1.0 - t) + y * t).collect())
    }
}

/// Source of the scattering coefficients `c_lm(z)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientModel {
    /// Network output plus interpolated low-order tables.
    Neural { nf: NfParams, normalizer: Normalizer, tables: ShTables },
    /// Fixed tabulated coefficients (planted ground truth).
    Table(ShTables),
}

/// All quantities of the composite kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeKernelParams {
    pub alpha: f64,
    pub ell: f64,
    pub noise_var: f64,
    pub head_center: Vec3,
    pub medium: Medium,
    pub coefficients: CoefficientModel,
}

impl CompositeKernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.ell > 0.0) || !(self.noise_var >= 0.0) {
            return Err(Error::invalid(format!(
                "need α > 0, ℓ > 0, σ² ≥ 0; got α = {}, ℓ = {}, σ² = {}",
                self.alpha, self.ell, self.noise_var
            )));
        }
        if !self.alpha.is_finite() || !self.ell.is_finite() || !self.noise_var.is_finite() {
            return Err(Error::invalid("non-finite kernel parameter"));
        }
        if let CoefficientModel::Neural { nf, tables, .. } = &self.coefficients {
            if tables.order > nf.arch.order {
                return Err(Error::invalid(format!("table order {} exceeds network order {}", tables.order, nf.arch.order)));
            }
        }
        Ok(())
    }

    /// SH order of the expansion.
    pub fn sh_order(&self) -> usize {
        match &self.coefficients {
            CoefficientModel::Neural { nf, .. } => nf.arch.order,
            CoefficientModel::Table(t) => t.order,
        }
    }

    pub fn spectral(&self, omega: f64, omega2: f64) -> f64 {
        spectral_kernel(omega, omega2, self.alpha, self.ell)
    }

    /// Hybrid coefficients: network output plus tables on the low degrees.
    pub fn coefficients_at(&self, z: &CollocationPoint) -> Result<ShCoefficients> {
        match &self.coefficients {
            CoefficientModel::Neural { nf, normalizer, tables } => {
                let x = RawCoord::new(z.omega, z.src, z.mic).normalized(normalizer);
                let mut c = nf_forward(nf, &x);
                let low = tables.lookup(z.omega, z.mic)?;
                for (v, t) in c.values_mut().iter_mut().zip(&low) {
                    *v += t;
                }
                Ok(c)
            }
            CoefficientModel::Table(t) => ShCoefficients::new(t.order, t.lookup(z.omega, z.mic)?),
        }
    }

    /// `Ψ(z) = Σ c_lm(z) Y_l^m(dir(src − q0))`.
    pub fn psi(&self, z: &CollocationPoint) -> Result<Complex64> {
        let c = self.coefficients_at(z)?;
        let d = source_direction(z.src, self.head_center)?;
        let y = sh_basis(c.order(), d);
        Ok(c.values().iter().zip(&y).map(|(a, b)| a * b).sum())
    }

    /// Rank-1 factor `φ(z) = h^d(z) Ψ(z)`, so `k(z,z') = k^ω φ(z) conj(φ(z'))`.
    pub fn phi(&self, z: &CollocationPoint) -> Result<Complex64> {
        Ok(free_field(z.omega, z.mic, z.src, self.medium)? * self.psi(z)?)
    }
}

/// `Ψ(z)` for the given parameters.
pub fn scattering_field_psi(z: &CollocationPoint, params: &CompositeKernelParams) -> Result<Complex64> {
    params.psi(z)
}

/// `Ψ(z) conj(Ψ(z'))`.
pub fn scattering_kernel(a: &CollocationPoint, b: &CollocationPoint, params: &CompositeKernelParams) -> Result<Complex64> {
    Ok(params.psi(a)? * params.psi(b)?.conj())
}

/// `k^ω · k^d · k^s`.
pub fn composite_kernel(a: &CollocationPoint, b: &CollocationPoint, params: &CompositeKernelParams) -> Result<Complex64> {
    CompositeKernel(params).eval(a, b)
}

/// `k^ω(ω, ω') k^s(Ω, Ω')` on source directions about `centre`.
pub fn chmat_kernel(a: &CollocationPoint, b: &CollocationPoint, p: &ChmatParams) -> Result<f64> {
    ChmatKernel(*p).eval(a, b)
}

/// Inverse-quadratic kernel on frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralKernel {
    pub alpha: f64,
    pub ell: f64,
}

impl Kernel for SpectralKernel {
    type Value = f64;
    type Feature = f64;

    fn feature(&self, z: &CollocationPoint) -> Result<f64> {
        Ok(z.omega)
    }

    fn eval_features(&self, a: &f64, b: &f64) -> f64 {
        spectral_kernel(*a, *b, self.alpha, self.ell)
    }
}

/// Rank-1 free-field kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalKernel(pub Medium);

impl Kernel for DirectionalKernel {
    type Value = Complex64;
    type Feature = Complex64;

    fn feature(&self, z: &CollocationPoint) -> Result<Complex64> {
        free_field(z.omega, z.mic, z.src, self.0)
    }

    fn eval_features(&self, a: &Complex64, b: &Complex64) -> Complex64 {
        a * b.conj()
    }
}

/// Rank-1 scattering kernel `Ψ(z) conj(Ψ(z'))`.
#[derive(Debug, Clone, Copy)]
pub struct ScatteringKernel<'a>(pub &'a CompositeKernelParams);

impl Kernel for ScatteringKernel<'_> {
    type Value = Complex64;
    type Feature = Complex64;

    fn feature(&self, z: &CollocationPoint) -> Result<Complex64> {
        self.0.psi(z)
    }

    fn eval_features(&self, a: &Complex64, b: &Complex64) -> Complex64 {
        a * b.conj()
    }
}

/// Matérn-3/2 kernel of the chordal distance between source directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordalMaternKernel {
    pub ell_d: f64,
    pub centre: Vec3,
}

impl Kernel for ChordalMaternKernel {
    type Value = f64;
    type Feature = Vec3;

    fn feature(&self, z: &CollocationPoint) -> Result<Vec3> {
        Ok(source_direction(z.src, self.centre)?.unit_vector())
    }

    fn eval_features(&self, a: &Vec3, b: &Vec3) -> f64 {
        matern32(chord(a, b), self.ell_d)
    }
}

fn chord(a: &Vec3, b: &Vec3) -> f64 {
    let d = sub(*a, *b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// The composite kernel of the proposed model.
#[derive(Debug, Clone, Copy)]
pub struct CompositeKernel<'a>(pub &'a CompositeKernelParams);

impl Kernel for CompositeKernel<'_> {
    type Value = Complex64;
    type Feature = (f64, Complex64);

    fn feature(&self, z: &CollocationPoint) -> Result<(f64, Complex64)> {
        Ok((z.omega, self.0.phi(z)?))
    }

    fn eval_features(&self, a: &(f64, Complex64), b: &(f64, Complex64)) -> Complex64 {
        a.1 * b.1.conj() * self.0.spectral(a.0, b.0)
    }
}

/// Hyperparameters of the spectral × chordal-Matérn baseline kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChmatParams {
    pub alpha: f64,
    pub ell: f64,
    pub ell_d: f64,
    pub centre: Vec3,
}

/// Spectral × chordal-Matérn kernel; carries no microphone dependence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChmatKernel(pub ChmatParams);

impl Kernel for ChmatKernel {
    type Value = f64;
    type Feature = (f64, Vec3);

    fn feature(&self, z: &CollocationPoint) -> Result<(f64, Vec3)> {
        Ok((z.omega, source_direction(z.src, self.0.centre)?.unit_vector()))
    }

    fn eval_features(&self, a: &(f64, Vec3), b: &(f64, Vec3)) -> f64 {
        spectral_kernel(a.0, b.0, self.0.alpha, self.0.ell) * matern32(chord(&a.1, &b.1), self.0.ell_d)
    }
}

/// Diagonal jitter added by [`gram`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Jitter {
    Off,
    /// `factor · tr(K) / N`.
    Relative(f64),
    Absolute(f64),
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter::Relative(1e-10)
    }
}

/// Hermitian Gram matrix `K[n,n'] = k(z_n, z_n')` plus jitter.
pub fn gram<K: Kernel>(points: &[CollocationPoint], kernel: &K, jitter: Jitter) -> Result<Matrix<K::Value>> {
    if points.is_empty() {
        return Err(Error::invalid("Gram matrix needs at least one point"));
    }
    let feats = points.iter().map(|z| kernel.feature(z)).collect::<Result<Vec<_>>>()?;
    gram_from_features(kernel, &feats, jitter)
}

/// Gram assembly from precomputed features.
pub fn gram_from_features<K: Kernel>(kernel: &K, feats: &[K::Feature], jitter: Jitter) -> Result<Matrix<K::Value>> {
    let n = feats.len();
    let mut k = Matrix::<K::Value>::zeros(n, n);
    for a in 0..n {
        for b in 0..=a {
            let v = kernel.eval_features(&feats[a], &feats[b]);
            if !v.is_finite() {
                return Err(Error::numeric(format!("non-finite kernel value at pair ({a}, {b})")));
            }
            k[(a, b)] = v;
        }
    }
    for a in 0..n {
        for b in 0..a {
            k[(b, a)] = k[(a, b)].conj();
        }
        // diagonal of a Hermitian matrix is real
        k[(a, a)] = K::Value::from_real(k[(a, a)].re());
    }
    let j = match jitter {
        Jitter::Off => 0.0,
        Jitter::Relative(f) => f * k.trace().re() / n as f64,
        Jitter::Absolute(v) => v,
    };
    if j != 0.0 {
        k.add_diagonal(j);
    }
    Ok(k)
}

/// Zero-valued table with the given shape; handy for pure-network models.
pub fn zero_tables(order: usize, knots: Vec<f64>, mics: Vec<Vec3>) -> Result<ShTables> {
    let coeffs = vec![ShCoefficients::zeros(order); knots.len() * mics.len()];
    debug_assert!(coeffs.iter().all(|c| c.values().len() == sh_len(order)));
    ShTables::new(order, knots, mics, coeffs)
}
