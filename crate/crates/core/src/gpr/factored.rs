//! Exact GP for kernels of the form `k(z,z') = k^ω(ω,ω') φ(z) conj(φ(z'))`.
//!
//! With points grouped by frequency, `K = B K^ω B^H` where column `f` of `B`
//! holds the `φ` values of group `f`. Writing `A = diag(‖B_f‖)` and
//! `Q = B A^{-1}` (orthonormal columns),
//!
//! ```text
//! K + σ²I = Q (σ²I + A K^ω A) Q^H + σ²(I − QQ^H)
//! ```
//!
//! so likelihood, posterior and gradients only need the `F×F` matrix
//! `M = σ²I + A K^ω A`. Groups whose `φ` vanish are pure noise.

use core::f64::consts::PI;

use crate::kernels::spectral_kernel;
use crate::linalg::{Cholesky, Matrix};
use crate::prelude::*;

use super::dense::ESCALATION;

/// Factorized GP state for one set of (ω, φ, y).
#[derive(Debug, Clone)]
pub struct FactoredGp {
    alpha: f64,
    ell: f64,
    noise_var: f64,
    /// Distinct frequencies, increasing.
    omegas: Vec<f64>,
    group: Vec<usize>,
    phi: Vec<Complex64>,
    /// `A_f = ‖B_f‖`.
    amp: Vec<f64>,
    /// Groups with `A_f > 0`, in increasing order; `M` is indexed by position here.
    active: Vec<usize>,
    slot: Vec<Option<usize>>,
    chol: Cholesky<f64>,
    /// `M^{-1} b`.
    minv_b: Vec<Complex64>,
    /// `y − Q b`.
    resid: Vec<Complex64>,
    b: Vec<Complex64>,
}

/// Gradients of the NLL. Cotangents follow `∂L/∂Re φ + j ∂L/∂Im φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredGrad {
    pub phi: Vec<Complex64>,
    pub ln_alpha: f64,
    pub ell: f64,
    pub noise_var: f64,
}

/// Groups points by exact frequency value.
pub fn group_by_frequency(omegas: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut uniq = omegas.to_vec();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let group = omegas.iter().map(|w| uniq.binary_search_by(|u| u.total_cmp(w)).expect("present by construction")).collect();
    (uniq, group)
}

impl FactoredGp {
    pub fn new(omegas: &[f64], phi: Vec<Complex64>, y: &[Complex64], alpha: f64, ell: f64, noise_var: f64) -> Result<Self> {
        let n = phi.len();
        if n == 0 || omegas.len() != n || y.len() != n {
            return Err(Error::invalid(format!(
                "need matching non-empty inputs, got {} frequencies, {} features, {} targets",
                omegas.len(),
                n,
                y.len()
            )));
        }
        if !(alpha > 0.0) || !(ell > 0.0) || !(noise_var >= 0.0) || !alpha.is_finite() || !ell.is_finite() || !noise_var.is_finite() {
            return Err(Error::invalid(format!("bad hyperparameters α = {alpha}, ℓ = {ell}, σ² = {noise_var}")));
        }
        if phi.iter().chain(y).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numeric("non-finite feature or target value"));
        }
        let (uniq, group) = group_by_frequency(omegas);
        let nf = uniq.len();
        let mut s = vec![0.0; nf];
        for (g, p) in group.iter().zip(&phi) {
            s[*g] += p.norm_sqr();
        }
        let amp: Vec<f64> = s.iter().map(|v| v.sqrt()).collect();
        let active: Vec<usize> = (0..nf).filter(|&f| amp[f] > 0.0).collect();
        let mut slot = vec![None; nf];
        for (k, &f) in active.iter().enumerate() {
            slot[f] = Some(k);
        }
        let fa = active.len();
        if noise_var == 0.0 && n > fa {
            return Err(Error::numeric(format!("zero noise with {n} points but only {fa} independent directions: covariance is singular")));
        }
        let mut m = Matrix::<f64>::from_fn(fa, fa, |a, b| {
            amp[active[a]] * amp[active[b]] * spectral_kernel(uniq[active[a]], uniq[active[b]], alpha, ell)
        });
        m.add_diagonal(noise_var);
        // b = Q^H y
        let mut b = vec![Complex64::new(0.0, 0.0); fa];
        for ((g, p), v) in group.iter().zip(&phi).zip(y) {
            if let Some(k) = slot[*g] {
                b[k] += p.conj() * v / amp[*g];
            }
        }
        let resid: Vec<Complex64> = group
            .iter()
            .zip(&phi)
            .zip(y)
            .map(|((g, p), v)| match slot[*g] {
                Some(k) => v - p * b[k] / amp[*g],
                None => *v,
            })
            .collect();
        let (chol, minv_b) = if fa == 0 {
            (Cholesky::new(&Matrix::zeros(0, 0))?, Vec::new())
        } else {
            let scale = m.trace() / fa as f64;
            let (chol, _) = Cholesky::with_escalation(&m, ESCALATION * scale)?;
            let minv_b = chol.solve_complex(&b);
            (chol, minv_b)
        };
        Ok(Self { alpha, ell, noise_var, omegas: uniq, group, phi, amp, active, slot, chol, minv_b, resid, b })
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// `N ln π + (N−F) ln σ² + ln det M + ‖r‖²/σ² + b^H M^{-1} b`.
    pub fn nll(&self) -> f64 {
        let n = self.len() as f64;
        let fa = self.active.len() as f64;
        let mut v = n * PI.ln() + self.chol.log_det();
        if n > fa {
            let rr: f64 = self.resid.iter().map(|r| r.norm_sqr()).sum();
            v += (n - fa) * self.noise_var.ln() + rr / self.noise_var;
        }
        v + self.b.iter().zip(&self.minv_b).map(|(x, y)| (x.conj() * y).re).sum::<f64>()
    }

    fn kappa_scaled(&self, omega: f64) -> Vec<f64> {
        self.active.iter().map(|&f| spectral_kernel(omega, self.omegas[f], self.alpha, self.ell) * self.amp[f]).collect()
    }

    /// Posterior mean and variance at a point with frequency `omega` and feature `phi`.
    pub fn predict(&self, omega: f64, phi: Complex64) -> (Complex64, f64) {
        let prior = spectral_kernel(omega, omega, self.alpha, self.ell) * phi.norm_sqr();
        if self.active.is_empty() {
            return (Complex64::new(0.0, 0.0), prior);
        }
        let ka = self.kappa_scaled(omega);
        let mean: Complex64 = ka.iter().zip(&self.minv_b).map(|(k, w)| w * *k).sum::<Complex64>() * phi;
        let v = self.chol.solve_lower(&ka);
        let reduced = spectral_kernel(omega, omega, self.alpha, self.ell) - v.iter().map(|x| x * x).sum::<f64>();
        (mean, (reduced * phi.norm_sqr()).max(0.0))
    }

    /// Posterior covariance between queries `(ω_a, φ_a)`.
    pub fn covariance(&self, omegas: &[f64], phi: &[Complex64]) -> Matrix<Complex64> {
        let v: Vec<Vec<f64>> = omegas
            .iter()
            .map(|w| if self.active.is_empty() { Vec::new() } else { self.chol.solve_lower(&self.kappa_scaled(*w)) })
            .collect();
        Matrix::from_fn(omegas.len(), omegas.len(), |a, b| {
            let red = spectral_kernel(omegas[a], omegas[b], self.alpha, self.ell) - v[a].iter().zip(&v[b]).map(|(x, y)| x * y).sum::<f64>();
            phi[a] * phi[b].conj() * red
        })
    }

    /// `a = K_y^{-1} y`.
    pub fn weights(&self) -> Vec<Complex64> {
        self.group
            .iter()
            .zip(&self.phi)
            .zip(&self.resid)
            .map(|((g, p), r)| {
                let mut a = if self.noise_var > 0.0 { r / self.noise_var } else { Complex64::new(0.0, 0.0) };
                if let Some(k) = self.slot[*g] {
                    a += p * self.minv_b[k] / self.amp[*g];
                }
                a
            })
            .collect()
    }

    /// Gradients with respect to every `φ_n`, `ln α`, `ℓ` and `σ²`.
    pub fn gradients(&self) -> FactoredGrad {
        let nf = self.omegas.len();
        let fa = self.active.len();
        let a = self.weights();
        // v_g = Σ_{m∈g} conj(φ_m) a_m
        let mut v = vec![Complex64::new(0.0, 0.0); nf];
        for ((g, p), am) in self.group.iter().zip(&self.phi).zip(&a) {
            v[*g] += p.conj() * am;
        }
        let minv = if fa > 0 { self.chol.inverse() } else { Matrix::zeros(0, 0) };
        let kw = |f: usize, g: usize| spectral_kernel(self.omegas[f], self.omegas[g], self.alpha, self.ell);
        let dkw = |f: usize, g: usize| {
            let d = self.omegas[f] - self.omegas[g];
            let q = self.ell * self.ell + d * d;
            -2.0 * self.ell * self.alpha / (q * q)
        };
        let directional = |w: &dyn Fn(usize, usize) -> f64| -> Vec<Complex64> {
            // c_f = conj((W v)_f),  d_f = Σ_g W_fg A_g (M^{-1})_gf
            let c: Vec<Complex64> = (0..nf).map(|f| (0..nf).map(|g| v[g] * w(f, g)).sum::<Complex64>().conj()).collect();
            let mut d = vec![0.0; nf];
            for (ka, &f) in self.active.iter().enumerate() {
                d[f] = self.active.iter().enumerate().map(|(kb, &g)| w(f, g) * self.amp[g] * minv[(kb, ka)]).sum();
            }
            self.group
                .iter()
                .zip(&self.phi)
                .zip(&a)
                .map(|((g, p), an)| {
                    let first = if self.amp[*g] > 0.0 { p * (d[*g] / self.amp[*g]) } else { Complex64::new(0.0, 0.0) };
                    first - an * c[*g]
                })
                .collect()
        };
        let u = directional(&kw);
        let ud = directional(&dkw);
        let ln_alpha = self.phi.iter().zip(&u).map(|(p, x)| (p * x.conj()).re).sum();
        let ell = self.phi.iter().zip(&ud).map(|(p, x)| (p * x.conj()).re).sum();
        let n = self.len() as f64;
        let mut noise_var = -a.iter().map(|x| x.norm_sqr()).sum::<f64>() + (0..fa).map(|k| minv[(k, k)]).sum::<f64>();
        if n > fa as f64 {
            noise_var += (n - fa as f64) / self.noise_var;
        }
        FactoredGrad { phi: u.into_iter().map(|x| x * 2.0).collect(), ln_alpha, ell, noise_var }
    }

    /// Sum of per-point Gaussian predictive NLLs of held-out observations.
    pub fn predictive_nll(&self, omegas: &[f64], phi: &[Complex64], y: &[Complex64]) -> f64 {
        omegas
            .iter()
            .zip(phi)
            .zip(y)
            .map(|((w, p), v)| {
                let (mu, var) = self.predict(*w, *p);
                let s = var + self.noise_var;
                PI.ln() + s.ln() + (v - mu).norm_sqr() / s
            })
            .sum()
    }
}
