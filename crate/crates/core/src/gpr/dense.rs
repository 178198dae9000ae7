//! Exact GP on an explicit Gram matrix.

use crate::linalg::{Cholesky, Matrix, Scalar};
use crate::prelude::*;

/// Relative jitter tried once when `K + σ²I` is not numerically positive definite.
pub const ESCALATION: f64 = 1e-8;

/// Cached factorization of `K_y = K + σ²I` with `K_y^{-1} y`.
#[derive(Debug, Clone)]
pub struct DenseGp<T> {
    chol: Cholesky<T>,
    weights: Vec<Complex64>,
    y: Vec<Complex64>,
    jitter: f64,
}

impl<T: Scalar> DenseGp<T> {
    /// Factorizes `k + noise_var·I`; `k` must be Hermitian.
    pub fn new(k: &Matrix<T>, noise_var: f64, y: Vec<Complex64>) -> Result<Self> {
        let n = k.rows();
        if n == 0 || k.cols() != n || y.len() != n {
            return Err(Error::invalid(format!("Gram is {}×{} but {} targets were given", k.rows(), k.cols(), y.len())));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::invalid(format!("noise variance {noise_var} must be non-negative")));
        }
        if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("non-finite training value"));
        }
        let mut ky = k.clone();
        ky.add_diagonal(noise_var);
        let scale = (ky.trace().re() / n as f64).abs().max(f64::MIN_POSITIVE);
        let (chol, jitter) = Cholesky::with_escalation(&ky, ESCALATION * scale)?;
        let weights = chol.solve_complex(&y);
        Ok(Self { chol, weights, y, jitter })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Jitter added by the escalation retry (0 when the first attempt succeeded).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `K_y^{-1} y`.
    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn cholesky(&self) -> &Cholesky<T> {
        &self.chol
    }

    /// `N ln π + ln det K_y + y^H K_y^{-1} y`.
    pub fn nll(&self) -> f64 {
        let quad: f64 = self.y.iter().zip(&self.weights).map(|(a, b)| (a.conj() * b).re).sum();
        self.len() as f64 * core::f64::consts::PI.ln() + self.chol.log_det() + quad
    }

    /// Posterior mean from the row `k(z*, z_n)`.
    pub fn mean(&self, k_row: &[T]) -> Complex64 {
        k_row.iter().zip(&self.weights).map(|(k, w)| k.to_complex() * w).sum()
    }

    /// Posterior variance `k(z*,z*) − k*^H K_y^{-1} k*`, clamped at 0.
    pub fn variance(&self, k_row: &[T], prior: f64) -> f64 {
        let col: Vec<Complex64> = k_row.iter().map(|k| k.conj().to_complex()).collect();
        let v = self.chol.solve_lower_complex(&col);
        (prior - v.iter().map(|x| x.norm_sqr()).sum::<f64>()).max(0.0)
    }

    /// Posterior covariance `k(a,b) − k_a^H K_y^{-1} k_b` between queries, given
    /// their rows against the training set and their prior covariance.
    pub fn covariance(&self, rows: &[Vec<T>], prior: &Matrix<Complex64>) -> Matrix<Complex64> {
        let v: Vec<Vec<Complex64>> =
            rows.iter().map(|r| self.chol.solve_lower_complex(&r.iter().map(|k| k.conj().to_complex()).collect::<Vec<_>>())).collect();
        Matrix::from_fn(rows.len(), rows.len(), |a, b| prior[(a, b)] - v[a].iter().zip(&v[b]).map(|(x, y)| x.conj() * y).sum::<Complex64>())
    }

    /// `∂NLL/∂θ = tr(K_y^{-1} ∂K) − a^H ∂K a` for each supplied `∂K/∂θ`.
    pub fn nll_gradient(&self, dks: &[Matrix<T>]) -> Vec<f64> {
        let inv = self.chol.inverse();
        let n = self.len();
        dks.iter()
            .map(|dk| {
                let mut tr = 0.0;
                let mut quad = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        let d = dk[(a, b)].to_complex();
                        tr += (inv[(b, a)].to_complex() * d).re;
                        quad += self.weights[a].conj() * d * self.weights[b];
                    }
                }
                tr - quad.re
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn scalar_closed_forms() {
        let gp = DenseGp::new(&Matrix::from_vec(1, 1, vec![2.0]).unwrap(), 0.0, vec![Complex64::new(0.0, 0.0)]).unwrap();
        assert!((gp.nll() - (PI.ln() + 2f64.ln())).abs() < 1e-12);
        let gp = DenseGp::new(&Matrix::from_vec(1, 1, vec![1.0]).unwrap(), 0.0, vec![Complex64::new(1.0, 0.0)]).unwrap();
        assert!((gp.nll() - (PI.ln() + 1.0)).abs() < 1e-12);
        // k ≡ 1, σ² = 0: μ* = y₁, Σ* = 0
        let y = Complex64::new(0.3, -0.7);
        let gp = DenseGp::new(&Matrix::from_vec(1, 1, vec![1.0]).unwrap(), 0.0, vec![y]).unwrap();
        assert!((gp.mean(&[1.0]) - y).norm() < 1e-15);
        assert_eq!(gp.variance(&[1.0], 1.0), 0.0);
    }

    #[test]
    fn gradient_against_finite_differences() {
        let pts = [0.0, 0.4, 1.1, 1.5, 2.7];
        let y: Vec<Complex64> = (0..5).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.7).cos())).collect();
        let kern = |l: f64| Matrix::from_fn(5, 5, |a, b| (-(pts[a] - pts[b]) * (pts[a] - pts[b]) / (2.0 * l * l)).exp());
        let dkern = |l: f64| {
            Matrix::from_fn(5, 5, |a, b| {
                let d2 = (pts[a] - pts[b]) * (pts[a] - pts[b]);
                (-d2 / (2.0 * l * l)).exp() * d2 / (l * l * l)
            })
        };
        let (l, s2, h) = (0.8, 0.1, 1e-6);
        let g = DenseGp::new(&kern(l), s2, y.clone()).unwrap().nll_gradient(&[dkern(l), Matrix::identity(5)]);
        let nll = |l: f64, s2: f64| DenseGp::new(&kern(l), s2, y.clone()).unwrap().nll();
        let fd_l = (nll(l + h, s2) - nll(l - h, s2)) / (2.0 * h);
        let fd_s = (nll(l, s2 + h) - nll(l, s2 - h)) / (2.0 * h);
        assert!((g[0] - fd_l).abs() < 1e-6 * fd_l.abs().max(1.0));
        assert!((g[1] - fd_s).abs() < 1e-6 * fd_s.abs().max(1.0));
    }
}
