//! MVDR beamforming against an isotropic-noise covariance built from steering
//! vectors, beampatterns and white-noise gain.

use core::f64::consts::{PI, TAU};

use crate::geom::Direction;
use crate::linalg::{Cholesky, Matrix};
use crate::prelude::*;

/// Relative diagonal loading of the isotropic covariance.
pub const LOADING: f64 = 1e-6;

/// Default equiangular grid size (azimuths × colatitudes).
pub const GRID_AZIMUTHS: usize = 36;
pub const GRID_COLATITUDES: usize = 18;

/// Quadrature weight of colatitude `theta` on an `n_phi × n_theta` equiangular grid.
pub fn quadrature_weight(theta: f64, n_phi: usize, n_theta: usize) -> Result<f64> {
    if n_theta == 0 || !n_theta.is_multiple_of(2) || n_phi == 0 {
        return Err(Error::invalid(format!(
            "equiangular grid needs an even, positive colatitude count and at least one azimuth (got {n_phi} × {n_theta})"
        )));
    }
    let s: f64 = (0..n_theta / 2)
        .map(|m| {
            let k = (2 * m + 1) as f64;
            (k * theta).sin() / k
        })
        .sum();
    Ok(2.0 * theta.sin() / (n_phi * n_theta) as f64 * s)
}

/// A direction with its quadrature weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub direction: Direction,
    pub weight: f64,
}

/// Azimuths `2πk/N_φ` × colatitudes `πj/N_ϑ` (the north pole is included with zero weight).
pub fn equiangular_grid(n_phi: usize, n_theta: usize) -> Result<Vec<GridPoint>> {
    let mut out = Vec::with_capacity(n_phi * n_theta);
    for j in 0..n_theta {
        let theta = PI * j as f64 / n_theta as f64;
        let weight = quadrature_weight(theta, n_phi, n_theta)?;
        for k in 0..n_phi {
            out.push(GridPoint { direction: Direction::new(TAU * k as f64 / n_phi as f64, theta)?, weight });
        }
    }
    Ok(out)
}

/// `R = Σ_j w_j a_j a_j^H` made Hermitian, plus `δ·tr(R)/I` on the diagonal.
pub fn iso_scm(svecs: &[Vec<Complex64>], weights: &[f64], loading: f64) -> Result<Matrix<Complex64>> {
    let Some(first) = svecs.first() else {
        return Err(Error::invalid("isotropic covariance needs at least one direction"));
    };
    let n = first.len();
    if n == 0 || svecs.iter().any(|a| a.len() != n) || weights.len() != svecs.len() {
        return Err(Error::invalid("steering vectors must share a non-zero length and come with one weight each"));
    }
    let mut r = Matrix::<Complex64>::zeros(n, n);
    for (a, w) in svecs.iter().zip(weights) {
        for p in 0..n {
            for q in 0..n {
                r[(p, q)] += a[p] * a[q].conj() * *w;
            }
        }
    }
    r.make_hermitian();
    let tr = r.trace().re;
    if loading > 0.0 {
        r.add_diagonal(loading * tr / n as f64);
    }
    if !r.as_slice().iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::numeric("non-finite covariance entry"));
    }
    Ok(r)
}

/// `w = R^{-1} d / (d^H R^{-1} d)`.
pub fn mvdr_weights(d: &[Complex64], r: &Matrix<Complex64>) -> Result<Vec<Complex64>> {
    if d.len() != r.rows() || d.is_empty() {
        return Err(Error::invalid(format!("steering vector of length {} for a {}×{} covariance", d.len(), r.rows(), r.cols())));
    }
    if d.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(Error::invalid("zero steering vector"));
    }
    let chol = Cholesky::new(r).map_err(|e| Error::numeric(format!("covariance is not positive definite: {e}")))?;
    let x = chol.solve(d);
    let denom: Complex64 = d.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
    if !(denom.norm() > 0.0) || !denom.re.is_finite() {
        return Err(Error::numeric("d^H R^{-1} d vanished"));
    }
    // d^H R^{-1} d is real for Hermitian R
    let s = 1.0 / denom.re;
    Ok(x.into_iter().map(|v| v * s).collect())
}

/// `w^H h`.
pub fn response(w: &[Complex64], h: &[Complex64]) -> Complex64 {
    w.iter().zip(h).map(|(a, b)| a.conj() * b).sum()
}

/// Per-frequency beamformer weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerWeights {
    pub frequencies_hz: Vec<f64>,
    pub weights: Vec<Vec<Complex64>>,
}

impl BeamformerWeights {
    /// Largest `|w^H d − 1|` over frequencies for the design steering vectors.
    pub fn distortionless_error(&self, design: &[Vec<Complex64>]) -> f64 {
        self.weights.iter().zip(design).map(|(w, d)| (response(w, d) - 1.0).norm()).fold(0.0, f64::max)
    }
}

/// MVDR weights for every frequency: `steering(f, Ω)` supplies the vectors,
/// the noise covariance comes from the grid.
pub fn design_mvdr<S>(frequencies_hz: &[f64], grid: &[GridPoint], look: Direction, mut steering: S) -> Result<BeamformerWeights>
where
    S: FnMut(usize, Direction) -> Result<Vec<Complex64>>,
{
    let weights_q: Vec<f64> = grid.iter().map(|g| g.weight).collect();
    let mut weights = Vec::with_capacity(frequencies_hz.len());
    for f in 0..frequencies_hz.len() {
        let svecs = grid.iter().map(|g| steering(f, g.direction)).collect::<Result<Vec<_>>>()?;
        let r = iso_scm(&svecs, &weights_q, LOADING)?;
        weights.push(mvdr_weights(&steering(f, look)?, &r)?);
    }
    Ok(BeamformerWeights { frequencies_hz: frequencies_hz.to_vec(), weights })
}

/// `20 log10 |w^H h(Ω)|` relative to the look direction, per direction.
pub fn beampattern<S>(w: &[Complex64], mut steering: S, eval: &[Direction], look: Direction) -> Result<Vec<f64>>
where
    S: FnMut(Direction) -> Result<Vec<Complex64>>,
{
    let reference = response(w, &steering(look)?).norm();
    if !(reference > 0.0) {
        return Err(Error::Degenerate("zero response in the look direction".into()));
    }
    eval.iter()
        .map(|d| {
            let g = response(w, &steering(*d)?).norm() / reference;
            Ok(20.0 * g.max(1e-300).log10())
        })
        .collect()
}

/// `10 log10(|w^H d|² / w^H w)` in dB.
pub fn white_noise_gain(w: &[Complex64], d: &[Complex64]) -> Result<f64> {
    let ww: f64 = w.iter().map(|v| v.norm_sqr()).sum();
    if !(ww > 0.0) || w.len() != d.len() {
        return Err(Error::invalid("white-noise gain needs a non-zero weight vector matching the steering vector"));
    }
    Ok(10.0 * (response(w, d).norm_sqr() / ww).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quadrature_examples() {
        assert!((quadrature_weight(PI / 2.0, 4, 2).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(quadrature_weight(0.0, 8, 8).unwrap(), 0.0);
        assert!(quadrature_weight(PI, 8, 8).unwrap().abs() < 1e-15);
        assert!(quadrature_weight(1.0, 8, 7).is_err());
        let total = |n: usize| equiangular_grid(2 * n, n).unwrap().iter().map(|g| g.weight).sum::<f64>();
        let t32 = total(32);
        for n in [34, 48, 64, 96] {
            assert!((total(n) / t32 - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn mvdr_closed_form_and_invariances() {
        let r = Matrix::<Complex64>::identity(2);
        let w = mvdr_weights(&[c(1.0, 0.0), c(1.0, 0.0)], &r).unwrap();
        assert!((w[0] - c(0.5, 0.0)).norm() < 1e-15 && (w[1] - c(0.5, 0.0)).norm() < 1e-15);
        let r = Matrix::from_fn(3, 3, |a, b| if a == b { c(2.0 + a as f64, 0.0) } else { c(0.3, 0.1 * (a as f64 - b as f64)) });
        let d = [c(1.0, 0.2), c(-0.4, 0.9), c(0.3, -0.3)];
        let w = mvdr_weights(&d, &r).unwrap();
        assert!((response(&w, &d) - 1.0).norm() <= 1e-10);
        let w2 = mvdr_weights(&d, &r.scaled(7.5)).unwrap();
        for (a, b) in w.iter().zip(&w2) {
            assert!((a - b).norm() <= 1e-12 * a.norm());
        }
        let k = c(0.3, -2.0);
        let dk: Vec<Complex64> = d.iter().map(|v| v * k).collect();
        let w3 = mvdr_weights(&dk, &r).unwrap();
        assert!((response(&w3, &dk) - 1.0).norm() <= 1e-10);
        for (a, b) in w.iter().zip(&w3) {
            assert!((a / k.conj() - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn scm_and_wng() {
        let r = iso_scm(&[vec![c(1.0, 0.0), c(0.0, 0.0)]], &[1.0], LOADING).unwrap();
        assert!((r[(0, 0)].re - (1.0 + LOADING / 2.0)).abs() < 1e-15);
        assert!((r[(1, 1)].re - LOADING / 2.0).abs() < 1e-15);
        let d = vec![c(1.0, 0.0); 4];
        let w: Vec<Complex64> = d.iter().map(|v| v / 4.0).collect();
        assert!((white_noise_gain(&w, &d).unwrap() - 10.0 * 4f64.log10()).abs() < 1e-12);
        let pattern = beampattern(&w, |_| Ok(d.clone()), &[Direction::FRONTAL], Direction::FRONTAL).unwrap();
        assert_eq!(pattern, vec![0.0]);
    }
}
