//! Associated Legendre functions, the complex spherical-harmonics basis, SH
//! spectra and SH ridge regression.
//!
//! Coefficients are stored in l-major order with `m` running from `-l` to `l`,
//! so `(l, m)` lives at `l² + l + m`.

use core::f64::consts::PI;

use crate::geom::Direction;
use crate::linalg::{Cholesky, Matrix};
use crate::prelude::*;

/// Number of coefficients of an order-`order` expansion, `(L+1)²`.
#[inline]
pub const fn sh_len(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// Position of `(l, m)` in l-major order.
#[inline]
pub const fn sh_index(l: usize, m: isize) -> usize {
    ((l * l + l) as isize + m) as usize
}

/// Largest order resolvable from `d` directions: `⌊√d − 1⌋`.
pub fn order_for_directions(d: usize) -> usize {
    let mut r = (d as f64).sqrt().floor() as usize;
    // guard against sqrt rounding for perfect squares
    while (r + 1) * (r + 1) <= d {
        r += 1;
    }
    while r * r > d {
        r -= 1;
    }
    r.saturating_sub(1)
}

/// Complex SH coefficients of order `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoefficients {
    order: usize,
    values: Vec<Complex64>,
}

impl ShCoefficients {
    pub fn new(order: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != sh_len(order) {
            return Err(Error::invalid(format!("order {order} needs {} coefficients, got {}", sh_len(order), values.len())));
        }
        if values.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("non-finite SH coefficient"));
        }
        Ok(Self { order, values })
    }

    pub fn zeros(order: usize) -> Self {
        Self { order, values: vec![Complex64::new(0.0, 0.0); sh_len(order)] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, l: usize, m: isize) -> Complex64 {
        self.values[sh_index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: isize, v: Complex64) {
        self.values[sh_index(l, m)] = v;
    }
}

/// Per-degree root-mean energy of a coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ShSpectrum(pub Vec<f64>);

fn check_unit_interval(x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("Legendre argument {x} outside [-1, 1]")));
    }
    Ok(())
}

/// `P_l^m(x)` without the Condon–Shortley phase.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(Error::invalid(format!("order m = {m} exceeds degree l = {l}")));
    }
    check_unit_interval(x)?;
    let table = legendre_table(l, x);
    Ok(table[sh_index(l, m as isize)])
}

/// All `P_l^m(x)` for `0 ≤ m ≤ l ≤ order`, stored at `sh_index(l, m)`
/// (negative-m slots are left at zero).
///
/// `P_m^m` comes from the product formula `(2m−1)!! (1−x²)^{m/2}`, then the
/// standard three-term recurrence runs upward in `l`.
pub fn legendre_table(order: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; sh_len(order)];
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for m in 0..=order {
        if m > 0 {
            pmm *= (2 * m - 1) as f64 * s;
        }
        p[sh_index(m, m as isize)] = pmm;
        if m < order {
            let pm1 = x * (2 * m + 1) as f64 * pmm;
            p[sh_index(m + 1, m as isize)] = pm1;
            let (mut a, mut b) = (pmm, pm1);
            for l in (m + 2)..=order {
                let c = ((2 * l - 1) as f64 * x * b - (l + m - 1) as f64 * a) / (l - m) as f64;
                p[sh_index(l, m as isize)] = c;
                a = b;
                b = c;
            }
        }
    }
    p
}

/// `sqrt((2l+1)/4π · (l−m)!/(l+m)!)` for `m ≥ 0`.
fn normalization(l: usize, m: usize) -> f64 {
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt()
}

/// Orthonormal complex SH basis `Y_l^m(d)` for every `(l, m)` up to `order`.
///
/// `Y_l^m = (−1)^m N_lm P_l^m(cos ϑ) e^{jmφ}` for `m ≥ 0` and
/// `Y_l^{−m} = (−1)^m conj(Y_l^m)`, with ϑ the colatitude and φ the azimuth.
pub fn sh_basis(order: usize, d: Direction) -> Vec<Complex64> {
    let ct = d.colatitude.cos().clamp(-1.0, 1.0);
    let p = legendre_table(order, ct);
    let mut y = vec![Complex64::new(0.0, 0.0); sh_len(order)];
    for l in 0..=order {
        for m in 0..=l {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let mag = normalization(l, m) * p[sh_index(l, m as isize)];
            let (s, c) = (m as f64 * d.azimuth).sin_cos();
            let pos = Complex64::new(sign * mag * c, sign * mag * s);
            y[sh_index(l, m as isize)] = pos;
            if m > 0 {
                y[sh_index(l, -(m as isize))] = pos.conj() * sign;
            }
        }
    }
    y
}

/// `Σ_{lm} c_lm Y_l^m(d)`.
pub fn sh_eval(c: &ShCoefficients, d: Direction) -> Complex64 {
    let y = sh_basis(c.order, d);
    c.values.iter().zip(&y).map(|(a, b)| a * b).sum()
}

/// `s_l = sqrt(Σ_m |c_lm|² / (2l+1))`.
pub fn sh_spectrum(c: &ShCoefficients) -> ShSpectrum {
    ShSpectrum(spectrum_of(c.order, &c.values))
}

pub(crate) fn spectrum_of(order: usize, values: &[Complex64]) -> Vec<f64> {
    (0..=order)
        .map(|l| {
            let lo = l * l;
            let hi = (l + 1) * (l + 1);
            let e: f64 = values[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            (e / (2 * l + 1) as f64).sqrt()
        })
        .collect()
}

/// Fewer directions than the `(L+1)²` needed to resolve order `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AliasingWarning {
    pub directions: usize,
    pub required: usize,
}

/// Result of [`sh_ridge_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShRidgeFit {
    pub coefficients: ShCoefficients,
    pub aliasing: Option<AliasingWarning>,
}

/// Ridge-regularized least squares `(Ψ^H Ψ + λI)^{-1} Ψ^H y` on the SH basis.
pub fn sh_ridge_fit(dirs: &[Direction], values: &[Complex64], order: usize, lambda: f64) -> Result<ShRidgeFit> {
    if dirs.is_empty() || dirs.len() != values.len() {
        return Err(Error::invalid(format!(
            "sh_ridge_fit needs matching non-empty inputs ({} directions, {} values)",
            dirs.len(),
            values.len()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("ridge weight {lambda} must be finite and non-negative")));
    }
    let basis: Vec<Vec<Complex64>> = dirs.iter().map(|d| sh_basis(order, *d)).collect();
    let coefficients = ridge_solve(&basis, values, order, lambda)?;
    let required = sh_len(order);
    let aliasing = if dirs.len() < required {
        log::warn!("{} directions cannot resolve SH order {order} (needs {required})", dirs.len());
        Some(AliasingWarning { directions: dirs.len(), required })
    } else {
        None
    };
    Ok(ShRidgeFit { coefficients, aliasing })
}

/// Ridge solve against precomputed basis rows; shared by the per-frequency fits.
pub(crate) fn ridge_solve(basis: &[Vec<Complex64>], values: &[Complex64], order: usize, lambda: f64) -> Result<ShCoefficients> {
    let k = sh_len(order);
    let mut gram = Matrix::<Complex64>::zeros(k, k);
    let mut rhs = vec![Complex64::new(0.0, 0.0); k];
    for (row, y) in basis.iter().zip(values) {
        for a in 0..k {
            let ca = row[a].conj();
            rhs[a] += ca * y;
            for b in 0..=a {
                gram[(a, b)] += ca * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)].conj();
        }
    }
    gram.add_diagonal(lambda);
    let chol = Cholesky::new(&gram)
        .map_err(|_| Error::RankDeficient(format!("SH normal equations of order {order} are singular with λ = {lambda}")))?;
    ShCoefficients::new(order, chol.solve(&rhs))
}

/// Entrywise linear interpolation of coefficient tables over frequency knots.
pub fn sh_coeff_freq_interp(knots: &[f64], tables: &[ShCoefficients], f_query: f64) -> Result<ShCoefficients> {
    if knots.len() < 2 || knots.len() != tables.len() {
        return Err(Error::invalid("interpolation needs at least two knots with matching tables"));
    }
    if knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("frequency knots must be strictly increasing"));
    }
    let order = tables[0].order;
    if tables.iter().any(|t| t.order != order) {
        return Err(Error::invalid("coefficient tables disagree on order"));
    }
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    if !(f_query >= lo && f_query <= hi) {
        return Err(Error::Extrapolation { query: f_query, min: lo, max: hi });
    }
    let k = knots.partition_point(|&x| x <= f_query).clamp(1, knots.len() - 1);
    let (f0, f1) = (knots[k - 1], knots[k]);
    let t = (f_query - f0) / (f1 - f0);
    let values = tables[k - 1].values.iter().zip(&tables[k].values).map(|(a, b)| a * (1.0 - t) + b * t).collect();
    Ok(ShCoefficients { order, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::fibonacci_sphere;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn legendre_closed_forms() {
        assert_abs_diff_eq!(assoc_legendre(1, 0, 0.3).unwrap(), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(assoc_legendre(2, 0, 0.5).unwrap(), -0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(assoc_legendre(1, 1, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        // P_3^2(x) = 15 x (1 - x²) without the phase
        assert_abs_diff_eq!(assoc_legendre(3, 2, 0.4).unwrap(), 15.0 * 0.4 * (1.0 - 0.16), epsilon = 1e-13);
        assert!(assoc_legendre(2, 0, 1.5).is_err());
        assert!(assoc_legendre(1, 2, 0.0).is_err());
    }

    #[test]
    fn basis_closed_forms() {
        let d = Direction::new(1.3, 0.7).unwrap();
        let y = sh_basis(2, d);
        assert_abs_diff_eq!(y[0].re, 0.282_094_791_773_878_1, epsilon = 1e-15);
        let pole = Direction::new(0.0, 0.0).unwrap();
        let y = sh_basis(1, pole);
        assert_abs_diff_eq!(y[sh_index(1, 0)].re, (3.0 / (4.0 * PI)).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn negative_order_symmetry() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let d = Direction::new(rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..PI)).unwrap();
            let y = sh_basis(6, d);
            for l in 0..=6usize {
                for m in 1..=l as isize {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    let lhs = y[sh_index(l, -m)];
                    let rhs = y[sh_index(l, m)].conj() * sign;
                    assert!((lhs - rhs).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn eval_matches_term_by_term_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let order = 4;
        let c = ShCoefficients::new(
            order,
            (0..sh_len(order)).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
        )
        .unwrap();
        let d = Direction::new(2.1, 1.9).unwrap();
        let x = d.colatitude.cos();
        let mut brute = Complex64::new(0.0, 0.0);
        for l in 0..=order {
            for m in -(l as isize)..=(l as isize) {
                let am = m.unsigned_abs();
                let mut fact = 1.0;
                for k in (l - am + 1)..=(l + am) {
                    fact *= k as f64;
                }
                let n = ((2 * l + 1) as f64 / (4.0 * PI) / fact).sqrt();
                let p = assoc_legendre(l, am, x).unwrap();
                // Condon–Shortley sign for positive orders only
                let phase = if m > 0 && am % 2 == 1 { -1.0 } else { 1.0 };
                let e = Complex64::from_polar(1.0, m as f64 * d.azimuth);
                brute += c.get(l, m) * phase * n * p * e;
            }
        }
        assert!((sh_eval(&c, d) - brute).norm() < 1e-12);
        assert_eq!(sh_eval(&ShCoefficients::zeros(3), d), Complex64::new(0.0, 0.0));
        let mut e0 = ShCoefficients::zeros(2);
        e0.set(0, 0, Complex64::new(1.0, 0.0));
        assert_abs_diff_eq!(sh_eval(&e0, d).re, 0.282_094_791_773_878_1, epsilon = 1e-15);
    }

    #[test]
    fn spectrum_examples() {
        assert!(sh_spectrum(&ShCoefficients::zeros(3)).0.iter().all(|&s| s == 0.0));
        let mut c = ShCoefficients::zeros(2);
        c.set(1, 0, Complex64::new(3.0, 0.0));
        let s = sh_spectrum(&c).0;
        assert_abs_diff_eq!(s[1], 3f64.sqrt(), epsilon = 1e-15);
        c.set(2, -1, Complex64::new(0.5, 1.0));
        let doubled = ShCoefficients::new(2, c.values().iter().map(|v| v * 2.0).collect()).unwrap();
        for (a, b) in sh_spectrum(&c).0.iter().zip(sh_spectrum(&doubled).0) {
            assert_abs_diff_eq!(2.0 * a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn ridge_recovers_planted_coefficients() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let truth =
            ShCoefficients::new(2, (0..9).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
                .unwrap();
        let dirs = fibonacci_sphere(36).unwrap();
        let y: Vec<Complex64> = dirs.iter().map(|d| sh_eval(&truth, *d)).collect();
        let fit = sh_ridge_fit(&dirs, &y, 2, 1e-12).unwrap();
        assert!(fit.aliasing.is_none());
        let err: f64 = fit.coefficients.values().iter().zip(truth.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = truth.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / scale < 1e-6);

        let zero = sh_ridge_fit(&dirs, &vec![Complex64::new(0.0, 0.0); 36], 2, 1e-3).unwrap();
        assert!(zero.coefficients.values().iter().all(|c| c.norm() == 0.0));

        let shrunk = sh_ridge_fit(&dirs, &y, 2, 1e12).unwrap();
        let n: f64 = shrunk.coefficients.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(n < 1e-6);
    }

    #[test]
    fn ridge_flags_aliasing_and_singularity() {
        let dirs = fibonacci_sphere(8).unwrap();
        let y = vec![Complex64::new(1.0, 0.0); 8];
        assert!(sh_ridge_fit(&dirs, &y, 3, 1e-3).unwrap().aliasing.is_some());
        assert!(matches!(sh_ridge_fit(&dirs, &y, 3, 0.0), Err(Error::RankDeficient(_))));
        assert!(sh_ridge_fit(&dirs, &y, 1, 0.0).unwrap().aliasing.is_none());
    }

    #[test]
    fn frequency_interpolation() {
        let t = |v: f64| ShCoefficients::new(1, vec![Complex64::new(v, -v); 4]).unwrap();
        let knots = [100.0, 200.0, 400.0];
        let tables = [t(1.0), t(3.0), t(-1.0)];
        assert_eq!(sh_coeff_freq_interp(&knots, &tables, 200.0).unwrap(), t(3.0));
        assert_eq!(sh_coeff_freq_interp(&knots, &tables, 150.0).unwrap(), t(2.0));
        for q in [100.0, 130.0, 250.0, 399.0, 400.0] {
            let got = sh_coeff_freq_interp(&knots, &tables, q).unwrap().values()[0].re;
            let want = if q <= 200.0 { 1.0 + 2.0 * (q - 100.0) / 100.0 } else { 3.0 - 4.0 * (q - 200.0) / 200.0 };
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
        assert!(matches!(sh_coeff_freq_interp(&knots, &tables, 50.0), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn order_rule() {
        assert_eq!(order_for_directions(8), 1);
        assert_eq!(order_for_directions(16), 3);
        assert_eq!(order_for_directions(32), 4);
        assert_eq!(order_for_directions(64), 7);
        assert_eq!(order_for_directions(1), 0);
    }
}
