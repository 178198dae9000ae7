//! Closed-form propagation models, geometric warping, the rigid-sphere
//! scattering field and a finite-difference Helmholtz residual.

use core::f64::consts::PI;

use crate::geom::distance;
use crate::prelude::*;

/// Propagation medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Medium {
    pub speed_of_sound: f64,
}

impl Default for Medium {
    fn default() -> Self {
        Self { speed_of_sound: 343.0 }
    }
}

impl Medium {
    pub fn new(speed_of_sound: f64) -> Result<Self> {
        if !(speed_of_sound > 0.0) || !speed_of_sound.is_finite() {
            return Err(Error::invalid(format!("speed of sound must be positive, got {speed_of_sound}")));
        }
        Ok(Self { speed_of_sound })
    }

    /// Wavenumber `ω/c`.
    #[inline]
    pub fn wavenumber(&self, omega: f64) -> f64 {
        omega / self.speed_of_sound
    }
}

/// Point-source free field `e^{−jωr/c} / (√(4π) r)`.
pub fn free_field(omega: f64, mic: Vec3, src: Vec3, medium: Medium) -> Result<Complex64> {
    let r = distance(mic, src);
    if !(r > 0.0) {
        return Err(Error::Singularity(format!("microphone coincides with source at {src:?}")));
    }
    let amp = 1.0 / ((4.0 * PI).sqrt() * r);
    Ok(Complex64::from_polar(amp, -medium.wavenumber(omega) * r))
}

/// Relative transfer between a microphone and a reference point for the same
/// source, `(d_ij/d_j) e^{−jω(d_ij−d_j)/c}`.
pub fn geometric_warp(omega: f64, mic: Vec3, src: Vec3, q: Vec3, medium: Medium) -> Result<Complex64> {
    let d_ij = distance(src, mic);
    let d_j = distance(src, q);
    if !(d_ij > 0.0) || !(d_j > 0.0) {
        return Err(Error::Singularity("source coincides with microphone or reference point".into()));
    }
    Ok(Complex64::from_polar(d_ij / d_j, -medium.wavenumber(omega) * (d_ij - d_j)))
}

/// `h^d · h^s`.
#[inline]
pub fn product_field(h_d: Complex64, h_s: Complex64) -> Complex64 {
    h_d * h_s
}

/// Spherical Bessel functions of the first kind `j_0..=j_n` at `x ≥ 0`.
///
/// Miller's downward recurrence, normalized against whichever of `j_0`,
/// `j_1` is better conditioned at `x`.
pub fn spherical_jn(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = n + 20 + x.ceil() as usize + ((40 * (n + 1)) as f64).sqrt() as usize;
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut trail = vec![0.0; n + 2];
    for l in (0..=start).rev() {
        // j_{l-1} = (2l+1)/x j_l − j_{l+1}
        let prev = (2 * l + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if l <= n + 1 {
            trail[l] = next;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            for t in trail.iter_mut() {
                *t *= 1e-250;
            }
        }
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let scale = if j0.abs() >= j1.abs() { j0 / trail[0] } else { j1 / trail[1] };
    for l in 0..=n {
        out[l] = trail[l] * scale;
    }
    out
}

/// Spherical Bessel functions of the second kind `y_0..=y_n` at `x > 0`,
/// by upward recurrence.
pub fn spherical_yn(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let (s, c) = x.sin_cos();
    out[0] = -c / x;
    if n >= 1 {
        out[1] = -c / (x * x) - s / x;
    }
    for l in 1..n {
        out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
    }
    out
}

/// Derivatives from `f_l' = f_{l−1} − (l+1)/x f_l`, with `f_0' = −f_1`.
/// `f` must hold one entry beyond the highest degree wanted.
fn derivative_from(f: &[f64], x: f64) -> Vec<f64> {
    let n = f.len() - 1;
    (0..n).map(|l| if l == 0 { -f[1] } else { f[l - 1] - (l + 1) as f64 / x * f[l] }).collect()
}

/// Legendre polynomials `P_0..=P_n` at `x`.
fn legendre_polys(n: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = x;
    }
    for l in 1..n {
        p[l + 1] = ((2 * l + 1) as f64 * x * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
    }
    p
}

/// Default series truncation `⌈ka + 8 (ka)^{1/3}⌉ + 8`.
pub fn default_truncation(ka: f64) -> usize {
    (ka + 8.0 * ka.cbrt()).ceil() as usize + 8
}

/// Total pressure of a unit plane wave `e^{jk r cosθ}` scattered by a rigid
/// sphere of radius `a`, observed at radius `r ≥ a` and incidence cosine
/// `cos_incidence`. Outgoing waves use `h_l = j_l − j y_l`, matching the
/// `e^{−jkr}` radiation of [`free_field`].
pub fn rigid_sphere_field(
    omega: f64,
    sphere_radius: f64,
    obs_radius: f64,
    cos_incidence: f64,
    medium: Medium,
    truncation: Option<usize>,
) -> Result<Complex64> {
    if !(sphere_radius > 0.0) || !(obs_radius >= sphere_radius) {
        return Err(Error::invalid(format!("need r ≥ a > 0, got a = {sphere_radius}, r = {obs_radius}")));
    }
    if !(-1.0..=1.0).contains(&cos_incidence) {
        return Err(Error::invalid(format!("incidence cosine {cos_incidence} outside [-1, 1]")));
    }
    let k = medium.wavenumber(omega.abs());
    if k == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let ka = k * sphere_radius;
    let kr = k * obs_radius;
    let n = truncation.unwrap_or_else(|| default_truncation(ka));
    let ja = spherical_jn(n + 1, ka);
    let ya = spherical_yn(n + 1, ka);
    let dja = derivative_from(&ja, ka);
    let dya = derivative_from(&ya, ka);
    let yr = spherical_yn(n, kr);
    let jr = spherical_jn(n, kr);
    let p = legendre_polys(n, cos_incidence);
    // incident part in closed form; only the scattered series is truncated
    let mut total = Complex64::from_polar(1.0, kr * cos_incidence);
    let mut jl = Complex64::new(1.0, 0.0);
    for l in 0..=n {
        let dh = Complex64::new(dja[l], -dya[l]);
        let h = Complex64::new(jr[l], -yr[l]);
        total -= jl * ((2 * l + 1) as f64 * p[l]) * h * (dja[l] / dh);
        jl *= Complex64::new(0.0, 1.0);
    }
    if !total.re.is_finite() || !total.im.is_finite() {
        return Err(Error::numeric(format!("rigid-sphere series diverged at ka = {ka}")));
    }
    // negative ω: conjugate-symmetric spectrum of a real field
    Ok(if omega < 0.0 { total.conj() } else { total })
}

/// `∇²p + (ω/c)² p` at `q` with a 7-point central-difference Laplacian.
pub fn helmholtz_residual_fd<F>(field: F, omega: f64, q: Vec3, h: f64, medium: Medium) -> Result<Complex64>
where
    F: Fn(f64, Vec3) -> Complex64,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let centre = field(omega, q);
    let mut lap = centre * -6.0;
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut p = q;
            p[axis] += sign * h;
            lap += field(omega, p);
        }
    }
    let k = medium.wavenumber(omega);
    Ok(lap / (h * h) + centre * (k * k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c() -> Medium {
        Medium::default()
    }

    #[test]
    fn free_field_examples() {
        let omega = 2.0 * PI * 500.0;
        let h = free_field(omega, [0.343, 0.0, 0.0], [0.0; 3], c()).unwrap();
        assert_abs_diff_eq!(h.re, -0.822_433, epsilon = 1e-6);
        assert_abs_diff_eq!(h.im, 0.0, epsilon = 1e-12);
        let h0 = free_field(0.0, [1.0, 0.0, 0.0], [0.0; 3], c()).unwrap();
        assert_abs_diff_eq!(h0.re, 0.282_094_8, epsilon = 1e-7);
        let far = free_field(300.0, [0.0, 2.0, 0.0], [0.0; 3], c()).unwrap();
        let near = free_field(300.0, [0.0, 1.0, 0.0], [0.0; 3], c()).unwrap();
        assert_abs_diff_eq!(near.norm(), 2.0 * far.norm(), epsilon = 1e-14);
        assert!(matches!(free_field(1.0, [1.0; 3], [1.0; 3], c()), Err(Error::Singularity(_))));
    }

    #[test]
    fn free_field_phase() {
        for (omega, r) in [(100.0, 0.3), (5000.0, 1.7), (31_000.0, 0.05)] {
            let h = free_field(omega, [r, 0.0, 0.0], [0.0; 3], c()).unwrap();
            let want = -omega * r / 343.0;
            let diff = (h.arg() - want).rem_euclid(2.0 * PI);
            assert!(diff.min(2.0 * PI - diff) < 1e-12);
        }
    }

    #[test]
    fn warp_examples() {
        let src = [1.0, 2.0, 0.5];
        let q = [0.1, 0.0, 0.0];
        let w = geometric_warp(800.0, q, src, q, c()).unwrap();
        assert_abs_diff_eq!(w.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.im, 0.0, epsilon = 1e-15);
        let w = geometric_warp(0.0, [4.0, 0.0, 0.0], [0.0; 3], [2.0, 0.0, 0.0], c()).unwrap();
        assert_abs_diff_eq!(w.re, 2.0, epsilon = 1e-15);
        let w = geometric_warp(900.0, [0.0, 3.0, 0.0], [0.0; 3], [3.0, 0.0, 0.0], c()).unwrap();
        assert_abs_diff_eq!(w.norm(), 1.0, epsilon = 1e-15);
        let w = geometric_warp(900.0, [0.0, 3.1, 0.0], [0.0; 3], [3.0, 0.0, 0.0], c()).unwrap();
        assert!((w.norm() - 1.0).abs() > 1e-3);
        assert!(geometric_warp(1.0, [0.0; 3], [0.0; 3], [1.0, 0.0, 0.0], c()).is_err());
    }

    #[test]
    fn product_examples() {
        let hd = Complex64::new(0.3, -0.4);
        assert_eq!(product_field(hd, Complex64::new(1.0, 0.0)), hd);
        assert_eq!(product_field(Complex64::new(0.0, 0.0), hd), Complex64::new(0.0, 0.0));
        let hs = Complex64::new(-1.5, 2.0);
        assert_abs_diff_eq!(product_field(hd, hs).norm(), hd.norm() * hs.norm(), epsilon = 1e-15);
    }

    #[test]
    fn bessel_closed_forms() {
        for x in [1e-4, 0.3, 1.0, 2.5, 7.0, 30.0] {
            let (s, c) = f64::sin_cos(x);
            let j = spherical_jn(3, x);
            let y = spherical_yn(3, x);
            let j2 = if x < 0.1 { x * x / 15.0 * (1.0 - x * x / 14.0) } else { (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x) };
            let y2 = -(3.0 / (x * x) - 1.0) * c / x - 3.0 * s / (x * x);
            assert!((j[0] - s / x).abs() <= 1e-13 * (s / x).abs().max(1e-3));
            assert!((j[2] - j2).abs() <= 1e-9 * j2.abs().max(1e-6), "j2 {x}: {} vs {j2}", j[2]);
            assert!((y[2] - y2).abs() <= 1e-12 * y2.abs());
        }
        // Wronskian j_l y_{l-1} − j_{l-1} y_l = 1/x²
        for x in [0.2, 3.0, 12.0] {
            let j = spherical_jn(20, x);
            let y = spherical_yn(20, x);
            for l in 1..=15 {
                let w = j[l] * y[l - 1] - j[l - 1] * y[l];
                assert!((w * x * x - 1.0).abs() < 1e-9, "l={l} x={x}");
            }
        }
    }

    #[test]
    fn sphere_low_frequency_limit() {
        let a = 0.09;
        for (r, ct) in [(0.09, 0.3), (0.2, -0.8), (1.0, 1.0)] {
            let p = rigid_sphere_field(1.0, a, r, ct, c(), None).unwrap();
            let inc = Complex64::from_polar(1.0, 1.0 / 343.0 * r * ct);
            assert!((p - inc).norm() / inc.norm() < 0.01);
        }
    }

    #[test]
    fn sphere_surface_is_rigid() {
        let a = 0.0875;
        let omega = 2.0 * PI * 2000.0;
        let k = omega / 343.0;
        let h = 1e-5;
        for ct in [-0.9, -0.2, 0.4, 1.0] {
            let f = |r: f64| rigid_sphere_field(omega, a, r, ct, c(), None).unwrap();
            let d = (f(a) * -3.0 + f(a + h) * 4.0 - f(a + 2.0 * h)) / (2.0 * h);
            // interior derivative scale for comparison
            let d_inc = k * f(a).norm();
            assert!(d.norm() / d_inc < 1e-6, "ct={ct}: {}", d.norm() / d_inc);
        }
    }

    #[test]
    fn sphere_series_converged() {
        let a = 0.1;
        for (ka, ct) in [(3.0, -1.0), (3.0, 0.0), (3.0, 0.7), (12.8, 0.3)] {
            let omega = ka * 343.0 / a;
            let n = default_truncation(ka);
            let p = rigid_sphere_field(omega, a, a, ct, c(), Some(n)).unwrap();
            let q = rigid_sphere_field(omega, a, a, ct, c(), Some(2 * n)).unwrap();
            assert!((p - q).norm() < 1e-10, "{}", (p - q).norm());
        }
        assert!(rigid_sphere_field(1000.0, a, 0.05, 0.0, c(), None).is_err());
    }

    #[test]
    fn sphere_vanishing_radius_is_plane_wave() {
        let omega = 2.0 * PI * 1000.0;
        let k = omega / 343.0;
        let p = rigid_sphere_field(omega, 1e-5, 0.5, 0.6, c(), None).unwrap();
        let inc = Complex64::from_polar(1.0, k * 0.5 * 0.6);
        assert!((p - inc).norm() < 1e-6);
    }

    #[test]
    fn helmholtz_examples() {
        let omega = 2.0 * PI * 400.0;
        let src = [3.0, 1.0, -2.0];
        let q = [0.1, 0.0, 0.05];
        let ff = |w: f64, x: Vec3| free_field(w, x, src, c()).unwrap();
        let r = helmholtz_residual_fd(ff, omega, q, 1e-3, c()).unwrap();
        assert!(r.norm() / ff(omega, q).norm() < 1e-3);
        let r = helmholtz_residual_fd(|_, _| Complex64::new(2.0, -1.0), 0.0, q, 1e-3, c()).unwrap();
        assert_abs_diff_eq!(r.norm(), 0.0, epsilon = 1e-9);
        let k = omega / 343.0;
        for h in [4e-3, 2e-3] {
            let pw = |_: f64, x: Vec3| Complex64::from_polar(1.0, k * x[0]);
            let r = helmholtz_residual_fd(pw, omega, q, h, c()).unwrap();
            let bound = h * h * k.powi(4) / 12.0;
            assert!(r.norm() <= 1.01 * bound && r.norm() >= 0.9 * bound);
        }
    }
}
