//! Reconstruction metrics: per-frequency nMSE, time-domain cosine similarity
//! and its dependence on the distance to the nearest observation.

use core::f64::consts::TAU;

use crate::geom::{angular_distance, Direction, GridDims};
use crate::prelude::*;

/// Value reported for an exact match, in dB.
pub const NMSE_FLOOR_DB: f64 = -300.0;

fn check_shape(dims: GridDims, target: &[Complex64], estimate: &[Complex64]) -> Result<()> {
    if dims.is_empty() || target.len() != dims.len() || estimate.len() != dims.len() {
        return Err(Error::invalid(format!(
            "expected {} values for a {}×{}×{} grid, got target {} and estimate {}",
            dims.len(),
            dims.freqs,
            dims.mics,
            dims.dirs,
            target.len(),
            estimate.len()
        )));
    }
    Ok(())
}

/// Mean over microphones and directions of `10 log10(|h − ĥ|²/|h|²)`, per frequency.
pub fn nmse_per_freq(dims: GridDims, target: &[Complex64], estimate: &[Complex64]) -> Result<Vec<f64>> {
    check_shape(dims, target, estimate)?;
    let per = dims.mics * dims.dirs;
    target
        .chunks(per)
        .zip(estimate.chunks(per))
        .enumerate()
        .map(|(f, (t, e))| {
            let mut acc = 0.0;
            for (k, (h, g)) in t.iter().zip(e).enumerate() {
                let p = h.norm_sqr();
                if p == 0.0 {
                    return Err(Error::Degenerate(format!(
                        "zero target at frequency {f}, microphone {}, direction {}",
                        k / dims.dirs,
                        k % dims.dirs
                    )));
                }
                let err = (h - g).norm_sqr();
                acc += if err == 0.0 { NMSE_FLOOR_DB } else { (10.0 * (err / p).log10()).max(NMSE_FLOOR_DB) };
            }
            Ok(acc / per as f64)
        })
        .collect()
}

/// Real impulse response of length `2(F−1)` from a one-sided spectrum.
///
/// The spectrum is extended Hermitian-symmetrically with the imaginary parts of
/// the DC and Nyquist bins dropped, then inverted by a direct DFT.
pub fn to_time_domain(one_sided: &[Complex64]) -> Result<Vec<f64>> {
    let f = one_sided.len();
    if f < 2 {
        return Err(Error::invalid(format!("need at least two frequency bins, got {f}")));
    }
    let t = 2 * (f - 1);
    let mut full = Vec::with_capacity(t);
    full.push(Complex64::new(one_sided[0].re, 0.0));
    full.extend_from_slice(&one_sided[1..f - 1]);
    full.push(Complex64::new(one_sided[f - 1].re, 0.0));
    full.extend(one_sided[1..f - 1].iter().rev().map(|c| c.conj()));
    Ok((0..t)
        .map(|n| {
            let s: f64 = full
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    // reduce k·n mod T before scaling so the phase stays exact for long signals
                    let ph = TAU * ((k * n) % t) as f64 / t as f64;
                    x.re * ph.cos() - x.im * ph.sin()
                })
                .sum();
            s / t as f64
        })
        .collect())
}

/// One-sided DFT (bins `0..=T/2`) of a real signal of even length `T ≥ 2`.
pub fn to_frequency_domain(signal: &[f64]) -> Result<Vec<Complex64>> {
    let t = signal.len();
    if t < 2 || !t.is_multiple_of(2) {
        return Err(Error::invalid(format!("signal length {t} must be even and at least 2")));
    }
    Ok((0..=t / 2)
        .map(|k| signal.iter().enumerate().map(|(n, x)| Complex64::from_polar(*x, -TAU * ((k * n) % t) as f64 / t as f64)).sum())
        .collect())
}

fn spectrum(dims: GridDims, values: &[Complex64], i: usize, j: usize) -> Vec<Complex64> {
    (0..dims.freqs).map(|f| values[dims.index(f, i, j)]).collect()
}

/// Per direction, the mean over microphones of the cosine between target and
/// estimated impulse responses.
pub fn csim_per_dir(dims: GridDims, target: &[Complex64], estimate: &[Complex64]) -> Result<Vec<f64>> {
    check_shape(dims, target, estimate)?;
    (0..dims.dirs)
        .map(|j| {
            let mut acc = 0.0;
            for i in 0..dims.mics {
                let a = to_time_domain(&spectrum(dims, target, i, j))?;
                let b = to_time_domain(&spectrum(dims, estimate, i, j))?;
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    return Err(Error::Degenerate(format!("zero-energy impulse response at microphone {i}, direction {j}")));
                }
                let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                acc += (dot / (na * nb)).clamp(-1.0, 1.0);
            }
            Ok(acc / dims.mics as f64)
        })
        .collect()
}

/// Median of a non-empty sample (mean of the two central values for even sizes).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("median of an empty sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Mean CSIM of the directions whose nearest observation lies in `[lo, hi)` degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceBin {
    pub lo_deg: f64,
    pub hi_deg: f64,
    pub count: usize,
    pub mean_csim: f64,
}

/// Angular distance in degrees from each direction to its nearest observation.
pub fn nearest_observation_deg(dirs: &[Direction], observed: &[Direction]) -> Result<Vec<f64>> {
    if observed.is_empty() {
        return Err(Error::invalid("no observed directions"));
    }
    Ok(dirs.iter().map(|d| observed.iter().map(|o| angular_distance(*d, *o)).fold(f64::INFINITY, f64::min).to_degrees()).collect())
}

/// Groups per-direction CSIM into `bin_deg`-wide bins of nearest-observation
/// distance; empty bins are skipped.
pub fn csim_by_distance(csim: &[f64], dirs: &[Direction], observed: &[Direction], bin_deg: f64) -> Result<Vec<DistanceBin>> {
    if csim.len() != dirs.len() {
        return Err(Error::invalid(format!("{} CSIM values for {} directions", csim.len(), dirs.len())));
    }
    if !(bin_deg > 0.0) {
        return Err(Error::invalid(format!("bin width {bin_deg} must be positive")));
    }
    let dist = nearest_observation_deg(dirs, observed)?;
    let n_bins = (180.0 / bin_deg).ceil() as usize;
    let mut sum = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (c, d) in csim.iter().zip(&dist) {
        let b = ((d / bin_deg) as usize).min(n_bins - 1);
        sum[b] += c;
        count[b] += 1;
    }
    Ok((0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| DistanceBin {
            lo_deg: b as f64 * bin_deg,
            hi_deg: (b + 1) as f64 * bin_deg,
            count: count[b],
            mean_csim: sum[b] / count[b] as f64,
        })
        .collect())
}
