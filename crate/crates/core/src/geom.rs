//! Directions on the sphere, spherical distances, Fibonacci sampling and the
//! observation/validation sampling protocol.
//!
//! Azimuth is measured from +x in the xy-plane and colatitude from +z.

use core::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::prelude::*;

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    /// Radians in `[0, 2π)`.
    pub azimuth: f64,
    /// Radians in `[0, π]`.
    pub colatitude: f64,
}

impl Direction {
    /// Facing direction of the listener: +x on the horizontal plane.
    pub const FRONTAL: Direction = Direction { azimuth: 0.0, colatitude: PI / 2.0 };

    /// Builds a direction, wrapping the azimuth into `[0, 2π)`.
    pub fn new(azimuth: f64, colatitude: f64) -> Result<Self> {
        if !azimuth.is_finite() || !colatitude.is_finite() {
            return Err(Error::invalid("non-finite direction angle"));
        }
        if !(0.0..=PI).contains(&colatitude) {
            return Err(Error::invalid(format!("colatitude {colatitude} outside [0, π]")));
        }
        Ok(Self { azimuth: wrap_azimuth(azimuth), colatitude })
    }

    pub fn from_degrees(azimuth_deg: f64, colatitude_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), colatitude_deg.to_radians())
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (st, ct) = self.colatitude.sin_cos();
        let (sp, cp) = self.azimuth.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Direction of a nonzero vector.
    pub fn from_vector(v: Vec3) -> Result<Self> {
        cart_to_sph(v).map(|(d, _)| d)
    }
}

fn wrap_azimuth(a: f64) -> f64 {
    let w = a - TAU * (a / TAU).floor();
    // the floor reduction can round up to exactly 2π for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Collocation coordinate `(ω, m, s)`: angular frequency, microphone and source positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollocationPoint {
    pub omega: f64,
    pub mic: Vec3,
    pub src: Vec3,
}

impl CollocationPoint {
    pub fn new(omega: f64, mic: Vec3, src: Vec3) -> Result<Self> {
        if !omega.is_finite() || omega < 0.0 {
            return Err(Error::invalid(format!("angular frequency {omega} must be finite and non-negative")));
        }
        if mic.iter().chain(src.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite position"));
        }
        Ok(Self { omega, mic, src })
    }
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// `(r sinϑ cosφ, r sinϑ sinφ, r cosϑ)`.
pub fn sph_to_cart(d: Direction, radius: f64) -> Result<Vec3> {
    if !radius.is_finite() || !d.azimuth.is_finite() || !d.colatitude.is_finite() {
        return Err(Error::invalid("non-finite spherical coordinate"));
    }
    if radius <= 0.0 {
        return Err(Error::invalid(format!("radius {radius} must be positive")));
    }
    let u = d.unit_vector();
    Ok([radius * u[0], radius * u[1], radius * u[2]])
}

/// Inverse of [`sph_to_cart`]; the azimuth at the poles is reported as 0.
pub fn cart_to_sph(v: Vec3) -> Result<(Direction, f64)> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite vector"));
    }
    let r = norm(v);
    if r == 0.0 {
        return Err(Error::Singularity("zero vector has no direction".into()));
    }
    let colatitude = (v[2] / r).clamp(-1.0, 1.0).acos();
    let azimuth = if v[0] == 0.0 && v[1] == 0.0 { 0.0 } else { v[1].atan2(v[0]) };
    Ok((Direction { azimuth: wrap_azimuth(azimuth), colatitude }, r))
}

/// Chordal distance between two directions, in `[0, 2]`.
pub fn chordal_distance(a: Direction, b: Direction) -> f64 {
    let dt = ((b.colatitude - a.colatitude) / 2.0).sin();
    let dp = ((a.azimuth - b.azimuth) / 2.0).sin();
    let s = dt * dt + a.colatitude.sin() * b.colatitude.sin() * dp * dp;
    (2.0 * s.max(0.0).sqrt()).min(2.0)
}

/// Great-circle angle `2 asin(C/2)` in `[0, π]`.
pub fn angular_distance(a: Direction, b: Direction) -> f64 {
    2.0 * (chordal_distance(a, b) / 2.0).clamp(0.0, 1.0).asin()
}

/// Golden-angle spiral with the pole-free `(2k+1)/n` offset.
pub fn fibonacci_sphere(n: usize) -> Result<Vec<Direction>> {
    if n == 0 {
        return Err(Error::invalid("fibonacci_sphere needs at least one point"));
    }
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let step = TAU * (1.0 - 1.0 / golden);
    Ok((0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n as f64;
            Direction { azimuth: wrap_azimuth(step * k as f64), colatitude: z.clamp(-1.0, 1.0).acos() }
        })
        .collect())
}

fn nearest(dirs: &[Direction], target: Direction) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, d) in dirs.iter().enumerate() {
        let dist = angular_distance(*d, target);
        if dist < best_d {
            best_d = dist;
            best = k;
        }
    }
    best
}

/// Cluster-based observation sampling.
///
/// Every evaluation direction joins its nearest `n_obs`-point Fibonacci
/// centroid (ties go to the lower centroid index). One member is drawn per
/// non-empty cluster; the cluster holding the evaluation direction nearest to
/// `forced` returns that direction instead. Indices come back in centroid order.
pub fn cluster_sample(eval_dirs: &[Direction], n_obs: usize, forced: Direction, seed: u64) -> Result<Vec<usize>> {
    if eval_dirs.is_empty() {
        return Err(Error::invalid("cluster_sample needs a non-empty evaluation set"));
    }
    if n_obs == 0 || n_obs > eval_dirs.len() {
        return Err(Error::invalid(format!("n_obs = {n_obs} must lie in 1..={}", eval_dirs.len())));
    }
    let centroids = fibonacci_sphere(n_obs)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_obs];
    for (k, d) in eval_dirs.iter().enumerate() {
        members[nearest(&centroids, *d)].push(k);
    }
    let forced_idx = nearest(eval_dirs, forced);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_obs);
    for cluster in &members {
        if cluster.is_empty() {
            continue;
        }
        // draw first so the random stream does not depend on where `forced` lands
        let pick = cluster[rng.random_range(0..cluster.len())];
        if cluster.contains(&forced_idx) {
            out.push(forced_idx);
        } else {
            out.push(pick);
        }
    }
    Ok(out)
}

/// Shape of a gridded dataset: frequencies × microphones × source directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDims {
    pub freqs: usize,
    pub mics: usize,
    pub dirs: usize,
}

impl GridDims {
    pub fn len(&self) -> usize {
        self.freqs * self.mics * self.dirs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index contract `n = (f·I + i)·J + j`.
    #[inline]
    pub fn index(&self, f: usize, i: usize, j: usize) -> usize {
        (f * self.mics + i) * self.dirs + j
    }

    #[inline]
    pub fn unravel(&self, n: usize) -> (usize, usize, usize) {
        let j = n % self.dirs;
        let fi = n / self.dirs;
        (fi / self.mics, fi % self.mics, j)
    }
}

/// Train/validation partition of linear grid indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
}

/// Number of contiguous frequency blocks per (direction, channel).
pub const VALIDATION_BLOCKS: usize = 8;

/// Validation split on the frequency axis.
///
/// Keeps every second frequency, cuts the retained frequencies of each
/// (direction, channel) pair into eight contiguous blocks and holds out
/// `round(fraction · retained)` of them, spread over distinct blocks before
/// any block contributes twice.
pub fn validation_split(dims: GridDims, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("validation fraction {fraction} must lie in (0, 1)")));
    }
    if dims.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let retained: Vec<usize> = (0..dims.freqs).step_by(2).collect();
    let r = retained.len();
    let n_valid = ((fraction * r as f64).round() as usize).min(r.saturating_sub(1));
    let blocks: Vec<&[usize]> = {
        let size = r.div_ceil(VALIDATION_BLOCKS).max(1);
        retained.chunks(size).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(dims.len());
    let mut valid = Vec::new();
    let mut is_valid = vec![false; dims.freqs];
    for j in 0..dims.dirs {
        for i in 0..dims.mics {
            is_valid.iter_mut().for_each(|v| *v = false);
            // visit blocks in random order, one pick per visit, without replacement
            let mut pools: Vec<Vec<usize>> = blocks.iter().map(|b| b.to_vec()).collect();
            for p in pools.iter_mut() {
                p.shuffle(&mut rng);
            }
            let mut order: Vec<usize> = (0..pools.len()).collect();
            order.shuffle(&mut rng);
            let mut taken = 0;
            'outer: while taken < n_valid {
                let mut progressed = false;
                for &b in &order {
                    if taken == n_valid {
                        break 'outer;
                    }
                    if let Some(f) = pools[b].pop() {
                        is_valid[f] = true;
                        taken += 1;
                        progressed = true;
                    }
                }
                if !progressed {
                    break;
                }
            }
            for &f in &retained {
                let n = dims.index(f, i, j);
                if is_valid[f] {
                    valid.push(n);
                } else {
                    train.push(n);
                }
            }
        }
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok(Split { train, valid })
}
