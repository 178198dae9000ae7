//! Gridded field datasets, synthetic scenes, noise injection and the
//! observed/test split.

use core::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geom::{add, cluster_sample, dot, fibonacci_sphere, norm, sub, CollocationPoint, Direction, GridDims};
use crate::kernels::{source_direction, ShTables};
use crate::physics::{free_field, rigid_sphere_field, Medium};
use crate::prelude::*;
use crate::sphharm::{sh_basis, sh_len, ShCoefficients};

/// Source location relative to the head centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePosition {
    pub direction: Direction,
    pub radius: f64,
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
    pub note: String,
}

/// Complex measurements on an F×I×J grid, indexed `(f·I + i)·J + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDataset {
    pub frequencies_hz: Vec<f64>,
    pub mic_positions: Vec<Vec3>,
    pub sources: Vec<SourcePosition>,
    pub values: Vec<Complex64>,
    pub noise_var: f64,
    pub medium: Medium,
    pub head_center: Vec3,
    pub provenance: Provenance,
}

impl FieldDataset {
    /// Checks every invariant of the grid.
    pub fn validate(&self) -> Result<()> {
        let (f, i, j) = (self.frequencies_hz.len(), self.mic_positions.len(), self.sources.len());
        if f == 0 || i == 0 || j == 0 {
            return Err(Error::invalid(format!("empty grid {f}×{i}×{j}")));
        }
        if self.values.len() != f * i * j {
            return Err(Error::invalid(format!("values has {} entries, expected F·I·J = {}", self.values.len(), f * i * j)));
        }
        if self.frequencies_hz.iter().any(|x| !x.is_finite() || *x < 0.0) || self.frequencies_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("frequencies must be finite, non-negative and strictly increasing"));
        }
        if let Some(n) = self.values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {n}")));
        }
        if self.sources.iter().any(|s| !(s.radius > 0.0) || !s.radius.is_finite()) {
            return Err(Error::invalid("source radii must be positive"));
        }
        if !(self.noise_var >= 0.0) {
            return Err(Error::invalid(format!("noise variance {} must be non-negative", self.noise_var)));
        }
        Ok(())
    }

    pub fn dims(&self) -> GridDims {
        GridDims { freqs: self.frequencies_hz.len(), mics: self.mic_positions.len(), dirs: self.sources.len() }
    }

    pub fn omega(&self, f: usize) -> f64 {
        TAU * self.frequencies_hz[f]
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.frequencies_hz.len()).map(|f| self.omega(f)).collect()
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.sources.iter().map(|s| s.direction).collect()
    }

    pub fn source_position(&self, j: usize) -> Vec3 {
        let s = self.sources[j];
        let u = s.direction.unit_vector();
        add(self.head_center, [s.radius * u[0], s.radius * u[1], s.radius * u[2]])
    }

    pub fn point(&self, f: usize, i: usize, j: usize) -> CollocationPoint {
        CollocationPoint { omega: self.omega(f), mic: self.mic_positions[i], src: self.source_position(j) }
    }

    /// Every collocation point in index-contract order.
    pub fn points(&self) -> Vec<CollocationPoint> {
        let d = self.dims();
        (0..d.len())
            .map(|n| {
                let (f, i, j) = d.unravel(n);
                self.point(f, i, j)
            })
            .collect()
    }

    pub fn value(&self, f: usize, i: usize, j: usize) -> Complex64 {
        self.values[self.dims().index(f, i, j)]
    }

    /// Dataset restricted to the given source indices (in the given order).
    pub fn subset_dirs(&self, dirs: &[usize]) -> Result<Self> {
        if dirs.is_empty() || dirs.iter().any(|&j| j >= self.sources.len()) {
            return Err(Error::invalid("direction subset is empty or out of range"));
        }
        let d = self.dims();
        let mut values = Vec::with_capacity(d.freqs * d.mics * dirs.len());
        for f in 0..d.freqs {
            for i in 0..d.mics {
                values.extend(dirs.iter().map(|&j| self.values[d.index(f, i, j)]));
            }
        }
        Ok(Self { sources: dirs.iter().map(|&j| self.sources[j]).collect(), values, ..self.clone() })
    }

    /// Dataset restricted to the given frequency indices (increasing).
    pub fn subset_freqs(&self, freqs: &[usize]) -> Result<Self> {
        if freqs.is_empty() || freqs.windows(2).any(|w| w[1] <= w[0]) || freqs.iter().any(|&f| f >= self.frequencies_hz.len()) {
            return Err(Error::invalid("frequency subset must be non-empty, increasing and in range"));
        }
        let d = self.dims();
        let block = d.mics * d.dirs;
        let mut values = Vec::with_capacity(freqs.len() * block);
        for &f in freqs {
            values.extend_from_slice(&self.values[f * block..(f + 1) * block]);
        }
        Ok(Self { frequencies_hz: freqs.iter().map(|&f| self.frequencies_hz[f]).collect(), values, ..self.clone() })
    }
}

/// Scene generator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Sh,
    Sphere,
}

/// Parameters of a synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub kind: SceneKind,
    pub n_freqs: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub mic_positions: Vec<Vec3>,
    pub n_dirs: usize,
    pub source_radius: f64,
    pub sphere_radius: f64,
    pub sh_order: usize,
    /// AR(1) coefficient of the SH coefficients over frequency.
    pub smoothness: f64,
    pub head_center: Vec3,
    pub medium: Medium,
    pub seed: u64,
}

/// Four microphones on a 16 cm × 12 cm frame in the horizontal plane.
pub fn default_mics() -> Vec<Vec3> {
    vec![[0.08, 0.06, 0.0], [0.08, -0.06, 0.0], [-0.08, 0.06, 0.0], [-0.08, -0.06, 0.0]]
}

impl SceneConfig {
    pub fn sh_scene() -> Self {
        Self {
            kind: SceneKind::Sh,
            n_freqs: 128,
            f_min_hz: 62.5,
            f_max_hz: 8000.0,
            mic_positions: default_mics(),
            n_dirs: 240,
            source_radius: 1.5,
            sphere_radius: 0.09,
            sh_order: 4,
            smoothness: 0.95,
            head_center: [0.0; 3],
            medium: Medium::default(),
            seed: 0,
        }
    }

    pub fn sphere_scene() -> Self {
        Self { kind: SceneKind::Sphere, source_radius: 2.0, ..Self::sh_scene() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_freqs == 0 || self.n_dirs == 0 || self.mic_positions.is_empty() {
            return Err(Error::invalid("scene needs at least one frequency, microphone and direction"));
        }
        if !(self.f_min_hz > 0.0) || !(self.f_max_hz >= self.f_min_hz) || (self.n_freqs > 1 && self.f_max_hz == self.f_min_hz) {
            return Err(Error::invalid(format!("bad frequency range [{}, {}]", self.f_min_hz, self.f_max_hz)));
        }
        if !(self.source_radius > 0.0) || !(self.sphere_radius > 0.0) {
            return Err(Error::invalid("radii must be positive"));
        }
        if !(0.0..=1.0).contains(&self.smoothness) {
            return Err(Error::invalid(format!("smoothness {} must lie in [0, 1]", self.smoothness)));
        }
        Ok(())
    }

    /// Uniform frequency grid.
    pub fn frequencies(&self) -> Vec<f64> {
        if self.n_freqs == 1 {
            return vec![self.f_min_hz];
        }
        let step = (self.f_max_hz - self.f_min_hz) / (self.n_freqs - 1) as f64;
        (0..self.n_freqs).map(|k| self.f_min_hz + step * k as f64).collect()
    }

    fn empty_dataset(&self, generator: &str) -> Result<FieldDataset> {
        let dirs = fibonacci_sphere(self.n_dirs)?;
        Ok(FieldDataset {
            frequencies_hz: self.frequencies(),
            mic_positions: self.mic_positions.clone(),
            sources: dirs.into_iter().map(|d| SourcePosition { direction: d, radius: self.source_radius }).collect(),
            values: Vec::new(),
            noise_var: 0.0,
            medium: self.medium,
            head_center: self.head_center,
            provenance: Provenance { generator: generator.into(), seed: self.seed, note: String::new() },
        })
    }
}

/// Scale `κ` that makes the generated `Ψ` have unit mean power over the sphere
/// when degree-`l` variance is `κ/(2l+1)²`.
pub fn degree_scale(order: usize) -> f64 {
    4.0 * PI / (0..=order).map(|l| 1.0 / (2 * l + 1) as f64).sum::<f64>()
}

fn complex_normal(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    Complex64::new(s * a, s * b)
}

/// Draws the per-(frequency, microphone) coefficient table of an sh-scene.
pub fn draw_sh_coefficients(cfg: &SceneConfig) -> Result<ShTables> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_mic = cfg.mic_positions.len();
    let k = sh_len(cfg.sh_order);
    let kappa = degree_scale(cfg.sh_order);
    let rho = cfg.smoothness;
    let innov = (1.0 - rho * rho).max(0.0).sqrt();
    let mut table = vec![Complex64::new(0.0, 0.0); cfg.n_freqs * n_mic * k];
    for i in 0..n_mic {
        for l in 0..=cfg.sh_order {
            let var = kappa / ((2 * l + 1) * (2 * l + 1)) as f64;
            for m in -(l as isize)..=(l as isize) {
                let idx = crate::sphharm::sh_index(l, m);
                let mut c = complex_normal(&mut rng, var);
                for f in 0..cfg.n_freqs {
                    if f > 0 {
                        c = c * rho + complex_normal(&mut rng, var) * innov;
                    }
                    table[(f * n_mic + i) * k + idx] = c;
                }
            }
        }
    }
    let coeffs = table.chunks(k).map(|c| ShCoefficients::new(cfg.sh_order, c.to_vec())).collect::<Result<Vec<_>>>()?;
    let knots = cfg.frequencies().iter().map(|f| TAU * f).collect();
    ShTables::new(cfg.sh_order, knots, cfg.mic_positions.clone(), coeffs)
}

/// `h = h^d · Σ c_lm(ω, m) Y_l^m(Ω_{s,q0})` for given coefficient tables.
pub fn gen_sh_scene_with(cfg: &SceneConfig, truth: &ShTables) -> Result<FieldDataset> {
    let mut ds = cfg.empty_dataset("sh-scene")?;
    let d = ds.dims();
    let bases: Vec<Vec<Complex64>> = (0..d.dirs)
        .map(|j| source_direction(ds.source_position(j), ds.head_center).map(|dir| sh_basis(truth.order, dir)))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(d.len());
    for f in 0..d.freqs {
        for i in 0..d.mics {
            let c = truth.lookup(ds.omega(f), ds.mic_positions[i])?;
            for (j, y) in bases.iter().enumerate() {
                let z = ds.point(f, i, j);
                let psi: Complex64 = c.iter().zip(y).map(|(a, b)| a * b).sum();
                values.push(free_field(z.omega, z.mic, z.src, ds.medium)? * psi);
            }
        }
    }
    ds.values = values;
    ds.validate()?;
    Ok(ds)
}

/// Model-matched scene; returns the dataset and its ground-truth coefficients.
pub fn gen_sh_scene(cfg: &SceneConfig) -> Result<(FieldDataset, ShTables)> {
    let truth = draw_sh_coefficients(cfg)?;
    let ds = gen_sh_scene_with(cfg, &truth)?;
    Ok((ds, truth))
}

fn check_outside_sphere(cfg: &SceneConfig) -> Result<()> {
    for (i, m) in cfg.mic_positions.iter().enumerate() {
        let r = norm(sub(*m, cfg.head_center));
        if r < cfg.sphere_radius {
            return Err(Error::invalid(format!("microphone {i} lies inside the sphere ({r} m < {} m)", cfg.sphere_radius)));
        }
    }
    Ok(())
}

/// Rigid-sphere pressure at every microphone for a unit plane wave arriving
/// from `dir` at angular frequency `omega`.
pub fn sphere_steering_vector(cfg: &SceneConfig, omega: f64, dir: Direction) -> Result<Vec<Complex64>> {
    check_outside_sphere(cfg)?;
    let u = dir.unit_vector();
    cfg.mic_positions
        .iter()
        .map(|m| {
            let rel = sub(*m, cfg.head_center);
            let r = norm(rel);
            let cos = if r > 0.0 { (dot(rel, u) / r).clamp(-1.0, 1.0) } else { 1.0 };
            rigid_sphere_field(omega, cfg.sphere_radius, r, cos, cfg.medium, None)
        })
        .collect()
}

/// Rigid-sphere scattering of unit plane waves arriving from each source
/// direction; the source radius is nominal.
pub fn gen_sphere_scene(cfg: &SceneConfig) -> Result<FieldDataset> {
    let oracle = SceneOracle::new(cfg)?;
    let mut ds = cfg.empty_dataset("sphere-scene")?;
    ds.values = ds.points().iter().map(|z| oracle.value(z)).collect::<Result<_>>()?;
    ds.validate()?;
    Ok(ds)
}

/// Exact field of a synthetic scene at arbitrary points.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneOracle {
    pub config: SceneConfig,
    truth: Option<ShTables>,
}

impl SceneOracle {
    /// Redraws the planted coefficients for sh-scenes from the config seed.
    pub fn new(cfg: &SceneConfig) -> Result<Self> {
        cfg.validate()?;
        let truth = match cfg.kind {
            SceneKind::Sh => Some(draw_sh_coefficients(cfg)?),
            SceneKind::Sphere => {
                check_outside_sphere(cfg)?;
                None
            }
        };
        Ok(Self { config: cfg.clone(), truth })
    }

    pub fn value(&self, z: &CollocationPoint) -> Result<Complex64> {
        let cfg = &self.config;
        let dir = source_direction(z.src, cfg.head_center)?;
        match &self.truth {
            Some(t) => {
                let c = t.lookup(z.omega, z.mic)?;
                let psi: Complex64 = c.iter().zip(sh_basis(t.order, dir)).map(|(a, b)| a * b).sum();
                Ok(free_field(z.omega, z.mic, z.src, cfg.medium)? * psi)
            }
            None => {
                let rel = sub(z.mic, cfg.head_center);
                let r = norm(rel);
                let cos = if r > 0.0 { (dot(rel, dir.unit_vector()) / r).clamp(-1.0, 1.0) } else { 1.0 };
                rigid_sphere_field(z.omega, cfg.sphere_radius, r, cos, cfg.medium, None)
            }
        }
    }

    /// Field at every microphone for a source in direction `dir` at the scene radius.
    pub fn steering_vector(&self, omega: f64, dir: Direction) -> Result<Vec<Complex64>> {
        let cfg = &self.config;
        let u = dir.unit_vector();
        let src = add(cfg.head_center, [cfg.source_radius * u[0], cfg.source_radius * u[1], cfg.source_radius * u[2]]);
        cfg.mic_positions.iter().map(|m| self.value(&CollocationPoint { omega, mic: *m, src })).collect()
    }
}

/// Builds the scene described by `cfg`.
pub fn generate(cfg: &SceneConfig) -> Result<FieldDataset> {
    match cfg.kind {
        SceneKind::Sh => Ok(gen_sh_scene(cfg)?.0),
        SceneKind::Sphere => gen_sphere_scene(cfg),
    }
}

/// Adds circularly-symmetric complex Gaussian noise of variance `σ²`.
pub fn add_noise(ds: &FieldDataset, noise_var: f64, seed: u64) -> Result<FieldDataset> {
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::invalid(format!("noise variance {noise_var} must be finite and non-negative")));
    }
    let mut out = ds.clone();
    out.noise_var = noise_var;
    if noise_var == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.values.iter_mut() {
        *v += complex_normal(&mut rng, noise_var);
    }
    Ok(out)
}

/// Observed/test partition of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSplit {
    pub train: FieldDataset,
    pub test: FieldDataset,
    /// Indices of the observed directions in the full set.
    pub observed: Vec<usize>,
}

/// Cluster-samples `n_obs` observed directions (always including the one
/// nearest `forced`); the test set is the full dataset.
pub fn split_observed(ds: &FieldDataset, n_obs: usize, forced: Direction, seed: u64) -> Result<ObservedSplit> {
    let observed = cluster_sample(&ds.directions(), n_obs, forced, seed)?;
    Ok(ObservedSplit { train: ds.subset_dirs(&observed)?, test: ds.clone(), observed })
}
