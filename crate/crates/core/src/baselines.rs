//! Interpolators the proposed model is compared against: nearest neighbour,
//! SH ridge regression, kernel ridge regression, the chordal-Matérn GP and
//! three coordinate-network variants.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{FieldDataset, SceneOracle};
use crate::geom::{angular_distance, validation_split, CollocationPoint, Direction};
use crate::gpr::model::stratified_subset;
use crate::gpr::train::normalizer_for;
use crate::gpr::{DenseGp, GprModel, ModelKernel, ModelProvenance, DEFAULT_PREDICTION_CAP};
use crate::kernels::{source_direction, spectral_kernel, ChmatKernel, ChmatParams, Kernel, ShTables};
use crate::linalg::{Matrix, Scalar};
use crate::nfield::{
    clip_gradients, nf_backward_tape, nf_forward, nf_forward_tape, to_complex, Adam, Coordinate, LrSchedule, NfArchitecture, NfParams,
    Normalizer, RawCoord, INPUT_DIM,
};
use crate::physics::{free_field, geometric_warp, Medium};
use crate::prelude::*;
use crate::sphharm::{order_for_directions, ridge_solve, sh_basis, sh_len};

/// Anything that maps collocation points to predicted field values.
pub trait Interpolator {
    fn predict_values(&self, queries: &[CollocationPoint]) -> Result<Vec<Complex64>>;
}

impl Interpolator for GprModel {
    fn predict_values(&self, queries: &[CollocationPoint]) -> Result<Vec<Complex64>> {
        Ok(self.predict(queries)?.mean)
    }
}

impl Interpolator for SceneOracle {
    fn predict_values(&self, queries: &[CollocationPoint]) -> Result<Vec<Complex64>> {
        queries.iter().map(|z| self.value(z)).collect()
    }
}

fn frequency_index(omegas: &[f64], omega: f64) -> Result<usize> {
    let tol = 1e-9 * omegas.iter().fold(omega.abs(), |a, b| a.max(b.abs()));
    omegas
        .iter()
        .position(|w| (w - omega).abs() <= tol)
        .ok_or_else(|| Error::invalid(format!("frequency {omega} rad/s is not on the training grid")))
}

fn mic_index(mics: &[Vec3], mic: Vec3) -> Result<usize> {
    mics.iter().position(|m| *m == mic).ok_or_else(|| Error::invalid(format!("unknown microphone {mic:?}")))
}

/// Index of the angularly nearest direction; ties go to the lowest index.
pub fn nearest_direction(dirs: &[Direction], query: Direction) -> Result<usize> {
    if dirs.is_empty() {
        return Err(Error::invalid("nearest-neighbour search over an empty set"));
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, d) in dirs.iter().enumerate() {
        let a = angular_distance(*d, query);
        if a < best_d {
            best = k;
            best_d = a;
        }
    }
    Ok(best)
}

/// Value of the nearest training direction for one (frequency, channel) slice.
pub fn nn_interp(train_dirs: &[Direction], train_values: &[Complex64], query: Direction) -> Result<Complex64> {
    if train_dirs.len() != train_values.len() {
        return Err(Error::invalid("one training value per direction is required"));
    }
    Ok(train_values[nearest_direction(train_dirs, query)?])
}

/// Nearest-neighbour interpolator over the observed directions.
#[derive(Debug, Clone, PartialEq)]
pub struct NnInterpolator {
    pub observed: FieldDataset,
}

impl NnInterpolator {
    pub fn fit(observed: &FieldDataset) -> Result<Self> {
        observed.validate()?;
        Ok(Self { observed: observed.clone() })
    }
}

impl Interpolator for NnInterpolator {
    fn predict_values(&self, queries: &[CollocationPoint]) -> Result<Vec<Complex64>> {
        let ds = &self.observed;
        let omegas = ds.omegas();
        let dirs = ds.directions();
        queries
            .iter()
            .map(|z| {
                let f = frequency_index(&omegas, z.omega)?;
                let i = mic_index(&ds.mic_positions, z.mic)?;
                let j = nearest_direction(&dirs, source_direction(z.src, ds.head_center)?)?;
                Ok(ds.value(f, i, j))
            })
            .collect()
    }
}

/// Per-(frequency, channel) SH ridge regression of the raw values.
#[derive(Debug, Clone, PartialEq)]
pub struct ShRidgeInterpolator {
    pub tables: ShTables,
    pub head_center: Vec3,
}

/// Default ridge weight of the SH baseline.
pub const SH_RIDGE_LAMBDA: f64 = 1e-5;

impl ShRidgeInterpolator {
    /// Order defaults to `⌊√D − 1⌋` for `D` observed directions.
    pub fn fit(observed: &FieldDataset, order: Option<usize>, lambda: f64) -> Result<Self> {
        observed.validate()?;
        let d = observed.dims();
        let order = order.unwrap_or_else(|| order_for_directions(d.dirs));
        let basis: Vec<Vec<Complex64>> = observed.directions().iter().map(|u| sh_basis(order, *u)).collect();
        let mut coeffs = Vec::with_capacity(d.freqs * d.mics);
        for f in 0..d.freqs {
            for i in 0..d.mics {
                let y: Vec<Complex64> = (0..d.dirs).map(|j| observed.value(f, i, j)).collect();
                coeffs.push(ridge_solve(&basis, &y, order, lambda)?);
            }
        }
        let tables = ShTables::new(order, observed.omegas(), observed.mic_positions.clone(), coeffs)?;
        Ok(Self { tables, head_center: observed.head_center })
    }
}

impl Interpolator for ShRidgeInterpolator {
    fn predict_values(&self, queries: &[CollocationPoint]) -> Result<Vec<Complex64>> {
        queries
            .iter()
            .map(|z| {
                let c = self.tables.lookup(z.omega, z.mic)?;
                let y = sh_basis(self.tables.order, source_direction(z.src, self.head_center)?);
                Ok(c.iter().zip(&y).map(|(a, b)| a * b).sum())
            })
            .collect()
    }
}

/// Kernel ridge regression `α̂ = (K + λI)^{-1} y`.
#[derive(Debug, Clone)]
pub struct KrrFit<K: Kernel> {
    pub kernel: K,
    feats: Vec<K::Feature>,
    coef: Vec<Complex64>,
}

pub fn krr_fit<K: Kernel>(points: &[CollocationPoint], y: &[Complex64], kernel: K, lambda: f64) -> Result<KrrFit<K>> {
    if points.is_empty() || points.len() != y.len() {
        return Err(Error::invalid("KRR needs matching non-empty points and targets"));
    }
    let feats = points.iter().map(|z| kernel.feature(z)).collect::<Result<Vec<_>>>()?;
    let n = feats.len();
    let k = Matrix::from_fn(n, n, |a, b| kernel.eval_features(&feats[a], &feats[b]));
    let gp = DenseGp::new(&k, lambda, y.to_vec())?;
    Ok(KrrFit { coef: gp.weights().to_vec(), kernel, feats })
}

/// `ĥ(z) = Σ_n k(z, z_n) α̂_n`.
pub fn krr_predict<K: Kernel>(fit: &KrrFit<K>, query: &CollocationPoint) -> Result<Complex64> {
    let q = fit.kernel.feature(query)?;
    Ok(fit.feats.iter().zip(&fit.coef).map(|(f, a)| fit.kernel.eval_features(&q, f).to_complex() * a).sum())
}

impl<K: Kernel> KrrFit<K> {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coef
    }
}

/// Fixed hyperparameters of the KRR baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrrConfig {
    /// Chordal length scale of the Matérn factor.
    pub ell_d: f64,
    /// Spectral decay in units of the frequency step.
    pub ell_steps: f64,
    /// Ridge weight relative to the kernel diagonal.
    pub lambda: f64,
    pub prediction_cap: usize,
}

impl Default for KrrConfig {
    fn default() -> Self {
        Self { ell_d: 0.5, ell_steps: 2.0, lambda: 1e-3, prediction_cap: DEFAULT_PREDICTION_CAP }
    }
}

/// Per-channel KRR with the spectral × chordal-Matérn kernel.
#[derive(Debug, Clone)]
pub struct KrrInterpolator {
    pub params: ChmatParams,
    pub lambda: f64,
    channels: Vec<(Vec3, KrrFit<ChmatKernel>)>,
}

impl KrrInterpolator {
    pub fn fit(observed: &FieldDataset, cfg: &KrrConfig) -> Result<Self> {
        observed.validate()?;
        if !(cfg.ell_d > 0.0 && cfg.ell_steps > 0.0 && cfg.lambda > 0.0) {
            return Err(Error::invalid("KRR length scales and ridge weight must be positive"));
        }
        let ell = cfg.ell_steps * frequency_step(&observed.omegas());
        let params = ChmatParams { alpha: ell * ell, ell, ell_d: cfg.ell_d, centre: observed.head_center };
        let pts = observed.points();
        let keep = stratified_subset(&pts, cfg.prediction_cap);
        let mut channels = Vec::new();
        for &mic in &observed.mic_positions {
            let idx: Vec<usize> = keep.iter().copied().filter(|&n| pts[n].mic == mic).collect();
            let p: Vec<CollocationPoint> = idx.iter().map(|&n| pts[n]).collect();
            let y: Vec<Complex64> = idx.iter().map(|&n| observed.values[n]).collect();
            channels.push((mic, krr_fit(&p, &y, ChmatKernel(params), cfg.lambda)?));
        }
        Ok(Self { params, lambda: cfg.lambda, channels })
    }
}

impl Interpolator for KrrInterpolator {
    fn predict_values(&self, queries: &[CollocationPoint]) -> Result<Vec<Complex64>> {
        queries
            .iter()
            .map(|z| match self.channels.iter().find(|(m, _)| *m == z.mic) {
                Some((_, f)) => krr_predict(f, z),
                None => Err(Error::invalid(format!("unknown microphone {:?}", z.mic))),
            })
            .collect()
    }
}

fn frequency_step(omegas: &[f64]) -> f64 {
    let step = omegas.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if step.is_finite() {
        step
    } else {
        omegas[0].abs().max(1.0)
    }
}

/// Training settings of the chordal-Matérn GP baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ChmatFitConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub ell_d_init: f64,
    pub prediction_cap: usize,
    pub seed: u64,
}

impl Default for ChmatFitConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            batch_size: 512,
            lr: 0.05,
            clip_norm: 1.0,
            ell_d_init: 0.5,
            prediction_cap: DEFAULT_PREDICTION_CAP,
            seed: 0,
        }
    }
}

/// NLL of one channel batch and its gradient in `(ln α, ln ℓ, ln ℓ_d, ln σ²)`.
fn chmat_objective(p: &ChmatParams, noise_var: f64, feats: &[(f64, Vec3)], y: &[Complex64]) -> Result<(f64, [f64; 4])> {
    let n = feats.len();
    let k = ChmatKernel(*p);
    let gram = Matrix::from_fn(n, n, |a, b| k.eval_features(&feats[a], &feats[b]));
    let gp = DenseGp::new(&gram, noise_var, y.to_vec())?;
    let s3 = 3f64.sqrt();
    let d_ell = Matrix::from_fn(n, n, |a, b| {
        let dw = feats[a].0 - feats[b].0;
        let q = p.ell * p.ell + dw * dw;
        let m = gram[(a, b)] / spectral_kernel(feats[a].0, feats[b].0, p.alpha, p.ell);
        -2.0 * p.ell * p.ell * p.alpha / (q * q) * m
    });
    let d_elld = Matrix::from_fn(n, n, |a, b| {
        let u = sub3(feats[a].1, feats[b].1);
        let s = s3 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt() / p.ell_d;
        spectral_kernel(feats[a].0, feats[b].0, p.alpha, p.ell) * s * s * (-s).exp()
    });
    let g = gp.nll_gradient(&[gram.clone(), d_ell, d_elld, Matrix::identity(n).scaled(noise_var)]);
    Ok((gp.nll(), [g[0], g[1], g[2], g[3]]))
}

fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Trains `(α, ℓ, ℓ_d, σ²)` shared by all channels on per-channel minibatch
/// likelihoods, then conditions one GP per channel on the observed points.
pub fn gp_chmat_fit(observed: &FieldDataset, cfg: &ChmatFitConfig) -> Result<(GprModel, Vec<f64>)> {
    observed.validate()?;
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) || !(cfg.ell_d_init > 0.0) {
        return Err(Error::invalid("chordal-Matérn fit needs a positive batch size, learning rate and length scale"));
    }
    let pts = observed.points();
    let k0 = ChmatKernel(ChmatParams { alpha: 1.0, ell: 1.0, ell_d: 1.0, centre: observed.head_center });
    let feats = pts.iter().map(|z| k0.feature(z)).collect::<Result<Vec<_>>>()?;
    let ell = 2.0 * frequency_step(&observed.omegas());
    let power = observed.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / observed.values.len() as f64;
    let mut v =
        [(power.max(f64::MIN_POSITIVE) * ell * ell).ln(), ell.ln(), cfg.ell_d_init.ln(), (1e-2 * power).max(f64::MIN_POSITIVE).ln()];
    let mut adam = Adam::new(4);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pools: Vec<Vec<usize>> =
        observed.mic_positions.iter().map(|m| (0..pts.len()).filter(|&n| pts[n].mic == *m).collect()).collect();
    let mut losses = Vec::with_capacity(cfg.iterations);
    let unpack =
        |v: &[f64; 4]| (ChmatParams { alpha: v[0].exp(), ell: v[1].exp(), ell_d: v[2].exp(), centre: observed.head_center }, v[3].exp());
    for step in 0..cfg.iterations {
        let (p, s2) = unpack(&v);
        let mut total = 0.0;
        let mut grad = [0.0; 4];
        for pool in pools.iter_mut() {
            let b = cfg.batch_size.min(pool.len());
            let (batch, _) = pool.partial_shuffle(&mut rng, b);
            let f: Vec<(f64, Vec3)> = batch.iter().map(|&n| feats[n]).collect();
            let y: Vec<Complex64> = batch.iter().map(|&n| observed.values[n]).collect();
            let (l, g) = chmat_objective(&p, s2, &f, &y).map_err(|e| Error::Numeric(format!("step {step}: {e}")))?;
            total += l;
            for k in 0..4 {
                grad[k] += g[k];
            }
        }
        clip_gradients(&mut grad, cfg.clip_norm);
        adam.update(&mut v, &grad, cfg.lr)?;
        losses.push(total);
    }
    let (p, s2) = unpack(&v);
    let keep = stratified_subset(&pts, cfg.prediction_cap);
    let model = GprModel::new(
        ModelKernel::Chmat { params: p, noise_var: s2 },
        keep.iter().map(|&n| pts[n]).collect(),
        keep.iter().map(|&n| observed.values[n]).collect(),
        cfg.prediction_cap,
        ModelProvenance { seed: cfg.seed, config_digest: crate::gpr::train::fnv1a64(format!("{cfg:?}").as_bytes()) },
    )?;
    Ok((model, losses))
}

/// Which field the network output is turned into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NfVariant {
    /// `ĥ = MLP(PE(z))`.
    Direct,
    /// `ĥ = a(z, q) F_θ(z)` with the geometric warp about `q`.
    GeometricWarp { reference: Vec3 },
    /// `ĥ = h^d(z) Σ c_θ,lm(z) Y_l^m(Ω_{s,q0})`.
    Pcnn,
}

/// Training settings shared by the network baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct NfFitConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_base: f64,
    pub lr_floor: f64,
    pub warmup_steps: u64,
    pub clip_norm: f64,
    pub encoding: usize,
    pub hidden: Vec<usize>,
    pub gains: [f64; INPUT_DIM],
    /// SH order of the physics-constrained head; `None` uses `⌊√D − 1⌋`.
    pub order: Option<usize>,
    pub seed: u64,
    /// Share of points held out for checkpoint selection; zero keeps the last step.
    pub validation_fraction: f64,
    pub checkpoint_every: usize,
}

impl Default for NfFitConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            batch_size: 1024,
            lr_start: 1e-4,
            lr_base: 1e-3,
            lr_floor: 1e-5,
            warmup_steps: 100,
            clip_norm: 1.0,
            encoding: 128,
            hidden: vec![128, 128, 128],
            gains: [10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            order: None,
            seed: 0,
            validation_fraction: 0.1,
            checkpoint_every: 100,
        }
    }
}

/// A trained coordinate-network predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct NfPredictor {
    pub variant: NfVariant,
    pub nf: NfParams,
    pub normalizer: Normalizer,
    pub head_center: Vec3,
    pub medium: Medium,
}

impl NfPredictor {
    /// Coefficients `a_k` with `ĥ = Σ_k a_k o_k` for network outputs `o_k`.
    fn multipliers(&self, z: &CollocationPoint) -> Result<Vec<Complex64>> {
        match self.variant {
            NfVariant::Direct => Ok(vec![Complex64::new(1.0, 0.0)]),
            NfVariant::GeometricWarp { reference } => Ok(vec![geometric_warp(z.omega, z.mic, z.src, reference, self.medium)?]),
            NfVariant::Pcnn => {
                let hd = free_field(z.omega, z.mic, z.src, self.medium)?;
                let y = sh_basis(self.nf.arch.order, source_direction(z.src, self.head_center)?);
                Ok(y.into_iter().map(|v| v * hd).collect())
            }
        }
    }

    /// Raw network output `F_θ(z)` (first coefficient for the scalar variants).
    pub fn network_output(&self, z: &CollocationPoint) -> Vec<Complex64> {
        let x = RawCoord::new(z.omega, z.src, z.mic).normalized(&self.normalizer);
        nf_forward(&self.nf, &x).into_values()
    }
}

impl Interpolator for NfPredictor {
    fn predict_values(&self, queries: &[CollocationPoint]) -> Result<Vec<Complex64>> {
        queries
            .iter()
            .map(|z| {
                let a = self.multipliers(z)?;
                Ok(self.network_output(z).iter().zip(&a).map(|(o, m)| o * m).sum())
            })
            .collect()
    }
}

/// Validation checkpoint of a network fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NfCheckpoint {
    pub step: usize,
    /// Mean batch loss since the previous checkpoint.
    pub train_loss: Option<f64>,
    pub valid_mse: Option<f64>,
}

/// Training record of a network fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NfFitReport {
    pub losses: Vec<f64>,
    pub checkpoints: Vec<NfCheckpoint>,
    pub best_step: usize,
}

fn mse(pred: &NfPredictor, xs: &[crate::nfield::NormCoord], mults: &[Vec<Complex64>], y: &[Complex64], idx: &[usize]) -> f64 {
    let mut acc = 0.0;
    for &n in idx {
        let o = nf_forward(&pred.nf, &xs[n]).into_values();
        let h: Complex64 = o.iter().zip(&mults[n]).map(|(a, m)| a * m).sum();
        acc += (h - y[n]).norm_sqr();
    }
    acc / idx.len() as f64
}

/// Trains a network baseline by re/im mean squared error.
///
/// Points of the frequency-block validation split are held out and scored at
/// every checkpoint; the best checkpoint is returned.
pub fn nf_fit(observed: &FieldDataset, cfg: &NfFitConfig, variant: NfVariant) -> Result<(NfPredictor, NfFitReport)> {
    observed.validate()?;
    if cfg.batch_size == 0 || cfg.encoding == 0 || !(cfg.clip_norm > 0.0) || cfg.checkpoint_every == 0 {
        return Err(Error::invalid("network fit needs positive batch size, encoding width, clip norm and checkpoint interval"));
    }
    let order = match variant {
        NfVariant::Pcnn => cfg.order.unwrap_or_else(|| order_for_directions(observed.sources.len())),
        _ => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let arch = NfArchitecture::new(cfg.encoding, cfg.hidden.clone(), order)?;
    let mut pred = NfPredictor {
        variant,
        nf: NfParams::init(arch, cfg.gains, &mut rng),
        normalizer: normalizer_for(observed)?,
        head_center: observed.head_center,
        medium: observed.medium,
    };
    let pts = observed.points();
    let y = &observed.values;
    let xs: Vec<_> = pts.iter().map(|z| RawCoord::new(z.omega, z.src, z.mic).normalized(&pred.normalizer)).collect();
    let mults = pts.iter().map(|z| pred.multipliers(z)).collect::<Result<Vec<_>>>()?;
    debug_assert!(mults.iter().all(|m| m.len() == sh_len(order)));
    let valid = if cfg.validation_fraction > 0.0 {
        validation_split(observed.dims(), cfg.validation_fraction, cfg.seed)?.valid
    } else {
        Vec::new()
    };
    let mut held = vec![false; pts.len()];
    valid.iter().for_each(|&n| held[n] = true);
    let mut pool: Vec<usize> = (0..pts.len()).filter(|&n| !held[n]).collect();
    let schedule = LrSchedule::new(cfg.lr_start, cfg.lr_base, cfg.warmup_steps, cfg.lr_floor);
    let mut adam = Adam::new(pred.nf.len());
    let mut losses = Vec::with_capacity(cfg.iterations);
    let mut checkpoints = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let (mut since, mut count) = (0.0, 0usize);
    for step in 0..=cfg.iterations {
        if step % cfg.checkpoint_every == 0 || step == cfg.iterations {
            let v = (!valid.is_empty()).then(|| mse(&pred, &xs, &mults, y, &valid));
            checkpoints.push(NfCheckpoint { step, train_loss: (count > 0).then(|| since / count as f64), valid_mse: v });
            (since, count) = (0.0, 0);
            if let Some(v) = v {
                if best.as_ref().is_none_or(|b| v < b.0) {
                    best = Some((v, step, pred.nf.theta.clone()));
                }
            }
        }
        if step == cfg.iterations {
            break;
        }
        let b = cfg.batch_size.min(pool.len());
        let (batch, _) = pool.partial_shuffle(&mut rng, b);
        let mut grad = vec![0.0; pred.nf.len()];
        let mut loss = 0.0;
        for &n in batch.iter() {
            let (out, tape) = nf_forward_tape(&pred.nf, &xs[n]);
            let o = to_complex(&out);
            let h: Complex64 = o.iter().zip(&mults[n]).map(|(a, m)| a * m).sum();
            let r = h - y[n];
            loss += r.norm_sqr();
            let u: Vec<Complex64> = mults[n].iter().map(|m| m.conj() * r * (2.0 / b as f64)).collect();
            nf_backward_tape(&pred.nf, &tape, &u, &mut grad)?;
        }
        let loss = loss / b as f64;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("step {step}: non-finite loss or gradient")));
        }
        clip_gradients(&mut grad, cfg.clip_norm);
        adam.update(&mut pred.nf.theta, &grad, schedule.at(step as u64))?;
        losses.push(loss);
        since += loss;
        count += 1;
    }
    let best_step = match best {
        Some((_, s, theta)) => {
            pred.nf.theta = theta;
            s
        }
        None => cfg.iterations,
    };
    Ok((pred, NfFitReport { losses, checkpoints, best_step }))
}

pub fn nf_direct_fit(observed: &FieldDataset, cfg: &NfFitConfig) -> Result<(NfPredictor, NfFitReport)> {
    nf_fit(observed, cfg, NfVariant::Direct)
}

pub fn nf_gw_fit(observed: &FieldDataset, cfg: &NfFitConfig, reference: Vec3) -> Result<(NfPredictor, NfFitReport)> {
    nf_fit(observed, cfg, NfVariant::GeometricWarp { reference })
}

pub fn pcnn_fit(observed: &FieldDataset, cfg: &NfFitConfig) -> Result<(NfPredictor, NfFitReport)> {
    nf_fit(observed, cfg, NfVariant::Pcnn)
}

/// Predictions of `model` on every point of `ds` in index-contract order.
pub fn predict_dataset<I: Interpolator + ?Sized>(model: &I, ds: &FieldDataset) -> Result<Vec<Complex64>> {
    model.predict_values(&ds.points())
}
