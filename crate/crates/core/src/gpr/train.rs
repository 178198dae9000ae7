//! Regularized marginal-likelihood training of the composite kernel.

use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::FieldDataset;
use crate::geom::{fibonacci_sphere, norm, sub, validation_split, CollocationPoint, Direction};
use crate::kernels::{source_direction, CoefficientModel, CompositeKernelParams, ShTables};
use crate::nfield::{
    clip_gradients, nf_backward_tape, nf_forward_tape, to_complex, Adam, Coordinate, LrSchedule, NfArchitecture, NfParams, NormCoord,
    Normalizer, RawCoord, Tape, INPUT_DIM,
};
use crate::physics::free_field;
use crate::prelude::*;
use crate::sphharm::{order_for_directions, ridge_solve, sh_basis, sh_len, spectrum_of, ShCoefficients};

use super::factored::FactoredGp;
use super::model::{GprModel, ModelKernel, ModelProvenance, DEFAULT_PREDICTION_CAP};

/// Number of leading optimizer entries holding `ln α`, `ln ℓ`, `ln σ²`.
pub const SCALAR_PARAMS: usize = 3;

/// Training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_base: f64,
    pub lr_floor: f64,
    pub warmup_steps: u64,
    pub lambda_l1: f64,
    pub lambda_exp: f64,
    pub pretrain_iterations: usize,
    /// Augmented directions per observed direction during pretraining.
    pub augment_factor: usize,
    pub prediction_cap: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub checkpoint_every: usize,
    pub clip_norm: f64,
    pub encoding: usize,
    pub hidden: Vec<usize>,
    pub gains: [f64; INPUT_DIM],
    /// SH order of the network head; `None` picks two above the table order.
    pub nf_order: Option<usize>,
    /// Ridge weight of the low-order table fits.
    pub table_lambda: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            batch_size: 1024,
            lr_start: 1e-4,
            lr_base: 1e-3,
            lr_floor: 1e-5,
            warmup_steps: 100,
            lambda_l1: 1e-3,
            lambda_exp: 1e-2,
            pretrain_iterations: 100,
            augment_factor: 4,
            prediction_cap: DEFAULT_PREDICTION_CAP,
            seed: 0,
            validation_fraction: 0.1,
            checkpoint_every: 100,
            clip_norm: 1.0,
            encoding: 128,
            hidden: vec![128, 128],
            gains: [1.0, 1.0, 1.0, 1.0, 100.0, 100.0, 100.0],
            nf_order: None,
            table_lambda: 1e-5,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.checkpoint_every == 0 || self.prediction_cap == 0 || self.encoding == 0 {
            return Err(Error::invalid("batch size, checkpoint interval, prediction cap and encoding width must be positive"));
        }
        if self.augment_factor == 0 && self.pretrain_iterations > 0 {
            return Err(Error::invalid("pretraining needs a positive augmentation factor"));
        }
        if !(self.lambda_l1 >= 0.0) || !(self.lambda_exp >= 0.0) || !(self.table_lambda >= 0.0) {
            return Err(Error::invalid("regularization weights must be non-negative"));
        }
        if !(self.lr_start >= 0.0 && self.lr_base > 0.0 && self.lr_floor >= 0.0) || !(self.clip_norm > 0.0) {
            return Err(Error::invalid("learning rates and clip norm must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid(format!("validation fraction {} must lie in (0, 1)", self.validation_fraction)));
        }
        if self.gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("input gains must be finite"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule::new(self.lr_start, self.lr_base, self.warmup_steps, self.lr_floor)
    }

    /// FNV-1a digest of every field.
    pub fn digest(&self) -> u64 {
        fnv1a64(format!("{self:?}").as_bytes())
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Digest of a parameter vector's bit patterns.
pub fn param_digest(v: &[f64]) -> u64 {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_bits().to_le_bytes()).collect();
    fnv1a64(&bytes)
}

/// `λ₁ Σ_l s_l + λ_exp Σ_l max(0, s_{l+1} − s_l)` summed over coefficient sets.
pub fn reg_loss(coeffs: &[ShCoefficients], lambda_l1: f64, lambda_exp: f64) -> f64 {
    coeffs.iter().map(|c| reg_single(c.order(), c.values(), lambda_l1, lambda_exp)).sum()
}

fn reg_single(order: usize, values: &[Complex64], l1: f64, lexp: f64) -> f64 {
    let s = spectrum_of(order, values);
    let decay: f64 = s.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum();
    l1 * s.iter().sum::<f64>() + lexp * decay
}

/// Regularizer value and its cotangent with respect to every coefficient.
pub fn reg_cotangent(order: usize, values: &[Complex64], l1: f64, lexp: f64) -> (f64, Vec<Complex64>) {
    let s = spectrum_of(order, values);
    let mut u = vec![Complex64::new(0.0, 0.0); values.len()];
    for l in 0..=order {
        if s[l] == 0.0 {
            continue;
        }
        let mut ds = l1;
        if l >= 1 && s[l] > s[l - 1] {
            ds += lexp;
        }
        if l < order && s[l + 1] > s[l] {
            ds -= lexp;
        }
        let scale = ds / ((2 * l + 1) as f64 * s[l]);
        for k in l * l..(l + 1) * (l + 1) {
            u[k] = values[k] * scale;
        }
    }
    (reg_single(order, values, l1, lexp), u)
}

/// Network output plus tabulated low-order coefficients at `z`.
pub fn hybrid_coeffs(z: &CollocationPoint, params: &CompositeKernelParams) -> Result<ShCoefficients> {
    params.coefficients_at(z)
}

/// Per-point quantities that do not depend on trainable parameters.
#[derive(Debug, Clone)]
struct Prepared {
    omega: f64,
    x: NormCoord,
    hd: Complex64,
    basis: Vec<Complex64>,
    table: Vec<Complex64>,
}

fn prepare(params: &CompositeKernelParams, z: &CollocationPoint) -> Result<Prepared> {
    let order = params.sh_order();
    let dir = source_direction(z.src, params.head_center)?;
    let hd = free_field(z.omega, z.mic, z.src, params.medium)?;
    let (x, table) = match &params.coefficients {
        CoefficientModel::Neural { normalizer, tables, .. } => {
            (RawCoord::new(z.omega, z.src, z.mic).normalized(normalizer), tables.lookup(z.omega, z.mic)?)
        }
        CoefficientModel::Table(t) => (NormCoord([0.0; INPUT_DIM]), t.lookup(z.omega, z.mic)?),
    };
    Ok(Prepared { omega: z.omega, x, hd, basis: sh_basis(order, dir), table })
}

fn prepare_all(params: &CompositeKernelParams, points: &[CollocationPoint]) -> Result<Vec<Prepared>> {
    points.iter().map(|z| prepare(params, z)).collect()
}

fn coefficients(params: &CompositeKernelParams, p: &Prepared, tape: bool) -> (Vec<Complex64>, Option<Tape>) {
    match &params.coefficients {
        CoefficientModel::Neural { nf, .. } => {
            let (out, t) = nf_forward_tape(nf, &p.x);
            let mut c = to_complex(&out);
            for (v, t) in c.iter_mut().zip(&p.table) {
                *v += t;
            }
            (c, tape.then_some(t))
        }
        CoefficientModel::Table(_) => (p.table.clone(), None),
    }
}

fn phi_of(p: &Prepared, c: &[Complex64]) -> Complex64 {
    p.hd * c.iter().zip(&p.basis).map(|(a, b)| a * b).sum::<Complex64>()
}

fn phis(params: &CompositeKernelParams, prep: &[&Prepared]) -> Vec<Complex64> {
    prep.iter().map(|p| phi_of(p, &coefficients(params, p, false).0)).collect()
}

/// Batch objective and its gradient in optimizer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub nll: f64,
    pub reg: f64,
    /// `[∂/∂ln α, ∂/∂ln ℓ, ∂/∂ln σ², ∂/∂θ_NF…]`; empty when not requested.
    pub grad: Vec<f64>,
}

impl Objective {
    pub fn total(&self) -> f64 {
        self.nll + self.reg
    }
}

fn evaluate(params: &CompositeKernelParams, prep: &[&Prepared], y: &[Complex64], l1: f64, lexp: f64, want_grad: bool) -> Result<Objective> {
    let order = params.sh_order();
    let mut coeffs = Vec::with_capacity(prep.len());
    let mut tapes = Vec::with_capacity(prep.len());
    let mut phi = Vec::with_capacity(prep.len());
    for p in prep {
        let (c, t) = coefficients(params, p, want_grad);
        phi.push(phi_of(p, &c));
        coeffs.push(c);
        tapes.push(t);
    }
    let omegas: Vec<f64> = prep.iter().map(|p| p.omega).collect();
    let gp = FactoredGp::new(&omegas, phi, y, params.alpha, params.ell, params.noise_var)?;
    let nll = gp.nll();
    if !nll.is_finite() {
        return Err(Error::numeric("non-finite negative log-likelihood"));
    }
    let n_theta = match &params.coefficients {
        CoefficientModel::Neural { nf, .. } => nf.len(),
        CoefficientModel::Table(_) => 0,
    };
    if !want_grad {
        let reg = coeffs.iter().map(|c| reg_single(order, c, l1, lexp)).sum();
        return Ok(Objective { nll, reg, grad: Vec::new() });
    }
    let g = gp.gradients();
    let mut grad = vec![0.0; SCALAR_PARAMS + n_theta];
    grad[0] = g.ln_alpha;
    grad[1] = g.ell * params.ell;
    grad[2] = g.noise_var * params.noise_var;
    let mut reg = 0.0;
    for (n, p) in prep.iter().enumerate() {
        let (r, mut u) = reg_cotangent(order, &coeffs[n], l1, lexp);
        reg += r;
        if let (CoefficientModel::Neural { nf, .. }, Some(tape)) = (&params.coefficients, &tapes[n]) {
            for (k, uk) in u.iter_mut().enumerate() {
                *uk += (p.hd * p.basis[k]).conj() * g.phi[n];
            }
            nf_backward_tape(nf, tape, &u, &mut grad[SCALAR_PARAMS..])?;
        }
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite gradient"));
    }
    Ok(Objective { nll, reg, grad })
}

/// Negative log marginal likelihood of `y` at `points` under `params`.
pub fn nll(y: &[Complex64], points: &[CollocationPoint], params: &CompositeKernelParams) -> Result<f64> {
    check_inputs(y, points, params)?;
    let prep = prepare_all(params, points)?;
    let refs: Vec<&Prepared> = prep.iter().collect();
    Ok(evaluate(params, &refs, y, 0.0, 0.0, false)?.nll)
}

/// Regularized objective with its gradient.
pub fn nll_grad(
    y: &[Complex64],
    points: &[CollocationPoint],
    params: &CompositeKernelParams,
    lambda_l1: f64,
    lambda_exp: f64,
) -> Result<Objective> {
    check_inputs(y, points, params)?;
    let prep = prepare_all(params, points)?;
    let refs: Vec<&Prepared> = prep.iter().collect();
    evaluate(params, &refs, y, lambda_l1, lambda_exp, true)
}

fn check_inputs(y: &[Complex64], points: &[CollocationPoint], params: &CompositeKernelParams) -> Result<()> {
    if y.is_empty() || y.len() != points.len() {
        return Err(Error::invalid(format!("need |y| = |Z| ≥ 1, got {} and {}", y.len(), points.len())));
    }
    params.validate()
}

/// Optimizer view `[ln α, ln ℓ, ln σ², θ_NF…]`.
pub fn pack(params: &CompositeKernelParams) -> Vec<f64> {
    let mut v = vec![params.alpha.ln(), params.ell.ln(), params.noise_var.ln()];
    if let CoefficientModel::Neural { nf, .. } = &params.coefficients {
        v.extend_from_slice(&nf.theta);
    }
    v
}

/// Inverse of [`pack`].
pub fn unpack(params: &mut CompositeKernelParams, v: &[f64]) -> Result<()> {
    let n_theta = match &params.coefficients {
        CoefficientModel::Neural { nf, .. } => nf.len(),
        CoefficientModel::Table(_) => 0,
    };
    if v.len() != SCALAR_PARAMS + n_theta {
        return Err(Error::invalid(format!("expected {} parameters, got {}", SCALAR_PARAMS + n_theta, v.len())));
    }
    params.alpha = v[0].exp();
    params.ell = v[1].exp();
    params.noise_var = v[2].exp();
    if let CoefficientModel::Neural { nf, .. } = &mut params.coefficients {
        nf.theta.copy_from_slice(&v[SCALAR_PARAMS..]);
    }
    Ok(())
}

/// Per-(frequency, microphone) ridge fits of `y / h^d` on the dataset's
/// directions, with the residual sum of squares of the reconstruction.
pub fn fit_tables(ds: &FieldDataset, order: usize, lambda: f64) -> Result<(ShTables, f64)> {
    ds.validate()?;
    let d = ds.dims();
    let basis: Vec<Vec<Complex64>> =
        (0..d.dirs).map(|j| source_direction(ds.source_position(j), ds.head_center).map(|u| sh_basis(order, u))).collect::<Result<_>>()?;
    let mut coeffs = Vec::with_capacity(d.freqs * d.mics);
    let mut rss = 0.0;
    for f in 0..d.freqs {
        for i in 0..d.mics {
            let hd = (0..d.dirs)
                .map(|j| {
                    let z = ds.point(f, i, j);
                    free_field(z.omega, z.mic, z.src, ds.medium)
                })
                .collect::<Result<Vec<_>>>()?;
            let target: Vec<Complex64> = (0..d.dirs).map(|j| ds.value(f, i, j) / hd[j]).collect();
            let c = ridge_solve(&basis, &target, order, lambda)?;
            for j in 0..d.dirs {
                let fit: Complex64 = c.values().iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
                rss += (ds.value(f, i, j) - hd[j] * fit).norm_sqr();
            }
            coeffs.push(c);
        }
    }
    let tables = ShTables::new(order, ds.omegas(), ds.mic_positions.clone(), coeffs)?;
    Ok((tables, rss))
}

/// Smallest spacing of the dataset's angular-frequency grid.
fn frequency_step(omegas: &[f64]) -> f64 {
    let step = omegas.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if step.is_finite() {
        step
    } else {
        omegas[0].abs().max(1.0)
    }
}

/// Dataset bounds with the source axes widened to the full source sphere.
pub fn normalizer_for(ds: &FieldDataset) -> Result<Normalizer> {
    let raw: Vec<RawCoord> = ds.points().iter().map(|z| RawCoord::new(z.omega, z.src, z.mic)).collect();
    let mut n = Normalizer::from_points(&raw)?;
    let r = (0..ds.sources.len()).map(|j| norm(sub(ds.source_position(j), ds.head_center))).fold(0.0, f64::max);
    for k in 0..3 {
        n.lo[1 + k] = n.lo[1 + k].min(ds.head_center[k] - r);
        n.hi[1 + k] = n.hi[1 + k].max(ds.head_center[k] + r);
    }
    Ok(n)
}

/// Hybrid-initialized parameters: low-order tables from ridge fits, a network
/// with a zero head, `ℓ` at twice the frequency step, unit spectral prior
/// variance and `σ²` from the table residual.
pub fn init_params(observed: &FieldDataset, cfg: &FitConfig) -> Result<CompositeKernelParams> {
    cfg.validate()?;
    observed.validate()?;
    let d = observed.dims();
    let l0 = order_for_directions(d.dirs);
    let nf_order = cfg.nf_order.unwrap_or(l0 + 2);
    let table_order = l0.min(nf_order);
    let (tables, rss) = fit_tables(observed, table_order, cfg.table_lambda)?;
    let n = d.len() as f64;
    let dof = (1.0 - sh_len(table_order) as f64 / d.dirs as f64).max(0.05);
    let power = observed.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
    let noise_var = (rss / (n * dof)).max(1e-8 * power).max(f64::MIN_POSITIVE);
    let ell = 2.0 * frequency_step(&observed.omegas());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let arch = NfArchitecture::new(cfg.encoding, cfg.hidden.clone(), nf_order)?;
    let nf = NfParams::init(arch, cfg.gains, &mut rng);
    let params = CompositeKernelParams {
        alpha: ell * ell,
        ell,
        noise_var,
        head_center: observed.head_center,
        medium: observed.medium,
        coefficients: CoefficientModel::Neural { nf, normalizer: normalizer_for(observed)?, tables },
    };
    params.validate()?;
    Ok(params)
}

/// Planted-parameter model: the given coefficient tables, noise level and a
/// spectral kernel with `ℓ` at twice the frequency step and unit prior scale.
pub fn oracle_model(observed: &FieldDataset, truth: ShTables, noise_var: f64) -> Result<GprModel> {
    let ell = 2.0 * frequency_step(&observed.omegas());
    let params = CompositeKernelParams {
        alpha: ell * ell,
        ell,
        noise_var,
        head_center: observed.head_center,
        medium: observed.medium,
        coefficients: CoefficientModel::Table(truth),
    };
    GprModel::new(
        ModelKernel::Composite(params),
        observed.points(),
        observed.values.clone(),
        DEFAULT_PREDICTION_CAP,
        ModelProvenance::default(),
    )
}

/// Validation checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    /// Mean batch objective since the previous checkpoint.
    pub train_loss: Option<f64>,
    pub valid_nll: f64,
}

/// Training record.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub pretrain_losses: Vec<f64>,
    pub losses: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub best_step: usize,
}

/// Fitted model and its training record.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: GprModel,
    pub params: CompositeKernelParams,
    pub report: FitReport,
}

struct Trainer<'a> {
    params: CompositeKernelParams,
    vec: Vec<f64>,
    adam: Adam,
    schedule: LrSchedule,
    cfg: &'a FitConfig,
    rng: ChaCha8Rng,
    step: u64,
}

impl<'a> Trainer<'a> {
    fn new(params: CompositeKernelParams, cfg: &'a FitConfig, stream: u64) -> Self {
        let vec = pack(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        Self { adam: Adam::new(vec.len()), vec, params, schedule: cfg.schedule(), cfg, rng, step: 0 }
    }

    fn fail(&self, e: Error) -> Error {
        Error::Numeric(format!("step {}: {e} (parameter digest {:016x})", self.step, param_digest(&self.vec)))
    }

    fn step(&mut self, prep: &[Prepared], y: &[Complex64], pool: &mut [usize]) -> Result<f64> {
        let b = self.cfg.batch_size.min(pool.len());
        let (batch, _) = pool.partial_shuffle(&mut self.rng, b);
        let refs: Vec<&Prepared> = batch.iter().map(|&n| &prep[n]).collect();
        let ys: Vec<Complex64> = batch.iter().map(|&n| y[n]).collect();
        let mut obj = evaluate(&self.params, &refs, &ys, self.cfg.lambda_l1, self.cfg.lambda_exp, true).map_err(|e| self.fail(e))?;
        clip_gradients(&mut obj.grad, self.cfg.clip_norm);
        let lr = self.schedule.at(self.step);
        self.adam.update(&mut self.vec, &obj.grad, lr)?;
        unpack(&mut self.params, &self.vec)?;
        self.params.validate().map_err(|e| self.fail(e))?;
        self.step += 1;
        Ok(obj.total())
    }
}

fn augmented(
    observed: &FieldDataset,
    params: &CompositeKernelParams,
    freqs: &[f64],
    factor: usize,
) -> Result<(Vec<CollocationPoint>, Vec<Complex64>)> {
    let CoefficientModel::Neural { tables, .. } = &params.coefficients else {
        return Err(Error::invalid("pretraining needs a network-parameterized model"));
    };
    let dirs: Vec<Direction> = fibonacci_sphere(factor * observed.sources.len())?;
    let radius = observed.sources.iter().map(|s| s.radius).sum::<f64>() / observed.sources.len() as f64;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for &w in freqs {
        for &mic in &observed.mic_positions {
            let c = tables.lookup(w, mic)?;
            for d in &dirs {
                let u = d.unit_vector();
                let src = [
                    observed.head_center[0] + radius * u[0],
                    observed.head_center[1] + radius * u[1],
                    observed.head_center[2] + radius * u[2],
                ];
                let z = CollocationPoint::new(w, mic, src)?;
                let y = sh_basis(tables.order, *d);
                let psi: Complex64 = c.iter().zip(&y).map(|(a, b)| a * b).sum();
                values.push(free_field(w, mic, src, observed.medium)? * psi);
                points.push(z);
            }
        }
    }
    Ok((points, values))
}

fn run_pretrain(
    params: CompositeKernelParams,
    observed: &FieldDataset,
    train: &[usize],
    cfg: &FitConfig,
) -> Result<(CompositeKernelParams, Vec<f64>)> {
    if cfg.pretrain_iterations == 0 {
        return Ok((params, Vec::new()));
    }
    let points = observed.points();
    let mut freqs: Vec<f64> = train.iter().map(|&n| points[n].omega).collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();
    let (aug_pts, aug_y) = augmented(observed, &params, &freqs, cfg.augment_factor)?;
    let mut pts: Vec<CollocationPoint> = train.iter().map(|&n| points[n]).collect();
    let mut y: Vec<Complex64> = train.iter().map(|&n| observed.values[n]).collect();
    pts.extend(aug_pts);
    y.extend(aug_y);
    let prep = prepare_all(&params, &pts)?;
    let mut pool: Vec<usize> = (0..pts.len()).collect();
    let mut t = Trainer::new(params, cfg, 1);
    let mut losses = Vec::with_capacity(cfg.pretrain_iterations);
    for _ in 0..cfg.pretrain_iterations {
        losses.push(t.step(&prep, &y, &mut pool)?);
    }
    Ok((t.params, losses))
}

/// Pretrains on every observed point plus SH-synthesized augmentation.
pub fn pretrain(params: CompositeKernelParams, observed: &FieldDataset, cfg: &FitConfig) -> Result<CompositeKernelParams> {
    cfg.validate()?;
    let all: Vec<usize> = (0..observed.values.len()).collect();
    Ok(run_pretrain(params, observed, &all, cfg)?.0)
}

fn validation_nll(
    params: &CompositeKernelParams,
    train: &[&Prepared],
    ty: &[Complex64],
    valid: &[&Prepared],
    vy: &[Complex64],
) -> Result<f64> {
    let omegas: Vec<f64> = train.iter().map(|p| p.omega).collect();
    let gp = FactoredGp::new(&omegas, phis(params, train), ty, params.alpha, params.ell, params.noise_var)?;
    let vo: Vec<f64> = valid.iter().map(|p| p.omega).collect();
    let v = gp.predictive_nll(&vo, &phis(params, valid), vy);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric("non-finite validation likelihood"))
    }
}

/// Full training pipeline on an observed dataset; deterministic given the seed.
///
/// Tables → pretraining on train + augmentation → minibatch loop with
/// checkpoints scored by held-out predictive likelihood → final conditioning
/// on every observed point with the best checkpoint.
pub fn fit(observed: &FieldDataset, cfg: &FitConfig) -> Result<FitOutcome> {
    let init = init_params(observed, cfg)?;
    let split = validation_split(observed.dims(), cfg.validation_fraction, cfg.seed)?;
    let (params, pretrain_losses) = run_pretrain(init, observed, &split.train, cfg)?;
    let points = observed.points();
    let prep = prepare_all(&params, &points)?;
    let y = &observed.values;
    let tr: Vec<&Prepared> = split.train.iter().map(|&n| &prep[n]).collect();
    let ty: Vec<Complex64> = split.train.iter().map(|&n| y[n]).collect();
    let va: Vec<&Prepared> = split.valid.iter().map(|&n| &prep[n]).collect();
    let vy: Vec<Complex64> = split.valid.iter().map(|&n| y[n]).collect();

    let mut t = Trainer::new(params, cfg, 2);
    let mut pool = split.train.clone();
    let mut checkpoints = Vec::new();
    let mut best: Option<(f64, usize, CompositeKernelParams)> = None;
    let mut losses = Vec::with_capacity(cfg.iterations);
    let mut since = 0.0;
    let mut count = 0usize;
    for step in 0..=cfg.iterations {
        if !va.is_empty() && (step % cfg.checkpoint_every == 0 || step == cfg.iterations) {
            let v = validation_nll(&t.params, &tr, &ty, &va, &vy).map_err(|e| t.fail(e))?;
            let train_loss = (count > 0).then(|| since / count as f64);
            checkpoints.push(Checkpoint { step, train_loss, valid_nll: v });
            since = 0.0;
            count = 0;
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, step, t.params.clone()));
            }
        }
        if step == cfg.iterations {
            break;
        }
        let l = t.step(&prep, y, &mut pool)?;
        losses.push(l);
        since += l;
        count += 1;
    }
    let (best_step, chosen) = match best {
        Some((_, s, p)) => (s, p),
        None => (cfg.iterations, t.params),
    };
    let model = GprModel::new(
        ModelKernel::Composite(chosen.clone()),
        points,
        y.clone(),
        cfg.prediction_cap,
        ModelProvenance { seed: cfg.seed, config_digest: cfg.digest() },
    )?;
    Ok(FitOutcome { model, params: chosen, report: FitReport { pretrain_losses, losses, checkpoints, best_step } })
}

/// Circularly-symmetric complex Gaussian predictive NLL of held-out values.
pub fn predictive_nll(mean: &[Complex64], variance: &[f64], noise_var: f64, y: &[Complex64]) -> f64 {
    mean.iter()
        .zip(variance)
        .zip(y)
        .map(|((m, v), t)| {
            let s = v + noise_var;
            PI.ln() + s.ln() + (t - m).norm_sqr() / s
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{add_noise, gen_sh_scene, SceneConfig};
    use crate::gpr::dense::DenseGp;
    use crate::kernels::{gram, CompositeKernel, Jitter};

    fn small_scene(seed: u64) -> (FieldDataset, ShTables) {
        let cfg = SceneConfig { n_freqs: 6, n_dirs: 10, sh_order: 2, seed, ..SceneConfig::sh_scene() };
        let (ds, truth) = gen_sh_scene(&cfg).unwrap();
        (add_noise(&ds, 1e-4, seed + 100).unwrap(), truth)
    }

    fn tiny_cfg() -> FitConfig {
        FitConfig { encoding: 6, hidden: vec![5, 4], nf_order: Some(3), iterations: 0, pretrain_iterations: 0, ..FitConfig::default() }
    }

    fn perturbed(seed: u64) -> (FieldDataset, CompositeKernelParams) {
        let (ds, _) = small_scene(seed);
        let mut p = init_params(&ds, &tiny_cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let CoefficientModel::Neural { nf, .. } = &mut p.coefficients {
            use rand_distr::{Distribution, StandardNormal};
            for v in nf.theta.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v += 0.3 * e;
            }
        }
        p.noise_var *= 3.0;
        (ds, p)
    }

    #[test]
    fn regularizer_examples() {
        let zero = ShCoefficients::zeros(3);
        assert_eq!(reg_loss(&[zero], 1.0, 1.0), 0.0);
        // spectrum [1, 2]
        let mut c = ShCoefficients::zeros(1);
        c.set(0, 0, Complex64::new(1.0, 0.0));
        c.set(1, 0, Complex64::new(12f64.sqrt(), 0.0));
        assert!((reg_loss(&[c], 0.0, 1.0) - 1.0).abs() < 1e-12);
        let mut d = ShCoefficients::zeros(2);
        d.set(0, 0, Complex64::new(3.0, 0.0));
        d.set(1, -1, Complex64::new(0.0, 1.0));
        d.set(2, 2, Complex64::new(0.1, 0.1));
        let s = crate::sphharm::sh_spectrum(&d).0;
        assert!(s.windows(2).all(|w| w[1] < w[0]));
        assert!((reg_loss(&[d], 0.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn regularizer_cotangent_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        use rand::Rng;
        for _ in 0..20 {
            let v: Vec<Complex64> = (0..16).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let (_, u) = reg_cotangent(3, &v, 0.7, 1.3);
            let h = 1e-7;
            for k in 0..16 {
                for (dir, an) in [(Complex64::new(1.0, 0.0), u[k].re), (Complex64::new(0.0, 1.0), u[k].im)] {
                    let mut a = v.clone();
                    a[k] += dir * h;
                    let mut b = v.clone();
                    b[k] -= dir * h;
                    let fd = (reg_single(3, &a, 0.7, 1.3) - reg_single(3, &b, 0.7, 1.3)) / (2.0 * h);
                    assert!((fd - an).abs() < 1e-6, "{fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn nll_matches_dense_gram() {
        let (ds, p) = perturbed(1);
        let pts = ds.points();
        let k = gram(&pts, &CompositeKernel(&p), Jitter::Off).unwrap();
        let want = DenseGp::new(&k, p.noise_var, ds.values.clone()).unwrap().nll();
        let got = nll(&ds.values, &pts, &p).unwrap();
        assert!((got - want).abs() < 1e-8 * want.abs());
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let (ds, p) = perturbed(2);
        let pts: Vec<CollocationPoint> = ds.points().into_iter().step_by(15).collect();
        let y: Vec<Complex64> = ds.values.iter().step_by(15).copied().collect();
        assert!(pts.len() <= 16);
        let (l1, le) = (0.05, 0.2);
        let g = nll_grad(&y, &pts, &p, l1, le).unwrap().grad;
        let v0 = pack(&p);
        let f = |v: &[f64]| {
            let mut q = p.clone();
            unpack(&mut q, v).unwrap();
            nll_grad(&y, &pts, &q, l1, le).unwrap().total()
        };
        for k in 0..v0.len() {
            let h = 1e-5 * v0[k].abs().max(1e-2);
            let mut a = v0.clone();
            a[k] += h;
            let mut b = v0.clone();
            b[k] -= h;
            let fd = (f(&a) - f(&b)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-4 * fd.abs().max(g[k].abs()).max(1e-1), "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn hybrid_init_is_exact_tables() {
        let (ds, _) = small_scene(4);
        let p = init_params(&ds, &tiny_cfg()).unwrap();
        let CoefficientModel::Neural { tables, .. } = &p.coefficients else { panic!() };
        assert_eq!(tables.order, order_for_directions(10));
        let z = ds.point(2, 1, 3);
        let c = hybrid_coeffs(&z, &p).unwrap();
        let t = tables.lookup(z.omega, z.mic).unwrap();
        for (k, v) in c.values().iter().enumerate() {
            let want = t.get(k).copied().unwrap_or_default();
            assert_eq!(*v, want);
        }
        assert!((p.alpha / (p.ell * p.ell) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_iterations_and_determinism() {
        let (ds, _) = small_scene(5);
        let cfg = FitConfig { iterations: 0, ..tiny_cfg() };
        let out = fit(&ds, &cfg).unwrap();
        assert_eq!(out.params, init_params(&ds, &cfg).unwrap());
        out.model.predict(&ds.points()[..5]).unwrap();
        let scene = SceneConfig { n_freqs: 20, n_dirs: 10, sh_order: 2, seed: 5, ..SceneConfig::sh_scene() };
        let ds = add_noise(&gen_sh_scene(&scene).unwrap().0, 1e-4, 9).unwrap();
        let cfg = FitConfig { iterations: 30, pretrain_iterations: 5, batch_size: 64, checkpoint_every: 10, ..tiny_cfg() };
        let a = fit(&ds, &cfg).unwrap();
        let b = fit(&ds, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.report, b.report);
        assert_eq!(a.report.checkpoints.len(), 4);
    }
}
