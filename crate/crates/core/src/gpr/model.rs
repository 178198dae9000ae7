//! Conditioned GP models ready for prediction.

use crate::geom::CollocationPoint;
use crate::kernels::{spectral_kernel, ChmatKernel, ChmatParams, CompositeKernelParams, Kernel};
use crate::linalg::Matrix;
use crate::prelude::*;

use super::dense::DenseGp;
use super::factored::FactoredGp;

/// Default largest training set a dense solver conditions on.
pub const DEFAULT_PREDICTION_CAP: usize = 4096;

/// Covariance of a fitted model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKernel {
    /// Composite kernel; conditioned through the exact rank-1 factorization.
    Composite(CompositeKernelParams),
    /// Spectral × chordal-Matérn kernel, one independent GP per microphone.
    Chmat { params: ChmatParams, noise_var: f64 },
}

impl ModelKernel {
    pub fn noise_var(&self) -> f64 {
        match self {
            ModelKernel::Composite(p) => p.noise_var,
            ModelKernel::Chmat { noise_var, .. } => *noise_var,
        }
    }
}

/// Where a model came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelProvenance {
    pub seed: u64,
    pub config_digest: u64,
}

/// Posterior mean and variance at a set of queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<Complex64>,
    pub variance: Vec<f64>,
}

impl Prediction {
    pub fn std_dev(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }
}

#[derive(Debug, Clone)]
struct Channel {
    mic: Vec3,
    feats: Vec<(f64, Vec3)>,
    gp: DenseGp<f64>,
}

#[derive(Debug, Clone)]
enum Solver {
    Factored(FactoredGp),
    PerChannel(Vec<Channel>),
}

/// Kernel parameters, retained training set and its factorization.
///
/// Immutable: changing parameters goes through [`GprModel::with_kernel`], which
/// refactorizes.
#[derive(Debug, Clone)]
pub struct GprModel {
    kernel: ModelKernel,
    points: Vec<CollocationPoint>,
    values: Vec<Complex64>,
    cap: usize,
    solver: Solver,
    pub provenance: ModelProvenance,
}

impl GprModel {
    /// Conditions `kernel` on `(points, values)`.
    ///
    /// `cap` bounds the size of every dense system; the composite kernel is
    /// solved through its `F×F` factorization and is not bounded.
    pub fn new(
        kernel: ModelKernel,
        points: Vec<CollocationPoint>,
        values: Vec<Complex64>,
        cap: usize,
        provenance: ModelProvenance,
    ) -> Result<Self> {
        if points.is_empty() || points.len() != values.len() {
            return Err(Error::invalid(format!(
                "need a non-empty training set with one value per point, got {} points and {} values",
                points.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("training values must be finite"));
        }
        let solver = match &kernel {
            ModelKernel::Composite(p) => {
                p.validate()?;
                let omegas: Vec<f64> = points.iter().map(|z| z.omega).collect();
                let phi = points.iter().map(|z| p.phi(z)).collect::<Result<Vec<_>>>()?;
                Solver::Factored(FactoredGp::new(&omegas, phi, &values, p.alpha, p.ell, p.noise_var)?)
            }
            ModelKernel::Chmat { params, noise_var } => Solver::PerChannel(condition_channels(params, *noise_var, &points, &values, cap)?),
        };
        Ok(Self { kernel, points, values, cap, solver, provenance: ModelProvenance::default() }.with_provenance(provenance))
    }

    fn with_provenance(mut self, p: ModelProvenance) -> Self {
        self.provenance = p;
        self
    }

    /// Same training set under new parameters.
    pub fn with_kernel(&self, kernel: ModelKernel) -> Result<Self> {
        Self::new(kernel, self.points.clone(), self.values.clone(), self.cap, self.provenance)
    }

    pub fn kernel(&self) -> &ModelKernel {
        &self.kernel
    }

    pub fn points(&self) -> &[CollocationPoint] {
        &self.points
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn prediction_cap(&self) -> usize {
        self.cap
    }

    /// Negative log marginal likelihood of the retained training set.
    pub fn nll(&self) -> f64 {
        match &self.solver {
            Solver::Factored(f) => f.nll(),
            Solver::PerChannel(ch) => ch.iter().map(|c| c.gp.nll()).sum(),
        }
    }

    /// Posterior mean and (clamped) variance at each query.
    pub fn predict(&self, queries: &[CollocationPoint]) -> Result<Prediction> {
        let mut mean = Vec::with_capacity(queries.len());
        let mut variance = Vec::with_capacity(queries.len());
        match (&self.solver, &self.kernel) {
            (Solver::Factored(f), ModelKernel::Composite(p)) => {
                for z in queries {
                    let (m, v) = f.predict(z.omega, p.phi(z)?);
                    mean.push(m);
                    variance.push(v);
                }
            }
            (Solver::PerChannel(ch), ModelKernel::Chmat { params, .. }) => {
                let k = ChmatKernel(*params);
                for z in queries {
                    let q = k.feature(z)?;
                    let prior = params.alpha / (params.ell * params.ell);
                    match ch.iter().find(|c| c.mic == z.mic) {
                        Some(c) => {
                            let row: Vec<f64> = c.feats.iter().map(|t| k.eval_features(&q, t)).collect();
                            mean.push(c.gp.mean(&row));
                            variance.push(c.gp.variance(&row, prior));
                        }
                        None => {
                            mean.push(Complex64::new(0.0, 0.0));
                            variance.push(prior);
                        }
                    }
                }
            }
            _ => unreachable!("solver always matches kernel"),
        }
        Ok(Prediction { mean, variance })
    }

    /// Full posterior covariance between the queries.
    pub fn predict_covariance(&self, queries: &[CollocationPoint]) -> Result<Matrix<Complex64>> {
        match (&self.solver, &self.kernel) {
            (Solver::Factored(f), ModelKernel::Composite(p)) => {
                let omegas: Vec<f64> = queries.iter().map(|z| z.omega).collect();
                let phi = queries.iter().map(|z| p.phi(z)).collect::<Result<Vec<_>>>()?;
                Ok(f.covariance(&omegas, &phi))
            }
            (Solver::PerChannel(ch), ModelKernel::Chmat { params, .. }) => {
                let k = ChmatKernel(*params);
                let q = queries.iter().map(|z| k.feature(z)).collect::<Result<Vec<_>>>()?;
                let n = queries.len();
                let mut out = Matrix::from_fn(n, n, |a, b| {
                    if queries[a].mic == queries[b].mic {
                        Complex64::new(k.eval_features(&q[a], &q[b]), 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                for c in ch {
                    let idx: Vec<usize> = (0..n).filter(|&a| queries[a].mic == c.mic).collect();
                    if idx.is_empty() {
                        continue;
                    }
                    let rows: Vec<Vec<f64>> = idx.iter().map(|&a| c.feats.iter().map(|t| k.eval_features(&q[a], t)).collect()).collect();
                    let prior = Matrix::from_fn(idx.len(), idx.len(), |a, b| out[(idx[a], idx[b])]);
                    let post = c.gp.covariance(&rows, &prior);
                    for (a, &ia) in idx.iter().enumerate() {
                        for (b, &ib) in idx.iter().enumerate() {
                            out[(ia, ib)] = post[(a, b)];
                        }
                    }
                }
                Ok(out)
            }
            _ => unreachable!("solver always matches kernel"),
        }
    }
}

fn condition_channels(
    params: &ChmatParams,
    noise_var: f64,
    points: &[CollocationPoint],
    values: &[Complex64],
    cap: usize,
) -> Result<Vec<Channel>> {
    if !(params.alpha > 0.0) || !(params.ell > 0.0) || !(params.ell_d > 0.0) || !(noise_var >= 0.0) {
        return Err(Error::invalid(format!("bad chordal-Matérn parameters {params:?}, σ² = {noise_var}")));
    }
    let k = ChmatKernel(*params);
    let mut mics: Vec<Vec3> = Vec::new();
    for z in points {
        if !mics.contains(&z.mic) {
            mics.push(z.mic);
        }
    }
    mics.into_iter()
        .map(|mic| {
            let idx: Vec<usize> = (0..points.len()).filter(|&n| points[n].mic == mic).collect();
            if idx.len() > cap {
                return Err(Error::Capacity { size: idx.len(), cap });
            }
            let feats = idx.iter().map(|&n| k.feature(&points[n])).collect::<Result<Vec<_>>>()?;
            let gram = Matrix::from_fn(idx.len(), idx.len(), |a, b| k.eval_features(&feats[a], &feats[b]));
            let gp = DenseGp::new(&gram, noise_var, idx.iter().map(|&n| values[n]).collect())?;
            Ok(Channel { mic, feats, gp })
        })
        .collect()
}

/// Indices of a frequency-stratified subset of at most `cap` points per
/// microphone: every `s`-th distinct frequency with the smallest stride that fits.
pub fn stratified_subset(points: &[CollocationPoint], cap: usize) -> Vec<usize> {
    let mut omegas: Vec<f64> = points.iter().map(|z| z.omega).collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let per_mic_max = {
        let mut mics: Vec<(Vec3, usize)> = Vec::new();
        for z in points {
            match mics.iter_mut().find(|(m, _)| *m == z.mic) {
                Some((_, c)) => *c += 1,
                None => mics.push((z.mic, 1)),
            }
        }
        mics.iter().map(|(_, c)| *c).max().unwrap_or(0)
    };
    if per_mic_max <= cap {
        return (0..points.len()).collect();
    }
    let mut stride = 2;
    loop {
        let keep: Vec<f64> = omegas.iter().step_by(stride).copied().collect();
        let idx: Vec<usize> = (0..points.len()).filter(|&n| keep.contains(&points[n].omega)).collect();
        let mut worst = 0;
        for z in points {
            let c = idx.iter().filter(|&&n| points[n].mic == z.mic).count();
            worst = worst.max(c);
        }
        if worst <= cap || keep.len() == 1 {
            return idx;
        }
        stride += 1;
    }
}

/// Prior variance `k(z,z)` of the model at `z`.
pub fn prior_variance(kernel: &ModelKernel, z: &CollocationPoint) -> Result<f64> {
    match kernel {
        ModelKernel::Composite(p) => Ok(spectral_kernel(z.omega, z.omega, p.alpha, p.ell) * p.phi(z)?.norm_sqr()),
        ModelKernel::Chmat { params, .. } => Ok(params.alpha / (params.ell * params.ell)),
    }
}
