//! The four pipeline commands. Each is a pure function of its input files
//! and settings and returns the text printed on success.

use std::path::{Path, PathBuf};

use gpsteer_core::baselines::{
    gp_chmat_fit, nf_fit, Interpolator, KrrInterpolator, NfCheckpoint, NfVariant, NnInterpolator, ShRidgeInterpolator,
};
use gpsteer_core::beamform::{beampattern, equiangular_grid, iso_scm, mvdr_weights, response, white_noise_gain, LOADING};
use gpsteer_core::datagen::{add_noise, generate, split_observed, FieldDataset, SceneConfig, SceneOracle};
use gpsteer_core::geom::{CollocationPoint, Direction};
use gpsteer_core::gpr::fit as gp_fit;
use gpsteer_core::gpr::train::fnv1a64;
use gpsteer_core::metrics::{csim_by_distance, csim_per_dir, median, nmse_per_freq};
use gpsteer_core::Complex64;
use serde::Serialize;

use crate::config::{BeamSpec, EvaluateSpec, FitSpec};
use crate::dataset::{read_dataset, write_dataset, DatasetFile, DatasetJson, SceneSpec};
use crate::error::{CliError, CliResult};
use crate::files::{self, num, read_json};
use crate::model::{read_model, Model, ModelBody, ModelFile, ModelMeta};

/// Interpolation methods accepted by `fit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    GpSteerer,
    GpChmat,
    Krr,
    Sh,
    Nn,
    Nf,
    NfGw,
    Pcnn,
    /// Exact field of the simulated scene (needs a simulated dataset).
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::GpSteerer => "gp-steerer",
            Method::GpChmat => "gp-chmat",
            Method::Krr => "krr",
            Method::Sh => "sh",
            Method::Nn => "nn",
            Method::Nf => "nf",
            Method::NfGw => "nf-gw",
            Method::Pcnn => "pcnn",
            Method::Oracle => "oracle",
        }
    }
}

pub fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<String> {
    let mut spec: SceneSpec = read_json(config)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let cfg = spec.resolve().map_err(|e| CliError::schema(config, "", e.to_string()))?;
    let ds = generate(&cfg)?;
    let bytes = write_dataset(out, &ds, Some(&cfg))?;
    let d = ds.dims();
    Ok(format!(
        "wrote {}: F·I·J = {}·{}·{} = {} values\nsha256 {}\n",
        out.display(),
        d.freqs,
        d.mics,
        d.dirs,
        d.len(),
        files::sha256_hex(&bytes)
    ))
}

/// Inputs of `fit`; `None` flags fall back to the config.
#[derive(Debug, Clone)]
pub struct FitArgs {
    pub dataset: PathBuf,
    pub method: Method,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub n_obs: Option<usize>,
    pub seed: Option<u64>,
    pub freq_subsample: Option<usize>,
}

/// Sibling path with `.json`/`.json.gz` replaced by `suffix`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".gz").unwrap_or(&name);
    let stem = stem.strip_suffix(".json").or_else(|| stem.strip_suffix(".csv")).unwrap_or(stem);
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Every `k`-th frequency index plus the last one.
pub fn subsample_indices(n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).step_by(k.max(1)).collect();
    if n > 0 && idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    idx
}

type LossRow = (usize, &'static str, Option<f64>, Option<f64>);

fn chunk_means(losses: &[f64], every: usize, phase: &'static str) -> Vec<LossRow> {
    losses
        .chunks(every.max(1))
        .enumerate()
        .map(|(k, c)| ((k * every.max(1) + c.len()), phase, Some(c.iter().sum::<f64>() / c.len() as f64), None))
        .collect()
}

fn nf_rows(cps: &[NfCheckpoint]) -> Vec<LossRow> {
    cps.iter().map(|c| (c.step, "train", c.train_loss, c.valid_mse)).collect()
}

pub fn fit(args: &FitArgs) -> CliResult<String> {
    let mut spec: FitSpec = match &args.config {
        Some(p) => read_json(p)?,
        None => FitSpec::default(),
    };
    if let Some(n) = args.n_obs {
        spec.n_obs = n;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(k) = args.freq_subsample {
        spec.freq_subsample = k;
    }
    if spec.freq_subsample == 0 {
        return Err(CliError::Usage("--freq-subsample must be at least 1".into()));
    }
    if spec.freq_subsample > 1 && args.method == Method::Nn {
        return Err(CliError::Usage("nn predicts only on its training frequencies; --freq-subsample must be 1".into()));
    }
    let raw = files::read_bytes(&args.dataset)?;
    let DatasetFile { dataset, scene } = read_dataset(&args.dataset)?;
    let ds = dataset.subset_freqs(&subsample_indices(dataset.frequencies_hz.len(), spec.freq_subsample))?;
    let noisy = add_noise(&ds, spec.noise_var, spec.seed)?;
    let split = split_observed(&noisy, spec.n_obs, Direction::FRONTAL, spec.seed)?;
    let train = &split.train;
    let seed = spec.seed;

    let mut rows: Vec<LossRow> = Vec::new();
    let body = match args.method {
        Method::GpSteerer => {
            let cfg = spec.gp.to_config(seed);
            let out = gp_fit(train, &cfg)?;
            rows.extend(chunk_means(&out.report.pretrain_losses, cfg.checkpoint_every, "pretrain"));
            rows.extend(out.report.checkpoints.iter().map(|c| (c.step, "train", c.train_loss, Some(c.valid_nll))));
            ModelBody::from_gp(&out.model)
        }
        Method::GpChmat => {
            let (model, losses) = gp_chmat_fit(train, &spec.chmat.to_config(seed))?;
            rows.extend(chunk_means(&losses, 100, "train"));
            ModelBody::from_gp(&model)
        }
        Method::Krr => {
            KrrInterpolator::fit(train, &spec.krr.to_config())?;
            ModelBody::Krr { config: spec.krr.clone(), training: DatasetJson::from_dataset(train, None) }
        }
        Method::Sh => {
            let m = ShRidgeInterpolator::fit(train, spec.sh.order, spec.sh.lambda)?;
            if !m.tables.coeffs.is_empty() && train.sources.len() < (m.tables.order + 1).pow(2) {
                eprintln!(
                    "warning: {} observed directions cannot resolve SH order {} without aliasing",
                    train.sources.len(),
                    m.tables.order
                );
            }
            ModelBody::from_sh(&m)
        }
        Method::Nn => {
            NnInterpolator::fit(train)?;
            ModelBody::Nn { training: DatasetJson::from_dataset(train, None) }
        }
        Method::Nf | Method::NfGw | Method::Pcnn => {
            let variant = match args.method {
                Method::Nf => NfVariant::Direct,
                Method::NfGw => NfVariant::GeometricWarp { reference: train.head_center },
                _ => NfVariant::Pcnn,
            };
            let (p, report) = nf_fit(train, &spec.nf.to_config(seed), variant)?;
            rows.extend(nf_rows(&report.checkpoints));
            ModelBody::from_nf(&p)
        }
        Method::Oracle => match &scene {
            Some(cfg) => ModelBody::Oracle { scene: SceneSpec::from_config(cfg) },
            None => {
                return Err(CliError::schema(
                    &args.dataset,
                    "/provenance/scene",
                    "the oracle needs a simulated dataset that records its scene",
                ))
            }
        },
    };
    let resolved = serde_json::to_vec(&spec).expect("config serializes");
    let digest = fnv1a64(&[args.method.name().as_bytes(), b"\0", &resolved].concat());
    let meta = ModelMeta {
        method: args.method.name().into(),
        n_obs: spec.n_obs,
        seed,
        config_digest: format!("{digest:016x}"),
        dataset_sha256: files::sha256_hex(&raw),
        freq_subsample: spec.freq_subsample,
        observed_directions: split
            .observed
            .iter()
            .map(|&j| {
                let d = ds.sources[j].direction;
                [d.azimuth, d.colatitude]
            })
            .collect(),
    };
    let file = ModelFile::new(meta, body);
    files::write_json(&args.out, &file)?;
    let log = sibling(&args.out, ".losses.csv");
    files::write_csv(
        &log,
        &["step", "phase", "train_loss", "valid_loss"],
        rows.iter().map(|(s, p, t, v)| vec![s.to_string(), p.to_string(), t.map(num).unwrap_or_default(), v.map(num).unwrap_or_default()]),
    )?;
    Ok(format!(
        "fitted {} on {} observed directions ({} points)\nmodel {} (config digest {digest:016x})\nlosses {}\n",
        args.method.name(),
        split.observed.len(),
        train.values.len(),
        args.out.display(),
        log.display()
    ))
}

fn load(model: &Path) -> CliResult<(ModelFile, Model)> {
    let file = read_model(model)?;
    let m = file.model.build(&file.meta, model)?;
    Ok((file, m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub lo_deg: f64,
    pub hi_deg: f64,
    pub count: usize,
    pub mean_csim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationSummary {
    pub method: String,
    pub n_obs: usize,
    pub seed: u64,
    pub median_nmse_db: f64,
    pub median_csim: f64,
    /// Medians over directions that were not observed.
    pub heldout_median_nmse_db: Option<f64>,
    pub heldout_median_csim: Option<f64>,
    pub csim_vs_distance: Vec<DistanceRow>,
}

/// Predictions, metrics and the summary written by `evaluate`.
pub fn evaluate_model(
    file: &ModelFile,
    model: &dyn Interpolator,
    ds: &FieldDataset,
    spec: &EvaluateSpec,
) -> CliResult<(Vec<f64>, Vec<f64>, EvaluationSummary)> {
    let pred = model.predict_values(&ds.points())?;
    let d = ds.dims();
    let nmse = nmse_per_freq(d, &ds.values, &pred)?;
    let csim = csim_per_dir(d, &ds.values, &pred)?;
    let observed = file.meta.observed()?;
    let dirs = ds.directions();
    let held: Vec<usize> = (0..d.dirs).filter(|&j| !observed.contains(&dirs[j])).collect();
    let (heldout_nmse, heldout_csim) = if held.is_empty() || held.len() == d.dirs {
        (None, None)
    } else {
        let sub = ds.subset_dirs(&held)?;
        let sp: Vec<Complex64> = {
            let mut v = Vec::with_capacity(sub.values.len());
            for f in 0..d.freqs {
                for i in 0..d.mics {
                    v.extend(held.iter().map(|&j| pred[d.index(f, i, j)]));
                }
            }
            v
        };
        (Some(median(&nmse_per_freq(sub.dims(), &sub.values, &sp)?)?), Some(median(&held.iter().map(|&j| csim[j]).collect::<Vec<_>>())?))
    };
    let table = if observed.is_empty() { Vec::new() } else { csim_by_distance(&csim, &dirs, &observed, spec.distance_bin_deg)? };
    let summary = EvaluationSummary {
        method: file.meta.method.clone(),
        n_obs: file.meta.n_obs,
        seed: file.meta.seed,
        median_nmse_db: median(&nmse)?,
        median_csim: median(&csim)?,
        heldout_median_nmse_db: heldout_nmse,
        heldout_median_csim: heldout_csim,
        csim_vs_distance: table
            .iter()
            .map(|b| DistanceRow { lo_deg: b.lo_deg, hi_deg: b.hi_deg, count: b.count, mean_csim: b.mean_csim })
            .collect(),
    };
    Ok((nmse, csim, summary))
}

pub fn evaluate(model: &Path, dataset: &Path, out: &Path, config: Option<&Path>) -> CliResult<String> {
    let spec: EvaluateSpec = match config {
        Some(p) => read_json(p)?,
        None => EvaluateSpec::default(),
    };
    let (file, m) = load(model)?;
    let ds = read_dataset(dataset)?.dataset;
    let (nmse, csim, summary) = evaluate_model(&file, m.interpolator(), &ds, &spec)?;
    let meta = &file.meta;
    let lead = |v: String| vec![meta.method.clone(), meta.n_obs.to_string(), meta.seed.to_string(), v];
    files::write_csv(
        &out.join("nmse_per_freq.csv"),
        &["method", "n_obs", "seed", "freq_hz", "value"],
        ds.frequencies_hz.iter().zip(&nmse).map(|(f, v)| {
            let mut r = lead(num(*f));
            r.push(num(*v));
            r
        }),
    )?;
    files::write_csv(
        &out.join("csim_per_dir.csv"),
        &["method", "n_obs", "seed", "direction_id", "value"],
        csim.iter().enumerate().map(|(j, v)| {
            let mut r = lead(j.to_string());
            r.push(num(*v));
            r
        }),
    )?;
    files::write_json(&out.join("summary.json"), &summary)?;
    Ok(format!(
        "{}: median nMSE {:.2} dB, median CSIM {:.4}\nreport {}\n",
        meta.method,
        summary.median_nmse_db,
        summary.median_csim,
        out.display()
    ))
}

/// Nearest dataset frequency index for each request, deduplicated in order.
fn snap_frequencies(ds: &FieldDataset, requested: &[f64]) -> Vec<usize> {
    if requested.is_empty() {
        return (0..ds.frequencies_hz.len()).collect();
    }
    let mut out: Vec<usize> = Vec::new();
    for r in requested {
        let k = (0..ds.frequencies_hz.len())
            .min_by(|&a, &b| (ds.frequencies_hz[a] - r).abs().total_cmp(&(ds.frequencies_hz[b] - r).abs()))
            .unwrap_or(0);
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

/// Steering vectors for many directions at one frequency, from one batched prediction.
fn steering_batch(model: &dyn Interpolator, ds: &FieldDataset, omega: f64, dirs: &[Direction]) -> CliResult<Vec<Vec<Complex64>>> {
    let radius = ds.sources[0].radius;
    let c = ds.head_center;
    let mut pts = Vec::with_capacity(dirs.len() * ds.mic_positions.len());
    for d in dirs {
        let u = d.unit_vector();
        let src = [c[0] + radius * u[0], c[1] + radius * u[1], c[2] + radius * u[2]];
        pts.extend(ds.mic_positions.iter().map(|m| CollocationPoint { omega, mic: *m, src }));
    }
    let v = model.predict_values(&pts)?;
    Ok(v.chunks(ds.mic_positions.len()).map(|c| c.to_vec()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamRecord {
    pub source: String,
    pub freq_hz: f64,
    pub look_azimuth_deg: f64,
    pub look_colatitude_deg: f64,
    /// `|w^H d − 1|` for the design look vector.
    pub distortionless_error: f64,
    pub white_noise_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamSummary {
    pub method: String,
    /// Field the patterns are evaluated on: the simulated scene or the model itself.
    pub reference: String,
    pub max_distortionless_error: f64,
    pub records: Vec<BeamRecord>,
}

/// One pattern row: (source, freq_hz, look az, look col, scan az, gain dB).
pub type PatternRow = (String, f64, f64, f64, f64, f64);

/// MVDR designs from the model (and from the exact scene when known), scanned
/// on a horizontal ring and evaluated on the reference field.
pub fn beampatterns(
    file: &ModelFile,
    model: &dyn Interpolator,
    ds: &FieldDataset,
    scene: Option<&SceneConfig>,
    spec: &BeamSpec,
) -> CliResult<(Vec<PatternRow>, BeamSummary)> {
    if !(spec.scan_step_deg > 0.0) {
        return Err(gpsteer_core::Error::InvalidArgument("scan_step_deg must be positive".into()).into());
    }
    let grid = equiangular_grid(spec.grid_azimuths, spec.grid_colatitudes)?;
    let grid_dirs: Vec<Direction> = grid.iter().map(|g| g.direction).collect();
    let weights: Vec<f64> = grid.iter().map(|g| g.weight).collect();
    let looks = spec
        .look_directions
        .iter()
        .map(|l| Direction::from_degrees(l.azimuth_deg, l.colatitude_deg))
        .collect::<gpsteer_core::Result<Vec<_>>>()?;
    let n_scan = (360.0 / spec.scan_step_deg).round().max(1.0) as usize;
    let scan: Vec<Direction> = (0..n_scan)
        .map(|k| Direction::from_degrees(k as f64 * spec.scan_step_deg, spec.scan_colatitude_deg))
        .collect::<gpsteer_core::Result<_>>()?;
    let oracle = scene.map(SceneOracle::new).transpose()?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for f in snap_frequencies(ds, &spec.frequencies_hz) {
        let omega = ds.omega(f);
        let fhz = ds.frequencies_hz[f];
        let mut designs: Vec<(&str, &dyn Interpolator)> = vec![("interpolated", model)];
        if let Some(o) = &oracle {
            designs.push(("oracle", o));
        }
        let reference: &dyn Interpolator = match &oracle {
            Some(o) => o,
            None => model,
        };
        let ref_scan = steering_batch(reference, ds, omega, &scan)?;
        let ref_look = steering_batch(reference, ds, omega, &looks)?;
        for (name, src) in designs {
            let r = iso_scm(&steering_batch(src, ds, omega, &grid_dirs)?, &weights, LOADING)?;
            let design_look = steering_batch(src, ds, omega, &looks)?;
            for (k, look) in looks.iter().enumerate() {
                let d = &design_look[k];
                let w = mvdr_weights(d, &r)?;
                let mut lookup = |dir: Direction| -> gpsteer_core::Result<Vec<Complex64>> {
                    if dir == *look {
                        return Ok(ref_look[k].clone());
                    }
                    let j = scan.iter().position(|s| *s == dir).expect("scan direction");
                    Ok(ref_scan[j].clone())
                };
                let gains = beampattern(&w, &mut lookup, &scan, *look)?;
                for (s, g) in scan.iter().zip(gains) {
                    rows.push((name.to_string(), fhz, look.azimuth.to_degrees(), look.colatitude.to_degrees(), s.azimuth.to_degrees(), g));
                }
                records.push(BeamRecord {
                    source: name.into(),
                    freq_hz: fhz,
                    look_azimuth_deg: look.azimuth.to_degrees(),
                    look_colatitude_deg: look.colatitude.to_degrees(),
                    distortionless_error: (response(&w, d) - 1.0).norm(),
                    white_noise_gain_db: white_noise_gain(&w, d)?,
                });
            }
        }
    }
    let summary = BeamSummary {
        method: file.meta.method.clone(),
        reference: if oracle.is_some() { "scene".into() } else { "model".into() },
        max_distortionless_error: records.iter().map(|r| r.distortionless_error).fold(0.0, f64::max),
        records,
    };
    Ok((rows, summary))
}

pub fn beampattern_cmd(model: &Path, dataset: &Path, out: &Path, config: Option<&Path>) -> CliResult<String> {
    let spec: BeamSpec = match config {
        Some(p) => read_json(p)?,
        None => BeamSpec::default(),
    };
    let (file, m) = load(model)?;
    let DatasetFile { dataset: ds, scene } = read_dataset(dataset)?;
    let (rows, summary) = beampatterns(&file, m.interpolator(), &ds, scene.as_ref(), &spec)?;
    files::write_csv(
        out,
        &["freq_hz", "azimuth_deg", "gain_db", "source", "look_azimuth_deg", "look_colatitude_deg"],
        rows.iter().map(|(s, f, la, lc, az, g)| vec![num(*f), num(*az), num(*g), s.clone(), num(*la), num(*lc)]),
    )?;
    let sp = sibling(out, ".summary.json");
    files::write_json(&sp, &summary)?;
    Ok(format!(
        "{} beampatterns on the {} field, max |w^H d - 1| = {:.3e}\npatterns {}\nsummary {}\n",
        summary.records.len(),
        summary.reference,
        summary.max_distortionless_error,
        out.display(),
        sp.display()
    ))
}
