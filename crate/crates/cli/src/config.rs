//! Command configs. Every field is optional and falls back to the library
//! default; `seed` lives at the top level of each config.

use gpsteer_core::baselines::{ChmatFitConfig, KrrConfig, NfFitConfig, SH_RIDGE_LAMBDA};
use gpsteer_core::beamform::{GRID_AZIMUTHS, GRID_COLATITUDES};
use gpsteer_core::gpr::FitConfig;
use gpsteer_core::nfield::INPUT_DIM;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpSpec {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_base: f64,
    pub lr_floor: f64,
    pub warmup_steps: u64,
    pub lambda_l1: f64,
    pub lambda_exp: f64,
    pub pretrain_iterations: usize,
    pub augment_factor: usize,
    pub prediction_cap: usize,
    pub validation_fraction: f64,
    pub checkpoint_every: usize,
    pub clip_norm: f64,
    pub encoding: usize,
    pub hidden: Vec<usize>,
    pub gains: [f64; INPUT_DIM],
    pub nf_order: Option<usize>,
    pub table_lambda: f64,
}

impl Default for GpSpec {
    fn default() -> Self {
        let c = FitConfig::default();
        Self {
            iterations: c.iterations,
            batch_size: c.batch_size,
            lr_start: c.lr_start,
            lr_base: c.lr_base,
            lr_floor: c.lr_floor,
            warmup_steps: c.warmup_steps,
            lambda_l1: c.lambda_l1,
            lambda_exp: c.lambda_exp,
            pretrain_iterations: c.pretrain_iterations,
            augment_factor: c.augment_factor,
            prediction_cap: c.prediction_cap,
            validation_fraction: c.validation_fraction,
            checkpoint_every: c.checkpoint_every,
            clip_norm: c.clip_norm,
            encoding: c.encoding,
            hidden: c.hidden,
            gains: c.gains,
            nf_order: c.nf_order,
            table_lambda: c.table_lambda,
        }
    }
}

impl GpSpec {
    pub fn to_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            lr_start: self.lr_start,
            lr_base: self.lr_base,
            lr_floor: self.lr_floor,
            warmup_steps: self.warmup_steps,
            lambda_l1: self.lambda_l1,
            lambda_exp: self.lambda_exp,
            pretrain_iterations: self.pretrain_iterations,
            augment_factor: self.augment_factor,
            prediction_cap: self.prediction_cap,
            seed,
            validation_fraction: self.validation_fraction,
            checkpoint_every: self.checkpoint_every,
            clip_norm: self.clip_norm,
            encoding: self.encoding,
            hidden: self.hidden.clone(),
            gains: self.gains,
            nf_order: self.nf_order,
            table_lambda: self.table_lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NfSpec {
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
    pub order: Option<usize>,
    pub validation_fraction: f64,
    pub checkpoint_every: usize,
}

impl Default for NfSpec {
    fn default() -> Self {
        let c = NfFitConfig::default();
        Self {
            iterations: c.iterations,
            batch_size: c.batch_size,
            lr_start: c.lr_start,
            lr_base: c.lr_base,
            lr_floor: c.lr_floor,
            warmup_steps: c.warmup_steps,
            clip_norm: c.clip_norm,
            encoding: c.encoding,
            hidden: c.hidden,
            gains: c.gains,
            order: c.order,
            validation_fraction: c.validation_fraction,
            checkpoint_every: c.checkpoint_every,
        }
    }
}

impl NfSpec {
    pub fn to_config(&self, seed: u64) -> NfFitConfig {
        NfFitConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            lr_start: self.lr_start,
            lr_base: self.lr_base,
            lr_floor: self.lr_floor,
            warmup_steps: self.warmup_steps,
            clip_norm: self.clip_norm,
            encoding: self.encoding,
            hidden: self.hidden.clone(),
            gains: self.gains,
            order: self.order,
            seed,
            validation_fraction: self.validation_fraction,
            checkpoint_every: self.checkpoint_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChmatSpec {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub ell_d_init: f64,
    pub prediction_cap: usize,
}

impl Default for ChmatSpec {
    fn default() -> Self {
        let c = ChmatFitConfig::default();
        Self {
            iterations: c.iterations,
            batch_size: c.batch_size,
            lr: c.lr,
            clip_norm: c.clip_norm,
            ell_d_init: c.ell_d_init,
            prediction_cap: c.prediction_cap,
        }
    }
}

impl ChmatSpec {
    pub fn to_config(&self, seed: u64) -> ChmatFitConfig {
        ChmatFitConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            lr: self.lr,
            clip_norm: self.clip_norm,
            ell_d_init: self.ell_d_init,
            prediction_cap: self.prediction_cap,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KrrSpec {
    pub ell_d: f64,
    pub ell_steps: f64,
    pub lambda: f64,
    pub prediction_cap: usize,
}

impl Default for KrrSpec {
    fn default() -> Self {
        let c = KrrConfig::default();
        Self { ell_d: c.ell_d, ell_steps: c.ell_steps, lambda: c.lambda, prediction_cap: c.prediction_cap }
    }
}

impl KrrSpec {
    pub fn to_config(&self) -> KrrConfig {
        KrrConfig { ell_d: self.ell_d, ell_steps: self.ell_steps, lambda: self.lambda, prediction_cap: self.prediction_cap }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShSpec {
    pub order: Option<usize>,
    pub lambda: f64,
}

impl Default for ShSpec {
    fn default() -> Self {
        Self { order: None, lambda: SH_RIDGE_LAMBDA }
    }
}

/// Config of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSpec {
    pub seed: u64,
    /// Number of observed directions.
    pub n_obs: usize,
    /// Variance of the complex Gaussian noise added to the dataset before sampling.
    pub noise_var: f64,
    /// Keep every k-th frequency (and the last one) for training.
    pub freq_subsample: usize,
    pub gp: GpSpec,
    pub nf: NfSpec,
    pub chmat: ChmatSpec,
    pub krr: KrrSpec,
    pub sh: ShSpec,
}

impl Default for FitSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_obs: 32,
            noise_var: 0.0,
            freq_subsample: 1,
            gp: GpSpec::default(),
            nf: NfSpec::default(),
            chmat: ChmatSpec::default(),
            krr: KrrSpec::default(),
            sh: ShSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionDeg {
    pub azimuth_deg: f64,
    pub colatitude_deg: f64,
}

/// Config of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSpec {
    pub seed: u64,
    /// Width of the nearest-observation distance bins.
    pub distance_bin_deg: f64,
}

impl Default for EvaluateSpec {
    fn default() -> Self {
        Self { seed: 0, distance_bin_deg: 10.0 }
    }
}

/// Config of `beampattern`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSpec {
    pub seed: u64,
    pub look_directions: Vec<DirectionDeg>,
    /// Requested frequencies, snapped to the nearest dataset frequency; empty means all.
    pub frequencies_hz: Vec<f64>,
    pub grid_azimuths: usize,
    pub grid_colatitudes: usize,
    /// Azimuth step of the pattern scan.
    pub scan_step_deg: f64,
    /// Colatitude of the pattern scan.
    pub scan_colatitude_deg: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            look_directions: vec![DirectionDeg { azimuth_deg: 0.0, colatitude_deg: 90.0 }],
            frequencies_hz: vec![2000.0],
            grid_azimuths: GRID_AZIMUTHS,
            grid_colatitudes: GRID_COLATITUDES,
            scan_step_deg: 5.0,
            scan_colatitude_deg: 90.0,
        }
    }
}
