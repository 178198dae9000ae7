//! Model JSON: a shared envelope with a `kind`-tagged body per method.

use std::path::Path;

use gpsteer_core::baselines::{Interpolator, KrrInterpolator, NfPredictor, NfVariant, NnInterpolator, ShRidgeInterpolator};
use gpsteer_core::datagen::SceneOracle;
use gpsteer_core::geom::{CollocationPoint, Direction};
use gpsteer_core::gpr::{GprModel, ModelKernel, ModelProvenance};
use gpsteer_core::kernels::{ChmatParams, CoefficientModel, CompositeKernelParams, ShTables};
use gpsteer_core::nfield::{NfArchitecture, NfParams, Normalizer, INPUT_DIM};
use gpsteer_core::physics::Medium;
use gpsteer_core::sphharm::ShCoefficients;
use gpsteer_core::{Complex64, Vec3};
use serde::{Deserialize, Serialize};

use crate::dataset::{check_version, DatasetJson, SceneSpec, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};
use crate::files;

type C2 = [f64; 2];

fn c2(v: &Complex64) -> C2 {
    [v.re, v.im]
}

fn from_c2(v: &C2) -> Complex64 {
    Complex64::new(v[0], v[1])
}

/// Fields common to every model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub method: String,
    pub n_obs: usize,
    pub seed: u64,
    /// FNV-1a digest of the resolved config, hex.
    pub config_digest: String,
    pub dataset_sha256: String,
    pub freq_subsample: usize,
    /// Observed source directions as `[azimuth, colatitude]` radians.
    pub observed_directions: Vec<[f64; 2]>,
}

impl ModelMeta {
    pub fn observed(&self) -> gpsteer_core::Result<Vec<Direction>> {
        self.observed_directions.iter().map(|d| Direction::new(d[0], d[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkJson {
    pub encoding: usize,
    pub hidden: Vec<usize>,
    pub order: usize,
    pub gains: [f64; INPUT_DIM],
    /// Flat parameter vector, row-major per layer.
    pub theta: Vec<f64>,
}

impl NetworkJson {
    fn from_params(p: &NfParams) -> Self {
        Self { encoding: p.arch.encoding, hidden: p.arch.hidden.clone(), order: p.arch.order, gains: p.gains, theta: p.theta.clone() }
    }

    fn build(&self) -> gpsteer_core::Result<NfParams> {
        NfParams::from_theta(NfArchitecture::new(self.encoding, self.hidden.clone(), self.order)?, self.gains, self.theta.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizerJson {
    pub lo: [f64; INPUT_DIM],
    pub hi: [f64; INPUT_DIM],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablesJson {
    pub order: usize,
    pub knots: Vec<f64>,
    pub mics: Vec<Vec3>,
    /// One coefficient vector per (knot, microphone), knot-major.
    pub coeffs: Vec<Vec<C2>>,
}

impl TablesJson {
    fn from_tables(t: &ShTables) -> Self {
        Self {
            order: t.order,
            knots: t.knots.clone(),
            mics: t.mics.clone(),
            coeffs: t.coeffs.iter().map(|c| c.values().iter().map(c2).collect()).collect(),
        }
    }

    fn build(&self) -> gpsteer_core::Result<ShTables> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| ShCoefficients::new(self.order, c.iter().map(from_c2).collect()))
            .collect::<gpsteer_core::Result<Vec<_>>>()?;
        ShTables::new(self.order, self.knots.clone(), self.mics.clone(), coeffs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientsJson {
    Neural { network: NetworkJson, normalizer: NormalizerJson, tables: TablesJson },
    Table { tables: TablesJson },
}

/// Conditioning set of a GP: `[ω, mic xyz, source xyz]` rows and values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditioningJson {
    pub points: Vec<[f64; 7]>,
    pub values: Vec<C2>,
}

impl ConditioningJson {
    fn from_model(m: &GprModel) -> Self {
        Self {
            points: m.points().iter().map(|z| [z.omega, z.mic[0], z.mic[1], z.mic[2], z.src[0], z.src[1], z.src[2]]).collect(),
            values: m.values().iter().map(c2).collect(),
        }
    }

    fn split(&self) -> (Vec<CollocationPoint>, Vec<Complex64>) {
        (
            self.points.iter().map(|p| CollocationPoint { omega: p[0], mic: [p[1], p[2], p[3]], src: [p[4], p[5], p[6]] }).collect(),
            self.values.iter().map(from_c2).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NfModelJson {
    pub network: NetworkJson,
    pub normalizer: NormalizerJson,
    pub head_center: Vec3,
    pub speed_of_sound: f64,
}

/// Method-specific part of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelBody {
    GpSteerer {
        alpha: f64,
        ell: f64,
        noise_var: f64,
        head_center: Vec3,
        speed_of_sound: f64,
        coefficients: CoefficientsJson,
        prediction_cap: usize,
        conditioning: ConditioningJson,
    },
    GpChmat {
        alpha: f64,
        ell: f64,
        ell_d: f64,
        centre: Vec3,
        noise_var: f64,
        prediction_cap: usize,
        conditioning: ConditioningJson,
    },
    Krr {
        config: crate::config::KrrSpec,
        training: DatasetJson,
    },
    Sh {
        head_center: Vec3,
        tables: TablesJson,
    },
    Nn {
        training: DatasetJson,
    },
    Nf(NfModelJson),
    NfGw {
        reference: Vec3,
        net: NfModelJson,
    },
    Pcnn(NfModelJson),
    Oracle {
        scene: SceneSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u64,
    pub meta: ModelMeta,
    pub model: ModelBody,
}

/// A model ready to predict.
pub enum Model {
    Gp(GprModel),
    Krr(KrrInterpolator),
    Sh(ShRidgeInterpolator),
    Nn(NnInterpolator),
    Nf(NfPredictor),
    Oracle(SceneOracle),
}

impl Model {
    pub fn interpolator(&self) -> &dyn Interpolator {
        match self {
            Model::Gp(m) => m,
            Model::Krr(m) => m,
            Model::Sh(m) => m,
            Model::Nn(m) => m,
            Model::Nf(m) => m,
            Model::Oracle(m) => m,
        }
    }
}

fn nf_json(p: &NfPredictor) -> NfModelJson {
    NfModelJson {
        network: NetworkJson::from_params(&p.nf),
        normalizer: NormalizerJson { lo: p.normalizer.lo, hi: p.normalizer.hi },
        head_center: p.head_center,
        speed_of_sound: p.medium.speed_of_sound,
    }
}

impl ModelBody {
    pub fn from_gp(m: &GprModel) -> Self {
        let conditioning = ConditioningJson::from_model(m);
        match m.kernel() {
            ModelKernel::Composite(p) => ModelBody::GpSteerer {
                alpha: p.alpha,
                ell: p.ell,
                noise_var: p.noise_var,
                head_center: p.head_center,
                speed_of_sound: p.medium.speed_of_sound,
                coefficients: match &p.coefficients {
                    CoefficientModel::Neural { nf, normalizer, tables } => CoefficientsJson::Neural {
                        network: NetworkJson::from_params(nf),
                        normalizer: NormalizerJson { lo: normalizer.lo, hi: normalizer.hi },
                        tables: TablesJson::from_tables(tables),
                    },
                    CoefficientModel::Table(t) => CoefficientsJson::Table { tables: TablesJson::from_tables(t) },
                },
                prediction_cap: m.prediction_cap(),
                conditioning,
            },
            ModelKernel::Chmat { params, noise_var } => ModelBody::GpChmat {
                alpha: params.alpha,
                ell: params.ell,
                ell_d: params.ell_d,
                centre: params.centre,
                noise_var: *noise_var,
                prediction_cap: m.prediction_cap(),
                conditioning,
            },
        }
    }

    pub fn from_sh(m: &ShRidgeInterpolator) -> Self {
        ModelBody::Sh { head_center: m.head_center, tables: TablesJson::from_tables(&m.tables) }
    }

    pub fn from_nf(p: &NfPredictor) -> Self {
        match p.variant {
            NfVariant::Direct => ModelBody::Nf(nf_json(p)),
            NfVariant::GeometricWarp { reference } => ModelBody::NfGw { reference, net: nf_json(p) },
            NfVariant::Pcnn => ModelBody::Pcnn(nf_json(p)),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelBody::GpSteerer { .. } => "gp-steerer",
            ModelBody::GpChmat { .. } => "gp-chmat",
            ModelBody::Krr { .. } => "krr",
            ModelBody::Sh { .. } => "sh",
            ModelBody::Nn { .. } => "nn",
            ModelBody::Nf(_) => "nf",
            ModelBody::NfGw { .. } => "nf-gw",
            ModelBody::Pcnn(_) => "pcnn",
            ModelBody::Oracle { .. } => "oracle",
        }
    }

    /// Rebuilds the predictor; `file` names the source in error messages.
    pub fn build(&self, meta: &ModelMeta, file: &Path) -> CliResult<Model> {
        let bad = |e: gpsteer_core::Error| CliError::schema(file, "/model", e.to_string());
        let provenance = ModelProvenance {
            seed: meta.seed,
            config_digest: u64::from_str_radix(&meta.config_digest, 16)
                .map_err(|e| CliError::schema(file, "/meta/config_digest", e.to_string()))?,
        };
        let nf = |j: &NfModelJson, variant| -> gpsteer_core::Result<NfPredictor> {
            Ok(NfPredictor {
                variant,
                nf: j.network.build()?,
                normalizer: Normalizer::new(j.normalizer.lo, j.normalizer.hi)?,
                head_center: j.head_center,
                medium: Medium::new(j.speed_of_sound)?,
            })
        };
        Ok(match self {
            ModelBody::GpSteerer { alpha, ell, noise_var, head_center, speed_of_sound, coefficients, prediction_cap, conditioning } => {
                let coefficients = match coefficients {
                    CoefficientsJson::Neural { network, normalizer, tables } => CoefficientModel::Neural {
                        nf: network.build().map_err(bad)?,
                        normalizer: Normalizer::new(normalizer.lo, normalizer.hi).map_err(bad)?,
                        tables: tables.build().map_err(bad)?,
                    },
                    CoefficientsJson::Table { tables } => CoefficientModel::Table(tables.build().map_err(bad)?),
                };
                let params = CompositeKernelParams {
                    alpha: *alpha,
                    ell: *ell,
                    noise_var: *noise_var,
                    head_center: *head_center,
                    medium: Medium::new(*speed_of_sound).map_err(bad)?,
                    coefficients,
                };
                let (points, values) = conditioning.split();
                Model::Gp(GprModel::new(ModelKernel::Composite(params), points, values, *prediction_cap, provenance)?)
            }
            ModelBody::GpChmat { alpha, ell, ell_d, centre, noise_var, prediction_cap, conditioning } => {
                let params = ChmatParams { alpha: *alpha, ell: *ell, ell_d: *ell_d, centre: *centre };
                let (points, values) = conditioning.split();
                Model::Gp(GprModel::new(ModelKernel::Chmat { params, noise_var: *noise_var }, points, values, *prediction_cap, provenance)?)
            }
            ModelBody::Krr { config, training } => {
                let ds = training.clone().into_dataset(file)?.dataset;
                Model::Krr(KrrInterpolator::fit(&ds, &config.to_config())?)
            }
            ModelBody::Sh { head_center, tables } => {
                Model::Sh(ShRidgeInterpolator { tables: tables.build().map_err(bad)?, head_center: *head_center })
            }
            ModelBody::Nn { training } => Model::Nn(NnInterpolator::fit(&training.clone().into_dataset(file)?.dataset)?),
            ModelBody::Nf(j) => Model::Nf(nf(j, NfVariant::Direct).map_err(bad)?),
            ModelBody::NfGw { reference, net } => Model::Nf(nf(net, NfVariant::GeometricWarp { reference: *reference }).map_err(bad)?),
            ModelBody::Pcnn(j) => Model::Nf(nf(j, NfVariant::Pcnn).map_err(bad)?),
            ModelBody::Oracle { scene } => Model::Oracle(SceneOracle::new(&scene.resolve().map_err(bad)?).map_err(bad)?),
        })
    }
}

impl ModelFile {
    pub fn new(meta: ModelMeta, model: ModelBody) -> Self {
        Self { schema_version: SCHEMA_VERSION, meta, model }
    }
}

pub fn read_model(path: &Path) -> CliResult<ModelFile> {
    let value = files::parse_value(path)?;
    check_version(path, &value)?;
    files::from_value(path, &value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gpsteer_core::baselines::{nf_fit, NfFitConfig};
    use gpsteer_core::datagen::{gen_sh_scene, SceneConfig};
    use gpsteer_core::gpr::{fit, oracle_model, FitConfig};

    fn meta() -> ModelMeta {
        ModelMeta {
            method: "test".into(),
            n_obs: 4,
            seed: 1,
            config_digest: format!("{:016x}", 0xdead_beef_u64),
            dataset_sha256: String::new(),
            freq_subsample: 1,
            observed_directions: vec![[0.0, 1.0]],
        }
    }

    fn round_trip(body: ModelBody) -> Model {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let file = ModelFile::new(meta(), body);
        files::write_json(&p, &file).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let back = read_model(&p).unwrap();
        assert_eq!(back, file);
        assert_eq!(files::to_json_bytes(&back), bytes);
        back.model.build(&back.meta, &p).unwrap()
    }

    #[test]
    fn models_survive_round_trip() {
        let cfg = SceneConfig { n_freqs: 6, n_dirs: 8, sh_order: 1, ..SceneConfig::sh_scene() };
        let (ds, truth) = gen_sh_scene(&cfg).unwrap();
        let q = ds.points();
        let fitted =
            fit(&ds, &FitConfig { iterations: 3, pretrain_iterations: 2, encoding: 8, hidden: vec![6], ..FitConfig::default() }).unwrap();
        let oracle = oracle_model(&ds, truth, 1e-4).unwrap();
        for m in [fitted.model, oracle] {
            let want = m.predict_values(&q).unwrap();
            let Model::Gp(back) = round_trip(ModelBody::from_gp(&m)) else { panic!() };
            assert_eq!(back.predict_values(&q).unwrap(), want);
        }
        let (nf, _) =
            nf_fit(&ds, &NfFitConfig { iterations: 3, encoding: 8, hidden: vec![5], ..Default::default() }, NfVariant::Pcnn).unwrap();
        let back = round_trip(ModelBody::from_nf(&nf));
        assert_eq!(back.interpolator().predict_values(&q).unwrap(), nf.predict_values(&q).unwrap());
        let back = round_trip(ModelBody::Nn { training: DatasetJson::from_dataset(&ds, None) });
        assert_eq!(back.interpolator().predict_values(&q).unwrap(), ds.values);
    }
}
