//! Dataset and scene-config JSON.

use std::path::Path;

use gpsteer_core::datagen::{FieldDataset, Provenance, SceneConfig, SceneKind, SourcePosition};
use gpsteer_core::geom::Direction;
use gpsteer_core::physics::Medium;
use gpsteer_core::{Complex64, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files;

pub const SCHEMA_VERSION: u64 = 1;

/// Scene generator settings; absent fields take the defaults of `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub kind: SceneKindName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_freqs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_min_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_max_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mic_positions: Option<Vec<Vec3>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_dirs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sh_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_center: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_of_sound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SceneKindName {
    #[serde(rename = "sh-scene")]
    Sh,
    #[serde(rename = "sphere-scene")]
    Sphere,
}

impl SceneSpec {
    pub fn resolve(&self) -> gpsteer_core::Result<SceneConfig> {
        let base = match self.kind {
            SceneKindName::Sh => SceneConfig::sh_scene(),
            SceneKindName::Sphere => SceneConfig::sphere_scene(),
        };
        let cfg = SceneConfig {
            kind: base.kind,
            n_freqs: self.n_freqs.unwrap_or(base.n_freqs),
            f_min_hz: self.f_min_hz.unwrap_or(base.f_min_hz),
            f_max_hz: self.f_max_hz.unwrap_or(base.f_max_hz),
            mic_positions: self.mic_positions.clone().unwrap_or(base.mic_positions),
            n_dirs: self.n_dirs.unwrap_or(base.n_dirs),
            source_radius: self.source_radius.unwrap_or(base.source_radius),
            sphere_radius: self.sphere_radius.unwrap_or(base.sphere_radius),
            sh_order: self.sh_order.unwrap_or(base.sh_order),
            smoothness: self.smoothness.unwrap_or(base.smoothness),
            head_center: self.head_center.unwrap_or(base.head_center),
            medium: match self.speed_of_sound {
                Some(c) => Medium::new(c)?,
                None => base.medium,
            },
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fully explicit spec of a resolved config.
    pub fn from_config(cfg: &SceneConfig) -> Self {
        Self {
            kind: match cfg.kind {
                SceneKind::Sh => SceneKindName::Sh,
                SceneKind::Sphere => SceneKindName::Sphere,
            },
            seed: cfg.seed,
            n_freqs: Some(cfg.n_freqs),
            f_min_hz: Some(cfg.f_min_hz),
            f_max_hz: Some(cfg.f_max_hz),
            mic_positions: Some(cfg.mic_positions.clone()),
            n_dirs: Some(cfg.n_dirs),
            source_radius: Some(cfg.source_radius),
            sphere_radius: Some(cfg.sphere_radius),
            sh_order: Some(cfg.sh_order),
            smoothness: Some(cfg.smoothness),
            head_center: Some(cfg.head_center),
            speed_of_sound: Some(cfg.medium.speed_of_sound),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceJson {
    pub azimuth: f64,
    pub colatitude: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvenanceJson {
    pub generator: String,
    pub seed: u64,
    #[serde(default)]
    pub note: String,
    /// Generator settings of simulated data, used for exact reference fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneSpec>,
}

/// On-disk dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetJson {
    pub schema_version: u64,
    pub frequencies_hz: Vec<f64>,
    pub mic_positions: Vec<Vec3>,
    pub source_directions: Vec<SourceJson>,
    pub values: Vec<[f64; 2]>,
    pub noise_var: f64,
    pub speed_of_sound: f64,
    pub head_center: Vec3,
    pub provenance: ProvenanceJson,
}

/// A dataset plus the scene that generated it, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub dataset: FieldDataset,
    pub scene: Option<SceneConfig>,
}

impl DatasetJson {
    pub fn from_dataset(ds: &FieldDataset, scene: Option<&SceneConfig>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            frequencies_hz: ds.frequencies_hz.clone(),
            mic_positions: ds.mic_positions.clone(),
            source_directions: ds
                .sources
                .iter()
                .map(|s| SourceJson { azimuth: s.direction.azimuth, colatitude: s.direction.colatitude, radius: s.radius })
                .collect(),
            values: ds.values.iter().map(|v| [v.re, v.im]).collect(),
            noise_var: ds.noise_var,
            speed_of_sound: ds.medium.speed_of_sound,
            head_center: ds.head_center,
            provenance: ProvenanceJson {
                generator: ds.provenance.generator.clone(),
                seed: ds.provenance.seed,
                note: ds.provenance.note.clone(),
                scene: scene.map(SceneSpec::from_config),
            },
        }
    }

    /// Validated dataset; `file` names the source in error messages.
    pub fn into_dataset(self, file: &Path) -> CliResult<DatasetFile> {
        let bad = |ptr: String, e: gpsteer_core::Error| CliError::schema(file, ptr, e.to_string());
        let sources = self
            .source_directions
            .iter()
            .enumerate()
            .map(|(k, s)| {
                Direction::new(s.azimuth, s.colatitude)
                    .map(|direction| SourcePosition { direction, radius: s.radius })
                    .map_err(|e| bad(format!("/source_directions/{k}"), e))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let expected = self.frequencies_hz.len() * self.mic_positions.len() * sources.len();
        if self.values.len() != expected {
            return Err(CliError::schema(file, "/values", format!("{} values, expected F·I·J = {expected}", self.values.len())));
        }
        let ds = FieldDataset {
            frequencies_hz: self.frequencies_hz,
            mic_positions: self.mic_positions,
            sources,
            values: self.values.iter().map(|v| Complex64::new(v[0], v[1])).collect(),
            noise_var: self.noise_var,
            medium: Medium::new(self.speed_of_sound).map_err(|e| bad("/speed_of_sound".into(), e))?,
            head_center: self.head_center,
            provenance: Provenance { generator: self.provenance.generator, seed: self.provenance.seed, note: self.provenance.note },
        };
        ds.validate().map_err(|e| bad(String::new(), e))?;
        let scene = match &self.provenance.scene {
            Some(s) => Some(s.resolve().map_err(|e| bad("/provenance/scene".into(), e))?),
            None => None,
        };
        Ok(DatasetFile { dataset: ds, scene })
    }
}

/// Checks `schema_version` before the rest of the document.
pub fn check_version(file: &Path, value: &serde_json::Value) -> CliResult<()> {
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(SCHEMA_VERSION) => Ok(()),
        Some(v) => Err(CliError::schema(
            file,
            "/schema_version",
            format!("unsupported schema version {v}; this build reads version {SCHEMA_VERSION}"),
        )),
        None => Err(CliError::schema(file, "/schema_version", "missing or non-integer schema_version")),
    }
}

pub fn read_dataset(path: &Path) -> CliResult<DatasetFile> {
    let value = files::parse_value(path)?;
    check_version(path, &value)?;
    files::from_value::<DatasetJson>(path, &value)?.into_dataset(path)
}

pub fn write_dataset(path: &Path, ds: &FieldDataset, scene: Option<&SceneConfig>) -> CliResult<Vec<u8>> {
    ds.validate()?;
    let bytes = files::to_json_bytes(&DatasetJson::from_dataset(ds, scene));
    files::write_bytes(path, &bytes)?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gpsteer_core::datagen::generate;

    fn small() -> SceneConfig {
        SceneSpec { n_freqs: Some(3), n_dirs: Some(5), ..serde_json::from_str(r#"{"kind":"sh-scene","seed":4}"#).unwrap() }
            .resolve()
            .unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let cfg = small();
        let mut ds = generate(&cfg).unwrap();
        ds.values[0] = Complex64::new(0.1 + 0.2, -1e-310);
        ds.values[1] = Complex64::new(-0.0, f64::MAX);
        let dir = tempfile::tempdir().unwrap();
        for name in ["d.json", "d.json.gz"] {
            let p = dir.path().join(name);
            let bytes = write_dataset(&p, &ds, Some(&cfg)).unwrap();
            let back = read_dataset(&p).unwrap();
            assert_eq!(back.scene.as_ref(), Some(&cfg));
            let bits = |d: &FieldDataset| d.values.iter().flat_map(|v| [v.re.to_bits(), v.im.to_bits()]).collect::<Vec<_>>();
            assert_eq!(bits(&back.dataset), bits(&ds));
            assert_eq!(back.dataset, ds);
            assert_eq!(files::to_json_bytes(&DatasetJson::from_dataset(&back.dataset, back.scene.as_ref())), bytes);
        }
    }

    #[test]
    fn schema_errors() {
        let cfg = small();
        let ds = generate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        let mut v = serde_json::to_value(DatasetJson::from_dataset(&ds, None)).unwrap();
        v["values"].as_array_mut().unwrap().pop();
        files::write_json(&p, &v).unwrap();
        let e = read_dataset(&p).unwrap_err();
        assert!(e.to_string().contains("expected F·I·J = 60"), "{e}");
        assert_eq!(e.exit_code(), 3);
        v["schema_version"] = 2.into();
        files::write_json(&p, &v).unwrap();
        assert!(read_dataset(&p).unwrap_err().to_string().contains("unsupported schema version 2"));
        let mut v = serde_json::to_value(DatasetJson::from_dataset(&ds, None)).unwrap();
        v["source_directions"][2]["colatitude"] = 9.0.into();
        files::write_json(&p, &v).unwrap();
        assert!(read_dataset(&p).unwrap_err().to_string().contains("/source_directions/2"));
    }

    #[test]
    fn index_contract_marker() {
        let cfg = small();
        let mut ds = generate(&cfg).unwrap();
        let d = ds.dims();
        for f in 0..d.freqs {
            for i in 0..d.mics {
                for j in 0..d.dirs {
                    ds.values[d.index(f, i, j)] = Complex64::new(f as f64, (100 * i + j) as f64);
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        write_dataset(&p, &ds, None).unwrap();
        let json: DatasetJson = files::read_json(&p).unwrap();
        let (ni, nj) = (d.mics, d.dirs);
        for (n, v) in json.values.iter().enumerate() {
            assert_eq!(*v, [(n / (ni * nj)) as f64, (100 * ((n / nj) % ni) + n % nj) as f64]);
        }
    }
}
