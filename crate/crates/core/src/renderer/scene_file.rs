use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EstimatorConfig, Geometry, Luminaire, Material, Rgb, Scene, Surface};
use crate::dataio::{look_at, CameraKind, CameraPose};
use crate::error::{Error, Result};
use crate::plenoctree::Plenoctree;
use crate::raymarch::{MarchSettings, Proxy, TransmittanceModel};
use crate::shmath::ActivationKind;
use crate::vec3::Vec3;

/// On-disk scene description (TOML). See `docs/scene-format.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default)]
    pub background: Rgb,
    pub camera: CameraSpec,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default, rename = "surface")]
    pub surfaces: Vec<SurfaceSpec>,
    #[serde(default, rename = "luminaire")]
    pub luminaires: Vec<LuminaireSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    #[serde(flatten)]
    pub kind: CameraKind,
    pub position: Vec3<f64>,
    pub target: Vec3<f64>,
    #[serde(default = "default_up")]
    pub up: Vec3<f64>,
    pub resolution: (usize, usize),
}

fn default_up() -> Vec3<f64> {
    Vec3::lit(0.0, 0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub geometry: Geometry,
    pub material: Material,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LuminaireSpec {
    /// Octree file, relative to the scene file's directory.
    pub octree: PathBuf,
    pub proxy: Proxy<f64>,
    #[serde(default = "Vec3::zero")]
    pub offset: Vec3<f64>,
    #[serde(default = "one")]
    pub scale: f64,
    pub activation: ActivationKind,
    #[serde(default)]
    pub model: TransmittanceModel,
    #[serde(default = "default_sigma_min")]
    pub sigma_min: f64,
    #[serde(default = "default_alpha_max")]
    pub alpha_max: f64,
}

fn one() -> f64 {
    1.0
}

fn default_sigma_min() -> f64 {
    0.1
}

fn default_alpha_max() -> f64 {
    0.9
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidScene(e.to_string()))
    }

    /// Builds the scene, loading octrees relative to `base_dir`. Each octree
    /// file is read once even if several luminaires share it.
    pub fn build(&self, base_dir: &Path) -> Result<Scene> {
        let c = &self.camera;
        let rotation = look_at(c.position, c.target, c.up)?;
        let camera = CameraPose {
            kind: c.kind,
            position: c.position,
            rotation,
            resolution: c.resolution,
        };
        let mut scene = Scene::new(camera, self.background);
        scene.estimator = self.estimator;
        scene.surfaces = self
            .surfaces
            .iter()
            .map(|s| Surface {
                geometry: s.geometry.clone(),
                material: s.material,
            })
            .collect();
        let mut cache: HashMap<PathBuf, Arc<Plenoctree<f64>>> = HashMap::new();
        for l in &self.luminaires {
            let path = base_dir.join(&l.octree);
            let octree = match cache.get(&path) {
                Some(t) => t.clone(),
                None => {
                    let t = Arc::new(Plenoctree::<f64>::load(&path)?);
                    cache.insert(path, t.clone());
                    t
                }
            };
            let settings = MarchSettings {
                model: l.model,
                activation: l.activation,
                sigma_min: l.sigma_min,
                alpha_max: l.alpha_max,
            };
            let mut lum = Luminaire::new(l.proxy, octree, settings);
            lum.offset = l.offset;
            lum.scale = l.scale;
            scene.luminaires.push(lum);
        }
        scene.validate()?;
        Ok(scene)
    }
}

impl Scene {
    pub fn load(path: impl AsRef<Path>) -> Result<Scene> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        SceneFile::parse(&text)?.build(base)
    }
}
