//! World description: meshes with materials, lights, fog, camera anchors, and
//! the JSON + OBJ scene file format.

mod camera;
mod obj;

pub use camera::{project, unproject, CameraIntrinsics, CameraPose, EulerPose, DEFAULT_FOCAL, WORLD_UP};
pub use obj::{load_obj, write_obj};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, TriMesh, Vec3};

/// Far plane for depth quantization when a scene file does not set one.
pub const DEFAULT_Z_MAX: f64 = 50.0;

/// File name of the anchor sidecar kept next to a scene file.
pub const ANCHORS_FILE: &str = "anchors.json";

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("mesh not found: {0}")]
    MeshNotFound(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed OBJ: {message}")]
    Obj { path: String, message: String },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: cannot read texture: {message}")]
    Texture { path: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SceneError + '_ {
    move |source| SceneError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub albedo: [f64; 3],
    /// PNG texture relative to the scene file; replaces `albedo` where the
    /// mesh has texture coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<String>,
    pub ambient: f64,
    pub diffuse: f64,
}

impl Material {
    pub fn diffuse_color(albedo: [f64; 3]) -> Self {
        Material {
            albedo,
            texture: None,
            ambient: 0.3,
            diffuse: 0.7,
        }
    }

    fn validate(&self, name: &str) -> Result<(), SceneError> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.albedo.iter().all(|&c| in_unit(c)) || !in_unit(self.ambient) || !in_unit(self.diffuse) {
            return Err(SceneError::Validation(format!(
                "material {name:?}: albedo and coefficients must lie in [0, 1]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Light {
    /// `direction` is the direction light travels.
    Directional {
        direction: [f64; 3],
        color: [f64; 3],
        intensity: f64,
    },
    /// Unattenuated point light.
    Point {
        position: [f64; 3],
        color: [f64; 3],
        intensity: f64,
    },
    Ambient {
        color: [f64; 3],
        intensity: f64,
    },
}

impl Light {
    fn validate(&self) -> Result<(), SceneError> {
        let (color, intensity) = match self {
            Light::Directional {
                direction,
                color,
                intensity,
            } => {
                let n = Vec3::from(*direction).norm();
                if !((n - 1.0).abs() <= 1e-6) {
                    return Err(SceneError::Validation(format!(
                        "directional light direction {direction:?} is not unit length"
                    )));
                }
                (color, intensity)
            }
            Light::Point {
                position,
                color,
                intensity,
            } => {
                if !position.iter().all(|v| v.is_finite()) {
                    return Err(SceneError::Validation(format!(
                        "point light position {position:?} is not finite"
                    )));
                }
                (color, intensity)
            }
            Light::Ambient { color, intensity } => (color, intensity),
        };
        if !color.iter().all(|c| (0.0..=1.0).contains(c)) || !(*intensity >= 0.0) || !intensity.is_finite() {
            return Err(SceneError::Validation(format!(
                "light color must lie in [0, 1] and intensity be finite and non-negative: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FogSettings {
    /// Extinction per scene unit of camera depth.
    pub density: f64,
    pub color: [f64; 3],
}

impl FogSettings {
    pub const NONE: FogSettings = FogSettings {
        density: 0.0,
        color: [0.0; 3],
    };

    fn validate(&self) -> Result<(), SceneError> {
        if !(self.density >= 0.0) || !self.density.is_finite() {
            return Err(SceneError::Validation(format!(
                "fog density must be finite and non-negative, got {}",
                self.density
            )));
        }
        Ok(())
    }
}

impl Default for FogSettings {
    fn default() -> Self {
        FogSettings::NONE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Normal,
    Bright,
    Dark,
    Fog,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::Normal,
        PresetName::Bright,
        PresetName::Dark,
        PresetName::Fog,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Normal => "normal",
            PresetName::Bright => "bright",
            PresetName::Dark => "dark",
            PresetName::Fog => "fog",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| SceneError::Validation(format!("unknown illumination preset {s:?}")))
    }
}

/// Global lighting variation applied on top of a scene's own lights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IlluminationPreset {
    pub name: PresetName,
    /// Scales every light; exactly 1 for `normal`.
    pub multiplier: f64,
    /// Replaces the scene's fog when set.
    pub fog: Option<FogSettings>,
}

impl IlluminationPreset {
    pub const BRIGHT_MULTIPLIER: f64 = 2.0;
    pub const DARK_MULTIPLIER: f64 = 0.35;
    pub const FOG_DENSITY: f64 = 0.08;
    pub const FOG_COLOR: [f64; 3] = [0.72, 0.74, 0.78];

    pub fn builtin(name: PresetName) -> Self {
        let (multiplier, fog) = match name {
            PresetName::Normal => (1.0, None),
            PresetName::Bright => (Self::BRIGHT_MULTIPLIER, None),
            PresetName::Dark => (Self::DARK_MULTIPLIER, None),
            PresetName::Fog => (
                1.0,
                Some(FogSettings {
                    density: Self::FOG_DENSITY,
                    color: Self::FOG_COLOR,
                }),
            ),
        };
        IlluminationPreset { name, multiplier, fog }
    }

    pub fn normal() -> Self {
        Self::builtin(PresetName::Normal)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.multiplier > 0.0) || !self.multiplier.is_finite() {
            return Err(SceneError::Validation(format!(
                "preset multiplier must be positive, got {}",
                self.multiplier
            )));
        }
        if self.name == PresetName::Normal && self.multiplier != 1.0 {
            return Err(SceneError::Validation("the normal preset must use multiplier 1".into()));
        }
        if let Some(fog) = &self.fog {
            fog.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraAnchor {
    pub id: String,
    #[serde(flatten)]
    pub pose: EulerPose,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct SceneMesh {
    /// Path as written in the scene file, relative to it.
    pub path: String,
    pub material: String,
    pub mesh: TriMesh,
}

/// A fully resolved, immutable world.
#[derive(Debug, Clone)]
pub struct Scene {
    pub meshes: Vec<SceneMesh>,
    pub materials: BTreeMap<String, Material>,
    pub lights: Vec<Light>,
    pub fog: FogSettings,
    pub z_max: f64,
    /// Outdoor scenes also render under the fog preset.
    pub outdoor: bool,
    pub anchors: Vec<CameraAnchor>,
    textures: BTreeMap<String, RgbImage>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MeshRef {
    path: String,
    material: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneFile {
    meshes: Vec<MeshRef>,
    materials: BTreeMap<String, Material>,
    #[serde(default)]
    lights: Vec<Light>,
    #[serde(default)]
    fog: FogSettings,
    #[serde(default = "default_z_max")]
    z_max: f64,
    #[serde(default)]
    outdoor: bool,
    #[serde(default)]
    anchors: Vec<CameraAnchor>,
}

fn default_z_max() -> f64 {
    DEFAULT_Z_MAX
}

impl Scene {
    /// Assembles and validates an in-memory scene. Textures are not
    /// available for scenes built this way.
    pub fn new(
        meshes: Vec<SceneMesh>,
        materials: BTreeMap<String, Material>,
        lights: Vec<Light>,
        fog: FogSettings,
        z_max: f64,
        anchors: Vec<CameraAnchor>,
    ) -> Result<Self, SceneError> {
        let scene = Scene {
            meshes,
            materials,
            lights,
            fog,
            z_max,
            outdoor: false,
            anchors,
            textures: BTreeMap::new(),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.meshes.is_empty() {
            return Err(SceneError::Validation("scene has no meshes".into()));
        }
        if !(self.z_max > 0.0) || !self.z_max.is_finite() {
            return Err(SceneError::Validation(format!(
                "z_max must be positive, got {}",
                self.z_max
            )));
        }
        for (name, m) in &self.materials {
            m.validate(name)?;
        }
        for mesh in &self.meshes {
            if !self.materials.contains_key(&mesh.material) {
                return Err(SceneError::Validation(format!(
                    "mesh {} references unknown material {:?}",
                    mesh.path, mesh.material
                )));
            }
        }
        for light in &self.lights {
            light.validate()?;
        }
        self.fog.validate()?;
        validate_anchors(&self.anchors)
    }

    pub fn triangle_count(&self) -> usize {
        self.meshes.iter().map(|m| m.mesh.triangle_count()).sum()
    }

    pub fn texture(&self, material: &str) -> Option<&RgbImage> {
        self.textures.get(material)
    }

    pub fn anchor(&self, id: &str) -> Option<&CameraAnchor> {
        self.anchors.iter().find(|a| a.id == id)
    }

    /// Scene JSON as written by [`Scene::save`].
    pub fn to_json(&self) -> String {
        let file = SceneFile {
            meshes: self
                .meshes
                .iter()
                .map(|m| MeshRef {
                    path: m.path.clone(),
                    material: m.material.clone(),
                })
                .collect(),
            materials: self.materials.clone(),
            lights: self.lights.clone(),
            fog: self.fog,
            z_max: self.z_max,
            outdoor: self.outdoor,
            anchors: self.anchors.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("scene serializes");
        text.push('\n');
        text
    }

    /// Writes `scene.json` plus every mesh as OBJ into `dir`; returns the
    /// scene file path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, SceneError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for mesh in &self.meshes {
            let path = dir.join(&mesh.path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            std::fs::write(&path, write_obj(&mesh.mesh)).map_err(io_err(&path))?;
        }
        let scene_path = dir.join("scene.json");
        std::fs::write(&scene_path, self.to_json()).map_err(io_err(&scene_path))?;
        Ok(scene_path)
    }
}

fn validate_anchors(anchors: &[CameraAnchor]) -> Result<(), SceneError> {
    let mut seen = HashSet::new();
    for a in anchors {
        if !seen.insert(a.id.as_str()) {
            return Err(SceneError::Validation(format!("duplicate anchor id {:?}", a.id)));
        }
        if !a.pose.is_finite() {
            return Err(SceneError::Validation(format!(
                "anchor {:?} has a non-finite pose",
                a.id
            )));
        }
    }
    Ok(())
}

/// Loads a scene file, its OBJ meshes and textures, and the anchor sidecar
/// when one exists next to it (the sidecar replaces inline anchors).
pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let file: SceneFile = serde_json::from_str(&text).map_err(|source| SceneError::Json {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut meshes = Vec::with_capacity(file.meshes.len());
    for m in &file.meshes {
        let mesh_path = base.join(&m.path);
        if !mesh_path.is_file() {
            return Err(SceneError::MeshNotFound(m.path.clone()));
        }
        meshes.push(SceneMesh {
            path: m.path.clone(),
            material: m.material.clone(),
            mesh: load_obj(&mesh_path)?,
        });
    }
    let mut textures = BTreeMap::new();
    for (name, material) in &file.materials {
        if let Some(tex) = &material.texture {
            let tex_path = base.join(tex);
            let img = image::open(&tex_path).map_err(|e| SceneError::Texture {
                path: tex_path.display().to_string(),
                message: e.to_string(),
            })?;
            textures.insert(name.clone(), img.to_rgb8());
        }
    }
    let sidecar = base.join(ANCHORS_FILE);
    let anchors = if sidecar.is_file() {
        load_anchors(&sidecar)?
    } else {
        file.anchors
    };
    let scene = Scene {
        meshes,
        materials: file.materials,
        lights: file.lights,
        fog: file.fog,
        z_max: file.z_max,
        outdoor: file.outdoor,
        anchors,
        textures,
    };
    scene.validate()?;
    Ok(scene)
}

/// Path of the anchor sidecar for a scene file.
pub fn anchors_path(scene_path: &Path) -> PathBuf {
    scene_path.parent().unwrap_or(Path::new(".")).join(ANCHORS_FILE)
}

pub fn load_anchors(path: &Path) -> Result<Vec<CameraAnchor>, SceneError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let anchors: Vec<CameraAnchor> = serde_json::from_str(&text).map_err(|source| SceneError::Json {
        path: path.display().to_string(),
        source,
    })?;
    validate_anchors(&anchors)?;
    Ok(anchors)
}

/// Writes the anchor list through a temporary file and a rename, so readers
/// never observe a partially written file.
pub fn save_anchors(path: &Path, anchors: &[CameraAnchor]) -> Result<(), SceneError> {
    validate_anchors(anchors)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    let mut text = serde_json::to_string_pretty(anchors).expect("anchors serialize");
    text.push('\n');
    tmp.write_all(text.as_bytes()).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| SceneError::Io {
        path: path.display().to_string(),
        source: e.error,
    })?;
    Ok(())
}
