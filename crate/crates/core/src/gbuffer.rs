//! Per-view render targets: shaded RGB, camera-space depth, 10-bit quantized
//! depth, surface normals (float and 8-bit encoded) and the hit mask.
//!
//! One primary ray per pixel through the pixel centre. Shading is ambient
//! plus Lambertian diffuse scaled by the preset multiplier, then blended with
//! fog as `mix(fog, c, exp(-density * depth))`.

use std::path::Path;

use image::{ImageBuffer, Luma, RgbImage};
use thiserror::Error;

use crate::geometry::{AccelIndex, GeometryError, Ray, RayHit, Vec3};
use crate::scene::{CameraIntrinsics, CameraPose, FogSettings, IlluminationPreset, Light, Material, Scene, SceneError};

/// Number of depth quantization levels.
pub const DEPTH_LEVELS: u16 = 1024;

/// Quantized depth of pixels without geometry.
pub const VOID_DEPTH: u16 = DEPTH_LEVELS - 1;

/// Sky color for void pixels in fog-free views, before the preset multiplier.
pub const SKY_COLOR: [f64; 3] = [0.62, 0.72, 0.84];

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

/// `floor(clamp(depth / z_max, 0, 1 - 1e-9) * 1024)`; infinity maps to the
/// void level.
pub fn quantize_depth(depth: f64, z_max: f64) -> Result<u16, RenderError> {
    if !(z_max > 0.0) {
        return Err(RenderError::Domain(format!("z_max must be positive, got {z_max}")));
    }
    if depth.is_nan() || depth < 0.0 {
        return Err(RenderError::Domain(format!("depth must be non-negative, got {depth}")));
    }
    if depth == f64::INFINITY {
        return Ok(VOID_DEPTH);
    }
    let normalized = (depth / z_max).clamp(0.0, 1.0 - 1e-9);
    Ok((normalized * DEPTH_LEVELS as f64).floor() as u16)
}

/// Lower edge of the depth bin; the true depth lies in
/// `[value, value + z_max / 1024)` for depths below `z_max`.
pub fn dequantize_depth(level: u16, z_max: f64) -> f64 {
    level as f64 * z_max / DEPTH_LEVELS as f64
}

/// Encodes a unit normal component-wise as `round((n + 1) / 2 * 255)`.
pub fn encode_normal(n: &Vec3) -> [u8; 3] {
    [n.x, n.y, n.z].map(|c| (((c + 1.0) / 2.0 * 255.0).round()).clamp(0.0, 255.0) as u8)
}

pub(crate) fn to_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// A scene together with its acceleration index.
#[derive(Debug, Clone)]
pub struct IndexedScene {
    pub scene: Scene,
    pub accel: AccelIndex,
}

impl IndexedScene {
    pub fn new(scene: Scene) -> Result<Self, RenderError> {
        let accel = AccelIndex::build(scene.meshes.iter().map(|m| &m.mesh))?;
        Ok(IndexedScene { scene, accel })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
    /// Camera-space z; `f64::INFINITY` where nothing was hit.
    pub depth_f: Vec<f64>,
    pub depth_q: Vec<u16>,
    /// Unit normals facing the camera; zero where nothing was hit.
    pub normal_f: Vec<Vec3>,
    pub normal_8: Vec<[u8; 3]>,
    pub hit_mask: Vec<bool>,
}

impl GBuffer {
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.rgb.clone()).expect("buffer size")
    }

    pub fn normal_image(&self) -> RgbImage {
        RgbImage::from_raw(
            self.width,
            self.height,
            self.normal_8.iter().flatten().copied().collect(),
        )
        .expect("buffer size")
    }

    /// Writes `{prefix}_rgb.png`, `{prefix}_normal.png` and a 16-bit
    /// `{prefix}_depth.png` holding the quantized depth.
    pub fn save_debug(&self, dir: &Path, prefix: &str) -> Result<(), RenderError> {
        let save = |img: Result<(), image::ImageError>, name: &Path| {
            img.map_err(|e| RenderError::Output {
                path: name.display().to_string(),
                message: e.to_string(),
            })
        };
        std::fs::create_dir_all(dir).map_err(|e| RenderError::Output {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        let p = dir.join(format!("{prefix}_rgb.png"));
        save(self.rgb_image().save(&p), &p)?;
        let p = dir.join(format!("{prefix}_normal.png"));
        save(self.normal_image().save(&p), &p)?;
        let depth: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width, self.height, self.depth_q.clone()).expect("buffer size");
        let p = dir.join(format!("{prefix}_depth.png"));
        save(depth.save(&p), &p)
    }
}

/// Camera ray through the centre of pixel `(x, y)`, plus the factor turning
/// ray length into camera-space depth.
pub(crate) fn pixel_ray(x: u32, y: u32, intrinsics: &CameraIntrinsics, pose: &CameraPose) -> (Ray, f64) {
    let camera = intrinsics.back_projection() * Vec3::new(x as f64 + 0.5, y as f64 + 0.5, 1.0);
    let len = camera.norm();
    let dir = pose.orientation * (camera / len);
    (
        Ray {
            origin: pose.position,
            direction: dir,
        },
        1.0 / len,
    )
}

/// Lighting state shared by the G-buffer pass and the sample renderer.
pub(crate) struct Shader<'a> {
    scene: &'a Scene,
    multiplier: f64,
    fog: FogSettings,
}

impl<'a> Shader<'a> {
    pub(crate) fn new(scene: &'a Scene, preset: &IlluminationPreset) -> Self {
        Shader {
            scene,
            multiplier: preset.multiplier,
            fog: preset.fog.unwrap_or(scene.fog),
        }
    }

    pub(crate) fn material(&self, mesh_id: u32) -> &'a Material {
        let name = &self.scene.meshes[mesh_id as usize].material;
        &self.scene.materials[name]
    }

    /// Albedo of a scene surface hit, sampling the material texture when the
    /// mesh carries texture coordinates.
    pub(crate) fn albedo(&self, hit: &RayHit) -> [f64; 3] {
        let mesh = &self.scene.meshes[hit.mesh_id as usize];
        let material = &self.scene.materials[&mesh.material];
        if let (Some(tex), Some(uv)) = (
            self.scene.texture(&mesh.material),
            mesh.mesh.uv_at(hit.triangle_id as usize, hit.bary),
        ) {
            let u = uv[0] - uv[0].floor();
            let v = uv[1] - uv[1].floor();
            let x = ((u * tex.width() as f64) as u32).min(tex.width() - 1);
            let y = (((1.0 - v) * tex.height() as f64) as u32).min(tex.height() - 1);
            let p = tex.get_pixel(x, y).0;
            return p.map(|c| c as f64 / 255.0);
        }
        material.albedo
    }

    /// Unit shading normal of a scene hit, turned to face the ray origin.
    pub(crate) fn facing_normal(&self, hit: &RayHit, ray_dir: &Vec3) -> Vec3 {
        let mesh = &self.scene.meshes[hit.mesh_id as usize].mesh;
        let n = mesh.normal_at(hit.triangle_id as usize, hit.bary);
        if n.dot(ray_dir) > 0.0 {
            -n
        } else {
            n
        }
    }

    /// Ambient plus Lambertian diffuse, scaled by the preset multiplier.
    pub(crate) fn lit(&self, albedo: [f64; 3], material: &Material, normal: &Vec3, point: &Vec3) -> [f64; 3] {
        let mut irradiance = [0.0f64; 3];
        for light in &self.scene.lights {
            let (weight, color, intensity) = match light {
                Light::Ambient { color, intensity } => (material.ambient, color, intensity),
                Light::Directional {
                    direction,
                    color,
                    intensity,
                } => {
                    let l = -Vec3::from(*direction);
                    (material.diffuse * normal.dot(&l).max(0.0), color, intensity)
                }
                Light::Point {
                    position,
                    color,
                    intensity,
                } => {
                    let to_light = Vec3::from(*position) - point;
                    let len = to_light.norm();
                    let cos = if len > 0.0 { normal.dot(&to_light) / len } else { 0.0 };
                    (material.diffuse * cos.max(0.0), color, intensity)
                }
            };
            for k in 0..3 {
                irradiance[k] += weight * color[k] * intensity;
            }
        }
        [0, 1, 2].map(|k| albedo[k] * irradiance[k] * self.multiplier)
    }

    pub(crate) fn fogged(&self, color: [f64; 3], depth: f64) -> [f64; 3] {
        if self.fog.density == 0.0 {
            return color;
        }
        let keep = (-self.fog.density * depth).exp();
        [0, 1, 2].map(|k| keep * color[k] + (1.0 - keep) * self.fog.color[k])
    }

    pub(crate) fn background(&self) -> [f64; 3] {
        if self.fog.density > 0.0 {
            self.fog.color
        } else {
            SKY_COLOR.map(|c| c * self.multiplier)
        }
    }

    /// Final linear color of a scene surface hit seen along `ray`.
    pub(crate) fn surface_color(&self, hit: &RayHit, ray: &Ray, depth: f64) -> [f64; 3] {
        let normal = self.facing_normal(hit, &ray.direction);
        let c = self.lit(self.albedo(hit), self.material(hit.mesh_id), &normal, &hit.point);
        self.fogged(c, depth)
    }
}

pub fn render_gbuffer(
    world: &IndexedScene,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    preset: &IlluminationPreset,
) -> Result<GBuffer, RenderError> {
    if intrinsics.width == 0 || intrinsics.height == 0 {
        return Err(RenderError::Domain("zero-area image".into()));
    }
    intrinsics.validate()?;
    preset.validate()?;
    let (w, h) = (intrinsics.width, intrinsics.height);
    let n = intrinsics.pixel_count();
    let mut g = GBuffer {
        width: w,
        height: h,
        rgb: Vec::with_capacity(3 * n),
        depth_f: Vec::with_capacity(n),
        depth_q: Vec::with_capacity(n),
        normal_f: Vec::with_capacity(n),
        normal_8: Vec::with_capacity(n),
        hit_mask: Vec::with_capacity(n),
    };
    let shader = Shader::new(&world.scene, preset);
    let z_max = world.scene.z_max;
    for y in 0..h {
        for x in 0..w {
            let (ray, depth_per_t) = pixel_ray(x, y, intrinsics, pose);
            match world.accel.raycast(&ray) {
                Some(hit) => {
                    let depth = hit.t * depth_per_t;
                    let normal = shader.facing_normal(&hit, &ray.direction);
                    let color = shader.surface_color(&hit, &ray, depth);
                    g.rgb.extend(color.map(to_byte));
                    g.depth_f.push(depth);
                    g.depth_q.push(quantize_depth(depth, z_max)?);
                    g.normal_8.push(encode_normal(&normal));
                    g.normal_f.push(normal);
                    g.hit_mask.push(true);
                }
                None => {
                    g.rgb.extend(shader.background().map(to_byte));
                    g.depth_f.push(f64::INFINITY);
                    g.depth_q.push(VOID_DEPTH);
                    g.normal_f.push(Vec3::zeros());
                    g.normal_8.push(encode_normal(&Vec3::zeros()));
                    g.hit_mask.push(false);
                }
            }
        }
    }
    Ok(g)
}
