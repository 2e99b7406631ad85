//! Rendering the scene together with its text decals, word visibility and
//! per-sample word annotations.

use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gbuffer::{pixel_ray, to_byte, IndexedScene, RenderError, Shader};
use crate::geometry::{AccelIndex, Ray, RayHit, Vec3};
use crate::placement::{PlacedText, WordGeometry, SURFACE_EPS};
use crate::scene::{project, CameraIntrinsics, CameraPose, EulerPose, IlluminationPreset, Material};

/// Visibility samples per side of a word box.
pub const VISIBILITY_GRID: usize = 8;
pub const DEFAULT_KEEP_THRESHOLD: f64 = 0.3;
/// Most decal layers composited along one ray.
const MAX_LAYERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewpointRanges {
    /// Radius of the ball camera positions are drawn from.
    pub radius: f64,
    /// Yaw and pitch are perturbed within plus or minus this many degrees.
    pub angle_deg: f64,
}

impl Default for ViewpointRanges {
    fn default() -> Self {
        ViewpointRanges {
            radius: 0.5,
            angle_deg: 15.0,
        }
    }
}

/// Resampling budget per viewpoint before falling back to the anchor pose.
pub const VIEWPOINT_ATTEMPTS: usize = 10;

/// Draws `n` poses around `anchor`; a draw is kept only when `accept`
/// approves it, otherwise it is redrawn up to [`VIEWPOINT_ATTEMPTS`] times
/// before the anchor pose itself is used.
pub fn sample_viewpoints<R: Rng + ?Sized>(
    anchor: &EulerPose,
    n: usize,
    ranges: &ViewpointRanges,
    rng: &mut R,
    mut accept: impl FnMut(&EulerPose) -> bool,
) -> Vec<EulerPose> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut chosen = None;
        for _ in 0..VIEWPOINT_ATTEMPTS {
            let offset = loop {
                let v = [0; 3].map(|_| rng.gen_range(-1.0..=1.0f64));
                if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                    break v;
                }
            };
            let mut delta = [0.0; 2];
            for d in &mut delta {
                *d = rng.gen_range(-1.0..=1.0) * ranges.angle_deg;
            }
            let pose = EulerPose {
                position: [0, 1, 2].map(|k| anchor.position[k] + offset[k] * ranges.radius),
                yaw: anchor.yaw + delta[0],
                pitch: anchor.pitch + delta[1],
                roll: anchor.roll,
            };
            if accept(&pose) {
                chosen = Some(pose);
                break;
            }
        }
        out.push(chosen.unwrap_or(*anchor));
    }
    out
}

/// The scene plus a set of text decals, indexed together so decals take
/// part in occlusion.
pub struct SampleWorld<'a> {
    pub base: &'a IndexedScene,
    pub decals: Vec<PlacedText>,
    pub accel: AccelIndex,
    /// First global word id of each decal; ids start at 1.
    word_offsets: Vec<u32>,
}

struct TexelSample {
    /// Premultiplied colour in `[0, 1]`.
    color: [f64; 3],
    alpha: f64,
    owner: u16,
}

impl<'a> SampleWorld<'a> {
    pub fn new(base: &'a IndexedScene, decals: Vec<PlacedText>) -> Result<Self, RenderError> {
        let accel = AccelIndex::build(
            base.scene
                .meshes
                .iter()
                .map(|m| &m.mesh)
                .chain(decals.iter().map(|d| &d.mesh)),
        )?;
        let mut word_offsets = Vec::with_capacity(decals.len());
        let mut next = 1u32;
        for d in &decals {
            word_offsets.push(next);
            next += d.words.len() as u32;
        }
        Ok(SampleWorld {
            base,
            decals,
            accel,
            word_offsets,
        })
    }

    /// Global id (from 1) of word `word` on decal `decal`.
    pub fn word_id(&self, decal: usize, word: usize) -> u32 {
        self.word_offsets[decal] + word as u32
    }

    fn decal_index(&self, mesh_id: u32) -> Option<usize> {
        (mesh_id as usize).checked_sub(self.base.scene.meshes.len())
    }

    fn texel(&self, decal: usize, hit: &RayHit) -> TexelSample {
        let d = &self.decals[decal];
        let uv = d
            .mesh
            .uv_at(hit.triangle_id as usize, hit.bary)
            .expect("decals carry uvs");
        let tex = &d.texture;
        let (w, h) = (tex.width() as i64, tex.height() as i64);
        let x = uv[0] * w as f64 - 0.5;
        let y = uv[1] * h as f64 - 0.5;
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let mut color = [0.0; 3];
        let mut alpha = 0.0;
        let mut owner = (0.0, 0u16);
        for (dx, dy, wgt) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            let tx = (x0 as i64 + dx).clamp(0, w - 1) as u32;
            let ty = (y0 as i64 + dy).clamp(0, h - 1) as u32;
            let p = tex.rgba.get_pixel(tx, ty).0;
            let a = p[3] as f64 / 255.0;
            for k in 0..3 {
                color[k] += wgt * p[k] as f64 / 255.0;
            }
            alpha += wgt * a;
            let o = tex.owner[(ty * tex.width() + tx) as usize];
            if o > 0 && wgt * a > owner.0 {
                owner = (wgt * a, o);
            }
        }
        TexelSample {
            color,
            alpha,
            owner: owner.1,
        }
    }

    /// Nearest hit that is either scene geometry or an inked decal texel,
    /// skipping decals listed in `skip`.
    fn nearest(&self, ray: &Ray, t_max: f64, skip: &[usize]) -> Option<RayHit> {
        self.accel
            .raycast_filtered(ray, t_max, |h| match self.decal_index(h.mesh_id) {
                None => true,
                Some(d) => !skip.contains(&d) && self.texel(d, h).alpha > 0.0,
            })
    }

    /// Final colour and word id seen along a camera ray.
    fn trace(&self, shader: &Shader, ray: &Ray, depth_per_t: f64) -> ([f64; 3], u32) {
        let mut layers: Vec<(usize, RayHit)> = Vec::new();
        let mut skip: Vec<usize> = Vec::new();
        let mut base: Option<RayHit> = None;
        while layers.len() < MAX_LAYERS {
            match self.nearest(ray, f64::INFINITY, &skip) {
                None => break,
                Some(hit) => match self.decal_index(hit.mesh_id) {
                    None => {
                        base = Some(hit);
                        break;
                    }
                    Some(d) => {
                        skip.push(d);
                        layers.push((d, hit));
                    }
                },
            }
        }
        let (mut color, material) = match &base {
            Some(hit) => (
                shader.surface_color(hit, ray, hit.t * depth_per_t),
                shader.material(hit.mesh_id).clone(),
            ),
            None => (shader.background(), Material::diffuse_color([1.0; 3])),
        };
        let mut id = 0;
        for (d, hit) in layers.iter().rev() {
            let texel = self.texel(*d, hit);
            let a = texel.alpha.min(1.0);
            let albedo = texel.color.map(|c| (c / a).min(1.0));
            let mut n = self.decals[*d].mesh.normal_at(hit.triangle_id as usize, hit.bary);
            if n.dot(&ray.direction) > 0.0 {
                n = -n;
            }
            // Text is lit like paint on the surface underneath it.
            let lit = shader.fogged(shader.lit(albedo, &material, &n, &hit.point), hit.t * depth_per_t);
            color = [0, 1, 2].map(|k| a * lit[k] + (1.0 - a) * color[k]);
            id = if texel.owner > 0 {
                self.word_id(*d, texel.owner as usize - 1)
            } else {
                0
            };
        }
        (color, id)
    }
}

/// A rendered view: colour image plus, per pixel, the id of the word whose
/// ink is visible there (0 for none).
pub struct RenderedView {
    pub image: RgbImage,
    pub word_ids: Vec<u32>,
}

pub fn render_sample(
    world: &SampleWorld,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    preset: &IlluminationPreset,
) -> Result<RenderedView, RenderError> {
    if intrinsics.width == 0 || intrinsics.height == 0 {
        return Err(RenderError::Domain("zero-area image".into()));
    }
    intrinsics.validate()?;
    preset.validate()?;
    let shader = Shader::new(&world.base.scene, preset);
    let (w, h) = (intrinsics.width, intrinsics.height);
    let mut rgb = Vec::with_capacity(intrinsics.pixel_count() * 3);
    let mut ids = Vec::with_capacity(intrinsics.pixel_count());
    for y in 0..h {
        for x in 0..w {
            let (ray, depth_per_t) = pixel_ray(x, y, intrinsics, pose);
            let (c, id) = world.trace(&shader, &ray, depth_per_t);
            rgb.extend(c.map(to_byte));
            ids.push(id);
        }
    }
    Ok(RenderedView {
        image: RgbImage::from_raw(w, h, rgb).expect("buffer size"),
        word_ids: ids,
    })
}

/// Fraction of stratified samples over the word's box that are inside the
/// image, facing the camera and not blocked by nearer geometry.
pub fn compute_visibility(
    world: &SampleWorld,
    decal: usize,
    word: &WordGeometry,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
) -> f64 {
    let placed = &world.decals[decal];
    let [u0, v0, u1, v1] = word.uv_box;
    let k = VISIBILITY_GRID;
    let mut visible = 0;
    for j in 0..k {
        for i in 0..k {
            let uv = [
                u0 + (i as f64 + 0.5) / k as f64 * (u1 - u0),
                v0 + (j as f64 + 0.5) / k as f64 * (v1 - v0),
            ];
            let Some((p, n)) = placed.point_at_uv(uv) else {
                continue;
            };
            let Some((px, _)) = project(&p, intrinsics, pose) else {
                continue;
            };
            if !(px[0] >= 0.0 && px[1] >= 0.0 && px[0] < intrinsics.width as f64 && px[1] < intrinsics.height as f64) {
                continue;
            }
            let to_cam = pose.position - p;
            if to_cam.dot(&n) <= 0.0 {
                continue;
            }
            let dist = to_cam.norm();
            let Ok(ray) = Ray::through(pose.position, p) else {
                continue;
            };
            let blocked = world.nearest(&ray, dist - SURFACE_EPS, &[]).is_some();
            if !blocked {
                visible += 1;
            }
        }
    }
    visible as f64 / (k * k) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotationPolicy {
    /// Words below this visibility are kept but flagged as ignored.
    pub keep_threshold: f64,
    pub char_quads: bool,
}

impl Default for AnnotationPolicy {
    fn default() -> Self {
        AnnotationPolicy {
            keep_threshold: DEFAULT_KEEP_THRESHOLD,
            char_quads: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharAnnotation {
    pub ch: char,
    pub quad: [i32; 8],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAnnotation {
    /// Clockwise from the top-left, in image pixels.
    pub quad: [i32; 8],
    pub transcription: String,
    pub visibility: f64,
    pub ignore: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chars: Option<Vec<CharAnnotation>>,
    /// Global word id in the rendered view's id buffer.
    #[serde(skip)]
    pub word_id: u32,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by the monotone chain, counter-clockwise in a y-up frame.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Smallest-area enclosing rectangle of `points` (one side flush with a
/// hull edge), as four corners.
pub fn min_area_rect(points: &[[f64; 2]]) -> [[f64; 2]; 4] {
    let hull = convex_hull(points);
    let aabb = |pts: &[[f64; 2]]| {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in pts {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]
    };
    if hull.len() < 3 {
        return aabb(&hull);
    }
    let mut best: Option<(f64, [[f64; 2]; 4])> = None;
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        if len == 0.0 {
            continue;
        }
        let e = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let f = [-e[1], e[0]];
        let (mut smin, mut smax, mut tmin, mut tmax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let s = p[0] * e[0] + p[1] * e[1];
            let t = p[0] * f[0] + p[1] * f[1];
            smin = smin.min(s);
            smax = smax.max(s);
            tmin = tmin.min(t);
            tmax = tmax.max(t);
        }
        let area = (smax - smin) * (tmax - tmin);
        if best.as_ref().is_none_or(|b| area < b.0 - 1e-12) {
            let at = |s: f64, t: f64| [s * e[0] + t * f[0], s * e[1] + t * f[1]];
            best = Some((area, [at(smin, tmin), at(smax, tmin), at(smax, tmax), at(smin, tmax)]));
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| aabb(&hull))
}

/// Orders rectangle corners clockwise on screen (y down), starting from the
/// corner nearest `first`, after growing the rectangle by `grow` pixels on
/// every side.
fn screen_quad(rect: [[f64; 2]; 4], first: [f64; 2], grow: f64, w: u32, h: u32) -> [i32; 8] {
    let c = [
        rect.iter().map(|p| p[0]).sum::<f64>() / 4.0,
        rect.iter().map(|p| p[1]).sum::<f64>() / 4.0,
    ];
    let axis = |to: usize| {
        let e = [rect[to][0] - rect[0][0], rect[to][1] - rect[0][1]];
        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
        (
            len,
            if len > 0.0 {
                [e[0] / len, e[1] / len]
            } else {
                [0.0, 0.0]
            },
        )
    };
    let (len1, mut e1) = axis(1);
    let (len2, mut e2) = axis(3);
    // Collapsed rectangles still grow into a small square.
    if len1 == 0.0 && len2 == 0.0 {
        e1 = [1.0, 0.0];
        e2 = [0.0, 1.0];
    } else if len1 == 0.0 {
        e1 = [-e2[1], e2[0]];
    } else if len2 == 0.0 {
        e2 = [-e1[1], e1[0]];
    }
    let (a, b) = (len1 / 2.0 + grow, len2 / 2.0 + grow);
    let mut pts: Vec<[f64; 2]> = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .map(|(s, t)| {
            [
                c[0] + s * a * e1[0] + t * b * e2[0],
                c[1] + s * a * e1[1] + t * b * e2[1],
            ]
        })
        .collect();
    pts.sort_by(|a, b| {
        let aa = (a[1] - c[1]).atan2(a[0] - c[0]);
        let bb = (b[1] - c[1]).atan2(b[0] - c[0]);
        aa.total_cmp(&bb)
    });
    let start = (0..4)
        .min_by(|&i, &j| {
            let d = |p: [f64; 2]| (p[0] - first[0]).powi(2) + (p[1] - first[1]).powi(2);
            d(pts[i]).total_cmp(&d(pts[j]))
        })
        .unwrap();
    let mut out = [0i32; 8];
    for k in 0..4 {
        let p = pts[(start + k) % 4];
        out[2 * k] = (p[0].round() as i32).clamp(0, w as i32 - 1);
        out[2 * k + 1] = (p[1].round() as i32).clamp(0, h as i32 - 1);
    }
    out
}

fn project_outline(points: &[Vec3], pose: &CameraPose, intrinsics: &CameraIntrinsics) -> Vec<[f64; 2]> {
    points
        .iter()
        .filter_map(|p| project(p, intrinsics, pose))
        .map(|(px, _)| px)
        .collect()
}

/// Annotations for every word with non-zero visibility, in decal and word
/// order.
pub fn annotate(
    world: &SampleWorld,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    policy: &AnnotationPolicy,
) -> Vec<WordAnnotation> {
    let (w, h) = (intrinsics.width, intrinsics.height);
    let mut out = Vec::new();
    for (di, placed) in world.decals.iter().enumerate() {
        for (wi, word) in placed.words.iter().enumerate() {
            let visibility = compute_visibility(world, di, word, pose, intrinsics);
            if visibility == 0.0 {
                continue;
            }
            let pts = project_outline(&word.outline, pose, intrinsics);
            if pts.is_empty() {
                continue;
            }
            let quad = screen_quad(min_area_rect(&pts), pts[0], 0.5, w, h);
            let chars = policy.char_quads.then(|| {
                word.chars
                    .iter()
                    .filter_map(|c| {
                        let pts = project_outline(&c.outline, pose, intrinsics);
                        (!pts.is_empty()).then(|| CharAnnotation {
                            ch: c.ch,
                            quad: screen_quad(min_area_rect(&pts), pts[0], 0.5, w, h),
                        })
                    })
                    .collect()
            });
            out.push(WordAnnotation {
                quad,
                transcription: word.text.clone(),
                visibility,
                ignore: visibility < policy.keep_threshold || !word.renderable,
                chars,
                word_id: world.word_id(di, wi),
            });
        }
    }
    out
}

/// True when `quad` (clockwise or not) contains the point.
pub fn quad_contains(quad: &[i32; 8], x: f64, y: f64) -> bool {
    let p: Vec<[f64; 2]> = (0..4).map(|k| [quad[2 * k] as f64, quad[2 * k + 1] as f64]).collect();
    let mut sign = 0.0f64;
    for k in 0..4 {
        let c = cross(p[k], p[(k + 1) % 4], [x, y]);
        if c != 0.0 {
            if sign != 0.0 && c.signum() != sign {
                return false;
            }
            sign = c.signum();
        }
    }
    true
}
