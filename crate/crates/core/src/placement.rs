//! Lifting 2D regions into the world and conforming text decals to
//! the surfaces underneath.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbuffer::{dequantize_depth, GBuffer, IndexedScene};
use crate::geometry::{AccelIndex, Ray, TriMesh, Vec3};
use crate::region::TextRegion2D;
use crate::scene::{unproject, CameraIntrinsics, CameraPose};
use crate::text::TextTexture;

/// Distance decal vertices are pushed off the surface along its normal.
pub const DECAL_OFFSET: f64 = 1e-3;
/// Tolerance for "on the surface" checks, in scene units.
pub const SURFACE_EPS: f64 = 1e-3;
pub const DEFAULT_GRID: (usize, usize) = (16, 8);
/// Each clipping step moves a rectangle side by this fraction of the
/// initial extent.
const CLIP_STEP: f64 = 0.02;
const MAX_CLIP_STEPS: usize = 50;
/// Halvings used to settle the final clipping step.
const CLIP_REFINE: usize = 24;
/// Decal vertices only snap to surfaces within this fraction of the
/// rectangle diagonal.
const SNAP_FRACTION: f64 = 0.1;
const EDGE_SAMPLES: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Corners in top-left, top-right, bottom-right, bottom-left order.
#[derive(Debug, Clone, PartialEq)]
pub struct Quad3D {
    pub corners: [Vec3; 4],
    /// Unit mean surface normal, facing the camera.
    pub normal: Vec3,
}

/// Oriented rectangle: `u` runs along the reading direction, `v` down the
/// text. The outward normal is `v x u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect3D {
    pub origin: Vec3,
    pub u: Vec3,
    pub v: Vec3,
}

impl Rect3D {
    /// Top-left, top-right, bottom-right, bottom-left.
    pub fn corners(&self) -> [Vec3; 4] {
        [
            self.origin,
            self.origin + self.u,
            self.origin + self.u + self.v,
            self.origin + self.v,
        ]
    }

    pub fn outward_normal(&self) -> Vec3 {
        self.v.cross(&self.u).normalize()
    }

    pub fn at(&self, s: f64, t: f64) -> Vec3 {
        self.origin + self.u * s + self.v * t
    }

    pub fn diagonal(&self) -> f64 {
        (self.u + self.v).norm()
    }
}

/// Nearest scene hit on the ray from `camera` through `coarse`, or `None`
/// when nothing is hit within twice the coarse distance.
pub fn refine_point(coarse: &Vec3, camera: &Vec3, accel: &AccelIndex) -> Result<Option<Vec3>, PlacementError> {
    let ray = Ray::through(*camera, *coarse)
        .map_err(|_| PlacementError::Domain("coarse point coincides with the camera".into()))?;
    let limit = 2.0 * (coarse - camera).norm();
    Ok(accel.raycast_filtered(&ray, limit, |_| true).map(|hit| hit.point))
}

/// Lifts the four region corners into the world using the quantized depth
/// of the corner pixels, then snaps each onto the geometry by ray casting.
pub fn lift_region(
    region: &TextRegion2D,
    gbuffer: &GBuffer,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
    world: &IndexedScene,
) -> Result<Option<Quad3D>, PlacementError> {
    if region.x1 >= region.x2 || region.y1 >= region.y2 || region.x2 > gbuffer.width || region.y2 > gbuffer.height {
        return Err(PlacementError::Domain(format!(
            "region {region:?} is outside the image"
        )));
    }
    // Image-plane corners are the region's outer pixel edges; depth comes
    // from the pixel just inside each corner.
    let corners = [
        ((region.x1, region.y1), (region.x1, region.y1)),
        ((region.x2, region.y1), (region.x2 - 1, region.y1)),
        ((region.x2, region.y2), (region.x2 - 1, region.y2 - 1)),
        ((region.x1, region.y2), (region.x1, region.y2 - 1)),
    ];
    let mut out = [Vec3::zeros(); 4];
    for (k, ((ix, iy), (px, py))) in corners.into_iter().enumerate() {
        let i = gbuffer.index(px, py);
        if !gbuffer.hit_mask[i] {
            return Ok(None);
        }
        // The lower bin edge is zero for surfaces in the first depth bin.
        let depth = dequantize_depth(gbuffer.depth_q[i], world.scene.z_max).max(1e-6);
        let coarse = unproject([ix as f64, iy as f64], depth, intrinsics, pose)
            .map_err(|e| PlacementError::Domain(e.to_string()))?;
        match refine_point(&coarse, &pose.position, &world.accel)? {
            Some(p) => out[k] = p,
            None => return Ok(None),
        }
    }
    let mut sum = Vec3::zeros();
    for y in region.y1..region.y2 {
        for x in region.x1..region.x2 {
            let i = gbuffer.index(x, y);
            if gbuffer.hit_mask[i] {
                sum += gbuffer.normal_f[i];
            }
        }
    }
    let norm = sum.norm();
    if norm < 1e-12 {
        return Ok(None);
    }
    Ok(Some(Quad3D {
        corners: out,
        normal: sum / norm,
    }))
}

fn polygon_area(p: &[[f64; 2]; 4]) -> f64 {
    let mut a = 0.0;
    for i in 0..4 {
        let j = (i + 1) % 4;
        a += p[i][0] * p[j][1] - p[j][0] * p[i][1];
    }
    a.abs() / 2.0
}

/// Crossing-number test; points on the boundary within `eps` count as
/// inside.
fn in_polygon(p: [f64; 2], poly: &[[f64; 2]; 4], eps: f64) -> bool {
    for i in 0..4 {
        let (a, b) = (poly[i], poly[(i + 1) % 4]);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
        if qx * qx + qy * qy <= eps * eps {
            return true;
        }
    }
    let mut inside = false;
    for i in 0..4 {
        let (a, b) = (poly[i], poly[(i + 1) % 4]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// `[s_min, t_min, s_max, t_max]`
type Bounds = [f64; 4];

fn rect_corners(b: &Bounds) -> [[f64; 2]; 4] {
    [[b[0], b[1]], [b[2], b[1]], [b[2], b[3]], [b[0], b[3]]]
}

/// Sides adjacent to each rectangle corner, as indices into [`Bounds`].
const CORNER_SIDES: [[usize; 2]; 4] = [[0, 1], [2, 1], [2, 3], [0, 3]];

/// Turns a lifted quad into an upright rectangle in the quad's mean plane.
///
/// The reading direction is horizontal (`up x normal`); on surfaces facing
/// straight up or down it falls back to `camera_right` projected into the
/// plane. Returns `None` for degenerate quads.
pub fn rectify(quad: &Quad3D, up: &Vec3, camera_right: &Vec3) -> Option<Rect3D> {
    let n = quad.normal.normalize();
    let centroid = quad.corners.iter().sum::<Vec3>() / 4.0;
    let mut u = up.cross(&n);
    if u.norm() < 1e-6 {
        u = camera_right - n * n.dot(camera_right);
        if u.norm() < 1e-9 {
            return None;
        }
    }
    let u = u.normalize();
    let v = u.cross(&n);
    let proj = quad.corners.map(|p| {
        let d = p - centroid;
        [d.dot(&u), d.dot(&v)]
    });
    if polygon_area(&proj) < 1e-6 {
        return None;
    }
    let start: Bounds = [
        proj.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        proj.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
        proj.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max),
        proj.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max),
    ];
    let extent = [start[2] - start[0], start[3] - start[1]];
    let eps = 1e-9 * (extent[0] + extent[1]);
    let steps = [CLIP_STEP * extent[0], CLIP_STEP * extent[1]];
    // Signed step for each side: left/top move +, right/bottom move -.
    let side_step = |side: usize| {
        let s = steps[side % 2];
        if side < 2 {
            s
        } else {
            -s
        }
    };
    let outside = |b: &Bounds| -> [bool; 4] { rect_corners(b).map(|c| !in_polygon(c, &proj, eps)) };

    let mut bounds = start;
    let mut fits = false;
    for _ in 0..=MAX_CLIP_STEPS {
        let out = outside(&bounds);
        if out.iter().all(|o| !o) {
            fits = true;
            break;
        }
        let mut moving = [false; 4];
        for (c, &o) in out.iter().enumerate() {
            if o {
                for s in CORNER_SIDES[c] {
                    moving[s] = true;
                }
            }
        }
        let prev = bounds;
        for s in 0..4 {
            if moving[s] {
                bounds[s] += side_step(s);
            }
        }
        if bounds[0] >= bounds[2] || bounds[1] >= bounds[3] {
            return None;
        }
        if outside(&bounds).iter().all(|o| !o) {
            // Settle the last step: largest fraction of it that still fits.
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let at = |f: f64| {
                let mut b = prev;
                for s in 0..4 {
                    if moving[s] {
                        b[s] += f * side_step(s);
                    }
                }
                b
            };
            for _ in 0..CLIP_REFINE {
                let mid = (lo + hi) / 2.0;
                if outside(&at(mid)).iter().all(|o| !o) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            bounds = at(hi);
            fits = true;
            break;
        }
    }
    if !fits {
        return None;
    }
    let origin = centroid + u * bounds[0] + v * bounds[1];
    Some(Rect3D {
        origin,
        u: u * (bounds[2] - bounds[0]),
        v: v * (bounds[3] - bounds[1]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordGeometry {
    pub text: String,
    pub renderable: bool,
    /// Closed outline of the word box on the decal, clockwise as seen from
    /// the front, starting at the top-left.
    pub outline: Vec<Vec3>,
    /// Texture-space box `[u0, v0, u1, v1]` in `[0, 1]`.
    pub uv_box: [f64; 4],
    pub chars: Vec<CharGeometry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharGeometry {
    pub ch: char,
    pub outline: Vec<Vec3>,
}

/// A text decal conformed to the scene.
#[derive(Debug, Clone)]
pub struct PlacedText {
    /// Offset grid with per-vertex texture coordinates (`v` pointing down
    /// the texture).
    pub mesh: TriMesh,
    /// Grid vertices on the surface, before the normal offset.
    pub surface_vertices: Vec<Vec3>,
    /// Outward unit normal used for each vertex offset.
    pub vertex_normals: Vec<Vec3>,
    pub grid: (usize, usize),
    pub rect: Rect3D,
    pub texture: TextTexture,
    pub region: TextRegion2D,
    pub anchor: String,
    pub words: Vec<WordGeometry>,
}

impl PlacedText {
    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.grid.0 + 1) + i
    }

    /// Decal point and outward normal at texture coordinate `uv`.
    pub fn point_at_uv(&self, uv: [f64; 2]) -> Option<(Vec3, Vec3)> {
        locate_uv(&self.mesh, uv).map(|(tri, bary)| {
            let t = self.mesh.triangles()[tri];
            let vs = self.mesh.vertices();
            let p = vs[t[0] as usize] * bary[0] + vs[t[1] as usize] * bary[1] + vs[t[2] as usize] * bary[2];
            let mut n = self.mesh.geometric_normal(tri);
            if n.dot(&self.rect.outward_normal()) < 0.0 {
                n = -n;
            }
            (p, n)
        })
    }

    /// The decal mesh as OBJ text, for debugging.
    pub fn to_obj(&self) -> String {
        crate::scene::write_obj(&self.mesh)
    }
}

/// Triangle containing `uv` in texture space and the barycentrics there.
fn locate_uv(mesh: &TriMesh, uv: [f64; 2]) -> Option<(usize, [f64; 3])> {
    let uvs = mesh.uvs()?;
    let mut best: Option<(f64, usize, [f64; 3])> = None;
    for (ti, t) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = t.map(|k| uvs[k as usize]);
        let det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
        if det.abs() < 1e-18 {
            continue;
        }
        let l0 = ((b[1] - c[1]) * (uv[0] - c[0]) + (c[0] - b[0]) * (uv[1] - c[1])) / det;
        let l1 = ((c[1] - a[1]) * (uv[0] - c[0]) + (a[0] - c[0]) * (uv[1] - c[1])) / det;
        let l2 = 1.0 - l0 - l1;
        // Most negative barycentric: zero or above means inside.
        let worst = l0.min(l1).min(l2);
        if worst >= -1e-9 {
            return Some((ti, [l0, l1, l2]));
        }
        if best.as_ref().is_none_or(|b| worst > b.0) {
            best = Some((worst, ti, [l0, l1, l2]));
        }
    }
    // Points a hair outside the grid (rounding at the texture border) snap
    // to the nearest triangle.
    best.filter(|b| b.0 > -1e-6).map(|b| {
        let l = b.2.map(|x| x.max(0.0));
        let s: f64 = l.iter().sum();
        (b.1, l.map(|x| x / s))
    })
}

/// Arc-length parameters of a polyline, from 0 to 1.
fn arc_params(points: &[Vec3]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for w in points.windows(2) {
        let last = *acc.last().unwrap();
        acc.push(last + (w[1] - w[0]).norm());
    }
    let total = *acc.last().unwrap();
    if total > 0.0 {
        acc.iter().map(|a| a / total).collect()
    } else {
        (0..points.len())
            .map(|i| i as f64 / (points.len() - 1) as f64)
            .collect()
    }
}

/// Boundary of a texture-space box sampled along each edge, clockwise from
/// the top-left when viewed from the front.
fn box_outline(placed: &PlacedText, uv_box: [f64; 4], per_edge: usize) -> Vec<Vec3> {
    let [u0, v0, u1, v1] = uv_box;
    let corners = [[u0, v0], [u1, v0], [u1, v1], [u0, v1]];
    let mut out = Vec::with_capacity(4 * per_edge);
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        for s in 0..per_edge {
            let f = s as f64 / per_edge as f64;
            let uv = [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])];
            if let Some((p, _)) = placed.point_at_uv(uv) {
                out.push(p);
            }
        }
    }
    out
}

/// Builds the conformed decal mesh for `texture` over `rect`.
pub fn deform_text_mesh(
    rect: &Rect3D,
    accel: &AccelIndex,
    grid: (usize, usize),
    texture: TextTexture,
    region: TextRegion2D,
    anchor: &str,
) -> Result<PlacedText, PlacementError> {
    let (nu, nv) = grid;
    if nu < 2 || nv < 2 {
        return Err(PlacementError::Domain(format!("grid {nu}x{nv} is below 2x2")));
    }
    let outward = rect.outward_normal();
    let max_dist = SNAP_FRACTION * rect.diagonal();
    let mut surface = Vec::with_capacity((nu + 1) * (nv + 1));
    let mut normals = Vec::with_capacity(surface.capacity());
    for j in 0..=nv {
        for i in 0..=nu {
            let corner = (i == 0 || i == nu) && (j == 0 || j == nv);
            let base = rect.at(i as f64 / nu as f64, j as f64 / nv as f64);
            let base = if corner {
                // Exact corners, not a round trip through the bilinear form.
                rect.corners()[match (i == 0, j == 0) {
                    (true, true) => 0,
                    (false, true) => 1,
                    (false, false) => 2,
                    (true, false) => 3,
                }]
            } else {
                base
            };
            match (!corner).then(|| accel.closest_surface_point(base, max_dist)).flatten() {
                Some(sp) => {
                    surface.push(sp.point);
                    normals.push(if sp.normal.dot(&outward) < 0.0 {
                        -sp.normal
                    } else {
                        sp.normal
                    });
                }
                None => {
                    surface.push(base);
                    normals.push(outward);
                }
            }
        }
    }
    let idx = |i: usize, j: usize| j * (nu + 1) + i;
    let mut uvs = vec![[0.0; 2]; surface.len()];
    for j in 0..=nv {
        let row: Vec<Vec3> = (0..=nu).map(|i| surface[idx(i, j)]).collect();
        for (i, s) in arc_params(&row).into_iter().enumerate() {
            uvs[idx(i, j)][0] = s;
        }
    }
    for i in 0..=nu {
        let col: Vec<Vec3> = (0..=nv).map(|j| surface[idx(i, j)]).collect();
        for (j, t) in arc_params(&col).into_iter().enumerate() {
            uvs[idx(i, j)][1] = t;
        }
    }
    let vertices: Vec<Vec3> = surface
        .iter()
        .zip(&normals)
        .map(|(p, n)| p + n * DECAL_OFFSET)
        .collect();
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            // Wound so geometric normals point out of the surface.
            triangles.push([a as u32, c as u32, b as u32]);
            triangles.push([a as u32, d as u32, c as u32]);
        }
    }
    let mesh = TriMesh::new(vertices, triangles, None, Some(uvs)).map_err(|e| PlacementError::Domain(e.to_string()))?;
    let mut placed = PlacedText {
        mesh,
        surface_vertices: surface,
        vertex_normals: normals,
        grid,
        rect: *rect,
        texture,
        region,
        anchor: anchor.to_string(),
        words: Vec::new(),
    };
    let (tw, th) = (placed.texture.width() as f64, placed.texture.height() as f64);
    let to_uv = |b: &[f64; 4]| [b[0] / tw, b[1] / th, b[2] / tw, b[3] / th].map(|x| x.clamp(0.0, 1.0));
    let words = placed
        .texture
        .words
        .iter()
        .map(|w| {
            let uv_box = to_uv(&w.bbox);
            WordGeometry {
                text: w.text.clone(),
                renderable: w.renderable,
                outline: box_outline(&placed, uv_box, EDGE_SAMPLES),
                uv_box,
                chars: w
                    .chars
                    .iter()
                    .map(|c| CharGeometry {
                        ch: c.ch,
                        outline: box_outline(&placed, to_uv(&c.bbox), 2),
                    })
                    .collect(),
            }
        })
        .collect();
    placed.words = words;
    Ok(placed)
}
