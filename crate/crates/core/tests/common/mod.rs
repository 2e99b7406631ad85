//! Test-only oracles shared by the integration suites. Nothing here calls the
//! acceleration index or the pipeline code paths it is used to check.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use textscape::geometry::{intersect_ray_triangle, Ray, RayHit, TriMesh, Vec3};

/// Nearest hit over every triangle of every mesh, tie-broken by
/// `(t, mesh id, triangle id)`.
pub fn brute_force_raycast(meshes: &[TriMesh], ray: &Ray, t_max: f64) -> Option<RayHit> {
    let mut best: Option<RayHit> = None;
    for (mesh_id, mesh) in meshes.iter().enumerate() {
        for tri in 0..mesh.triangle_count() {
            let Some(h) = intersect_ray_triangle(ray, mesh.triangle(tri)).unwrap() else {
                continue;
            };
            if h.t >= t_max {
                continue;
            }
            let hit = RayHit {
                t: h.t,
                point: h.point,
                normal: h.normal,
                mesh_id: mesh_id as u32,
                triangle_id: tri as u32,
                bary: h.bary,
            };
            if best.is_none_or(|b| hit.precedes(&b)) {
                best = Some(hit);
            }
        }
    }
    best
}

/// Closest point over every triangle by direct projection.
pub fn brute_force_closest_distance(meshes: &[TriMesh], q: Vec3) -> f64 {
    let mut best = f64::INFINITY;
    for mesh in meshes {
        for tri in 0..mesh.triangle_count() {
            let [a, b, c] = mesh.triangle(tri);
            best = best.min(point_triangle_distance(q, a, b, c));
        }
    }
    best
}

/// Point-to-triangle distance as the minimum over the plane projection (when
/// inside) and the three edge segments.
pub fn point_triangle_distance(q: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let n = (b - a).cross(&(c - a)).normalize();
    let proj = q - n * n.dot(&(q - a));
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|(p0, p1)| (p1 - p0).cross(&(proj - p0)).dot(&n) >= 0.0);
    let mut best = f64::INFINITY;
    if inside {
        best = (q - proj).norm();
    }
    for (p0, p1) in [(a, b), (b, c), (c, a)] {
        let d = p1 - p0;
        let s = ((q - p0).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
        best = best.min((q - (p0 + d * s)).norm());
    }
    best
}

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

type R3 = [BigRational; 3];

fn r3(v: &Vec3) -> R3 {
    [rational(v.x), rational(v.y), rational(v.z)]
}

fn sub(a: &R3, b: &R3) -> R3 {
    [&a[0] - &b[0], &a[1] - &b[1], &a[2] - &b[2]]
}

fn cross(a: &R3, b: &R3) -> R3 {
    [
        &a[1] * &b[2] - &a[2] * &b[1],
        &a[2] * &b[0] - &a[0] * &b[2],
        &a[0] * &b[1] - &a[1] * &b[0],
    ]
}

fn dot(a: &R3, b: &R3) -> BigRational {
    &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2]
}

/// Exact plane-intersection and barycentric classification of a ray against a
/// triangle. Returns `None` for parallel rays, else `(t, [wa, wb, wc])`.
pub fn exact_ray_triangle(origin: Vec3, dir: Vec3, [a, b, c]: [Vec3; 3]) -> Option<(BigRational, [BigRational; 3])> {
    let (o, d) = (r3(&origin), r3(&dir));
    let (a, b, c) = (r3(&a), r3(&b), r3(&c));
    let e1 = sub(&b, &a);
    let e2 = sub(&c, &a);
    let n = cross(&e1, &e2);
    let denom = dot(&n, &d);
    if denom.is_zero() {
        return None;
    }
    let t = dot(&n, &sub(&a, &o)) / &denom;
    let p = [&o[0] + &t * &d[0], &o[1] + &t * &d[1], &o[2] + &t * &d[2]];
    let ap = sub(&p, &a);
    let nn = dot(&n, &n);
    let wb = dot(&cross(&ap, &e2), &n) / &nn;
    let wc = dot(&cross(&e1, &ap), &n) / &nn;
    let wa = BigRational::from_integer(BigInt::from(1)) - &wb - &wc;
    Some((t, [wa, wb, wc]))
}

pub fn to_f64(r: &BigRational) -> f64 {
    // Good to ~1e-15 relative, plenty for comparisons at 1e-9.
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    let r = r.abs();
    let int = r.to_integer();
    let frac = &r - BigRational::from_integer(int.clone());
    let scaled = (frac * BigRational::from_integer(BigInt::from(1u64 << 53))).to_integer();
    sign * (int.to_string().parse::<f64>().unwrap() + scaled.to_string().parse::<f64>().unwrap() / (1u64 << 53) as f64)
}

/// Flat rectangle in the plane `z = depth`, facing `-z`.
pub fn plane_z(depth: f64, half: f64) -> TriMesh {
    TriMesh::new(
        vec![
            Vec3::new(-half, -half, depth),
            Vec3::new(half, -half, depth),
            Vec3::new(half, half, depth),
            Vec3::new(-half, half, depth),
        ],
        vec![[0, 2, 1], [0, 3, 2]],
        None,
        None,
    )
    .unwrap()
}

/// UV sphere of the given radius centred at the origin.
pub fn uv_sphere(radius: f64, stacks: u32, slices: u32) -> TriMesh {
    let mut vertices = vec![Vec3::new(0.0, 0.0, radius)];
    for i in 1..stacks {
        let phi = std::f64::consts::PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / slices as f64;
            vertices.push(Vec3::new(
                radius * phi.sin() * theta.cos(),
                radius * phi.sin() * theta.sin(),
                radius * phi.cos(),
            ));
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, -radius));
    let bottom = vertices.len() as u32 - 1;
    let ring = |i: u32, j: u32| 1 + (i - 1) * slices + (j % slices);
    let mut tris = Vec::new();
    for j in 0..slices {
        tris.push([0, ring(1, j), ring(1, j + 1)]);
        tris.push([bottom, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            tris.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            tris.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, tris, None, None).unwrap()
}

/// Direct per-pixel boundary rule: a pixel is 1 when it is void or when the
/// L1 distance to any in-image 4-neighbour exceeds `t`.
pub fn brute_force_boundary(normals: &[[u8; 3]], mask: &[bool], w: usize, h: usize, t: u32) -> Vec<u8> {
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            if !mask[y * w + x] {
                out[y * w + x] = 1;
                continue;
            }
            let offsets: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
            for (dx, dy) in offsets {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let a = normals[y * w + x];
                let b = normals[ny as usize * w + nx as usize];
                let d: i64 = (0..3).map(|k| (a[k] as i64 - b[k] as i64).abs()).sum();
                if d > t as i64 {
                    out[y * w + x] = 1;
                }
            }
        }
    }
    out
}

/// Counts 1-pixels in `[x1, x2) x [y1, y2)` by scanning.
pub fn count_ones(bits: &[u8], w: usize, x1: i64, y1: i64, x2: i64, y2: i64) -> usize {
    let mut n = 0;
    for y in y1..y2 {
        for x in x1..x2 {
            n += bits[y as usize * w + x as usize] as usize;
        }
    }
    n
}

/// Checks the region contract by scanning pixels. Returns a description of
/// the first violation.
pub fn check_region(
    bits: &[u8],
    w: usize,
    h: usize,
    r: &textscape::region::TextRegion2D,
    min: (u32, u32),
) -> Result<(), String> {
    let (x1, y1, x2, y2) = (r.x1 as i64, r.y1 as i64, r.x2 as i64, r.y2 as i64);
    if !(0 <= x1 && x1 < x2 && x2 <= w as i64 && 0 <= y1 && y1 < y2 && y2 <= h as i64) {
        return Err(format!("{r:?} outside {w}x{h}"));
    }
    if r.x2 - r.x1 < min.0 || r.y2 - r.y1 < min.1 {
        return Err(format!("{r:?} smaller than {min:?}"));
    }
    if count_ones(bits, w, x1, y1, x2, y2) > 0 {
        return Err(format!("{r:?} contains a boundary pixel"));
    }
    // Growing any single side by two pixels must leave the image or pull a
    // boundary pixel into the grown strip.
    let strips = [
        (x1 - 2, y1, x1, y2),
        (x2, y1, x2 + 2, y2),
        (x1, y1 - 2, x2, y1),
        (x1, y2, x2, y2 + 2),
    ];
    for (sx1, sy1, sx2, sy2) in strips {
        let leaves = sx1 < 0 || sy1 < 0 || sx2 > w as i64 || sy2 > h as i64;
        if !leaves && count_ones(bits, w, sx1, sy1, sx2, sy2) == 0 {
            return Err(format!("{r:?} can still grow into {:?}", (sx1, sy1, sx2, sy2)));
        }
    }
    Ok(())
}

/// 400x300 map with a solid vertical boundary at column 200.
pub fn wall_map() -> (usize, usize, Vec<u8>) {
    let (w, h) = (400, 300);
    let mut bits = vec![0u8; w * h];
    for y in 0..h {
        bits[y * w + 200] = 1;
    }
    (w, h, bits)
}

/// Boundary lines one pixel wide around `cell`-sized clean squares.
pub fn checkerboard_map(cells_x: usize, cells_y: usize, cell: usize) -> (usize, usize, Vec<u8>) {
    let w = cells_x * (cell + 1) + 1;
    let h = cells_y * (cell + 1) + 1;
    let mut bits = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            if x % (cell + 1) == 0 || y % (cell + 1) == 0 {
                bits[y * w + x] = 1;
            }
        }
    }
    (w, h, bits)
}

/// Map with random rectangular blobs of boundary pixels.
pub fn blob_map(rng: &mut impl rand::Rng, w: usize, h: usize, blobs: usize) -> Vec<u8> {
    let mut bits = vec![0u8; w * h];
    for _ in 0..blobs {
        let bw = rng.gen_range(1..20);
        let bh = rng.gen_range(1..20);
        let x0 = rng.gen_range(0..w - bw);
        let y0 = rng.gen_range(0..h - bh);
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                bits[y * w + x] = 1;
            }
        }
    }
    bits
}

/// In-memory scene where every mesh uses one grey diffuse material.
pub fn scene_of(meshes: Vec<TriMesh>, lights: Vec<textscape::scene::Light>) -> textscape::scene::Scene {
    use textscape::scene::{FogSettings, Material, Scene, SceneMesh};
    let mut materials = std::collections::BTreeMap::new();
    materials.insert("grey".to_string(), Material::diffuse_color([0.8, 0.8, 0.8]));
    let meshes = meshes
        .into_iter()
        .enumerate()
        .map(|(i, mesh)| SceneMesh {
            path: format!("mesh{i}.obj"),
            material: "grey".into(),
            mesh,
        })
        .collect();
    Scene::new(meshes, materials, lights, FogSettings::NONE, 50.0, Vec::new()).unwrap()
}

pub fn translated(mesh: &TriMesh, offset: Vec3) -> TriMesh {
    TriMesh::new(
        mesh.vertices().iter().map(|v| v + offset).collect(),
        mesh.triangles().to_vec(),
        mesh.normals().map(|n| n.to_vec()),
        mesh.uvs().map(|u| u.to_vec()),
    )
    .unwrap()
}

/// Open cylinder around the z axis from `z0` to `z1`, wound outward.
pub fn cylinder(radius: f64, z0: f64, z1: f64, segments: u32) -> TriMesh {
    let mut vertices = Vec::new();
    for k in 0..segments {
        let a = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
        vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z0));
        vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z1));
    }
    let mut tris = Vec::new();
    for k in 0..segments {
        let (b0, t0) = (2 * k, 2 * k + 1);
        let (b1, t1) = (2 * ((k + 1) % segments), 2 * ((k + 1) % segments) + 1);
        tris.push([b0, b1, t1]);
        tris.push([b0, t1, t0]);
    }
    TriMesh::new(vertices, tris, None, None).unwrap()
}

/// Rasterizes one short word into a `w x h` texture with the bundled font.
pub fn word_texture(word: &str, w: u32, h: u32) -> textscape::text::TextTexture {
    use textscape::text::{rasterize_text, FontLibrary, TextContent, TextStructure, TextStyle};
    let content = TextContent {
        structure: TextStructure::Word,
        lines: vec![word.to_string()],
    };
    let style = TextStyle {
        font: 0,
        glyph_height: 48.0,
        color: [20, 20, 20],
    };
    rasterize_text(&content, &style, &FontLibrary::embedded(), w, h).unwrap()
}

/// Camera at the origin looking along +z with +y down the image.
pub fn axis_camera() -> textscape::scene::CameraPose {
    textscape::scene::CameraPose::new(Vec3::zeros(), nalgebra::UnitQuaternion::identity())
}

/// Axis-aligned rectangle in the plane `z`, facing `-z`.
pub fn rect_z(z: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> TriMesh {
    TriMesh::new(
        vec![
            Vec3::new(x0, y0, z),
            Vec3::new(x1, y0, z),
            Vec3::new(x1, y1, z),
            Vec3::new(x0, y1, z),
        ],
        vec![[0, 2, 1], [0, 3, 2]],
        None,
        None,
    )
    .unwrap()
}

/// Decal for `word` on the plane `z`, centred on the optical axis of
/// [`axis_camera`] and facing it.
pub fn wall_decal(
    accel: &textscape::geometry::AccelIndex,
    word: &str,
    z: f64,
    width: f64,
) -> textscape::placement::PlacedText {
    use textscape::placement::{deform_text_mesh, Rect3D};
    let height = width / 2.0;
    let rect = Rect3D {
        origin: Vec3::new(-width / 2.0, -height / 2.0, z),
        u: Vec3::new(width, 0.0, 0.0),
        v: Vec3::new(0.0, height, 0.0),
    };
    let region = textscape::region::TextRegion2D {
        x1: 0,
        y1: 0,
        x2: 192,
        y2: 96,
    };
    deform_text_mesh(&rect, accel, (16, 8), word_texture(word, 192, 96), region, "test").unwrap()
}
