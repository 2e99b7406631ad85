//! Wavefront OBJ reading (via `tobj`) and writing.

use std::fmt::Write as _;
use std::path::Path;

use super::SceneError;
use crate::geometry::{TriMesh, Vec3};

/// Loads every object in an OBJ file into one triangulated mesh.
pub fn load_obj(path: &Path) -> Result<TriMesh, SceneError> {
    let options = tobj::LoadOptions {
        single_index: true,
        triangulate: true,
        ignore_points: true,
        ignore_lines: true,
    };
    let (models, _materials) = tobj::load_obj(path, &options).map_err(|e| SceneError::Obj {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut uvs = Vec::new();
    let mut triangles = Vec::new();
    let mut all_have_normals = true;
    let mut all_have_uvs = true;
    for model in &models {
        let m = &model.mesh;
        let base = vertices.len() as u32;
        let count = m.positions.len() / 3;
        vertices.extend(m.positions.chunks_exact(3).map(|p| Vec3::new(p[0], p[1], p[2])));
        if m.normals.len() == m.positions.len() {
            normals.extend(m.normals.chunks_exact(3).map(|n| {
                let n = Vec3::new(n[0], n[1], n[2]);
                // Leave stored unit normals bit-exact so files round-trip.
                if (n.norm() - 1.0).abs() > 1e-9 {
                    n.normalize()
                } else {
                    n
                }
            }));
        } else {
            all_have_normals = false;
        }
        if m.texcoords.len() == count * 2 {
            uvs.extend(m.texcoords.chunks_exact(2).map(|t| [t[0], t[1]]));
        } else {
            all_have_uvs = false;
        }
        triangles.extend(
            m.indices
                .chunks_exact(3)
                .map(|t| [base + t[0], base + t[1], base + t[2]]),
        );
    }
    let normals = (all_have_normals && !vertices.is_empty()).then_some(normals);
    let uvs = (all_have_uvs && !vertices.is_empty()).then_some(uvs);
    TriMesh::new(vertices, triangles, normals, uvs).map_err(|e| SceneError::Obj {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Serializes a mesh as OBJ with one `v`/`vt`/`vn` record per vertex.
///
/// Vertices are emitted in order of first reference so that loading the
/// output and writing it again reproduces the same bytes.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut remap = vec![u32::MAX; mesh.vertices().len()];
    let mut order = Vec::with_capacity(mesh.vertices().len());
    for tri in mesh.triangles() {
        for &k in tri {
            if remap[k as usize] == u32::MAX {
                remap[k as usize] = order.len() as u32;
                order.push(k as usize);
            }
        }
    }
    let mut out = String::new();
    for &k in &order {
        let v = mesh.vertices()[k];
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    if let Some(uvs) = mesh.uvs() {
        for &k in &order {
            let _ = writeln!(out, "vt {} {}", uvs[k][0], uvs[k][1]);
        }
    }
    if let Some(normals) = mesh.normals() {
        for &k in &order {
            let n = normals[k];
            let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
        }
    }
    let (has_uv, has_n) = (mesh.uvs().is_some(), mesh.normals().is_some());
    for tri in mesh.triangles() {
        out.push('f');
        for &k in tri {
            let i = remap[k as usize] + 1;
            let _ = match (has_uv, has_n) {
                (true, true) => write!(out, " {i}/{i}/{i}"),
                (true, false) => write!(out, " {i}/{i}"),
                (false, true) => write!(out, " {i}//{i}"),
                (false, false) => write!(out, " {i}"),
            };
        }
        out.push('\n');
    }
    out
}
