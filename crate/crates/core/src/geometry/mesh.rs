use super::{GeometryError, Vec3, DEGENERATE_AREA};

/// Indexed triangle mesh with optional per-vertex normals and texture
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Option<Vec<Vec3>>,
    uvs: Option<Vec<[f64; 2]>>,
}

impl TriMesh {
    /// Validates and builds a mesh. Every index must be in range, every
    /// triangle non-degenerate, and supplied normals unit length.
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        normals: Option<Vec<Vec3>>,
        uvs: Option<Vec<[f64; 2]>>,
    ) -> Result<Self, GeometryError> {
        let invalid = |msg: String| Err(GeometryError::InvalidMesh(msg));
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return invalid(format!("non-finite vertex {v:?}"));
        }
        if let Some(normals) = &normals {
            if normals.len() != vertices.len() {
                return invalid(format!("{} normals for {} vertices", normals.len(), vertices.len()));
            }
            if let Some(n) = normals.iter().find(|n| (n.norm() - 1.0).abs() > 1e-6) {
                return invalid(format!("normal {n:?} is not unit length"));
            }
        }
        if let Some(uvs) = &uvs {
            if uvs.len() != vertices.len() {
                return invalid(format!(
                    "{} texture coordinates for {} vertices",
                    uvs.len(),
                    vertices.len()
                ));
            }
        }
        let count = vertices.len();
        for (i, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&k| k as usize >= count) {
                return invalid(format!("triangle {i} index out of range: {tri:?}"));
            }
            let [a, b, c] = tri.map(|k| vertices[k as usize]);
            let area = 0.5 * (b - a).cross(&(c - a)).norm();
            if !(area >= DEGENERATE_AREA) {
                return Err(GeometryError::DegenerateTriangle(area));
            }
        }
        Ok(TriMesh {
            vertices,
            triangles,
            normals,
            uvs,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn uvs(&self) -> Option<&[[f64; 2]]> {
        self.uvs.as_deref()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, index: usize) -> [Vec3; 3] {
        self.triangles[index].map(|k| self.vertices[k as usize])
    }

    pub fn geometric_normal(&self, index: usize) -> Vec3 {
        let [a, b, c] = self.triangle(index);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Shading normal at a barycentric location: interpolated vertex normals
    /// when present, else the geometric normal.
    pub fn normal_at(&self, index: usize, bary: [f64; 3]) -> Vec3 {
        match &self.normals {
            Some(normals) => {
                let [i, j, k] = self.triangles[index].map(|k| k as usize);
                let n = normals[i] * bary[0] + normals[j] * bary[1] + normals[k] * bary[2];
                let len = n.norm();
                if len > 1e-12 {
                    n / len
                } else {
                    self.geometric_normal(index)
                }
            }
            None => self.geometric_normal(index),
        }
    }

    pub fn uv_at(&self, index: usize, bary: [f64; 3]) -> Option<[f64; 2]> {
        let uvs = self.uvs.as_ref()?;
        let [i, j, k] = self.triangles[index].map(|k| k as usize);
        Some([
            uvs[i][0] * bary[0] + uvs[j][0] * bary[1] + uvs[k][0] * bary[2],
            uvs[i][1] * bary[0] + uvs[j][1] * bary[1] + uvs[k][1] * bary[2],
        ])
    }
}
