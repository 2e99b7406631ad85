//! Triangle-mesh geometry kernel: rays, meshes, ray/triangle intersection and
//! a bounding volume hierarchy answering nearest-hit and closest-point queries.

mod bvh;
mod mesh;
mod triangle;

pub use bvh::{AccelIndex, SurfacePoint};
pub use mesh::TriMesh;
pub use triangle::{closest_point_on_triangle, intersect_ray_triangle, TriangleHit, DEGENERATE_AREA, HIT_EPSILON};

use thiserror::Error;

/// Points and directions in scene units (meters by convention).
pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate geometry: triangle area {0:e} is below the minimum")]
    DegenerateTriangle(f64),
    #[error("empty scene: no triangles to index")]
    EmptyScene,
    #[error("ray direction has zero length")]
    ZeroDirection,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
}

/// A half-line with a unit-length direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        let len = direction.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(GeometryError::ZeroDirection);
        }
        Ok(Ray {
            origin,
            direction: direction / len,
        })
    }

    /// Ray from `origin` towards `target`.
    pub fn through(origin: Vec3, target: Vec3) -> Result<Self, GeometryError> {
        Ray::new(origin, target - origin)
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Nearest intersection of a ray with the indexed scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub point: Vec3,
    /// Unit geometric normal following the triangle winding.
    pub normal: Vec3,
    pub mesh_id: u32,
    pub triangle_id: u32,
    /// Barycentric weights of the triangle's three vertices.
    pub bary: [f64; 3],
}

impl RayHit {
    /// Lexicographic `(t, mesh id, triangle id)` ordering used to break ties.
    pub fn precedes(&self, other: &RayHit) -> bool {
        (self.t, self.mesh_id, self.triangle_id) < (other.t, other.mesh_id, other.triangle_id)
    }
}
