//! Bounding volume hierarchy over every triangle of a set of meshes.
//!
//! Construction splits at the centroid median of the widest axis, so the tree
//! depends only on the input order. Queries return exactly what a brute-force
//! scan would, ties broken by `(t, mesh id, triangle id)`.

use super::triangle::{closest_point_on_triangle, moller_trumbore};
use super::{GeometryError, Ray, RayHit, TriMesh, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    /// Entry parameter of the ray into the box, if it enters before `t_max`.
    #[inline]
    fn entry(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for axis in 0..3 {
            let a = (self.min[axis] - origin[axis]) * inv_dir[axis];
            let b = (self.max[axis] - origin[axis]) * inv_dir[axis];
            // NaN (0 * inf) compares false and leaves the interval unchanged.
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
        }
        // Slack absorbs rounding in the slab computation.
        let slack = 1e-9 * (1.0 + t1.abs());
        (t0 <= t1 + slack).then_some(t0)
    }

    fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for axis in 0..3 {
            let v = p[axis];
            let excess = if v < self.min[axis] {
                self.min[axis] - v
            } else if v > self.max[axis] {
                v - self.max[axis]
            } else {
                0.0
            };
            d += excess * excess;
        }
        d
    }
}

#[derive(Debug, Clone)]
struct Prim {
    a: Vec3,
    e1: Vec3,
    e2: Vec3,
    normal: Vec3,
    mesh_id: u32,
    triangle_id: u32,
}

impl Prim {
    fn vertices(&self) -> [Vec3; 3] {
        [self.a, self.a + self.e1, self.a + self.e2]
    }

    fn key(&self) -> (u32, u32) {
        (self.mesh_id, self.triangle_id)
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaves: first primitive. Internal nodes: index of the second child
    /// (the first child always follows its parent).
    index: u32,
    /// Primitive count; zero for internal nodes.
    count: u32,
}

/// A surface location returned by [`AccelIndex::closest_surface_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: Vec3,
    pub distance: f64,
    /// Unit geometric normal of the triangle the point lies on.
    pub normal: Vec3,
    pub mesh_id: u32,
    pub triangle_id: u32,
}

/// Immutable acceleration index; safe to share between threads.
#[derive(Debug, Clone)]
pub struct AccelIndex {
    nodes: Vec<Node>,
    prims: Vec<Prim>,
}

impl AccelIndex {
    /// Indexes every triangle; mesh ids are positions in `meshes`.
    pub fn build<'a, I>(meshes: I) -> Result<Self, GeometryError>
    where
        I: IntoIterator<Item = &'a TriMesh>,
    {
        let mut prims = Vec::new();
        for (mesh_id, mesh) in meshes.into_iter().enumerate() {
            for triangle_id in 0..mesh.triangle_count() {
                let [a, b, c] = mesh.triangle(triangle_id);
                let e1 = b - a;
                let e2 = c - a;
                prims.push(Prim {
                    a,
                    e1,
                    e2,
                    normal: e1.cross(&e2).normalize(),
                    mesh_id: mesh_id as u32,
                    triangle_id: triangle_id as u32,
                });
            }
        }
        if prims.is_empty() {
            return Err(GeometryError::EmptyScene);
        }
        let centroids: Vec<Vec3> = prims.iter().map(|p| p.a + (p.e1 + p.e2) / 3.0).collect();
        let mut order: Vec<usize> = (0..prims.len()).collect();
        let mut nodes = Vec::with_capacity(2 * prims.len() / LEAF_SIZE + 1);
        build_node(&prims, &centroids, &mut order, 0, &mut nodes);
        let prims = order.into_iter().map(|i| prims[i].clone()).collect();
        Ok(AccelIndex { nodes, prims })
    }

    pub fn triangle_count(&self) -> usize {
        self.prims.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.count > 0).count()
    }

    /// Nearest hit with `t >= HIT_EPSILON`.
    pub fn raycast(&self, ray: &Ray) -> Option<RayHit> {
        self.raycast_filtered(ray, f64::INFINITY, |_| true)
    }

    /// Nearest hit with `t < t_max` among hits accepted by `accept`.
    ///
    /// `accept` sees candidate hits in traversal order and may be called for
    /// hits that later lose to a nearer one.
    pub fn raycast_filtered<F>(&self, ray: &Ray, t_max: f64, mut accept: F) -> Option<RayHit>
    where
        F: FnMut(&RayHit) -> bool,
    {
        let inv_dir = ray.direction.map(|d| 1.0 / d);
        let mut best: Option<RayHit> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        self.nodes[0].bounds.entry(&ray.origin, &inv_dir, t_max)?;
        stack.push(0);
        while let Some(node_index) = stack.pop() {
            let node = &self.nodes[node_index as usize];
            let limit = best.map_or(t_max, |b| b.t);
            // Equal-t boxes must still be visited for the id tie-break.
            match node.bounds.entry(&ray.origin, &inv_dir, limit) {
                Some(_) => {}
                None => continue,
            }
            if node.count > 0 {
                let start = node.index as usize;
                for prim in &self.prims[start..start + node.count as usize] {
                    let Some((t, u, v)) = moller_trumbore(ray, prim.a, prim.e1, prim.e2) else {
                        continue;
                    };
                    if t >= t_max {
                        continue;
                    }
                    let hit = RayHit {
                        t,
                        point: ray.at(t),
                        normal: prim.normal,
                        mesh_id: prim.mesh_id,
                        triangle_id: prim.triangle_id,
                        bary: [1.0 - u - v, u, v],
                    };
                    if best.is_none_or(|b| hit.precedes(&b)) && accept(&hit) {
                        best = Some(hit);
                    }
                }
            } else {
                let first = node_index + 1;
                let second = node.index;
                let limit = best.map_or(t_max, |b| b.t);
                let t_first = self.nodes[first as usize].bounds.entry(&ray.origin, &inv_dir, limit);
                let t_second = self.nodes[second as usize].bounds.entry(&ray.origin, &inv_dir, limit);
                match (t_first, t_second) {
                    (Some(a), Some(b)) => {
                        // Push the farther child first so the nearer pops first.
                        if a <= b {
                            stack.push(second);
                            stack.push(first);
                        } else {
                            stack.push(first);
                            stack.push(second);
                        }
                    }
                    (Some(_), None) => stack.push(first),
                    (None, Some(_)) => stack.push(second),
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// Closest surface point to `query` within `max_dist`.
    pub fn closest_surface_point(&self, query: Vec3, max_dist: f64) -> Option<SurfacePoint> {
        let mut best: Option<(f64, Vec3, usize)> = None;
        let mut best_d2 = max_dist * max_dist;
        let mut stack = vec![0u32];
        while let Some(node_index) = stack.pop() {
            let node = &self.nodes[node_index as usize];
            if node.bounds.distance_squared(&query) > best_d2 {
                continue;
            }
            if node.count > 0 {
                let start = node.index as usize;
                for (offset, prim) in self.prims[start..start + node.count as usize].iter().enumerate() {
                    let (p, _) = closest_point_on_triangle(query, prim.vertices());
                    let d2 = (p - query).norm_squared();
                    if d2 > best_d2 {
                        continue;
                    }
                    let index = start + offset;
                    let better = match best {
                        None => true,
                        Some((bd2, _, bi)) => d2 < bd2 || (d2 == bd2 && prim.key() < self.prims[bi].key()),
                    };
                    if better {
                        best = Some((d2, p, index));
                        best_d2 = d2;
                    }
                }
            } else {
                let first = node_index + 1;
                let second = node.index;
                let d_first = self.nodes[first as usize].bounds.distance_squared(&query);
                let d_second = self.nodes[second as usize].bounds.distance_squared(&query);
                if d_first <= d_second {
                    stack.push(second);
                    stack.push(first);
                } else {
                    stack.push(first);
                    stack.push(second);
                }
            }
        }
        best.map(|(d2, point, index)| {
            let prim = &self.prims[index];
            SurfacePoint {
                point,
                distance: d2.sqrt(),
                normal: prim.normal,
                mesh_id: prim.mesh_id,
                triangle_id: prim.triangle_id,
            }
        })
    }
}

fn build_node(prims: &[Prim], centroids: &[Vec3], order: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let mut bounds = Aabb::empty();
    let mut centroid_bounds = Aabb::empty();
    for &i in order.iter() {
        for v in prims[i].vertices() {
            bounds.grow(&v);
        }
        centroid_bounds.grow(&centroids[i]);
    }
    let node_index = nodes.len() as u32;
    nodes.push(Node {
        bounds,
        index: offset as u32,
        count: order.len() as u32,
    });
    if order.len() <= LEAF_SIZE {
        return node_index;
    }
    let extent = centroid_bounds.max - centroid_bounds.min;
    let axis = extent.imax();
    order.sort_by(|&i, &j| centroids[i][axis].total_cmp(&centroids[j][axis]).then(i.cmp(&j)));
    let mid = order.len() / 2;
    let (left, right) = order.split_at_mut(mid);
    build_node(prims, centroids, left, offset, nodes);
    let second = build_node(prims, centroids, right, offset + mid, nodes);
    let node = &mut nodes[node_index as usize];
    node.index = second;
    node.count = 0;
    let mut merged = nodes[node_index as usize + 1].bounds;
    merged.merge(&nodes[second as usize].bounds);
    nodes[node_index as usize].bounds = merged;
    node_index
}
