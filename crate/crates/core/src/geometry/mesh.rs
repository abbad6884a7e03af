//! Watertight triangle meshes with a bounding volume hierarchy for
//! closest-point and ray-parity queries.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::{GraspError, Result};

type V3 = Vector3<f64>;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: V3,
    max: V3,
}

impl Aabb {
    fn empty() -> Self {
        Self { min: V3::repeat(f64::INFINITY), max: V3::repeat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: &V3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&self, o: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&o.min), max: self.max.sup(&o.max) }
    }

    fn dist2(&self, p: &V3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    fn hit_by_ray(&self, origin: &V3, inv_dir: &V3) -> bool {
        let mut tmin = 0.0f64;
        let mut tmax = f64::INFINITY;
        for k in 0..3 {
            let t1 = (self.min[k] - origin[k]) * inv_dir[k];
            let t2 = (self.max[k] - origin[k]) * inv_dir[k];
            tmin = tmin.max(t1.min(t2));
            tmax = tmax.min(t1.max(t2));
        }
        tmin <= tmax
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices, permuted so every leaf covers a contiguous range.
    order: Vec<usize>,
}

impl Bvh {
    fn build(vertices: &[V3], faces: &[[usize; 3]]) -> Self {
        let centroids: Vec<V3> = faces.iter().map(|f| (vertices[f[0]] + vertices[f[1]] + vertices[f[2]]) / 3.0).collect();
        let boxes: Vec<Aabb> = faces
            .iter()
            .map(|f| {
                let mut b = Aabb::empty();
                for &i in f {
                    b.grow(&vertices[i]);
                }
                b
            })
            .collect();
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..faces.len()).collect() };
        if !faces.is_empty() {
            bvh.build_node(0, faces.len(), &centroids, &boxes);
        }
        bvh
    }

    fn build_node(&mut self, start: usize, end: usize, centroids: &[V3], boxes: &[Aabb]) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &self.order[start..end] {
            bounds = bounds.merge(&boxes[t]);
            cbounds.grow(&centroids[t]);
        }
        let idx = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return idx;
        }
        let extent = cbounds.max - cbounds.min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        self.order[start..end].sort_by(|&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        let mid = (start + end) / 2;
        self.nodes.push(Node::Leaf { bounds, start, end }); // placeholder
        let left = self.build_node(start, mid, centroids, boxes);
        let right = self.build_node(mid, end, centroids, boxes);
        self.nodes[idx] = Node::Inner { bounds, left, right };
        idx
    }
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &V3, a: &V3, b: &V3, c: &V3) -> V3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Möller–Trumbore; returns the ray parameter of a hit in front of the origin.
fn ray_triangle(origin: &V3, dir: &V3, a: &V3, b: &V3, c: &V3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = inv * e2.dot(&q);
    (t > 1e-12).then_some(t)
}

/// Closest-point query result.
#[derive(Debug, Clone, Copy)]
pub struct ClosestPoint {
    pub point: V3,
    pub face: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<V3>,
    faces: Vec<[usize; 3]>,
    face_normals: Vec<V3>,
    bvh: Bvh,
    mean_edge: f64,
}

impl TriMesh {
    /// Validates watertightness and orientation; a mesh whose signed volume
    /// is negative has its winding flipped.
    pub fn new(vertices: Vec<V3>, mut faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(GraspError::NonWatertightMesh("mesh has no faces".into()));
        }
        for f in &faces {
            if f.iter().any(|&i| i >= vertices.len()) {
                return Err(GraspError::Parse("face references a missing vertex".into()));
            }
        }
        check_watertight(&faces)?;
        let volume = signed_volume(&vertices, &faces);
        if volume < 0.0 {
            for f in faces.iter_mut() {
                f.swap(1, 2);
            }
        }
        let face_normals = faces
            .iter()
            .map(|f| {
                let n = (vertices[f[1]] - vertices[f[0]]).cross(&(vertices[f[2]] - vertices[f[0]]));
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    V3::zeros()
                }
            })
            .collect();
        let mut edge_sum = 0.0;
        let mut edge_count = 0usize;
        for f in &faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a < b {
                    edge_sum += (vertices[a] - vertices[b]).norm();
                    edge_count += 1;
                }
            }
        }
        let bvh = Bvh::build(&vertices, &faces);
        Ok(Self { vertices, faces, face_normals, bvh, mean_edge: edge_sum / edge_count.max(1) as f64 })
    }

    pub fn vertices(&self) -> &[V3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_normal(&self, face: usize) -> V3 {
        self.face_normals[face]
    }

    pub fn mean_edge_length(&self) -> f64 {
        self.mean_edge
    }

    pub fn volume(&self) -> f64 {
        signed_volume(&self.vertices, &self.faces)
    }

    pub fn area(&self) -> f64 {
        self.faces.iter().map(|f| self.triangle_area(f)).sum()
    }

    fn triangle_area(&self, f: &[usize; 3]) -> f64 {
        let v = &self.vertices;
        0.5 * (v[f[1]] - v[f[0]]).cross(&(v[f[2]] - v[f[0]])).norm()
    }

    pub fn transform(&self, rot: &Matrix3<f64>, shift: &V3, scale: f64) -> Result<Self> {
        let verts = self.vertices.iter().map(|v| rot * v * scale + shift).collect();
        Self::new(verts, self.faces.clone())
    }

    fn tri(&self, t: usize) -> (&V3, &V3, &V3) {
        let f = &self.faces[t];
        (&self.vertices[f[0]], &self.vertices[f[1]], &self.vertices[f[2]])
    }

    pub fn closest_point(&self, p: &V3) -> ClosestPoint {
        let mut best = ClosestPoint { point: *p, face: 0, distance: f64::INFINITY };
        let mut best_d2 = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            match &self.bvh.nodes[ni] {
                Node::Leaf { bounds, start, end } => {
                    if bounds.dist2(p) >= best_d2 {
                        continue;
                    }
                    for &t in &self.bvh.order[*start..*end] {
                        let (a, b, c) = self.tri(t);
                        let q = closest_point_on_triangle(p, a, b, c);
                        let d2 = (q - p).norm_squared();
                        if d2 < best_d2 || (d2 == best_d2 && t < best.face) {
                            best_d2 = d2;
                            best = ClosestPoint { point: q, face: t, distance: 0.0 };
                        }
                    }
                }
                Node::Inner { bounds, left, right } => {
                    if bounds.dist2(p) >= best_d2 {
                        continue;
                    }
                    let dl = self.bvh.nodes[*left].bounds().dist2(p);
                    let dr = self.bvh.nodes[*right].bounds().dist2(p);
                    // Visit the nearer child first.
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best.distance = best_d2.sqrt();
        best
    }

    fn ray_crossings(&self, origin: &V3, dir: &V3) -> usize {
        let inv = V3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut count = 0;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.bvh.nodes[ni];
            if !node.bounds().hit_by_ray(origin, &inv) {
                continue;
            }
            match node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.bvh.order[*start..*end] {
                        let (a, b, c) = self.tri(t);
                        if ray_triangle(origin, dir, a, b, c).is_some() {
                            count += 1;
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        count
    }

    /// Inside test by ray parity along three fixed skew directions with a
    /// majority vote.
    pub fn contains(&self, p: &V3) -> bool {
        const DIRS: [[f64; 3]; 3] = [
            [0.537_743_1, 0.831_503_7, 0.139_012_4],
            [-0.712_300_9, 0.283_184_5, 0.642_171_3],
            [0.175_824_6, -0.475_382_3, -0.862_046_1],
        ];
        let votes = DIRS
            .iter()
            .filter(|d| {
                let dir = V3::new(d[0], d[1], d[2]).normalize();
                self.ray_crossings(p, &dir) % 2 == 1
            })
            .count();
        votes >= 2
    }

    /// Signed distance, closest point and closest face.
    pub fn signed_distance(&self, p: &V3) -> (f64, ClosestPoint) {
        let cp = self.closest_point(p);
        let inside = cp.distance > 0.0 && self.contains(p);
        (if inside { -cp.distance } else { cp.distance }, cp)
    }

    /// Outward SDF gradient `sign(s̃)(p − p′)/‖p − p′‖`, or the face normal at
    /// `p′` when `p` is on the surface.
    pub fn sdf_gradient(&self, p: &V3) -> (f64, V3, V3) {
        let (s, cp) = self.signed_distance(p);
        let diff = p - cp.point;
        let len = diff.norm();
        let grad = if len <= 1e-12 { self.face_normals[cp.face] } else { diff * (s.signum() / len) };
        (s, grad, cp.point)
    }

    pub fn bounding_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Area-weighted surface covariance and centroid.
    pub fn surface_moments(&self) -> (V3, Matrix3<f64>) {
        let mut total = 0.0;
        let mut first = V3::zeros();
        let mut second = Matrix3::zeros();
        for f in &self.faces {
            let (a, b, c) = (&self.vertices[f[0]], &self.vertices[f[1]], &self.vertices[f[2]]);
            let area = self.triangle_area(f);
            let s = a + b + c;
            first += area * s / 3.0;
            second += area / 12.0 * (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose());
            total += area;
        }
        let mean = first / total;
        (mean, second / total - mean * mean.transpose())
    }
}

fn signed_volume(vertices: &[V3], faces: &[[usize; 3]]) -> f64 {
    faces
        .iter()
        .map(|f| vertices[f[0]].dot(&vertices[f[1]].cross(&vertices[f[2]])) / 6.0)
        .sum()
}

fn check_watertight(faces: &[[usize; 3]]) -> Result<()> {
    let mut edges: HashMap<(usize, usize), (usize, i32)> = HashMap::new();
    for f in faces {
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(GraspError::NonWatertightMesh("degenerate face".into()));
        }
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let e = edges.entry(key).or_insert((0, 0));
            e.0 += 1;
            e.1 += if a < b { 1 } else { -1 };
        }
    }
    for (&(a, b), &(count, winding)) in &edges {
        if count != 2 {
            return Err(GraspError::NonWatertightMesh(format!("edge ({a}, {b}) is shared by {count} faces")));
        }
        if winding != 0 {
            return Err(GraspError::NonWatertightMesh(format!("edge ({a}, {b}) has inconsistent winding")));
        }
    }
    Ok(())
}

/// Icosahedron subdivided `subdivisions` times and projected to a sphere.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<V3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| V3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<V3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut verts);
            let bc = midpoint(f[1], f[2], &mut verts);
            let ca = midpoint(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| v * radius).collect();
    TriMesh::new(verts, faces).expect("icosphere is watertight")
}

/// Axis-aligned box centered at the origin, two triangles per face.
pub fn box_mesh(half: &V3) -> TriMesh {
    let mut verts = Vec::with_capacity(8);
    for i in 0..8 {
        let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
        let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
        let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
        verts.push(V3::new(sx * half.x, sy * half.y, sz * half.z));
    }
    let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
    let faces = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    TriMesh::new(verts, faces).expect("box is watertight")
}

/// Superellipsoid `(|x/a|^{2/e₂} + |y/b|^{2/e₂})^{e₂/e₁} + |z/c|^{2/e₁} = 1`
/// tessellated on a latitude/longitude grid.
pub fn superellipsoid(radii: &V3, e1: f64, e2: f64, rings: usize) -> Result<TriMesh> {
    if rings < 3 || e1 <= 0.0 || e2 <= 0.0 || radii.iter().any(|&r| r <= 0.0) {
        return Err(GraspError::Config("superellipsoid needs positive radii/exponents and ≥ 3 rings".into()));
    }
    let spow = |v: f64, e: f64| v.signum() * v.abs().powf(e);
    let segments = 2 * rings;
    let mut verts = vec![V3::new(0.0, 0.0, radii.z)];
    for i in 1..rings {
        let eta = std::f64::consts::FRAC_PI_2 - std::f64::consts::PI * i as f64 / rings as f64;
        for j in 0..segments {
            let omega = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
            let ce = spow(eta.cos(), e1);
            verts.push(V3::new(
                radii.x * ce * spow(omega.cos(), e2),
                radii.y * ce * spow(omega.sin(), e2),
                radii.z * spow(eta.sin(), e1),
            ));
        }
    }
    verts.push(V3::new(0.0, 0.0, -radii.z));
    let south = verts.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * segments + (j % segments);
    let mut faces = Vec::new();
    for j in 0..segments {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
        faces.push([south, ring(rings - 1, j + 1), ring(rings - 1, j)]);
    }
    for i in 1..rings - 1 {
        for j in 0..segments {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    TriMesh::new(verts, faces)
}

fn weld(tris: Vec<[V3; 3]>) -> Result<TriMesh> {
    let mut index: HashMap<[u64; 3], usize> = HashMap::new();
    let mut verts = Vec::new();
    let mut faces = Vec::with_capacity(tris.len());
    for t in tris {
        let mut f = [0usize; 3];
        for (k, v) in t.iter().enumerate() {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            f[k] = *index.entry(key).or_insert_with(|| {
                verts.push(*v);
                verts.len() - 1
            });
        }
        faces.push(f);
    }
    TriMesh::new(verts, faces)
}

pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| GraspError::Parse(format!("line {}: {e}", lineno + 1)))?;
                if c.len() != 3 {
                    return Err(GraspError::Parse(format!("line {}: vertex needs 3 coordinates", lineno + 1)));
                }
                verts.push(V3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first
                            .parse()
                            .map_err(|e| GraspError::Parse(format!("line {}: {e}", lineno + 1)))?;
                        let resolved = if i < 0 { verts.len() as i64 + i } else { i - 1 };
                        if resolved < 0 {
                            return Err(GraspError::Parse(format!("line {}: bad index {i}", lineno + 1)));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(GraspError::Parse(format!("line {}: face needs 3 vertices", lineno + 1)));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(verts, faces)
}

pub fn parse_stl(bytes: &[u8]) -> Result<TriMesh> {
    let looks_ascii = bytes.starts_with(b"solid") && std::str::from_utf8(bytes).map(|s| s.contains("facet")).unwrap_or(false);
    if looks_ascii {
        let text = std::str::from_utf8(bytes).map_err(|e| GraspError::Parse(e.to_string()))?;
        let mut tris = Vec::new();
        let mut cur = Vec::with_capacity(3);
        for line in text.lines() {
            let mut it = line.split_whitespace();
            if it.next() == Some("vertex") {
                let c: Vec<f64> = it
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| GraspError::Parse(e.to_string()))?;
                if c.len() != 3 {
                    return Err(GraspError::Parse("vertex needs 3 coordinates".into()));
                }
                cur.push(V3::new(c[0], c[1], c[2]));
                if cur.len() == 3 {
                    tris.push([cur[0], cur[1], cur[2]]);
                    cur.clear();
                }
            }
        }
        return weld(tris);
    }
    if bytes.len() < 84 {
        return Err(GraspError::Parse("binary STL shorter than its header".into()));
    }
    let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    if bytes.len() < 84 + 50 * count {
        return Err(GraspError::Parse(format!("binary STL truncated: expected {count} triangles")));
    }
    let f32_at = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as f64;
    let tris = (0..count)
        .map(|t| {
            let base = 84 + 50 * t + 12;
            let v = |k: usize| V3::new(f32_at(base + 12 * k), f32_at(base + 12 * k + 4), f32_at(base + 12 * k + 8));
            [v(0), v(1), v(2)]
        })
        .collect();
    weld(tris)
}

pub fn load_mesh(path: &Path) -> Result<TriMesh> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    match ext.as_str() {
        "obj" => parse_obj(std::str::from_utf8(&bytes).map_err(|e| GraspError::Parse(e.to_string()))?),
        "stl" => parse_stl(&bytes),
        other => Err(GraspError::Parse(format!("unsupported mesh format '{other}'"))),
    }
}

/// Writes a binary STL (used by tests and fixtures).
pub fn to_binary_stl(mesh: &TriMesh) -> Vec<u8> {
    let mut out = vec![0u8; 80];
    out.extend_from_slice(&(mesh.faces.len() as u32).to_le_bytes());
    for (t, f) in mesh.faces.iter().enumerate() {
        let n = mesh.face_normals[t];
        for v in std::iter::once(n).chain(f.iter().map(|&i| mesh.vertices[i])) {
            for k in 0..3 {
                out.extend_from_slice(&(v[k] as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for (k, nv) in [(0, 12), (1, 42), (2, 162), (3, 642), (4, 2562)] {
            let m = icosphere(1.0, k);
            assert_eq!(m.vertices().len(), nv);
            assert_eq!(m.faces().len(), 20 * 4usize.pow(k as u32));
            assert!(m.volume() > 0.0);
        }
    }

    #[test]
    fn open_mesh_is_rejected() {
        let m = box_mesh(&V3::new(1.0, 1.0, 1.0));
        let mut faces = m.faces().to_vec();
        faces.pop();
        assert!(matches!(TriMesh::new(m.vertices().to_vec(), faces), Err(GraspError::NonWatertightMesh(_))));
    }

    #[test]
    fn inverted_winding_is_repaired() {
        let m = box_mesh(&V3::new(1.0, 2.0, 3.0));
        let faces = m.faces().iter().map(|f| [f[0], f[2], f[1]]).collect();
        let flipped = TriMesh::new(m.vertices().to_vec(), faces).unwrap();
        assert!((flipped.volume() - 48.0).abs() < 1e-12);
    }

    #[test]
    fn box_distance_and_sign() {
        let m = box_mesh(&V3::new(0.5, 0.5, 0.5));
        let (s, cp) = m.signed_distance(&V3::new(2.0, 0.0, 0.0));
        assert!((s - 1.5).abs() < 1e-12);
        assert!((cp.point - V3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
        let (s, _) = m.signed_distance(&V3::new(0.1, 0.2, -0.3));
        assert!((s + 0.2).abs() < 1e-12);
    }

    #[test]
    fn obj_and_stl_round_trip() {
        let m = box_mesh(&V3::new(0.1, 0.2, 0.3));
        let mut obj = String::from("# box\n");
        for v in m.vertices() {
            obj.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for f in m.faces() {
            obj.push_str(&format!("f {}/1 {}/1 {}/1\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        let from_obj = parse_obj(&obj).unwrap();
        assert!((from_obj.volume() - m.volume()).abs() < 1e-12);

        let stl = to_binary_stl(&m);
        let from_stl = parse_stl(&stl).unwrap();
        assert_eq!(from_stl.faces().len(), 12);
        assert!((from_stl.volume() - m.volume()).abs() < 1e-6);

        let mut ascii = String::from("solid box\n");
        for f in m.faces() {
            ascii.push_str("facet normal 0 0 0\nouter loop\n");
            for &i in f {
                let v = m.vertices()[i];
                ascii.push_str(&format!("vertex {} {} {}\n", v.x, v.y, v.z));
            }
            ascii.push_str("endloop\nendfacet\n");
        }
        ascii.push_str("endsolid box\n");
        let from_ascii = parse_stl(ascii.as_bytes()).unwrap();
        assert!((from_ascii.volume() - m.volume()).abs() < 1e-12);
    }

    #[test]
    fn superellipsoid_is_watertight() {
        let m = superellipsoid(&V3::new(0.05, 0.03, 0.04), 0.5, 0.5, 16).unwrap();
        assert!(m.volume() > 0.0);
        // Tends toward the bounding box volume for small exponents.
        assert!(m.volume() < 8.0 * 0.05 * 0.03 * 0.04);
    }
}
