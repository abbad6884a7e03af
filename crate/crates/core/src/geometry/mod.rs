//! Object models: analytic and triangle-mesh signed distance fields, their
//! derivatives, and oriented bounding boxes.

pub mod analytic;
pub mod mesh;

use std::path::Path;
use std::sync::Arc;

use nalgebra::{Isometry3, Matrix3, Quaternion, SymmetricEigen, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use analytic::Primitive;
pub use mesh::TriMesh;

use crate::{GraspError, Result};

type V3 = Vector3<f64>;
type M3 = Matrix3<f64>;

/// Finite-difference Hessian probes are rejected below this conditioning.
const MIN_PROBE_CONDITIONING: f64 = 1e-6;
const MAX_PROBE_DRAWS: usize = 16;

#[derive(Debug, Clone)]
pub enum Geometry {
    Analytic(Primitive),
    Mesh(Arc<TriMesh>),
}

/// Value, gradient, Hessian and closest point of the SDF, all in the world frame.
#[derive(Debug, Clone, Copy)]
pub struct SdfQuery {
    pub value: f64,
    pub gradient: V3,
    pub hessian: M3,
    pub closest: V3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: V3,
    /// Columns are the box axes, ordered by decreasing extent for meshes.
    pub axes: M3,
    pub half_extents: V3,
}

impl Obb {
    pub fn contains(&self, p: &V3, tol: f64) -> bool {
        let local = self.axes.transpose() * (p - self.center);
        (0..3).all(|k| local[k].abs() <= self.half_extents[k] + tol)
    }
}

#[derive(Debug, Clone)]
pub struct ObjectModel {
    pub geometry: Geometry,
    /// Object frame expressed in the world frame.
    pub pose: Isometry3<f64>,
    pub mass: f64,
    pub mu: f64,
    bounding_radius: f64,
    obb: Obb,
    hessian_seed: u64,
    default_delta: f64,
}

impl ObjectModel {
    pub fn analytic(prim: Primitive, pose: Isometry3<f64>, mass: f64, mu: f64) -> Result<Self> {
        prim.validate().map_err(GraspError::Config)?;
        let rot = pose.rotation.to_rotation_matrix().into_inner();
        let obb = Obb { center: pose.translation.vector, axes: rot, half_extents: prim.half_extents() };
        Ok(Self {
            bounding_radius: prim.bounding_radius(),
            geometry: Geometry::Analytic(prim),
            pose,
            mass,
            mu,
            obb,
            hessian_seed: 0,
            default_delta: 0.0,
        })
    }

    pub fn mesh(mesh: TriMesh, pose: Isometry3<f64>, mass: f64, mu: f64) -> Self {
        let obb = pca_obb(&mesh, &pose);
        Self {
            bounding_radius: mesh.bounding_radius(),
            default_delta: 10.0 * mesh.mean_edge_length(),
            geometry: Geometry::Mesh(Arc::new(mesh)),
            pose,
            mass,
            mu,
            obb,
            hessian_seed: 0,
        }
    }

    pub fn sphere(radius: f64, center: V3, mass: f64, mu: f64) -> Result<Self> {
        Self::analytic(Primitive::Sphere { radius }, Isometry3::translation(center.x, center.y, center.z), mass, mu)
    }

    /// Seed for the Hessian probe directions.
    pub fn with_hessian_seed(mut self, seed: u64) -> Self {
        self.hessian_seed = seed;
        self
    }

    pub fn hessian_seed(&self) -> u64 {
        self.hessian_seed
    }

    /// Object frame origin in the world; the torque reference point.
    pub fn origin(&self) -> V3 {
        self.pose.translation.vector
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    pub fn obb(&self) -> &Obb {
        &self.obb
    }

    pub fn is_mesh(&self) -> bool {
        matches!(self.geometry, Geometry::Mesh(_))
    }

    /// Default finite-difference step for the Hessian estimate: ten mean
    /// edge lengths on meshes, unused for analytic shapes.
    pub fn default_hessian_delta(&self) -> f64 {
        self.default_delta
    }

    fn to_local(&self, p: &V3) -> V3 {
        self.pose.inverse_transform_point(&(*p).into()).coords
    }

    fn rot(&self) -> M3 {
        self.pose.rotation.to_rotation_matrix().into_inner()
    }

    pub fn sdf_value(&self, p: &V3) -> f64 {
        let local = self.to_local(p);
        match &self.geometry {
            Geometry::Analytic(prim) => prim.eval(&local).value,
            Geometry::Mesh(m) => m.signed_distance(&local).0,
        }
    }

    pub fn sdf_gradient(&self, p: &V3) -> V3 {
        let local = self.to_local(p);
        let g = match &self.geometry {
            Geometry::Analytic(prim) => prim.eval(&local).gradient,
            Geometry::Mesh(m) => m.sdf_gradient(&local).1,
        };
        self.rot() * g
    }

    /// Closest surface point in the world frame.
    pub fn closest_point(&self, p: &V3) -> V3 {
        let local = self.to_local(p);
        let c = match &self.geometry {
            Geometry::Analytic(prim) => {
                let e = prim.eval(&local);
                local - e.gradient * e.value
            }
            Geometry::Mesh(m) => m.closest_point(&local).point,
        };
        self.pose.transform_point(&c.into()).coords
    }

    /// SDF Hessian. Exact for analytic shapes (`delta` ignored); for meshes,
    /// a finite-difference estimate with step `delta`.
    pub fn sdf_hessian(&self, p: &V3, delta: f64) -> Result<M3> {
        match &self.geometry {
            Geometry::Analytic(prim) => {
                let r = self.rot();
                Ok(r * prim.eval(&self.to_local(p)).hessian * r.transpose())
            }
            Geometry::Mesh(_) => {
                if !(delta > 0.0) {
                    return Err(GraspError::Config(format!("Hessian step must be positive, got {delta}")));
                }
                estimate_hessian(|x| self.sdf_gradient(x), p, delta, self.probe_rng(p))
            }
        }
    }

    /// All SDF quantities at `p`, using the default Hessian step on meshes.
    pub fn query(&self, p: &V3) -> Result<SdfQuery> {
        let local = self.to_local(p);
        let r = self.rot();
        match &self.geometry {
            Geometry::Analytic(prim) => {
                let e = prim.eval(&local);
                let closest = self.pose.transform_point(&(local - e.gradient * e.value).into()).coords;
                Ok(SdfQuery { value: e.value, gradient: r * e.gradient, hessian: r * e.hessian * r.transpose(), closest })
            }
            Geometry::Mesh(m) => {
                let (value, g, c) = m.sdf_gradient(&local);
                let hessian = self.sdf_hessian(p, self.default_delta)?;
                Ok(SdfQuery {
                    value,
                    gradient: r * g,
                    hessian,
                    closest: self.pose.transform_point(&c.into()).coords,
                })
            }
        }
    }

    /// Per-query generator derived from the object seed and the query point,
    /// so Hessian estimates are reproducible and thread independent.
    fn probe_rng(&self, p: &V3) -> ChaCha8Rng {
        let mut h = self.hessian_seed ^ 0x9e37_79b9_7f4a_7c15;
        for k in 0..3 {
            h = splitmix64(h ^ p[k].to_bits());
        }
        ChaCha8Rng::seed_from_u64(h)
    }

    pub fn from_config(cfg: &ObjectConfig, base_dir: &Path) -> Result<Self> {
        if !(cfg.mu >= 0.0) || !(cfg.mass_kg > 0.0) {
            return Err(GraspError::Config("object needs mass_kg > 0 and mu ≥ 0".into()));
        }
        let pose = cfg.pose.to_isometry()?;
        let model = match &cfg.geometry {
            GeometryConfig::Sphere { radius } => Self::analytic(Primitive::Sphere { radius: *radius }, pose, cfg.mass_kg, cfg.mu)?,
            GeometryConfig::Box { half_extents } => {
                Self::analytic(Primitive::Box { half_extents: *half_extents }, pose, cfg.mass_kg, cfg.mu)?
            }
            GeometryConfig::Cylinder { radius, half_height } => Self::analytic(
                Primitive::Cylinder { radius: *radius, half_height: *half_height },
                pose,
                cfg.mass_kg,
                cfg.mu,
            )?,
            GeometryConfig::Superellipsoid { radii, e1, e2, rings } => {
                let m = mesh::superellipsoid(&V3::from(*radii), *e1, *e2, *rings)?;
                Self::mesh(m, pose, cfg.mass_kg, cfg.mu)
            }
            GeometryConfig::Icosphere { radius, subdivisions } => {
                Self::mesh(mesh::icosphere(*radius, *subdivisions), pose, cfg.mass_kg, cfg.mu)
            }
            GeometryConfig::Mesh { path, scale } => {
                let m = mesh::load_mesh(&base_dir.join(path))?;
                let m = if *scale != 1.0 { m.transform(&M3::identity(), &V3::zeros(), *scale)? } else { m };
                Self::mesh(m, pose, cfg.mass_kg, cfg.mu)
            }
        };
        Ok(model.with_hessian_seed(cfg.hessian_seed))
    }

    /// Loads a JSON object config; mesh paths resolve relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg = parse_object_config(&text)?;
        Self::from_config(&cfg, path.parent().unwrap_or(Path::new(".")))
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Finite-difference Hessian from gradient perturbations.
///
/// Probe `d₁` is the gradient direction with zero response; `d₂, d₃` are
/// random unit vectors in the tangent plane. Solving `Σ D = Y` with
/// `y_i = (∇s(p + δ d_i) − ∇s(p))/δ` and symmetrizing gives the estimate.
pub fn estimate_hessian<F, R>(grad: F, p: &V3, delta: f64, mut rng: R) -> Result<M3>
where
    F: Fn(&V3) -> V3,
    R: Rng,
{
    let g0 = grad(p);
    let n = g0.try_normalize(1e-12).ok_or(GraspError::SingularDirections)?;
    for _ in 0..MAX_PROBE_DRAWS {
        let mut dirs = [V3::zeros(); 2];
        for d in dirs.iter_mut() {
            let v = V3::new(
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
            );
            *d = v - n * n.dot(&v);
        }
        let (Some(d2), Some(d3)) = (dirs[0].try_normalize(1e-12), dirs[1].try_normalize(1e-12)) else {
            continue;
        };
        let d = M3::from_columns(&[n, d2, d3]);
        let sv = d.singular_values();
        if sv.min() / sv.max() < MIN_PROBE_CONDITIONING {
            continue;
        }
        let Some(dinv) = d.try_inverse() else { continue };
        let y2 = (grad(&(p + d2 * delta)) - g0) / delta;
        let y3 = (grad(&(p + d3 * delta)) - g0) / delta;
        let y = M3::from_columns(&[V3::zeros(), y2, y3]);
        let sigma = y * dinv;
        return Ok((sigma + sigma.transpose()) * 0.5);
    }
    Err(GraspError::SingularDirections)
}

/// PCA box from area-weighted surface moments, expressed in the world frame.
fn pca_obb(mesh: &TriMesh, pose: &Isometry3<f64>) -> Obb {
    let (mean, cov) = mesh.surface_moments();
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = M3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]);
    if axes.determinant() < 0.0 {
        let flipped = -axes.column(2);
        axes.set_column(2, &flipped);
    }
    let mut lo = V3::repeat(f64::INFINITY);
    let mut hi = V3::repeat(f64::NEG_INFINITY);
    for v in mesh.vertices() {
        let c = axes.transpose() * (v - mean);
        lo = lo.inf(&c);
        hi = hi.sup(&c);
    }
    let local_center = mean + axes * ((lo + hi) * 0.5);
    let rot = pose.rotation.to_rotation_matrix().into_inner();
    Obb {
        center: pose.transform_point(&local_center.into()).coords,
        axes: rot * axes,
        half_extents: (hi - lo) * 0.5,
    }
}

pub fn oriented_bounding_box(object: &ObjectModel) -> Obb {
    object.obb
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
    Cylinder { radius: f64, half_height: f64 },
    Superellipsoid {
        radii: [f64; 3],
        e1: f64,
        e2: f64,
        #[serde(default = "default_rings")]
        rings: usize,
    },
    Icosphere { radius: f64, subdivisions: usize },
    Mesh {
        path: String,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn default_rings() -> usize {
    24
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    pub position: [f64; 3],
    /// Unit quaternion as `[w, x, y, z]`.
    pub quaternion: [f64; 4],
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self { position: [0.0; 3], quaternion: [1.0, 0.0, 0.0, 0.0] }
    }
}

impl PoseConfig {
    pub fn to_isometry(&self) -> Result<Isometry3<f64>> {
        let [w, x, y, z] = self.quaternion;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(GraspError::Config(format!("pose quaternion is not unit length (norm {})", q.norm())));
        }
        let p = self.position;
        Ok(Isometry3::from_parts(Translation3::new(p[0], p[1], p[2]), UnitQuaternion::new_normalize(q)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub pose: PoseConfig,
    pub mass_kg: f64,
    pub mu: f64,
    #[serde(default)]
    pub hessian_seed: u64,
}

/// Parses an object config, reporting the line and column of JSON errors.
pub fn parse_object_config(text: &str) -> Result<ObjectConfig> {
    serde_json::from_str(text).map_err(|e| {
        GraspError::Config(format!("object config, line {} column {}: {e}", e.line(), e.column()))
    })
}
