//! Contact frames, pyramidal friction cones and the wrench matrix `W(q)`.
//!
//! Wrench columns are `[f; ((p − c)/ρ) × f]` for a contact point `p`, a unit
//! cone edge `f`, a torque reference point `c` (the object frame origin) and a
//! torque scale `ρ` that keeps force and torque rows commensurate.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::geometry::ObjectModel;
use crate::{GraspError, Result};

/// Gradients shorter than this are treated as undefined.
pub const MIN_GRADIENT_NORM: f64 = 1e-8;

const PRIMARY_REF: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);
const FALLBACK_REF: Vector3<f64> = Vector3::new(1.0, 0.0, 0.0);

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactFrame {
    pub position: Vector3<f64>,
    /// Inward unit surface normal.
    pub normal: Vector3<f64>,
    pub tangent1: Vector3<f64>,
    pub tangent2: Vector3<f64>,
}

/// Derivatives of a contact frame's axes with respect to the contact point.
#[derive(Debug, Clone, Copy)]
pub struct FrameDerivative {
    pub normal: Matrix3<f64>,
    pub tangent1: Matrix3<f64>,
    pub tangent2: Matrix3<f64>,
}

fn reference_axis(normal: &Vector3<f64>) -> Vector3<f64> {
    if normal.dot(&PRIMARY_REF).abs() > 0.99 {
        FALLBACK_REF
    } else {
        PRIMARY_REF
    }
}

impl ContactFrame {
    /// Builds the frame from the outward SDF gradient at `position`.
    pub fn from_gradient(position: Vector3<f64>, gradient: &Vector3<f64>) -> Result<Self> {
        let norm = gradient.norm();
        if !(norm >= MIN_GRADIENT_NORM) {
            return Err(GraspError::DegenerateNormal { x: position.x, y: position.y, z: position.z });
        }
        let normal = -gradient / norm;
        let tangent1 = reference_axis(&normal).cross(&normal).normalize();
        let tangent2 = normal.cross(&tangent1);
        Ok(Self { position, normal, tangent1, tangent2 })
    }

    /// Frame plus its derivative, given the SDF gradient and Hessian at the
    /// contact point.
    pub fn with_derivative(
        position: Vector3<f64>,
        gradient: &Vector3<f64>,
        hessian: &Matrix3<f64>,
    ) -> Result<(Self, FrameDerivative)> {
        let frame = Self::from_gradient(position, gradient)?;
        let norm = gradient.norm();
        let n = frame.normal;
        // n = −g/‖g‖  ⇒  dn = −(I − n nᵀ) H / ‖g‖
        let dn = -(Matrix3::identity() - n * n.transpose()) * hessian / norm;
        let a = reference_axis(&n);
        let u = a.cross(&n);
        let t1 = frame.tangent1;
        let dt1 = (Matrix3::identity() - t1 * t1.transpose()) / u.norm() * skew(&a) * dn;
        let dt2 = -skew(&t1) * dn + skew(&n) * dt1;
        Ok((frame, FrameDerivative { normal: dn, tangent1: dt1, tangent2: dt2 }))
    }

    /// Rotation whose columns are `(t̂₁, t̂₂, n̂)`; maps contact-frame force
    /// coordinates into the world frame.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.tangent1, self.tangent2, self.normal])
    }
}

/// Contact frame on `object` at world point `p`.
pub fn contact_frame(object: &ObjectModel, p: &Vector3<f64>) -> Result<ContactFrame> {
    ContactFrame::from_gradient(*p, &object.sdf_gradient(p))
}

#[derive(Debug, Clone)]
pub struct FrictionCone {
    pub mu: f64,
    pub sides: usize,
    pub normal: Vector3<f64>,
    /// Unit edge directions, equispaced about the normal.
    pub edges: Vec<Vector3<f64>>,
}

fn edge_angle(j: usize, sides: usize) -> f64 {
    2.0 * std::f64::consts::PI * j as f64 / sides as f64
}

/// Pyramidal friction cone inscribed in the Coulomb cone of coefficient `mu`.
pub fn cone_edges(frame: &ContactFrame, mu: f64, sides: usize) -> FrictionCone {
    assert!(mu > 0.0 && sides >= 3, "cone needs mu > 0 and at least 3 sides");
    let scale = 1.0 / (1.0 + mu * mu).sqrt();
    let edges = (0..sides)
        .map(|j| {
            let th = edge_angle(j, sides);
            (frame.normal + mu * (th.cos() * frame.tangent1 + th.sin() * frame.tangent2)) * scale
        })
        .collect();
    FrictionCone { mu, sides, normal: frame.normal, edges }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct WrenchSource {
    pub contact: usize,
    pub edge: usize,
}

#[derive(Debug, Clone)]
pub struct WrenchSet {
    /// 6 × m basis wrenches.
    pub matrix: DMatrix<f64>,
    pub provenance: Vec<WrenchSource>,
    pub torque_scale: f64,
    pub center: Vector3<f64>,
}

impl WrenchSet {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let provenance = (0..matrix.ncols()).map(|j| WrenchSource { contact: j, edge: 0 }).collect();
        Self { matrix, provenance, torque_scale: 1.0, center: Vector3::zeros() }
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    /// Rank of `[W; 1ᵀ]`, i.e. one more than the affine dimension of the
    /// columns.
    pub fn affine_rank(&self) -> usize {
        affine_rank(&self.matrix)
    }

    /// Whether the columns contain `rows + 1` affinely independent wrenches.
    pub fn has_affine_basis(&self) -> bool {
        self.affine_rank() == self.matrix.nrows() + 1
    }
}

pub fn affine_rank(points: &DMatrix<f64>) -> usize {
    let d = points.nrows();
    let m = points.ncols();
    let mut aug = DMatrix::from_element(d + 1, m, 1.0);
    aug.view_mut((0, 0), (d, m)).copy_from(points);
    let scale = aug.amax().max(1.0);
    aug.svd(false, false).singular_values.iter().filter(|&&s| s > 1e-9 * scale).count()
}

fn wrench_column(frame: &ContactFrame, edge: &Vector3<f64>, center: &Vector3<f64>, rho: f64) -> [f64; 6] {
    let r = (frame.position - center) / rho;
    let tau = r.cross(edge);
    [edge.x, edge.y, edge.z, tau.x, tau.y, tau.z]
}

/// Wrench set for `contacts` about an explicit torque reference point.
pub fn build_wrench_set_about(
    contacts: &[ContactFrame],
    center: &Vector3<f64>,
    mu: f64,
    sides: usize,
    rho: f64,
) -> Result<WrenchSet> {
    if contacts.len() < 2 {
        return Err(GraspError::Config(format!("need at least 2 contacts, got {}", contacts.len())));
    }
    if !(rho > 0.0) {
        return Err(GraspError::Config(format!("torque scale must be positive, got {rho}")));
    }
    let m = contacts.len() * sides;
    let mut matrix = DMatrix::zeros(6, m);
    let mut provenance = Vec::with_capacity(m);
    for (i, frame) in contacts.iter().enumerate() {
        let cone = cone_edges(frame, mu, sides);
        for (j, edge) in cone.edges.iter().enumerate() {
            let col = i * sides + j;
            let w = wrench_column(frame, edge, center, rho);
            for r in 0..6 {
                matrix[(r, col)] = w[r];
            }
            provenance.push(WrenchSource { contact: i, edge: j });
        }
    }
    Ok(WrenchSet { matrix, provenance, torque_scale: rho, center: *center })
}

/// Wrench set with torques about the object frame origin.
pub fn build_wrench_set(
    object: &ObjectModel,
    contacts: &[ContactFrame],
    mu: f64,
    sides: usize,
    rho: f64,
) -> Result<WrenchSet> {
    build_wrench_set_about(contacts, &object.origin(), mu, sides, rho)
}

/// Derivative of every wrench column with respect to its contact point:
/// one 6×3 block per column.
pub fn column_point_derivatives(
    frame: &ContactFrame,
    deriv: &FrameDerivative,
    center: &Vector3<f64>,
    mu: f64,
    sides: usize,
    rho: f64,
) -> Vec<nalgebra::Matrix6x3<f64>> {
    let scale = 1.0 / (1.0 + mu * mu).sqrt();
    let r = (frame.position - center) / rho;
    let cone = cone_edges(frame, mu, sides);
    (0..sides)
        .map(|j| {
            let th = edge_angle(j, sides);
            let df = (deriv.normal + mu * (th.cos() * deriv.tangent1 + th.sin() * deriv.tangent2)) * scale;
            let f = cone.edges[j];
            // τ = r × f  ⇒  dτ = −[f]× dp/ρ + [r]× df
            let dtau = -skew(&f) / rho + skew(&r) * df;
            let mut block = nalgebra::Matrix6x3::zeros();
            block.fixed_view_mut::<3, 3>(0, 0).copy_from(&df);
            block.fixed_view_mut::<3, 3>(3, 0).copy_from(&dtau);
            block
        })
        .collect()
}

/// `∂W/∂q_k` for every configuration coordinate, chaining column derivatives
/// through the contact-point Jacobians (3 × n each).
pub fn wrench_jacobian(
    contacts: &[(ContactFrame, FrameDerivative)],
    point_jacobians: &[DMatrix<f64>],
    center: &Vector3<f64>,
    mu: f64,
    sides: usize,
    rho: f64,
) -> Vec<DMatrix<f64>> {
    let n = point_jacobians.first().map_or(0, |j| j.ncols());
    let m = contacts.len() * sides;
    let mut out = vec![DMatrix::zeros(6, m); n];
    for (i, ((frame, deriv), jac)) in contacts.iter().zip(point_jacobians).enumerate() {
        let blocks = column_point_derivatives(frame, deriv, center, mu, sides, rho);
        for (j, block) in blocks.iter().enumerate() {
            let col = i * sides + j;
            let dcol = block * jac; // 6 × n
            for k in 0..n {
                for r in 0..6 {
                    out[k][(r, col)] = dcol[(r, k)];
                }
            }
        }
    }
    out
}

/// Grasp map `G` (6 × 3n_c) taking stacked contact-frame forces to the object
/// wrench about `center`.
pub fn grasp_map(contacts: &[ContactFrame], center: &Vector3<f64>, rho: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(6, 3 * contacts.len());
    for (i, frame) in contacts.iter().enumerate() {
        let rot = frame.rotation();
        let r = (frame.position - center) / rho;
        let tau = skew(&r) * rot;
        g.view_mut((0, 3 * i), (3, 3)).copy_from(&rot);
        g.view_mut((3, 3 * i), (3, 3)).copy_from(&tau);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn frame_at(normal: Vector3<f64>) -> ContactFrame {
        ContactFrame::from_gradient(Vector3::zeros(), &(-normal)).unwrap()
    }

    #[test]
    fn triad_is_right_handed_orthonormal() {
        for n in [
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 2.0, -0.5).normalize(),
            Vector3::new(0.0, -1.0, 0.0),
            Vector3::new(0.01, 0.0, -1.0).normalize(),
        ] {
            let f = frame_at(n);
            for v in [f.tangent1, f.tangent2, f.normal] {
                assert!(close(v.norm(), 1.0, 1e-10));
            }
            assert!(close(f.tangent1.dot(&f.tangent2), 0.0, 1e-10));
            assert!(close(f.tangent1.dot(&f.normal), 0.0, 1e-10));
            assert!((f.tangent1.cross(&f.tangent2) - f.normal).norm() < 1e-10);
        }
    }

    #[test]
    fn degenerate_gradient_is_rejected() {
        let err = ContactFrame::from_gradient(Vector3::zeros(), &Vector3::new(1e-9, 0.0, 0.0));
        assert!(matches!(err, Err(GraspError::DegenerateNormal { .. })));
    }

    #[test]
    fn square_pyramid_edges() {
        let f = frame_at(Vector3::z());
        let cone = cone_edges(&f, 1.0, 4);
        let s = 1.0 / 2f64.sqrt();
        let mut expected = vec![
            Vector3::new(s, 0.0, s),
            Vector3::new(-s, 0.0, s),
            Vector3::new(0.0, s, s),
            Vector3::new(0.0, -s, s),
        ];
        for e in &cone.edges {
            let pos = expected.iter().position(|x| (x - e).norm() < 1e-12).expect("unexpected edge");
            expected.remove(pos);
        }
        assert!(expected.is_empty());

        let cone = cone_edges(&f, 0.7, 4);
        for e in &cone.edges {
            assert!(close(e.dot(&Vector3::z()), 1.0 / (1.0f64 + 0.49).sqrt(), 1e-12));
            // on the Coulomb boundary
            let t = e - e.dot(&f.normal) * f.normal;
            assert!(close(t.norm(), 0.7 * e.dot(&f.normal), 1e-12));
        }
    }

    #[test]
    fn octagonal_cone_spacing_and_mean() {
        let f = frame_at(Vector3::new(0.3, -0.4, 0.2).normalize());
        let cone = cone_edges(&f, 0.5, 8);
        let mean: Vector3<f64> = cone.edges.iter().sum::<Vector3<f64>>() / 8.0;
        assert!(mean.normalize().cross(&f.normal).norm() < 1e-12);
        for j in 0..8 {
            let a = cone.edges[j] - cone.edges[j].dot(&f.normal) * f.normal;
            let b = cone.edges[(j + 1) % 8] - cone.edges[(j + 1) % 8].dot(&f.normal) * f.normal;
            let ang = (a.normalize().dot(&b.normalize())).clamp(-1.0, 1.0).acos();
            assert!(close(ang, std::f64::consts::FRAC_PI_4, 1e-9));
        }
    }

    #[test]
    fn antipodal_contacts_have_no_normal_torque() {
        let c1 = ContactFrame::from_gradient(Vector3::x(), &Vector3::x()).unwrap();
        let c2 = ContactFrame::from_gradient(-Vector3::x(), &-Vector3::x()).unwrap();
        let ws = build_wrench_set_about(&[c1, c2], &Vector3::zeros(), 0.7, 4, 1.0).unwrap();
        assert_eq!(ws.len(), 8);
        // The normal component of each edge passes through the origin, so the
        // torque is purely from the tangential part: τ·n = 0.
        for col in 0..8 {
            let n = if col < 4 { c1.normal } else { c2.normal };
            let tau = Vector3::new(ws.matrix[(3, col)], ws.matrix[(4, col)], ws.matrix[(5, col)]);
            assert!(tau.dot(&n).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_contacts() {
        let c1 = ContactFrame::from_gradient(Vector3::x(), &Vector3::x()).unwrap();
        assert!(build_wrench_set_about(&[c1], &Vector3::zeros(), 0.7, 4, 1.0).is_err());
    }
}
