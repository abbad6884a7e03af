//! Floating-palm multi-finger hands: forward kinematics, point Jacobians and
//! collision spheres.
//!
//! The configuration is `q = (t, ω, θ)`: palm position, palm rotation in
//! exponential coordinates, then the finger joint angles in finger order.
//! Each finger is a chain of revolute joints rooted at a fixed pose in the
//! palm frame; a joint's frame is its parent frame translated by `offset`
//! and rotated by `θ` about `axis`.

use nalgebra::{DMatrix, DVector, Isometry3, Matrix3, Rotation3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::PoseConfig;
use crate::wrench::skew;
use crate::{GraspError, Result};

type V3 = Vector3<f64>;
type M3 = Matrix3<f64>;

pub const PALM_DOFS: usize = 6;

#[derive(Debug, Clone)]
pub struct RevoluteJoint {
    pub offset: V3,
    pub axis: Unit<V3>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct Finger {
    pub name: String,
    /// Chain root in the palm frame.
    pub base: Isometry3<f64>,
    pub joints: Vec<RevoluteJoint>,
    /// Contact point in the frame of the last joint.
    pub contact_offset: V3,
}

/// Rigid body carrying collision spheres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Body {
    Palm,
    Link { finger: usize, link: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct CollisionSphere {
    pub body: Body,
    pub center: V3,
    pub radius: f64,
    pub fingertip: bool,
}

#[derive(Debug, Clone)]
pub struct HandModel {
    pub name: String,
    pub fingers: Vec<Finger>,
    pub spheres: Vec<CollisionSphere>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    /// Index of each finger's first joint in `q`.
    joint_start: Vec<usize>,
}

/// SO(3) left Jacobian: `exp([ω + dω]) ≈ exp([J_l(ω) dω]) exp([ω])`.
pub fn so3_left_jacobian(w: &V3) -> M3 {
    let th = w.norm();
    let k = skew(w);
    if th < 1e-6 {
        return M3::identity() + k * 0.5 + k * k / 6.0;
    }
    let th2 = th * th;
    M3::identity() + k * ((1.0 - th.cos()) / th2) + k * k * ((th - th.sin()) / (th2 * th))
}

pub fn so3_exp(w: &V3) -> M3 {
    Rotation3::new(*w).into_inner()
}

impl HandModel {
    pub fn new(
        name: impl Into<String>,
        fingers: Vec<Finger>,
        spheres: Vec<CollisionSphere>,
        palm_lower: [f64; 6],
        palm_upper: [f64; 6],
    ) -> Result<Self> {
        let mut lower = palm_lower.to_vec();
        let mut upper = palm_upper.to_vec();
        let mut joint_start = Vec::with_capacity(fingers.len());
        for f in &fingers {
            joint_start.push(lower.len());
            for j in &f.joints {
                lower.push(j.lower);
                upper.push(j.upper);
            }
        }
        if let Some(k) = (0..lower.len()).find(|&k| !(lower[k] < upper[k])) {
            return Err(GraspError::Config(format!("hand limits need lower < upper at coordinate {k}")));
        }
        for s in &spheres {
            let ok = match s.body {
                Body::Palm => true,
                Body::Link { finger, link } => finger < fingers.len() && link < fingers[finger].joints.len(),
            };
            if !ok || !(s.radius > 0.0) {
                return Err(GraspError::Config(format!("invalid collision sphere on {:?}", s.body)));
            }
        }
        Ok(Self {
            name: name.into(),
            fingers,
            spheres,
            lower: DVector::from_vec(lower),
            upper: DVector::from_vec(upper),
            joint_start,
        })
    }

    pub fn dofs(&self) -> usize {
        self.lower.len()
    }

    pub fn num_fingers(&self) -> usize {
        self.fingers.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn joint_range(&self, finger: usize) -> std::ops::Range<usize> {
        let s = self.joint_start[finger];
        s..s + self.fingers[finger].joints.len()
    }

    pub fn clamp(&self, q: &DVector<f64>) -> DVector<f64> {
        q.zip_zip_map(&self.lower, &self.upper, |x, lo, hi| x.clamp(lo, hi))
    }

    pub fn within_limits(&self, q: &DVector<f64>, tol: f64) -> bool {
        (0..q.len()).all(|k| q[k] >= self.lower[k] - tol && q[k] <= self.upper[k] + tol)
    }

    pub fn palm_pose(&self, q: &DVector<f64>) -> Isometry3<f64> {
        let w = V3::new(q[3], q[4], q[5]);
        Isometry3::from_parts(Translation3::new(q[0], q[1], q[2]), UnitQuaternion::from_scaled_axis(w))
    }

    /// Joint frames of `finger` in the palm frame, one per joint.
    fn link_frames(&self, q: &DVector<f64>, finger: usize) -> Vec<Isometry3<f64>> {
        let f = &self.fingers[finger];
        let start = self.joint_start[finger];
        let mut t = f.base;
        f.joints
            .iter()
            .enumerate()
            .map(|(k, j)| {
                t = t * Translation3::from(j.offset) * UnitQuaternion::from_axis_angle(&j.axis, q[start + k]);
                t
            })
            .collect()
    }

    /// World position of a point fixed in `body`.
    pub fn body_point(&self, q: &DVector<f64>, body: Body, local: &V3) -> V3 {
        let palm_local = match body {
            Body::Palm => *local,
            Body::Link { finger, link } => self.link_frames(q, finger)[link].transform_point(&(*local).into()).coords,
        };
        self.palm_pose(q).transform_point(&palm_local.into()).coords
    }

    /// `∂p/∂q` (3 × n) for a point fixed in `body`.
    pub fn body_point_jacobian(&self, q: &DVector<f64>, body: Body, local: &V3) -> DMatrix<f64> {
        let n = self.dofs();
        let mut jac = DMatrix::zeros(3, n);
        let w = V3::new(q[3], q[4], q[5]);
        let rot = so3_exp(&w);
        let palm_local = match body {
            Body::Palm => *local,
            Body::Link { finger, link } => {
                let frames = self.link_frames(q, finger);
                let v = frames[link].transform_point(&(*local).into()).coords;
                let start = self.joint_start[finger];
                for (k, frame) in frames.iter().enumerate().take(link + 1) {
                    let axis = frame.rotation * self.fingers[finger].joints[k].axis.into_inner();
                    let origin = frame.translation.vector;
                    jac.fixed_view_mut::<3, 1>(0, start + k).copy_from(&(rot * axis.cross(&(v - origin))));
                }
                v
            }
        };
        jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&M3::identity());
        let dw = -skew(&(rot * palm_local)) * so3_left_jacobian(&w);
        jac.fixed_view_mut::<3, 3>(0, 3).copy_from(&dw);
        jac
    }

    fn contact_body(&self, finger: usize) -> Body {
        Body::Link { finger, link: self.fingers[finger].joints.len() - 1 }
    }

    /// World position of finger `finger`'s contact point.
    pub fn forward_kinematics(&self, q: &DVector<f64>, finger: usize) -> V3 {
        self.body_point(q, self.contact_body(finger), &self.fingers[finger].contact_offset)
    }

    pub fn point_jacobian(&self, q: &DVector<f64>, finger: usize) -> DMatrix<f64> {
        self.body_point_jacobian(q, self.contact_body(finger), &self.fingers[finger].contact_offset)
    }

    pub fn contact_points(&self, q: &DVector<f64>) -> Vec<V3> {
        (0..self.num_fingers()).map(|i| self.forward_kinematics(q, i)).collect()
    }

    pub fn sphere_center(&self, q: &DVector<f64>, sphere: usize) -> V3 {
        let s = &self.spheres[sphere];
        self.body_point(q, s.body, &s.center)
    }

    pub fn sphere_jacobian(&self, q: &DVector<f64>, sphere: usize) -> DMatrix<f64> {
        let s = &self.spheres[sphere];
        self.body_point_jacobian(q, s.body, &s.center)
    }

    /// Bodies directly connected by a joint.
    pub fn adjacent(&self, a: Body, b: Body) -> bool {
        match (a, b) {
            (Body::Palm, Body::Link { link: 0, .. }) | (Body::Link { link: 0, .. }, Body::Palm) => true,
            (Body::Link { finger: f1, link: l1 }, Body::Link { finger: f2, link: l2 }) => {
                f1 == f2 && l1.abs_diff(l2) == 1
            }
            _ => false,
        }
    }

    pub fn from_config(cfg: &HandConfig) -> Result<Self> {
        let mut spheres: Vec<CollisionSphere> = cfg
            .palm
            .spheres
            .iter()
            .map(|s| CollisionSphere { body: Body::Palm, center: V3::from(s.center), radius: s.radius, fingertip: s.fingertip })
            .collect();
        let mut fingers = Vec::with_capacity(cfg.fingers.len());
        for (fi, f) in cfg.fingers.iter().enumerate() {
            if f.joints.is_empty() {
                return Err(GraspError::Config(format!("finger '{}' has no joints", f.name)));
            }
            let joints = f
                .joints
                .iter()
                .map(|j| {
                    let axis = Unit::try_new(V3::from(j.axis), 1e-12)
                        .ok_or_else(|| GraspError::Config(format!("finger '{}' has a zero joint axis", f.name)))?;
                    Ok(RevoluteJoint { offset: V3::from(j.offset), axis, lower: j.limits[0], upper: j.limits[1] })
                })
                .collect::<Result<Vec<_>>>()?;
            for s in &f.spheres {
                spheres.push(CollisionSphere {
                    body: Body::Link { finger: fi, link: s.link },
                    center: V3::from(s.center),
                    radius: s.radius,
                    fingertip: s.fingertip,
                });
            }
            fingers.push(Finger {
                name: f.name.clone(),
                base: f.base.to_isometry()?,
                joints,
                contact_offset: V3::from(f.contact_offset),
            });
        }
        Self::new(cfg.name.clone(), fingers, spheres, cfg.palm.lower, cfg.palm.upper)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: HandConfig = serde_json::from_str(&text)
            .map_err(|e| GraspError::Config(format!("hand config, line {} column {}: {e}", e.line(), e.column())))?;
        Self::from_config(&cfg)
    }
}

/// Maps the palm rotation back to `‖ω‖ ≤ π`; returns whether it changed.
pub fn wrap_rotation(q: &mut DVector<f64>) -> bool {
    let w = V3::new(q[3], q[4], q[5]);
    let th = w.norm();
    if th <= std::f64::consts::PI {
        return false;
    }
    let turns = ((th + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)).floor();
    let wrapped = w * ((th - 2.0 * std::f64::consts::PI * turns) / th);
    q[3] = wrapped.x;
    q[4] = wrapped.y;
    q[5] = wrapped.z;
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereConfig {
    #[serde(default)]
    pub link: usize,
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default)]
    pub fingertip: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub offset: [f64; 3],
    pub axis: [f64; 3],
    pub limits: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerConfig {
    pub name: String,
    #[serde(default)]
    pub base: PoseConfig,
    pub joints: Vec<JointConfig>,
    pub contact_offset: [f64; 3],
    #[serde(default)]
    pub spheres: Vec<SphereConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PalmConfig {
    /// Bounds on `(t, ω)`.
    pub lower: [f64; 6],
    pub upper: [f64; 6],
    #[serde(default)]
    pub spheres: Vec<SphereConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandConfig {
    pub name: String,
    pub palm: PalmConfig,
    pub fingers: Vec<FingerConfig>,
}

/// Dimensions of the built-in test hands (meters, radians).
pub mod fixture {
    pub const HALF_SPAN: f64 = 0.05;
    pub const FINGER_SPREAD: f64 = 0.03;
    pub const PROXIMAL: f64 = 0.055;
    pub const DISTAL: f64 = 0.045;
    pub const TIP_RADIUS: f64 = 0.012;
    pub const LINK_RADIUS: f64 = 0.011;
    /// Angle of the contact point on the tip sphere, measured from the
    /// finger axis toward the palm midline.
    pub const CONTACT_ANGLE: f64 = std::f64::consts::FRAC_PI_3;
    pub const PROXIMAL_LIMITS: [f64; 2] = [-0.5, 1.6];
    pub const DISTAL_LIMITS: [f64; 2] = [-0.3, 1.6];
}

fn fixture_finger(name: &str, y: f64, z: f64) -> FingerConfig {
    use fixture::*;
    // Fingers extend along palm +x and flex toward the midline y = 0.
    let inward = -y.signum();
    let axis = [0.0, 0.0, inward];
    FingerConfig {
        name: name.to_string(),
        base: PoseConfig { position: [0.0, y, z], quaternion: [1.0, 0.0, 0.0, 0.0] },
        joints: vec![
            JointConfig { offset: [0.0; 3], axis, limits: PROXIMAL_LIMITS },
            JointConfig { offset: [PROXIMAL, 0.0, 0.0], axis, limits: DISTAL_LIMITS },
        ],
        contact_offset: [
            DISTAL + TIP_RADIUS * CONTACT_ANGLE.cos(),
            inward * TIP_RADIUS * CONTACT_ANGLE.sin(),
            0.0,
        ],
        spheres: vec![
            SphereConfig { link: 0, center: [PROXIMAL / 2.0, 0.0, 0.0], radius: LINK_RADIUS, fingertip: false },
            SphereConfig { link: 1, center: [0.02, 0.0, 0.0], radius: LINK_RADIUS, fingertip: false },
            SphereConfig { link: 1, center: [DISTAL, 0.0, 0.0], radius: TIP_RADIUS, fingertip: true },
        ],
    }
}

fn fixture_palm() -> PalmConfig {
    let rot = 4.0;
    PalmConfig {
        lower: [-1.0, -1.0, -1.0, -rot, -rot, -rot],
        upper: [1.0, 1.0, 1.0, rot, rot, rot],
        spheres: [[-0.02, 0.03, 0.0], [-0.02, -0.03, 0.0], [-0.02, 0.0, 0.0]]
            .iter()
            .map(|c| SphereConfig { link: 0, center: *c, radius: 0.025, fingertip: false })
            .collect(),
    }
}

/// Floating palm with two fingers on the +y side and an opposing thumb
/// (n = 12).
pub fn three_finger_config() -> HandConfig {
    use fixture::*;
    HandConfig {
        name: "three_finger".into(),
        palm: fixture_palm(),
        fingers: vec![
            fixture_finger("index", HALF_SPAN, FINGER_SPREAD),
            fixture_finger("middle", HALF_SPAN, -FINGER_SPREAD),
            fixture_finger("thumb", -HALF_SPAN, 0.0),
        ],
    }
}

/// Floating palm with two opposing finger pairs (n = 14).
pub fn four_finger_config() -> HandConfig {
    use fixture::*;
    HandConfig {
        name: "four_finger".into(),
        palm: fixture_palm(),
        fingers: vec![
            fixture_finger("index", HALF_SPAN, FINGER_SPREAD),
            fixture_finger("middle", HALF_SPAN, -FINGER_SPREAD),
            fixture_finger("thumb", -HALF_SPAN, FINGER_SPREAD),
            fixture_finger("opposed", -HALF_SPAN, -FINGER_SPREAD),
        ],
    }
}

pub fn three_finger_hand() -> HandModel {
    HandModel::from_config(&three_finger_config()).expect("built-in hand is valid")
}

pub fn four_finger_hand() -> HandModel {
    HandModel::from_config(&four_finger_config()).expect("built-in hand is valid")
}
