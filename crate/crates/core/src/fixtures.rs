//! Desk-scale objects resting on the table `z = 0`, used by tests, benches
//! and the shipped example configs.

use nalgebra::{Isometry3, Vector3};

use crate::geometry::{ObjectModel, Primitive};

pub use crate::kinematics::{four_finger_hand, three_finger_hand};

pub const MASS: f64 = 0.1;
pub const MU: f64 = 0.7;

/// Sphere of radius 5 cm.
pub fn sphere() -> ObjectModel {
    ObjectModel::sphere(0.05, Vector3::new(0.0, 0.0, 0.05), MASS, MU).expect("valid fixture")
}

/// Box of size 6 × 8 × 10 cm.
pub fn cuboid() -> ObjectModel {
    ObjectModel::analytic(Primitive::Box { half_extents: [0.03, 0.04, 0.05] }, Isometry3::translation(0.0, 0.0, 0.05), MASS, MU)
        .expect("valid fixture")
}

/// Cylinder of radius 3 cm and height 10 cm, standing upright.
pub fn cylinder() -> ObjectModel {
    ObjectModel::analytic(
        Primitive::Cylinder { radius: 0.03, half_height: 0.05 },
        Isometry3::translation(0.0, 0.0, 0.05),
        MASS,
        MU,
    )
    .expect("valid fixture")
}
