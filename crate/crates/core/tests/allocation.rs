mod common;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use grasp_core::allocation::{
    allocate_forces, default_min_normal_force, pose_error_wrench, pyramid_matrix, AllocationProblem, PoseGains,
    TorqueLimits,
};
use grasp_core::geometry::Obb;
use grasp_core::sampler::choose_axis;
use grasp_core::wrench::{grasp_map, ContactFrame};
use grasp_core::GraspError;

const G: f64 = 9.81;

/// Two contacts at `(±r, 0, 0)` on a sphere centered at the origin.
fn antipodal(r: f64) -> DMatrix<f64> {
    let contacts: Vec<ContactFrame> = [1.0, -1.0]
        .iter()
        .map(|s| {
            let p = Vector3::new(s * r, 0.0, 0.0);
            ContactFrame::from_gradient(p, &p.normalize()).unwrap()
        })
        .collect();
    grasp_map(&contacts, &Vector3::zeros(), 1.0)
}

fn gravity(mass: f64) -> Vector6<f64> {
    Vector6::new(0.0, 0.0, -mass * G, 0.0, 0.0, 0.0)
}

fn inside_pyramids(forces: &DVector<f64>, mu: f64, sides: usize, f_min: f64, tol: f64) -> bool {
    let lam = pyramid_matrix(mu, sides);
    (0..forces.len() / 3).all(|i| {
        let f = forces.rows(3 * i, 3);
        (&lam * f).max() <= tol && f[2] >= f_min - tol
    })
}

#[test]
fn antipodal_gravity_is_symmetric_and_balanced() {
    let mass = 0.1;
    let problem = AllocationProblem {
        grasp_map: antipodal(0.05),
        desired_wrench: gravity(mass),
        mu: 0.7,
        sides: 4,
        min_normal_force: default_min_normal_force(mass),
        torque: None,
    };
    let a = allocate_forces(&problem).unwrap();
    assert!(inside_pyramids(&a.forces, 0.7, 4, 1.0, 1e-6));
    let (f1, f2) = (a.contact_force(0), a.contact_force(1));
    assert!((f1.z - f2.z).abs() <= 1e-6);
    let world = &problem.grasp_map * &a.forces;
    assert!((world[2] - mass * G).abs() <= 1e-6, "{}", world[2]);
    assert!(a.residual_wrench.amax() <= 1e-6);
}

#[test]
fn internal_force_sits_at_the_minimum() {
    let problem = AllocationProblem {
        grasp_map: antipodal(0.05),
        desired_wrench: Vector6::zeros(),
        mu: 0.7,
        sides: 4,
        min_normal_force: 1.0,
        torque: None,
    };
    let a = allocate_forces(&problem).unwrap();
    for i in 0..2 {
        assert!((a.contact_force(i).z - 1.0).abs() <= 1e-6, "{}", a.contact_force(i));
        assert!(a.contact_force(i).xy().norm() <= 1e-6);
    }
}

#[test]
fn heavy_objects_slip_out_of_weak_grasps() {
    // Friction cannot hold 10 kg with normal forces capped by torque limits.
    let g = antipodal(0.05);
    let torque = TorqueLimits {
        map: DMatrix::from_fn(2, 6, |i, j| if j == 3 * i + 2 { 1.0 } else { 0.0 }),
        baseline: DVector::zeros(2),
        lower: DVector::from_element(2, -2.0),
        upper: DVector::from_element(2, 2.0),
    };
    let problem = AllocationProblem {
        grasp_map: g,
        desired_wrench: gravity(10.0),
        mu: 0.7,
        sides: 4,
        min_normal_force: 1.0,
        torque: Some(torque.clone()),
    };
    let a = allocate_forces(&problem).unwrap();
    assert!(a.residual_wrench.norm() > 1.0);
    // A minimum normal force above the torque bound is infeasible outright.
    let problem = AllocationProblem { min_normal_force: 3.0, ..problem };
    assert!(matches!(allocate_forces(&problem), Err(GraspError::QpInfeasible)));
}

#[test]
fn pyramid_feasible_forces_lie_in_the_exact_cone() {
    let mu = 0.6;
    for sides in [3, 4, 6, 8] {
        let lam = pyramid_matrix(mu, sides);
        let mut r = common::rng(sides as u64);
        for _ in 0..5_000 {
            let f = common::gaussian_matrix(&mut r, 3, 1).column(0).into_owned();
            if (&lam * &f).max() <= 0.0 {
                assert!(f.rows(0, 2).norm() <= mu * f[2] + 1e-12);
            }
        }
    }
}

#[test]
fn tabulated_pose_errors() {
    let g = PoseGains::default();
    let z = Vector3::zeros();
    let eye = Matrix3::identity();
    assert_eq!(pose_error_wrench(&z, &z, &z, &eye, &eye, &g), Vector6::zeros());
    let th = 0.3f64;
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), th).into_inner();
    let w = pose_error_wrench(&z, &z, &z, &rz, &eye, &g);
    assert_eq!(w, Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, -50.0 * th.sin()));
    let w = pose_error_wrench(&Vector3::new(0.01, 0.0, 0.0), &z, &z, &eye, &eye, &g);
    assert_eq!(w, Vector6::new(-0.5, 0.0, 0.0, 0.0, 0.0, 0.0));
}

#[test]
fn axis_frequencies_follow_side_lengths() {
    let obb = Obb { center: Vector3::zeros(), axes: Matrix3::identity(), half_extents: Vector3::new(0.15, 0.1, 0.05) };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        counts[choose_axis(&obb, &mut rng)] += 1;
    }
    for (c, expected) in counts.iter().zip([0.5, 1.0 / 3.0, 1.0 / 6.0]) {
        assert!((*c as f64 / n as f64 - expected).abs() < 0.01);
    }
}
