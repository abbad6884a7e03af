//! Contact force allocation and the pose-error wrench.
//!
//! Forces are found by least squares on the wrench balance `G F = −w_des`
//! subject to pyramidal friction cones, a minimum normal force and optional
//! joint-torque bounds. Each contact force is expressed in its contact frame
//! as `(Fᵗ¹, Fᵗ², Fⁿ)`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};

use crate::qp::{solve_qp, QpProblem, QpStatus};
use crate::{GraspError, Result};

pub const DEFAULT_MIN_NORMAL_FORCE: f64 = 1.0;
pub const LIGHT_OBJECT_MIN_NORMAL_FORCE: f64 = 0.25;
pub const LIGHT_OBJECT_MASS: f64 = 0.01;

/// Minimum normal force for an object of the given mass (kg).
pub fn default_min_normal_force(mass: f64) -> f64 {
    if mass < LIGHT_OBJECT_MASS {
        LIGHT_OBJECT_MIN_NORMAL_FORCE
    } else {
        DEFAULT_MIN_NORMAL_FORCE
    }
}

/// Facet rows `Λ` of the friction pyramid inscribed in the cone of
/// coefficient `mu`: `Λ F ⪯ 0` for `F = (Fᵗ¹, Fᵗ², Fⁿ)`.
pub fn pyramid_matrix(mu: f64, sides: usize) -> DMatrix<f64> {
    let half = std::f64::consts::PI / sides as f64;
    let mu_facet = mu * half.cos();
    DMatrix::from_fn(sides, 3, |j, c| {
        let phi = 2.0 * half * j as f64 + half;
        match c {
            0 => phi.cos(),
            1 => phi.sin(),
            _ => -mu_facet,
        }
    })
}

/// Joint torques `τ = τ₀ + T F` bounded by `[lower, upper]`.
#[derive(Debug, Clone)]
pub struct TorqueLimits {
    pub map: DMatrix<f64>,
    pub baseline: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl TorqueLimits {
    /// Torque map `T = −[J₁ᵀR₁ … J_kᵀR_k]` from contact point Jacobians and
    /// contact frame rotations.
    pub fn from_contacts(
        jacobians: &[DMatrix<f64>],
        rotations: &[Matrix3<f64>],
        baseline: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Self {
        let nj = baseline.len();
        let mut map = DMatrix::zeros(nj, 3 * jacobians.len());
        for (i, (j, r)) in jacobians.iter().zip(rotations).enumerate() {
            let block = -(j.transpose() * r);
            map.view_mut((0, 3 * i), (nj, 3)).copy_from(&block);
        }
        Self { map, baseline, lower, upper }
    }
}

#[derive(Debug, Clone)]
pub struct AllocationProblem {
    /// Grasp map (6 × 3n_c).
    pub grasp_map: DMatrix<f64>,
    pub desired_wrench: Vector6<f64>,
    pub mu: f64,
    pub sides: usize,
    pub min_normal_force: f64,
    pub torque: Option<TorqueLimits>,
}

#[derive(Debug, Clone)]
pub struct Allocation {
    /// Stacked contact-frame forces.
    pub forces: DVector<f64>,
    /// `G F + w_des`.
    pub residual_wrench: Vector6<f64>,
}

impl Allocation {
    pub fn contact_force(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.forces[3 * i], self.forces[3 * i + 1], self.forces[3 * i + 2])
    }
}

pub fn allocate_forces(problem: &AllocationProblem) -> Result<Allocation> {
    let g = &problem.grasp_map;
    let k = g.ncols() / 3;
    let n = 3 * k;
    let p = g.transpose() * g * 2.0;
    let q = g.transpose() * problem.desired_wrench * 2.0;

    let lambda = pyramid_matrix(problem.mu, problem.sides);
    let torque_rows = problem.torque.as_ref().map_or(0, |t| 2 * t.baseline.len());
    let rows = k * (problem.sides + 1) + torque_rows;
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    let mut r = 0;
    for i in 0..k {
        a.view_mut((r, 3 * i), (problem.sides, 3)).copy_from(&lambda);
        r += problem.sides;
        a[(r, 3 * i + 2)] = -1.0;
        b[r] = -problem.min_normal_force;
        r += 1;
    }
    if let Some(t) = &problem.torque {
        let nj = t.baseline.len();
        a.view_mut((r, 0), (nj, n)).copy_from(&t.map);
        b.rows_mut(r, nj).copy_from(&(&t.upper - &t.baseline));
        r += nj;
        a.view_mut((r, 0), (nj, n)).copy_from(&(-&t.map));
        b.rows_mut(r, nj).copy_from(&(&t.baseline - &t.lower));
    }
    let sol = solve_qp(&QpProblem::new(p, q).with_inequalities(a, b));
    if sol.status != QpStatus::Optimal {
        return Err(GraspError::QpInfeasible);
    }
    let residual = g * &sol.x + problem.desired_wrench;
    Ok(Allocation { forces: sol.x, residual_wrench: Vector6::from_iterator(residual.iter().copied()) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseGains {
    pub k_p: f64,
    pub k_d: f64,
    pub k_r: f64,
}

impl Default for PoseGains {
    fn default() -> Self {
        Self { k_p: 50.0, k_d: 5.0, k_r: 50.0 }
    }
}

/// Rotation error `(½(R_desᵀR − RᵀR_des))^∨`.
pub fn rotation_error(r: &Matrix3<f64>, r_des: &Matrix3<f64>) -> Vector3<f64> {
    let m = (r_des.transpose() * r - r.transpose() * r_des) * 0.5;
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Corrective wrench `[−k_p(p − p_des) − k_d ṗ; −k_R e_R]`. The angular
/// velocity damping term is not included.
pub fn pose_error_wrench(
    p: &Vector3<f64>,
    p_des: &Vector3<f64>,
    p_dot: &Vector3<f64>,
    r: &Matrix3<f64>,
    r_des: &Matrix3<f64>,
    gains: &PoseGains,
) -> Vector6<f64> {
    let force = -(p - p_des) * gains.k_p - p_dot * gains.k_d;
    let torque = -rotation_error(r, r_des) * gains.k_r;
    Vector6::new(force.x, force.y, force.z, torque.x, torque.y, torque.z)
}
