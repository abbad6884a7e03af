//! Closed-form signed distance fields in the object frame.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

type V3 = Vector3<f64>;
type M3 = Matrix3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    Sphere { radius: f64 },
    /// Axis-aligned box centered at the origin.
    Box { half_extents: [f64; 3] },
    /// Cylinder along the local z axis, centered at the origin.
    Cylinder { radius: f64, half_height: f64 },
}

/// Value, gradient and Hessian of an SDF at one point.
#[derive(Debug, Clone, Copy)]
pub struct Eval {
    pub value: f64,
    pub gradient: V3,
    pub hessian: M3,
}

fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

impl Primitive {
    pub fn eval(&self, p: &V3) -> Eval {
        match *self {
            Primitive::Sphere { radius } => sphere(radius, p),
            Primitive::Box { half_extents } => box_sdf(&V3::from(half_extents), p),
            Primitive::Cylinder { radius, half_height } => cylinder(radius, half_height, p),
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Primitive::Sphere { radius } => radius,
            Primitive::Box { half_extents } => V3::from(half_extents).norm(),
            Primitive::Cylinder { radius, half_height } => radius.hypot(half_height),
        }
    }

    /// Half-extents of the tight box in the local frame.
    pub fn half_extents(&self) -> V3 {
        match *self {
            Primitive::Sphere { radius } => V3::repeat(radius),
            Primitive::Box { half_extents } => V3::from(half_extents),
            Primitive::Cylinder { radius, half_height } => V3::new(radius, radius, half_height),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            Primitive::Sphere { radius } => radius > 0.0,
            Primitive::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0),
            Primitive::Cylinder { radius, half_height } => radius > 0.0 && half_height > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("primitive dimensions must be positive: {self:?}"))
        }
    }
}

fn sphere(r: f64, p: &V3) -> Eval {
    let len = p.norm();
    if len == 0.0 {
        return Eval { value: -r, gradient: V3::zeros(), hessian: M3::zeros() };
    }
    let u = p / len;
    Eval { value: len - r, gradient: u, hessian: (M3::identity() - u * u.transpose()) / len }
}

fn box_sdf(h: &V3, p: &V3) -> Eval {
    let q = p.abs() - h;
    let outside = q.max() > 0.0;
    if outside {
        let v = q.map(|x| x.max(0.0));
        let len = v.norm();
        let mut grad = V3::zeros();
        for k in 0..3 {
            grad[k] = sgn(p[k]) * v[k] / len;
        }
        let mut hess = M3::zeros();
        let active: Vec<usize> = (0..3).filter(|&k| q[k] > 0.0).collect();
        if active.len() > 1 {
            for &i in &active {
                for &j in &active {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    hess[(i, j)] = (delta - grad[i] * grad[j]) / len;
                }
            }
        }
        Eval { value: len, gradient: grad, hessian: hess }
    } else {
        let k = q.imax();
        let mut grad = V3::zeros();
        grad[k] = sgn(p[k]);
        Eval { value: q[k], gradient: grad, hessian: M3::zeros() }
    }
}

fn cylinder(r: f64, h: f64, p: &V3) -> Eval {
    let rho = p.x.hypot(p.y);
    let u = if rho > 0.0 { Vector2::new(p.x, p.y) / rho } else { Vector2::new(1.0, 0.0) };
    let sz = sgn(p.z);
    let dr = rho - r;
    let dz = p.z.abs() - h;
    // Hessian of the radial distance ρ.
    let radial_hess = |scale: f64| {
        let mut m = M3::zeros();
        if rho > 0.0 {
            let block = (Matrix2::identity() - u * u.transpose()) * (scale / rho);
            m.fixed_view_mut::<2, 2>(0, 0).copy_from(&block);
        }
        m
    };
    let side = V3::new(u.x, u.y, 0.0);
    let cap = V3::new(0.0, 0.0, sz);
    if dr > 0.0 && dz > 0.0 {
        let s = dr.hypot(dz);
        let (a, b) = (dr / s, dz / s);
        let grad = side * a + cap * b;
        // Jᵀ(I − v̂v̂ᵀ)J/s with J = [side; cap], plus a·∇²ρ.
        let j1 = side;
        let j2 = cap;
        let proj = |x: &V3, y: &V3| x * y.transpose();
        let hess = (proj(&j1, &j1) * (1.0 - a * a) - (proj(&j1, &j2) + proj(&j2, &j1)) * (a * b)
            + proj(&j2, &j2) * (1.0 - b * b))
            / s
            + radial_hess(a);
        Eval { value: s, gradient: grad, hessian: hess }
    } else if dr > 0.0 {
        Eval { value: dr, gradient: side, hessian: radial_hess(1.0) }
    } else if dz > 0.0 {
        Eval { value: dz, gradient: cap, hessian: M3::zeros() }
    } else if dr >= dz {
        Eval { value: dr, gradient: side, hessian: radial_hess(1.0) }
    } else {
        Eval { value: dz, gradient: cap, hessian: M3::zeros() }
    }
}
