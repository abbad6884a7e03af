//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver internals it is used to check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use grasp_core::kinematics::HandModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample::<f64, _>(StandardNormal))
}

pub fn unit_vector(r: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| r.sample::<f64, _>(StandardNormal));
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

/// `±e_i` in R⁶.
pub fn cross_polytope() -> DMatrix<f64> {
    let mut w = DMatrix::zeros(6, 12);
    for i in 0..6 {
        w[(i, 2 * i)] = 1.0;
        w[(i, 2 * i + 1)] = -1.0;
    }
    w
}

/// Random points re-centered so their centroid sits at the origin.
pub fn centered_points(r: &mut ChaCha8Rng, d: usize, m: usize) -> DMatrix<f64> {
    let mut w = gaussian_matrix(r, d, m);
    let mean = w.column_mean();
    for mut c in w.column_iter_mut() {
        c -= &mean;
    }
    w
}

fn combinations(m: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == m - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Min-weight value by brute-force vertex enumeration.
///
/// In `β = α − ℓ1 ⪰ 0` the program reads `max ℓ` over `W β + ℓ W1 = 0`,
/// `1ᵀβ + m ℓ = 1`. Every vertex has `m − d` zero entries of `β`; the
/// remaining `d` entries and `ℓ` come from a square solve.
pub fn vertex_enumeration_min_weight(w: &DMatrix<f64>) -> f64 {
    let d = w.nrows();
    let m = w.ncols();
    let row_sums = w.column_sum();
    let mut best = f64::NEG_INFINITY;
    combinations(m, d, &mut |support| {
        let mut a = DMatrix::zeros(d + 1, d + 1);
        for (c, &j) in support.iter().enumerate() {
            a.view_mut((0, c), (d, 1)).copy_from(&w.column(j));
            a[(d, c)] = 1.0;
        }
        a.view_mut((0, d), (d, 1)).copy_from(&row_sums);
        a[(d, d)] = m as f64;
        let mut b = DVector::zeros(d + 1);
        b[d] = 1.0;
        let lu = a.lu();
        if lu.u().diagonal().iter().any(|v| v.abs() < 1e-11) {
            return;
        }
        if let Some(z) = lu.solve(&b) {
            if z.rows(0, d).iter().all(|&v| v >= -1e-10) && z[d] > best {
                best = z[d];
            }
        }
    });
    best
}

/// `D_q ℓ*` from the full square linear system obtained by differentiating
/// stationarity, complementarity and the equalities of the min-weight LP.
///
/// Unknowns are `(dx, dλ, dν)` with `x = (α, ℓ)`:
///
/// ```text
/// [ 0            A_inᵀ        A_eqᵀ ] [dx]     [ (∂A_eq)ᵀ ν   ]
/// [ diag(λ)A_in  diag(A_in x) 0     ] [dλ] = − [ 0            ]
/// [ A_eq         0            0     ] [dν]     [ (∂A_eq) x    ]
/// ```
pub fn full_kkt_gradient(
    w: &DMatrix<f64>,
    dw: &[DMatrix<f64>],
    alpha: &DVector<f64>,
    ell: f64,
    lambda: &DVector<f64>,
    nu: &DVector<f64>,
) -> DVector<f64> {
    let d = w.nrows();
    let m = w.ncols();
    let nx = m + 1;
    let ne = d + 1;
    let size = nx + m + ne;
    let mut a_eq = DMatrix::zeros(ne, nx);
    a_eq.view_mut((0, 0), (d, m)).copy_from(w);
    for j in 0..m {
        a_eq[(d, j)] = 1.0;
    }
    let mut a_in = DMatrix::zeros(m, nx);
    for i in 0..m {
        a_in[(i, i)] = -1.0;
        a_in[(i, m)] = 1.0;
    }
    let mut x = DVector::zeros(nx);
    x.rows_mut(0, m).copy_from(alpha);
    x[m] = ell;
    let slack = &a_in * &x;

    let mut k = DMatrix::zeros(size, size);
    k.view_mut((0, nx), (nx, m)).copy_from(&a_in.transpose());
    k.view_mut((0, nx + m), (nx, ne)).copy_from(&a_eq.transpose());
    for i in 0..m {
        for c in 0..nx {
            k[(nx + i, c)] = lambda[i] * a_in[(i, c)];
        }
        k[(nx + i, nx + i)] = slack[i];
    }
    k.view_mut((nx + m, 0), (ne, nx)).copy_from(&a_eq);

    let n = dw.len();
    let mut rhs = DMatrix::zeros(size, n);
    for (q, dwq) in dw.iter().enumerate() {
        let mut da = DMatrix::zeros(ne, nx);
        da.view_mut((0, 0), (d, m)).copy_from(dwq);
        let h1 = da.transpose() * nu;
        let h3 = &da * &x;
        rhs.view_mut((0, q), (nx, 1)).copy_from(&h1);
        rhs.view_mut((nx + m, q), (ne, 1)).copy_from(&h3);
    }
    let sol = k.lu().solve(&(-rhs)).expect("non-singular KKT system");
    sol.row(m).transpose()
}

/// Smallest support value `max_i W_i·u` over `n` random unit directions.
pub fn sampled_support_min(points: &DMatrix<f64>, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = points.nrows();
    let pt = points.transpose();
    let mut best = f64::INFINITY;
    for _ in 0..n {
        let u = unit_vector(&mut r, d);
        best = best.min((&pt * &u).max());
    }
    best.max(0.0)
}

/// Rodrigues rotation as a homogeneous transform.
fn rotation_h(axis: &Vector3<f64>, angle: f64) -> Matrix4<f64> {
    let a = axis.normalize();
    let k = Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0);
    let r = Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos());
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    t
}

fn translation_h(v: &Vector3<f64>) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(v);
    t
}

/// Fingertip contact point by chaining 4×4 transforms: palm, finger base,
/// then `Trans(offset) · Rot(axis, θ)` per joint.
pub fn homogeneous_fk(hand: &HandModel, q: &DVector<f64>, finger: usize) -> Vector3<f64> {
    let w = Vector3::new(q[3], q[4], q[5]);
    let angle = w.norm();
    let palm_rot = if angle > 0.0 { rotation_h(&(w / angle), angle) } else { Matrix4::identity() };
    let mut t = translation_h(&Vector3::new(q[0], q[1], q[2])) * palm_rot;
    let f = &hand.fingers[finger];
    t *= f.base.to_homogeneous();
    let start = hand.joint_range(finger).start;
    for (i, j) in f.joints.iter().enumerate() {
        t = t * translation_h(&j.offset) * rotation_h(&j.axis, q[start + i]);
    }
    let p = t * f.contact_offset.push(1.0);
    Vector3::new(p.x, p.y, p.z)
}

/// Central-difference Jacobian of a vector function.
pub fn fd_jacobian(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let f0 = f(x);
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    for k in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        jac.set_column(k, &((f(&xp) - f(&xm)) / (2.0 * h)));
    }
    jac
}

pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    fd_jacobian(|y| DVector::from_element(1, f(y)), x, h).row(0).transpose()
}

/// Projected gradient descent with a fixed `1/L` step for
/// `min ½xᵀPx + qᵀx` on a box.
pub fn projected_gradient_box_qp(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    iters: usize,
) -> DVector<f64> {
    let l = p.symmetric_eigenvalues().max().max(1e-12);
    let mut x = DVector::zeros(q.len());
    for _ in 0..iters {
        let g = p * &x + q;
        x -= g / l;
        for i in 0..x.len() {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    }
    x
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}
