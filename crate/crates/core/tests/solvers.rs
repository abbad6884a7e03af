mod common;

use common::*;
use nalgebra::{DMatrix, DVector};

use grasp_core::qp::{solve_qp, QpProblem, QpStatus};
use grasp_core::sqp::{solve_sqp, ClosureNlp, NlpEval, SqpOptions, SqpStatus};

fn box_rows(n: usize, lo: f64, hi: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = DMatrix::zeros(2 * n, n);
    let mut b = DVector::zeros(2 * n);
    for i in 0..n {
        a[(i, i)] = 1.0;
        b[i] = hi;
        a[(n + i, i)] = -1.0;
        b[n + i] = -lo;
    }
    (a, b)
}

#[test]
fn box_qp_matches_projected_gradient() {
    for (seed, rank) in [(1u64, 12usize), (2, 12), (3, 7), (4, 4)] {
        let mut r = rng(seed);
        let f = gaussian_matrix(&mut r, rank, 12);
        let p = f.transpose() * &f + DMatrix::identity(12, 12) * 1e-3 * (rank == 12) as u8 as f64;
        let q = gaussian_matrix(&mut r, 12, 1).column(0) * 3.0;
        let (a, b) = box_rows(12, -1.0, 1.0);
        let prob = QpProblem::new(p.clone(), q.clone()).with_inequalities(a, b);
        let sol = solve_qp(&prob);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.lambda.iter().all(|&l| l >= 0.0));
        assert!(prob.kkt_residual(&sol.x, &sol.lambda, &sol.nu) <= 1e-7);
        let x_pg = projected_gradient_box_qp(&p, &q, &DVector::from_element(12, -1.0), &DVector::from_element(12, 1.0), 200_000);
        let diff = (prob.objective(&sol.x) - prob.objective(&x_pg)).abs();
        assert!(diff <= 1e-6, "seed {seed}: objective gap {diff:e}");
    }
}

#[test]
fn qp_unconstrained_and_single_bound() {
    let a = DVector::from_row_slice(&[1.0, -2.0, 0.5]);
    let prob = QpProblem::new(DMatrix::identity(3, 3) * 2.0, -&a * 2.0);
    assert!((solve_qp(&prob).x - &a).amax() < 1e-12);
    let prob = QpProblem::new(DMatrix::from_element(1, 1, 2.0), DVector::zeros(1))
        .with_inequalities(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, -1.0));
    let s = solve_qp(&prob);
    assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.lambda[0] - 2.0).abs() < 1e-12);
}

fn opts() -> SqpOptions {
    SqpOptions { max_iter: 300, ..Default::default() }
}

/// Value and gradient of a function of two variables.
type Fn2<'a> = &'a dyn Fn(f64, f64) -> (f64, [f64; 2]);

fn eval2(f: impl Fn(f64, f64) -> (f64, [f64; 2]), eq: &[Fn2], ineq: &[Fn2], x: &DVector<f64>) -> NlpEval {
    let (a, b) = (x[0], x[1]);
    let (fv, g) = f(a, b);
    let stack = |cs: &[Fn2]| {
        let mut v = DVector::zeros(cs.len());
        let mut j = DMatrix::zeros(cs.len(), 2);
        for (i, c) in cs.iter().enumerate() {
            let (ci, gi) = c(a, b);
            v[i] = ci;
            j[(i, 0)] = gi[0];
            j[(i, 1)] = gi[1];
        }
        (v, j)
    };
    let (c_eq, j_eq) = stack(eq);
    let (c_in, j_in) = stack(ineq);
    NlpEval { f: fv, grad: DVector::from_row_slice(&g), c_eq, j_eq, c_in, j_in }
}

/// Minimum of `f` over feasible grid points of the box, refined by zooming
/// into the best cell.
fn grid_oracle(f: impl Fn(f64, f64) -> f64, feasible: impl Fn(f64, f64) -> bool, lo0: [f64; 2], hi0: [f64; 2]) -> (f64, [f64; 2]) {
    let (mut lo, mut hi) = (lo0, hi0);
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for _ in 0..6 {
        let n = 400;
        for i in 0..=n {
            for j in 0..=n {
                let x = lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64;
                let y = lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64;
                if feasible(x, y) {
                    let v = f(x, y);
                    if v < best.0 {
                        best = (v, [x, y]);
                    }
                }
            }
        }
        let w = [(hi[0] - lo[0]) / 20.0, (hi[1] - lo[1]) / 20.0];
        lo = [(best.1[0] - w[0]).max(lo0[0]), (best.1[1] - w[1]).max(lo0[1])];
        hi = [(best.1[0] + w[0]).min(hi0[0]), (best.1[1] + w[1]).min(hi0[1])];
    }
    best
}

fn bounds(lo: f64, hi: f64) -> (DVector<f64>, DVector<f64>) {
    (DVector::from_element(2, lo), DVector::from_element(2, hi))
}

#[test]
fn equality_qp_is_exact() {
    let (lower, upper) = bounds(-10.0, 10.0);
    let mut nlp = ClosureNlp {
        lower,
        upper,
        eval: |x: &DVector<f64>| {
            eval2(|a, b| (a * a + b * b, [2.0 * a, 2.0 * b]), &[&|a, b| (a + b - 1.0, [1.0, 1.0])], &[], x)
        },
    };
    let r = solve_sqp(&mut nlp, &DVector::from_row_slice(&[3.0, -1.0]), &opts());
    assert_eq!(r.status, SqpStatus::Converged);
    assert!((r.x[0] - 0.5).abs() < 1e-9 && (r.x[1] - 0.5).abs() < 1e-9);
}

#[test]
fn linear_objective_on_circle() {
    let (lower, upper) = bounds(-2.0, 2.0);
    let mut nlp = ClosureNlp {
        lower,
        upper,
        eval: |x: &DVector<f64>| eval2(|a, b| (a + b, [1.0, 1.0]), &[&|a, b| (a * a + b * b - 1.0, [2.0 * a, 2.0 * b])], &[], x),
    };
    let r = solve_sqp(&mut nlp, &DVector::from_row_slice(&[0.5, 0.1]), &opts());
    // One-dimensional parametrization of the feasible set.
    let oracle = (0..100_000)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 100_000.0;
            t.cos() + t.sin()
        })
        .fold(f64::INFINITY, f64::min);
    assert!((r.f - oracle).abs() < 1e-6, "{} vs {oracle}", r.f);
}

#[test]
fn parabola_and_halfplane() {
    // min (x−2)² + (y−1)²  s.t.  y − x² ≥ 0, 2 − x − y ≥ 0.
    let f = |a: f64, b: f64| (a - 2.0).powi(2) + (b - 1.0).powi(2);
    let (lower, upper) = bounds(-5.0, 5.0);
    let mut nlp = ClosureNlp {
        lower,
        upper,
        eval: |x: &DVector<f64>| {
            eval2(
                |a, b| (f(a, b), [2.0 * (a - 2.0), 2.0 * (b - 1.0)]),
                &[],
                &[&|a, b| (b - a * a, [-2.0 * a, 1.0]), &|a, b| (2.0 - a - b, [-1.0, -1.0])],
                x,
            )
        },
    };
    let r = solve_sqp(&mut nlp, &DVector::from_row_slice(&[-1.0, 3.0]), &opts());
    let (oracle, _) = grid_oracle(f, |a, b| b - a * a >= -1e-9 && 2.0 - a - b >= -1e-9, [-5.0, -5.0], [5.0, 5.0]);
    assert!(r.violation < 1e-8);
    assert!((r.f - oracle).abs() < 1e-5, "{} vs {oracle}", r.f);
}

#[test]
fn shifted_quadratic_with_linear_cut() {
    // min 0.01x² + y² − 100  s.t.  10x − y − 10 ≥ 0, 2 ≤ x ≤ 50, −50 ≤ y ≤ 50.
    let f = |a: f64, b: f64| 0.01 * a * a + b * b - 100.0;
    let mut nlp = ClosureNlp {
        lower: DVector::from_row_slice(&[2.0, -50.0]),
        upper: DVector::from_row_slice(&[50.0, 50.0]),
        eval: |x: &DVector<f64>| eval2(|a, b| (f(a, b), [0.02 * a, 2.0 * b]), &[], &[&|a, b| (10.0 * a - b - 10.0, [10.0, -1.0])], x),
    };
    let r = solve_sqp(&mut nlp, &DVector::from_row_slice(&[10.0, 10.0]), &opts());
    let (oracle, _) = grid_oracle(f, |a, b| 10.0 * a - b - 10.0 >= -1e-9, [2.0, -50.0], [50.0, 50.0]);
    assert!((r.f - oracle).abs() < 1e-5, "{} vs {oracle}", r.f);
}

#[test]
fn rosenbrock_in_a_disk() {
    // min (1−x)² + 100(y − x²)²  s.t.  1.5 − x² − y² ≥ 0.
    let f = |a: f64, b: f64| (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
    let (lower, upper) = bounds(-2.0, 2.0);
    let mut nlp = ClosureNlp {
        lower,
        upper,
        eval: |x: &DVector<f64>| {
            eval2(
                |a, b| (f(a, b), [-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]),
                &[],
                &[&|a, b| (1.5 - a * a - b * b, [-2.0 * a, -2.0 * b])],
                x,
            )
        },
    };
    let r = solve_sqp(&mut nlp, &DVector::from_row_slice(&[-1.0, 0.5]), &opts());
    let (oracle, _) = grid_oracle(f, |a, b| 1.5 - a * a - b * b >= -1e-9, [-2.0, -2.0], [2.0, 2.0]);
    assert!(r.violation < 1e-8);
    assert!((r.f - oracle).abs() < 1e-5, "{} vs {oracle}", r.f);
}

#[test]
fn bilinear_objective_on_an_ellipse() {
    // min −xy  s.t.  8 − x² − 4y² ≥ 0, x, y ∈ [0, 3].
    let f = |a: f64, b: f64| -a * b;
    let (lower, upper) = bounds(0.0, 3.0);
    let mut nlp = ClosureNlp {
        lower,
        upper,
        eval: |x: &DVector<f64>| eval2(|a, b| (f(a, b), [-b, -a]), &[], &[&|a, b| (8.0 - a * a - 4.0 * b * b, [-2.0 * a, -8.0 * b])], x),
    };
    let r = solve_sqp(&mut nlp, &DVector::from_row_slice(&[0.5, 0.5]), &opts());
    let (oracle, _) = grid_oracle(f, |a, b| 8.0 - a * a - 4.0 * b * b >= -1e-9, [0.0, 0.0], [3.0, 3.0]);
    assert!((r.f - oracle).abs() < 1e-5, "{} vs {oracle}", r.f);
}
