//! Sequential quadratic programming for small dense problems
//!
//! ```text
//! minimize f(x)  s.t.  c_eq(x) = 0,  c_in(x) ⪰ 0,  lb ⪯ x ⪯ ub
//! ```
//!
//! Each iteration solves a QP with a damped-BFGS Hessian model and the
//! linearized constraints. When the linearization is inconsistent, an
//! elastic variable `ξ ∈ [0, 1]` scales back the constraint targets so that
//! `d = 0, ξ = 1` is always feasible. Steps are accepted on an L1 exact
//! penalty merit function with a non-monotone Armijo test against the
//! largest of the last few accepted merit values.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::qp::{solve_qp, QpProblem, QpStatus};
use crate::Result;

#[derive(Debug, Clone)]
pub struct NlpEval {
    pub f: f64,
    pub grad: DVector<f64>,
    pub c_eq: DVector<f64>,
    pub j_eq: DMatrix<f64>,
    /// Inequalities in `c ⪰ 0` form.
    pub c_in: DVector<f64>,
    pub j_in: DMatrix<f64>,
}

impl NlpEval {
    /// Largest equality residual or inequality violation.
    pub fn violation(&self) -> f64 {
        let eq = self.c_eq.amax();
        let ineq = self.c_in.iter().fold(0.0f64, |a, &c| a.max(-c));
        eq.max(ineq)
    }

    fn l1_violation(&self) -> f64 {
        self.c_eq.iter().map(|c| c.abs()).sum::<f64>() + self.c_in.iter().map(|c| (-c).max(0.0)).sum::<f64>()
    }
}

pub trait Nlp {
    fn dim(&self) -> usize;
    fn lower(&self) -> DVector<f64>;
    fn upper(&self) -> DVector<f64>;
    fn evaluate(&mut self, x: &DVector<f64>) -> Result<NlpEval>;
    /// Maps `x` to an equivalent representative after an accepted step.
    /// Returning `true` signals a discontinuous change that invalidates the
    /// curvature model.
    fn normalize(&self, _x: &mut DVector<f64>) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct SqpOptions {
    pub max_iter: usize,
    pub time_limit: Duration,
    /// Stop when the step infinity norm falls below this.
    pub step_tol: f64,
    /// Stop when the merit decrease is relatively below this at a feasible point.
    pub merit_tol: f64,
    pub feas_tol: f64,
    /// Per-coordinate step bound (trust box).
    pub max_step: f64,
    /// Number of past merit values in the non-monotone reference.
    pub memory: usize,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            time_limit: Duration::from_secs(10),
            step_tol: 1e-9,
            merit_tol: 1e-10,
            feas_tol: 1e-8,
            max_step: f64::INFINITY,
            memory: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SqpStatus {
    Converged,
    MaxIter,
    Timeout,
    LineSearchFailure,
    QpFailure,
    EvaluationError,
}

#[derive(Debug, Clone)]
pub struct SqpResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub violation: f64,
    pub status: SqpStatus,
    pub iterations: usize,
    /// Merit values at accepted iterates.
    pub merit_history: Vec<f64>,
}

const ARMIJO: f64 = 1e-4;
const MIN_ALPHA: f64 = 1e-6;
const ELASTIC_WEIGHT: f64 = 1e4;

struct Subproblem {
    d: DVector<f64>,
    lambda_in: DVector<f64>,
    nu_eq: DVector<f64>,
    elastic: bool,
}

fn solve_subproblem(b: &DMatrix<f64>, ev: &NlpEval, lo: &DVector<f64>, hi: &DVector<f64>) -> Option<Subproblem> {
    let n = ev.grad.len();
    let me = ev.c_eq.len();
    let mi = ev.c_in.len();
    let build = |elastic: bool| {
        let nv = if elastic { n + 1 } else { n };
        let mut p = DMatrix::zeros(nv, nv);
        p.view_mut((0, 0), (n, n)).copy_from(b);
        let mut q = DVector::zeros(nv);
        q.rows_mut(0, n).copy_from(&ev.grad);
        let scale = b.amax().max(1.0);
        if elastic {
            p[(n, n)] = ELASTIC_WEIGHT * scale;
            q[n] = ELASTIC_WEIGHT * scale;
        }
        // J_eq d + (1 − ξ) c_eq = 0.
        let mut a_eq = DMatrix::zeros(me, nv);
        a_eq.view_mut((0, 0), (me, n)).copy_from(&ev.j_eq);
        if elastic {
            a_eq.column_mut(n).copy_from(&(-&ev.c_eq));
        }
        let b_eq = -&ev.c_eq;
        // −J_in d ≤ c_in − ξ min(c_in, 0), then box rows.
        let rows = mi + 2 * n + if elastic { 2 } else { 0 };
        let mut a_in = DMatrix::zeros(rows, nv);
        let mut b_in = DVector::zeros(rows);
        a_in.view_mut((0, 0), (mi, n)).copy_from(&(-&ev.j_in));
        for i in 0..mi {
            b_in[i] = ev.c_in[i];
            if elastic {
                // (1 − ξ) applies only to violated constraints.
                let viol = ev.c_in[i].min(0.0);
                b_in[i] = 0.0f64.max(ev.c_in[i]) + viol;
                a_in[(i, n)] = viol;
            }
        }
        for k in 0..n {
            a_in[(mi + k, k)] = 1.0;
            b_in[mi + k] = hi[k];
            a_in[(mi + n + k, k)] = -1.0;
            b_in[mi + n + k] = -lo[k];
        }
        if elastic {
            a_in[(mi + 2 * n, n)] = 1.0;
            b_in[mi + 2 * n] = 1.0;
            a_in[(mi + 2 * n + 1, n)] = -1.0;
            b_in[mi + 2 * n + 1] = 0.0;
        }
        QpProblem::new(p, q).with_equalities(a_eq, b_eq).with_inequalities(a_in, b_in)
    };
    let plain = solve_qp(&build(false));
    if plain.status == QpStatus::Optimal {
        return Some(Subproblem {
            d: plain.x,
            lambda_in: plain.lambda.rows(0, mi).into_owned(),
            nu_eq: plain.nu,
            elastic: false,
        });
    }
    let relaxed = solve_qp(&build(true));
    if relaxed.status != QpStatus::Optimal {
        return None;
    }
    Some(Subproblem {
        d: relaxed.x.rows(0, n).into_owned(),
        lambda_in: relaxed.lambda.rows(0, mi).into_owned(),
        nu_eq: relaxed.nu,
        elastic: true,
    })
}

fn lagrangian_grad(ev: &NlpEval, lambda: &DVector<f64>, nu: &DVector<f64>) -> DVector<f64> {
    // QP stationarity: B d + g − J_inᵀλ + J_eqᵀν = 0.
    &ev.grad - ev.j_in.transpose() * lambda + ev.j_eq.transpose() * nu
}

pub fn solve_sqp<P: Nlp>(nlp: &mut P, x0: &DVector<f64>, opts: &SqpOptions) -> SqpResult {
    let start = Instant::now();
    let n = nlp.dim();
    let lb = nlp.lower();
    let ub = nlp.upper();
    let mut x = x0.zip_zip_map(&lb, &ub, |v, lo, hi| v.clamp(lo, hi));
    nlp.normalize(&mut x);
    let mut ev = match nlp.evaluate(&x) {
        Ok(e) => e,
        Err(_) => {
            return SqpResult { f: f64::NAN, violation: f64::INFINITY, x, status: SqpStatus::EvaluationError, iterations: 0, merit_history: vec![] }
        }
    };
    let mut b = DMatrix::identity(n, n);
    let mut penalty = 1.0f64;
    let mut history: VecDeque<f64> = VecDeque::new();
    let mut merits = Vec::new();
    let finish = |x: DVector<f64>, ev: &NlpEval, status, iterations, merits: Vec<f64>| SqpResult {
        f: ev.f,
        violation: ev.violation(),
        x,
        status,
        iterations,
        merit_history: merits,
    };

    for iter in 0..opts.max_iter {
        if start.elapsed() > opts.time_limit {
            return finish(x, &ev, SqpStatus::Timeout, iter, merits);
        }
        let lo = (&lb - &x).map(|v| v.max(-opts.max_step));
        let hi = (&ub - &x).map(|v| v.min(opts.max_step));
        let Some(sub) = solve_subproblem(&b, &ev, &lo, &hi) else {
            return finish(x, &ev, SqpStatus::QpFailure, iter, merits);
        };
        let d = sub.d;
        let mult_max = sub.lambda_in.amax().max(sub.nu_eq.amax());
        let raised = 1.5 * mult_max + 1e-3;
        if raised > penalty {
            // Merit values under the old penalty are not comparable.
            penalty = raised;
            history.clear();
        }
        let merit = |e: &NlpEval| e.f + penalty * e.l1_violation();
        let phi0 = merit(&ev);
        if history.is_empty() {
            history.push_back(phi0);
        }
        if merits.is_empty() {
            merits.push(phi0);
        }
        if d.amax() <= opts.step_tol && ev.violation() <= opts.feas_tol {
            return finish(x, &ev, SqpStatus::Converged, iter, merits);
        }
        if d.amax() <= opts.step_tol && sub.elastic {
            // Stationary for the infeasibility measure: locally infeasible.
            return finish(x, &ev, SqpStatus::QpFailure, iter, merits);
        }
        let dphi = ev.grad.dot(&d) - penalty * ev.l1_violation();
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= MIN_ALPHA {
            let mut xt = &x + &d * alpha;
            xt = xt.zip_zip_map(&lb, &ub, |v, l, h| v.clamp(l, h));
            if let Ok(et) = nlp.evaluate(&xt) {
                let phi = merit(&et);
                if phi.is_finite() && phi <= reference + ARMIJO * alpha * dphi.min(0.0) {
                    accepted = Some((xt, et, phi));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((mut xn, mut en, phi)) = accepted else {
            return finish(x, &ev, SqpStatus::LineSearchFailure, iter, merits);
        };

        // Damped BFGS update on the Lagrangian gradient difference.
        let s = &xn - &x;
        let y = lagrangian_grad(&en, &sub.lambda_in, &sub.nu_eq) - lagrangian_grad(&ev, &sub.lambda_in, &sub.nu_eq);
        let bs = &b * &s;
        let sbs = s.dot(&bs);
        if sbs > 1e-16 {
            let sy = s.dot(&y);
            let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
            let r = &y * theta + &bs * (1.0 - theta);
            let sr = s.dot(&r);
            if sr > 1e-16 {
                b += &r * r.transpose() / sr - &bs * bs.transpose() / sbs;
                b = (&b + b.transpose()) * 0.5;
            }
        }

        if nlp.normalize(&mut xn) {
            b = DMatrix::identity(n, n);
            match nlp.evaluate(&xn) {
                Ok(e) => en = e,
                Err(_) => return finish(x, &ev, SqpStatus::EvaluationError, iter, merits),
            }
        }
        let phi_new = if xn == &x + &d * alpha { phi } else { merit(&en) };
        history.push_back(phi_new);
        if history.len() > opts.memory {
            history.pop_front();
        }
        merits.push(phi_new);
        let small_decrease = (phi0 - phi_new).abs() <= opts.merit_tol * (1.0 + phi0.abs());
        x = xn;
        ev = en;
        if small_decrease && ev.violation() <= opts.feas_tol && alpha == 1.0 {
            return finish(x, &ev, SqpStatus::Converged, iter + 1, merits);
        }
    }
    finish(x, &ev, SqpStatus::MaxIter, opts.max_iter, merits)
}

/// An NLP given by closures; convenient for tests and small problems.
pub struct ClosureNlp<F> {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub eval: F,
}

impl<F> Nlp for ClosureNlp<F>
where
    F: FnMut(&DVector<f64>) -> NlpEval,
{
    fn dim(&self) -> usize {
        self.lower.len()
    }
    fn lower(&self) -> DVector<f64> {
        self.lower.clone()
    }
    fn upper(&self) -> DVector<f64> {
        self.upper.clone()
    }
    fn evaluate(&mut self, x: &DVector<f64>) -> Result<NlpEval> {
        Ok((self.eval)(x))
    }
}
