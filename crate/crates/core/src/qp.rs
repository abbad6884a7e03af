//! Dense convex quadratic programs
//!
//! ```text
//! minimize  ½ xᵀP x + qᵀx   s.t.  A_eq x = b_eq,  A_in x ⪯ b_in
//! ```
//!
//! Strictly convex problems use the Goldfarb–Idnani dual active-set method,
//! recomputing the projected operators from scratch after each active-set
//! change (problems here have at most a few dozen variables). Positive
//! semidefinite problems go through proximal-point iterations, each of which
//! is strictly convex.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of `A_in x ⪯ b_in`, non-negative.
    pub lambda: DVector<f64>,
    /// Multipliers of `A_eq x = b_eq`.
    pub nu: DVector<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub iterations: usize,
}

impl QpProblem {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            p,
            q,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    /// Infinity norm of stationarity, primal infeasibility, complementarity
    /// and dual-sign violation.
    pub fn kkt_residual(&self, x: &DVector<f64>, lambda: &DVector<f64>, nu: &DVector<f64>) -> f64 {
        let stat = &self.p * x + &self.q + self.a_in.transpose() * lambda + self.a_eq.transpose() * nu;
        let slack = &self.a_in * x - &self.b_in;
        let eq = &self.a_eq * x - &self.b_eq;
        let mut r = stat.amax().max(eq.amax());
        for i in 0..slack.len() {
            r = r.max(slack[i].max(0.0)).max((lambda[i] * slack[i]).abs()).max((-lambda[i]).max(0.0));
        }
        r
    }
}

const MAX_PROX_ITERS: usize = 2000;

/// Solves the QP; `P` must be symmetric positive semidefinite.
pub fn solve_qp(prob: &QpProblem) -> QpSolution {
    let n = prob.q.len();
    let scale = prob.p.amax().max(1e-12);
    if let Some(chol) = prob.p.clone().cholesky() {
        let diag_min = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
        let diag_max = chol.l_dirty().diagonal().amax();
        if diag_min > 1e-6 * diag_max {
            return dual_active_set(prob, &prob.q, chol);
        }
    }
    // Proximal point: minimize f(x) + (ρ/2)‖x − x_k‖² repeatedly.
    let rho = 1e-2 * scale;
    let g = &prob.p + DMatrix::identity(n, n) * rho;
    let chol = g.cholesky().expect("P + ρI is positive definite");
    let mut x = DVector::zeros(n);
    let mut total = 0;
    let mut last = None;
    for _ in 0..MAX_PROX_ITERS {
        let lin = &prob.q - &x * rho;
        let sol = dual_active_set(prob, &lin, chol.clone());
        total += sol.iterations;
        if sol.status != QpStatus::Optimal {
            return QpSolution { iterations: total, ..sol };
        }
        let step = (&sol.x - &x).amax();
        x = sol.x.clone();
        let done = step <= 1e-13 * (1.0 + x.amax());
        last = Some(sol);
        if done {
            break;
        }
    }
    let sol = last.expect("at least one proximal iteration");
    let status = if prob.kkt_residual(&sol.x, &sol.lambda, &sol.nu) <= 1e-7 { QpStatus::Optimal } else { QpStatus::MaxIter };
    QpSolution { objective: prob.objective(&sol.x), status, iterations: total, ..sol }
}

/// Goldfarb–Idnani on `½xᵀGx + aᵀx` with the constraints of `prob`.
fn dual_active_set(prob: &QpProblem, a: &DVector<f64>, chol: Cholesky<f64, Dyn>) -> QpSolution {
    let n = a.len();
    let me = prob.a_eq.nrows();
    let mi = prob.a_in.nrows();
    let ginv = chol.inverse();
    // Internal form: n_iᵀ x ≥ b_i, equalities first.
    let normal = |k: usize| -> DVector<f64> {
        if k < me {
            prob.a_eq.row(k).transpose()
        } else {
            -prob.a_in.row(k - me).transpose()
        }
    };
    let rhs = |k: usize| -> f64 {
        if k < me {
            prob.b_eq[k]
        } else {
            -prob.b_in[k - me]
        }
    };
    let norms: Vec<f64> = (0..me + mi).map(|k| normal(k).norm().max(1e-300)).collect();

    let mut x = -(&ginv * a);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let max_iter = 20 * (n + me + mi) + 50;

    // Projected operators for the current active set.
    let operators = |active: &[usize]| -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        if active.is_empty() {
            return Some((ginv.clone(), DMatrix::zeros(0, n)));
        }
        let mut nmat = DMatrix::zeros(n, active.len());
        for (c, &k) in active.iter().enumerate() {
            nmat.set_column(c, &normal(k));
        }
        let gn = &ginv * &nmat;
        let m = nmat.transpose() * &gn;
        let minv = m.clone().cholesky().map(|c| c.inverse()).or_else(|| m.try_inverse())?;
        let nstar = &minv * gn.transpose();
        let h = &ginv - &gn * &nstar;
        Some((h, nstar))
    };

    let fail = |status, x: DVector<f64>, iterations| QpSolution {
        objective: prob.objective(&x),
        x,
        lambda: DVector::zeros(mi),
        nu: DVector::zeros(me),
        status,
        iterations,
    };

    for e in 0..me {
        iterations += 1;
        let (h, nstar) = match operators(&active) {
            Some(ops) => ops,
            None => return fail(QpStatus::Infeasible, x, iterations),
        };
        let ne = normal(e);
        let z = &h * &ne;
        let s = ne.dot(&x) - rhs(e);
        let curv = z.dot(&ne);
        if curv <= 1e-14 * norms[e] * norms[e] * ginv.amax() {
            // Dependent equality: consistent ones are redundant.
            if s.abs() <= 1e-9 * (1.0 + rhs(e).abs()) {
                continue;
            }
            return fail(QpStatus::Infeasible, x, iterations);
        }
        let r = &nstar * &ne;
        let t = -s / curv;
        x += &z * t;
        for (j, uj) in u.iter_mut().enumerate() {
            *uj -= t * r[j];
        }
        active.push(e);
        u.push(t);
    }

    loop {
        if iterations > max_iter {
            return fail(QpStatus::MaxIter, x, iterations);
        }
        // Most violated inequality, measured on normalized rows.
        let mut p = None;
        let mut worst = -1e-11;
        for k in me..me + mi {
            if active.contains(&k) {
                continue;
            }
            let s = (normal(k).dot(&x) - rhs(k)) / norms[k];
            if s < worst {
                worst = s;
                p = Some(k);
            }
        }
        let Some(p) = p else { break };
        let np = normal(p);
        let mut up = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return fail(QpStatus::MaxIter, x, iterations);
            }
            let (h, nstar) = match operators(&active) {
                Some(ops) => ops,
                None => return fail(QpStatus::Infeasible, x, iterations),
            };
            let z = &h * &np;
            let r = &nstar * &np;
            // Dual step limit from active inequalities.
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (j, &k) in active.iter().enumerate() {
                if k >= me && r[j] > 1e-14 {
                    let ratio = u[j] / r[j];
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(j);
                    }
                }
            }
            let curv = z.dot(&np);
            let sp = np.dot(&x) - rhs(p);
            let t2 = if curv > 1e-14 * norms[p] * norms[p] * ginv.amax() { -sp / curv } else { f64::INFINITY };
            if t1.is_infinite() && t2.is_infinite() {
                return fail(QpStatus::Infeasible, x, iterations);
            }
            let t = t1.min(t2);
            if t2.is_finite() {
                x += &z * t;
            }
            for (j, uj) in u.iter_mut().enumerate() {
                *uj -= t * r[j];
            }
            up += t;
            if t2 <= t1 {
                active.push(p);
                u.push(up);
                break;
            }
            let j = drop.expect("finite t1 has a blocking constraint");
            active.remove(j);
            u.remove(j);
        }
    }

    let mut lambda = DVector::zeros(mi);
    let mut nu = DVector::zeros(me);
    for (j, &k) in active.iter().enumerate() {
        if k < me {
            // Internal form uses +n_e with u; the public sign convention is
            // P x + q + A_eqᵀ ν = 0 ⇒ ν = −u.
            nu[k] = -u[j];
        } else {
            lambda[k - me] = u[j].max(0.0);
        }
    }
    QpSolution { objective: prob.objective(&x), x, lambda, nu, status: QpStatus::Optimal, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_minimum() {
        let a = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let prob = QpProblem::new(DMatrix::identity(3, 3) * 2.0, -&a * 2.0);
        let sol = solve_qp(&prob);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x - a).amax() < 1e-12);
    }

    #[test]
    fn single_lower_bound() {
        let prob = QpProblem::new(DMatrix::from_element(1, 1, 2.0), DVector::zeros(1))
            .with_inequalities(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, -1.0));
        let sol = solve_qp(&prob);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.lambda[0] - 2.0).abs() < 1e-12);
        assert!(prob.kkt_residual(&sol.x, &sol.lambda, &sol.nu) < 1e-12);
    }

    #[test]
    fn equality_constrained() {
        // min x² + y² s.t. x + y = 1 → (½, ½), ν = −1.
        let prob = QpProblem::new(DMatrix::identity(2, 2) * 2.0, DVector::zeros(2))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 1.0));
        let sol = solve_qp(&prob);
        assert!((sol.x[0] - 0.5).abs() < 1e-12 && (sol.x[1] - 0.5).abs() < 1e-12);
        assert!((sol.nu[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_bounds() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![0.0, -1.0]); // x ≤ 0 and x ≥ 1
        let prob = QpProblem::new(DMatrix::identity(1, 1), DVector::zeros(1)).with_inequalities(a, b);
        assert_eq!(solve_qp(&prob).status, QpStatus::Infeasible);
    }

    #[test]
    fn semidefinite_objective() {
        // min (x − y)² s.t. x ≥ 1, y ≤ 3, x + y = 3.
        let p = DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]);
        let prob = QpProblem::new(p, DVector::zeros(2))
            .with_inequalities(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]), DVector::from_vec(vec![-1.0, 3.0]))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 3.0));
        let sol = solve_qp(&prob);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.5).abs() < 1e-7 && (sol.x[1] - 1.5).abs() < 1e-7);
    }
}
