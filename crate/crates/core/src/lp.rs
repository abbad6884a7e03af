//! Dense linear programming with primal and dual solutions.
//!
//! Problems have the form
//!
//! ```text
//! minimize    cᵀx
//! subject to  A_eq x = b_eq
//!             A_in x ⪯ b_in
//! ```
//!
//! with `x` free. They are converted to standard form (split free variables,
//! one slack per inequality) and solved with a two-phase revised simplex
//! method. The basis is refactored from scratch on each pivot; the problems
//! this crate cares about have a few dozen rows, so stability wins over
//! update tricks.
//!
//! Multipliers are reported in the convention
//! `c + A_inᵀλ + A_eqᵀν = 0`, `λ ⪰ 0`.

use nalgebra::{DMatrix, DVector};

/// Pivot tolerance used inside the simplex iterations.
pub const PIVOT_TOL: f64 = 1e-9;
/// Default tolerance for reported KKT residuals.
pub const KKT_TOL: f64 = 1e-8;
/// Threshold below which a basic value or reduced cost counts as zero when
/// deciding whether the optimum is degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const BLAND_SWITCH: usize = 25;

#[derive(Debug, Clone)]
pub struct StandardLp {
    pub cost: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

impl StandardLp {
    /// Homogeneous inequalities `A_in x ⪯ 0`.
    pub fn new(cost: DVector<f64>, a_eq: DMatrix<f64>, b_eq: DVector<f64>, a_in: DMatrix<f64>) -> Self {
        let k = a_in.nrows();
        Self { cost, a_eq, b_eq, a_in, b_in: DVector::zeros(k) }
    }

    pub fn with_inequality_rhs(mut self, b_in: DVector<f64>) -> Self {
        self.b_in = b_in;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn check_dimensions(&self) -> crate::Result<()> {
        let n = self.cost.len();
        let ok = self.a_eq.ncols() == n
            && self.a_in.ncols() == n
            && self.a_eq.nrows() == self.b_eq.len()
            && self.a_in.nrows() == self.b_in.len();
        if ok {
            Ok(())
        } else {
            Err(crate::GraspError::Dimension(format!(
                "cost {}, A_eq {}x{}, b_eq {}, A_in {}x{}, b_in {}",
                n,
                self.a_eq.nrows(),
                self.a_eq.ncols(),
                self.b_eq.len(),
                self.a_in.nrows(),
                self.a_in.ncols(),
                self.b_in.len()
            )))
        }
    }

    /// `‖H‖_∞` for the stationarity, complementarity and feasibility blocks.
    /// Inequality primal infeasibility `max(A_in x − b_in, 0)` is included.
    pub fn kkt_residual(&self, x: &DVector<f64>, lambda: &DVector<f64>, nu: &DVector<f64>) -> f64 {
        let stat = &self.cost + self.a_in.transpose() * lambda + self.a_eq.transpose() * nu;
        let slack = &self.a_in * x - &self.b_in;
        let comp = lambda.component_mul(&slack);
        let eq = &self.a_eq * x - &self.b_eq;
        let infeas = slack.iter().fold(0.0f64, |acc, &s| acc.max(s));
        let dual_infeas = lambda.iter().fold(0.0f64, |acc, &l| acc.max(-l));
        [stat.amax(), comp.amax(), eq.amax(), infeas, dual_infeas]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    /// Optimal, but the basis is degenerate (primal or dual solution may not
    /// be unique).
    Degenerate,
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn is_optimal(self) -> bool {
        matches!(self, LpStatus::Optimal | LpStatus::Degenerate)
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: DVector<f64>,
    /// Inequality multipliers.
    pub lambda: DVector<f64>,
    /// Equality multipliers.
    pub nu: DVector<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Plus(usize),
    Minus(usize),
    Slack,
    Artificial,
}

struct Tableau {
    a: DMatrix<f64>,
    b: DVector<f64>,
    kinds: Vec<ColKind>,
    basis: Vec<usize>,
    /// Original row index for each remaining row.
    row_origin: Vec<usize>,
    /// Sign applied to each remaining row to make `b ⪰ 0`.
    row_sign: Vec<f64>,
    iterations: usize,
}

enum Pivot {
    Optimal,
    Unbounded,
    LimitReached,
}

impl Tableau {
    fn basis_matrix(&self) -> DMatrix<f64> {
        let rows = self.a.nrows();
        DMatrix::from_fn(rows, rows, |i, j| self.a[(i, self.basis[j])])
    }

    fn basic_values(&self) -> Option<DVector<f64>> {
        self.basis_matrix().lu().solve(&self.b)
    }

    /// Runs simplex iterations for the given column costs. Columns with an
    /// infinite cost are never allowed to enter.
    fn optimize(&mut self, cost: &[f64], max_iter: usize) -> Pivot {
        let rows = self.a.nrows();
        let cols = self.a.ncols();
        let mut degenerate_streak = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= max_iter {
                return Pivot::LimitReached;
            }
            let bmat = self.basis_matrix();
            let lu = bmat.clone().lu();
            let Some(xb) = lu.solve(&self.b) else { return Pivot::LimitReached };
            let cb = DVector::from_iterator(rows, self.basis.iter().map(|&j| cost[j]));
            let Some(y) = bmat.transpose().lu().solve(&cb) else { return Pivot::LimitReached };

            let mut in_basis = vec![false; cols];
            for &j in &self.basis {
                in_basis[j] = true;
            }

            // Entering column.
            let mut entering = None;
            let mut best = -PIVOT_TOL;
            for j in 0..cols {
                if in_basis[j] || !cost[j].is_finite() {
                    continue;
                }
                let d = cost[j] - self.a.column(j).dot(&y);
                if bland {
                    if d < -PIVOT_TOL {
                        entering = Some(j);
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some(j);
                }
            }
            let Some(e) = entering else { return Pivot::Optimal };

            let Some(u) = lu.solve(&self.a.column(e).into_owned()) else { return Pivot::LimitReached };

            // Ratio test; ties broken by smallest variable index.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..rows {
                if u[i] > PIVOT_TOL {
                    let ratio = xb[i].max(0.0) / u[i];
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, ratio)) = leave else { return Pivot::Unbounded };
            if ratio <= 1e-12 {
                degenerate_streak += 1;
                if degenerate_streak > BLAND_SWITCH {
                    bland = true;
                }
            } else {
                degenerate_streak = 0;
            }
            self.basis[r] = e;
            self.iterations += 1;
        }
    }

    fn remove_row(&mut self, r: usize) {
        self.a = self.a.clone().remove_row(r);
        self.b = self.b.clone().remove_row(r);
        self.basis.remove(r);
        self.row_origin.remove(r);
        self.row_sign.remove(r);
    }

    /// Pivots basic artificial variables out after phase one. Rows where that
    /// is impossible are linearly dependent and get dropped.
    fn purge_artificials(&mut self) {
        let mut r = 0;
        while r < self.basis.len() {
            if self.kinds[self.basis[r]] != ColKind::Artificial {
                r += 1;
                continue;
            }
            let bmat = self.basis_matrix();
            let lu = bmat.lu();
            let in_basis: Vec<usize> = self.basis.clone();
            let mut replacement = None;
            let mut best = 1e-9;
            for j in 0..self.a.ncols() {
                if self.kinds[j] == ColKind::Artificial || in_basis.contains(&j) {
                    continue;
                }
                if let Some(u) = lu.solve(&self.a.column(j).into_owned()) {
                    if u[r].abs() > best {
                        best = u[r].abs();
                        replacement = Some(j);
                    }
                }
            }
            match replacement {
                Some(j) => {
                    self.basis[r] = j;
                    r += 1;
                }
                None => self.remove_row(r),
            }
        }
    }
}

/// Solves the linear program. `tol` bounds the primal feasibility reported
/// through the status: a phase-one optimum above it means infeasible.
pub fn solve_lp(lp: &StandardLp, tol: f64) -> crate::Result<LpSolution> {
    lp.check_dimensions()?;
    let n = lp.num_vars();
    let p = lp.a_eq.nrows();
    let k = lp.a_in.nrows();
    let rows = p + k;

    // Standard form columns: x⁺ (n), x⁻ (n), slacks (k), artificials (added below).
    let mut kinds: Vec<ColKind> = (0..n).map(ColKind::Plus).chain((0..n).map(ColKind::Minus)).collect();
    kinds.extend(std::iter::repeat_n(ColKind::Slack, k));

    let mut a = DMatrix::zeros(rows, 2 * n + k);
    let mut b = DVector::zeros(rows);
    for i in 0..p {
        for j in 0..n {
            a[(i, j)] = lp.a_eq[(i, j)];
            a[(i, n + j)] = -lp.a_eq[(i, j)];
        }
        b[i] = lp.b_eq[i];
    }
    for i in 0..k {
        for j in 0..n {
            a[(p + i, j)] = lp.a_in[(i, j)];
            a[(p + i, n + j)] = -lp.a_in[(i, j)];
        }
        a[(p + i, 2 * n + i)] = 1.0;
        b[p + i] = lp.b_in[i];
    }
    let mut row_sign = vec![1.0; rows];
    for i in 0..rows {
        if b[i] < 0.0 {
            row_sign[i] = -1.0;
            b[i] = -b[i];
            for j in 0..a.ncols() {
                a[(i, j)] = -a[(i, j)];
            }
        }
    }

    // Initial basis: a slack where it is a +1 unit column, otherwise an artificial.
    let mut basis = Vec::with_capacity(rows);
    let mut art_rows = Vec::new();
    for i in 0..rows {
        if i >= p && row_sign[i] > 0.0 {
            basis.push(2 * n + (i - p));
        } else {
            basis.push(usize::MAX);
            art_rows.push(i);
        }
    }
    if !art_rows.is_empty() {
        let base = a.ncols();
        a = a.resize_horizontally(base + art_rows.len(), 0.0);
        for (t, &i) in art_rows.iter().enumerate() {
            a[(i, base + t)] = 1.0;
            basis[i] = base + t;
            kinds.push(ColKind::Artificial);
        }
    }

    let mut tab = Tableau {
        a,
        b,
        kinds,
        basis,
        row_origin: (0..rows).collect(),
        row_sign,
        iterations: 0,
    };
    let max_iter = 50 * (tab.a.nrows() + tab.a.ncols()).max(10);

    let infeasible = |iterations| LpSolution {
        x: DVector::zeros(n),
        lambda: DVector::zeros(k),
        nu: DVector::zeros(p),
        objective: f64::NAN,
        status: LpStatus::Infeasible,
        iterations,
    };

    if !art_rows.is_empty() {
        let phase1: Vec<f64> = tab
            .kinds
            .iter()
            .map(|kd| if *kd == ColKind::Artificial { 1.0 } else { 0.0 })
            .collect();
        if let Pivot::LimitReached = tab.optimize(&phase1, max_iter) {
            return Ok(infeasible(tab.iterations));
        }
        let xb = tab.basic_values().unwrap_or_else(|| DVector::zeros(tab.basis.len()));
        let art_sum: f64 = tab
            .basis
            .iter()
            .zip(xb.iter())
            .filter(|(j, _)| tab.kinds[**j] == ColKind::Artificial)
            .map(|(_, v)| v.abs())
            .sum();
        let scale = 1.0 + lp.b_eq.amax().max(lp.b_in.amax());
        if art_sum > tol * scale {
            return Ok(infeasible(tab.iterations));
        }
        tab.purge_artificials();
    }

    let phase2: Vec<f64> = tab
        .kinds
        .iter()
        .map(|kd| match kd {
            ColKind::Plus(j) => lp.cost[*j],
            ColKind::Minus(j) => -lp.cost[*j],
            ColKind::Slack => 0.0,
            ColKind::Artificial => f64::INFINITY,
        })
        .collect();
    match tab.optimize(&phase2, max_iter) {
        Pivot::Optimal => {}
        Pivot::Unbounded => {
            return Ok(LpSolution {
                x: DVector::zeros(n),
                lambda: DVector::zeros(k),
                nu: DVector::zeros(p),
                objective: f64::NEG_INFINITY,
                status: LpStatus::Unbounded,
                iterations: tab.iterations,
            })
        }
        Pivot::LimitReached => return Ok(infeasible(tab.iterations)),
    }

    let bmat = tab.basis_matrix();
    let xb = bmat.clone().lu().solve(&tab.b).ok_or(crate::GraspError::Lp(LpStatus::Infeasible))?;
    let cb = DVector::from_iterator(tab.basis.len(), tab.basis.iter().map(|&j| phase2[j]));
    let y = bmat.transpose().lu().solve(&cb).ok_or(crate::GraspError::Lp(LpStatus::Infeasible))?;

    let mut x = DVector::zeros(n);
    for (r, &j) in tab.basis.iter().enumerate() {
        match tab.kinds[j] {
            ColKind::Plus(v) => x[v] += xb[r],
            ColKind::Minus(v) => x[v] -= xb[r],
            _ => {}
        }
    }

    let mut nu = DVector::zeros(p);
    let mut lambda = DVector::zeros(k);
    for (r, &orig) in tab.row_origin.iter().enumerate() {
        let yo = y[r] * tab.row_sign[r];
        if orig < p {
            nu[orig] = -yo;
        } else {
            lambda[orig - p] = -yo;
        }
    }

    // Degeneracy: a bounded basic variable at zero, or a bounded nonbasic
    // column with zero reduced cost. Split free variables are exempt when
    // their twin is basic.
    let mut in_basis = vec![false; tab.a.ncols()];
    for &j in &tab.basis {
        in_basis[j] = true;
    }
    let mut twin_basic = vec![false; n];
    for &j in &tab.basis {
        if let ColKind::Plus(v) | ColKind::Minus(v) = tab.kinds[j] {
            twin_basic[v] = true;
        }
    }
    let mut degenerate = false;
    for (r, &j) in tab.basis.iter().enumerate() {
        if tab.kinds[j] == ColKind::Slack && xb[r].abs() <= DEGENERACY_TOL {
            degenerate = true;
        }
    }
    for j in 0..tab.a.ncols() {
        if in_basis[j] {
            continue;
        }
        let exempt = match tab.kinds[j] {
            ColKind::Plus(v) | ColKind::Minus(v) => twin_basic[v],
            ColKind::Slack => false,
            ColKind::Artificial => true,
        };
        if exempt {
            continue;
        }
        let d = phase2[j] - tab.a.column(j).dot(&y);
        if d.abs() <= DEGENERACY_TOL {
            degenerate = true;
        }
    }

    Ok(LpSolution {
        objective: lp.cost.dot(&x),
        x,
        lambda,
        nu,
        status: if degenerate { LpStatus::Degenerate } else { LpStatus::Optimal },
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_active_bound() {
        // min −x s.t. x ≤ 1
        let lp = StandardLp::new(
            DVector::from_vec(vec![-1.0]),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
            DMatrix::from_row_slice(1, 1, &[1.0]),
        )
        .with_inequality_rhs(DVector::from_vec(vec![1.0]));
        let sol = solve_lp(&lp, KKT_TOL).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.lambda[0] - 1.0).abs() < 1e-12);
        assert!(lp.kkt_residual(&sol.x, &sol.lambda, &sol.nu) < KKT_TOL);
    }

    #[test]
    fn constant_objective_is_degenerate() {
        // min x₁+x₂ s.t. x₁+x₂ = 1, −x ⪯ 0
        let lp = StandardLp::new(
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
            -DMatrix::identity(2, 2),
        );
        let sol = solve_lp(&lp, KKT_TOL).unwrap();
        assert_eq!(sol.status, LpStatus::Degenerate);
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!(sol.x.iter().all(|&v| v > -1e-12));
        assert!(lp.kkt_residual(&sol.x, &sol.lambda, &sol.nu) < KKT_TOL);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x ≤ −1 and −x ≤ −1 (x ≥ 1)
        let lp = StandardLp::new(
            DVector::from_vec(vec![1.0]),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
        )
        .with_inequality_rhs(DVector::from_vec(vec![-1.0, -1.0]));
        assert_eq!(solve_lp(&lp, KKT_TOL).unwrap().status, LpStatus::Infeasible);

        // min −x s.t. −x ≤ 0
        let lp = StandardLp::new(
            DVector::from_vec(vec![-1.0]),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
            DMatrix::from_row_slice(1, 1, &[-1.0]),
        );
        assert_eq!(solve_lp(&lp, KKT_TOL).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        // x₁ + x₂ = 1 stated twice; min x₁ with x ⪰ 0 → x = (0, 1)
        let lp = StandardLp::new(
            DVector::from_vec(vec![1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
            DVector::from_vec(vec![1.0, 2.0]),
            -DMatrix::identity(2, 2),
        );
        let sol = solve_lp(&lp, KKT_TOL).unwrap();
        assert!(sol.status.is_optimal());
        assert!(sol.x[0].abs() < 1e-12 && (sol.x[1] - 1.0).abs() < 1e-12);
        assert!(lp.kkt_residual(&sol.x, &sol.lambda, &sol.nu) < KKT_TOL);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let lp = StandardLp::new(
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::zeros(1, 3),
            DVector::zeros(1),
            DMatrix::zeros(0, 2),
        );
        assert!(solve_lp(&lp, KKT_TOL).is_err());
    }
}
