//! The min-weight grasp metric.
//!
//! `ℓ*` is the optimal value of
//!
//! ```text
//! maximize  ℓ   over (α, ℓ)
//! s.t.      W α = 0,  1ᵀα = 1,  α ⪰ ℓ 1
//! ```
//!
//! Its sign classifies force closure: negative when the origin lies outside
//! `conv(W)`, positive when strictly inside, zero on the boundary. The
//! normalized value `ℓ̄* = m ℓ*` is at most one.
//!
//! The gradient with respect to a configuration `q` comes from implicitly
//! differentiating the LP optimality conditions. Because the top-left block
//! of their Jacobian is zero and the off-diagonal products vanish by
//! complementary slackness, only the pseudoinverse of
//! `C = [diag(λ*) A_in; A_eq]` is needed:
//!
//! ```text
//! D_q x* = −C† [0; ∂_q H₃],   ∂_q H₃ = [(∂W/∂q) α*; 0]
//! ```

use nalgebra::{DMatrix, DVector};

use crate::lp::{solve_lp, LpStatus, StandardLp, KKT_TOL};
use crate::wrench::{affine_rank, WrenchSet};
use crate::{GraspError, Result};

#[derive(Debug, Clone)]
pub struct MinWeightSolution {
    pub ell: f64,
    pub alpha: DVector<f64>,
    pub ell_bar: f64,
    /// Multipliers of `α ⪰ ℓ1` (length m).
    pub lambda: DVector<f64>,
    /// Multipliers of the wrench rows followed by the sum row.
    pub nu: DVector<f64>,
    pub degenerate: bool,
}

impl MinWeightSolution {
    pub fn x(&self) -> DVector<f64> {
        let m = self.alpha.len();
        let mut x = DVector::zeros(m + 1);
        x.rows_mut(0, m).copy_from(&self.alpha);
        x[m] = self.ell;
        x
    }

    pub fn is_force_closure(&self) -> bool {
        self.ell > 0.0
    }
}

#[derive(Debug, Clone)]
pub struct MetricGradient {
    /// `∇ℓ*` over the configuration coordinates.
    pub grad: DVector<f64>,
    /// `D_q α*` (m × n).
    pub d_alpha: DMatrix<f64>,
    /// Set when the LP solution was degenerate; the gradient is then only a
    /// subgradient-like direction.
    pub subgradient: bool,
}

/// The LP in `(α, ℓ)` form: minimize `−ℓ`, `A_eq = [W 0; 1ᵀ 0]`,
/// `b_eq = e_last`, `A_in = [−I 1]`.
pub fn min_weight_lp(w: &DMatrix<f64>) -> StandardLp {
    let d = w.nrows();
    let m = w.ncols();
    let mut cost = DVector::zeros(m + 1);
    cost[m] = -1.0;
    let a_eq = equality_matrix(w);
    let mut b_eq = DVector::zeros(d + 1);
    b_eq[d] = 1.0;
    let mut a_in = DMatrix::zeros(m, m + 1);
    for i in 0..m {
        a_in[(i, i)] = -1.0;
        a_in[(i, m)] = 1.0;
    }
    StandardLp::new(cost, a_eq, b_eq, a_in)
}

fn equality_matrix(w: &DMatrix<f64>) -> DMatrix<f64> {
    let d = w.nrows();
    let m = w.ncols();
    let mut a_eq = DMatrix::zeros(d + 1, m + 1);
    a_eq.view_mut((0, 0), (d, m)).copy_from(w);
    for j in 0..m {
        a_eq[(d, j)] = 1.0;
    }
    a_eq
}

pub fn solve_min_weight(ws: &WrenchSet) -> Result<MinWeightSolution> {
    solve_min_weight_matrix(&ws.matrix)
}

/// Min-weight metric for an arbitrary `d × m` point matrix.
pub fn solve_min_weight_matrix(w: &DMatrix<f64>) -> Result<MinWeightSolution> {
    let d = w.nrows();
    let m = w.ncols();
    let rank = affine_rank(w);
    if rank < d + 1 {
        return Err(GraspError::NotEnoughWrenches { needed: d + 1, found: rank });
    }
    let lp = min_weight_lp(w);
    let sol = solve_lp(&lp, KKT_TOL)?;
    if !sol.status.is_optimal() {
        return Err(GraspError::Lp(sol.status));
    }
    let alpha = sol.x.rows(0, m).into_owned();
    let ell = sol.x[m];
    Ok(MinWeightSolution {
        ell,
        ell_bar: m as f64 * ell,
        alpha,
        lambda: sol.lambda,
        nu: sol.nu,
        degenerate: sol.status == LpStatus::Degenerate,
    })
}

/// `‖H‖_∞` at the reported primal/dual pair.
pub fn kkt_residual(w: &DMatrix<f64>, sol: &MinWeightSolution) -> f64 {
    min_weight_lp(w).kkt_residual(&sol.x(), &sol.lambda, &sol.nu)
}

/// `∂_q H₃` (d+1 × n): column k is `[(∂W/∂q_k) α*; 0]`.
pub fn constraint_sensitivity(dw: &[DMatrix<f64>], alpha: &DVector<f64>) -> DMatrix<f64> {
    let d = dw.first().map_or(6, |m| m.nrows());
    let n = dw.len();
    let mut out = DMatrix::zeros(d + 1, n);
    for (k, dwk) in dw.iter().enumerate() {
        out.view_mut((0, k), (d, 1)).copy_from(&(dwk * alpha));
    }
    out
}

/// Gradient of `ℓ*` given `∂W/∂q_k` for every coordinate.
pub fn grad_min_weight(w: &DMatrix<f64>, dw: &[DMatrix<f64>], sol: &MinWeightSolution) -> MetricGradient {
    let d = w.nrows();
    let m = w.ncols();
    let n = dw.len();

    // C = [diag(λ) A_in; A_eq], with A_in = [−I 1].
    let mut c = DMatrix::zeros(m + d + 1, m + 1);
    for i in 0..m {
        c[(i, i)] = -sol.lambda[i];
        c[(i, m)] = sol.lambda[i];
    }
    c.view_mut((m, 0), (d + 1, m + 1)).copy_from(&equality_matrix(w));

    let mut rhs = DMatrix::zeros(m + d + 1, n);
    rhs.view_mut((m, 0), (d + 1, n)).copy_from(&constraint_sensitivity(dw, &sol.alpha));

    let scale = c.amax().max(1.0);
    let dx = -pseudo_inverse(c, 1e-12 * scale) * rhs;
    MetricGradient {
        grad: dx.row(m).transpose(),
        d_alpha: dx.rows(0, m).into_owned(),
        subgradient: sol.degenerate,
    }
}

fn pseudo_inverse(c: DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    // Tall matrices: (CᵀC)⁻¹Cᵀ when well conditioned, SVD otherwise.
    let ctc = c.transpose() * &c;
    if let Some(chol) = ctc.clone().cholesky() {
        let inv = chol.inverse();
        let rcond = inv.amax() * ctc.amax();
        if rcond.is_finite() && rcond < 1e12 {
            return inv * c.transpose();
        }
    }
    c.pseudo_inverse(eps).expect("SVD pseudo-inverse with non-negative epsilon")
}

/// `ℓ*` and its gradient together.
pub fn min_weight_with_gradient(
    w: &DMatrix<f64>,
    dw: &[DMatrix<f64>],
) -> Result<(MinWeightSolution, MetricGradient)> {
    let sol = solve_min_weight_matrix(w)?;
    let grad = grad_min_weight(w, dw, &sol);
    Ok((sol, grad))
}
