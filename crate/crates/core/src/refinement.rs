//! Grasp refinement: maximize `ℓ*(q)` subject to joint limits, the
//! robustness constraint `ℓ̄*(q) ≥ k_ℓ`, fingertip surface contact and
//! collision clearance, solved with [`crate::sqp`].

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::collision::{collision_constraint, collision_pairs, pair_distances, CollisionPair, Halfspace, Scene, WitnessCache};
use crate::epsilon::epsilon_exact_points;
use crate::geometry::{splitmix64, ObjectModel};
use crate::kinematics::{wrap_rotation, HandModel};
use crate::min_weight::{grad_min_weight, solve_min_weight_matrix, MinWeightSolution};
use crate::sampler::{sample_candidate, SamplerConfig};
use crate::sqp::{solve_sqp, Nlp, NlpEval, SqpOptions, SqpStatus};
use crate::wrench::{build_wrench_set, wrench_jacobian, ContactFrame, WrenchSet};
use crate::{GraspError, Result};

type V3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub joint: f64,
    pub surface: f64,
    pub collision: f64,
    pub force_closure: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { joint: 1e-2, surface: 5e-4, collision: 1e-3, force_closure: 1e-5 }
    }
}

/// Settings shared by every refinement solve.
#[derive(Debug, Clone)]
pub struct RefinementSettings {
    pub k_l: f64,
    /// Friction coefficient assumed by the optimizer.
    pub mu_opt: f64,
    pub sides: usize,
    pub tol: Tolerances,
    pub max_iter: usize,
    pub time_limit: Duration,
    /// Hessian step for mesh objects; `None` uses the object default.
    pub hessian_delta: Option<f64>,
}

impl Default for RefinementSettings {
    fn default() -> Self {
        Self {
            k_l: 0.3,
            mu_opt: 0.5,
            sides: 4,
            tol: Tolerances::default(),
            max_iter: 200,
            time_limit: Duration::from_secs(10),
            hessian_delta: None,
        }
    }
}

impl RefinementSettings {
    pub fn validate(&self, object: &ObjectModel) -> Result<()> {
        let t = &self.tol;
        if !(t.joint > 0.0 && t.surface > 0.0 && t.collision > 0.0 && t.force_closure > 0.0) {
            return Err(GraspError::Config("tolerances must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.k_l) {
            return Err(GraspError::Config(format!("k_l must lie in [0, 1], got {}", self.k_l)));
        }
        if !(self.mu_opt > 0.0) || self.mu_opt > object.mu {
            return Err(GraspError::Config(format!(
                "optimizer friction {} must be positive and at most the object's {}",
                self.mu_opt, object.mu
            )));
        }
        if self.sides < 3 {
            return Err(GraspError::Config("friction pyramids need at least 3 sides".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RefinementProblem<'a> {
    pub hand: &'a HandModel,
    pub object: &'a ObjectModel,
    pub table: Option<Halfspace>,
    pub q0: DVector<f64>,
    pub settings: RefinementSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RefinementStatus {
    Feasible,
    MaxIter,
    Timeout,
    SolverFailure,
}

/// Worst violation of each constraint class (zero when satisfied).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    pub joint: f64,
    pub surface: f64,
    pub collision: f64,
    pub force_closure: f64,
}

impl Residuals {
    pub fn within(&self, tol: &Tolerances) -> bool {
        self.joint <= tol.joint
            && self.surface <= tol.surface
            && self.collision <= tol.collision
            && self.force_closure <= tol.force_closure
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementResult {
    pub status: RefinementStatus,
    pub q_star: Vec<f64>,
    pub l_bar: f64,
    pub epsilon: f64,
    pub iters: usize,
    pub attempts: usize,
    pub wall_time_s: f64,
    pub residuals: Residuals,
}

/// Independent evaluation of the refined grasp: fresh kinematics, SDF,
/// collision and metric computations, none shared with the solver state.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub residuals: Residuals,
    pub l_bar: f64,
    pub wrenches: Option<WrenchSet>,
}

pub fn grasp_wrenches(hand: &HandModel, object: &ObjectModel, q: &DVector<f64>, mu: f64, sides: usize) -> Result<WrenchSet> {
    let frames = hand
        .contact_points(q)
        .iter()
        .map(|p| ContactFrame::from_gradient(*p, &object.sdf_gradient(p)))
        .collect::<Result<Vec<_>>>()?;
    build_wrench_set(object, &frames, mu, sides, object.bounding_radius())
}

pub fn check_grasp(problem: &RefinementProblem, q: &DVector<f64>) -> Certificate {
    let s = &problem.settings;
    let hand = problem.hand;
    let object = problem.object;
    let joint = (0..q.len())
        .map(|k| (hand.lower()[k] - q[k]).max(q[k] - hand.upper()[k]).max(0.0))
        .fold(0.0, f64::max);
    let surface = hand.contact_points(q).iter().map(|p| object.sdf_value(p).abs()).fold(0.0, f64::max);
    let pairs = collision_pairs(hand, problem.table.as_ref());
    let scene = Scene { hand, object, table: problem.table.as_ref() };
    let collision = pair_distances(&scene, &pairs, q)
        .iter()
        .zip(&pairs)
        .map(|(d, p)| (p.margin - d).max(0.0))
        .fold(0.0, f64::max);
    let (l_bar, wrenches) = match grasp_wrenches(hand, object, q, s.mu_opt, s.sides) {
        Ok(ws) => match solve_min_weight_matrix(&ws.matrix) {
            Ok(sol) => (sol.ell_bar, Some(ws)),
            Err(_) => (f64::NEG_INFINITY, Some(ws)),
        },
        Err(_) => (f64::NEG_INFINITY, None),
    };
    let force_closure = (s.k_l - l_bar).max(0.0);
    Certificate { residuals: Residuals { joint, surface, collision, force_closure }, l_bar, wrenches }
}

/// The refinement program as an [`Nlp`].
pub struct RefinementNlp<'a> {
    hand: &'a HandModel,
    object: &'a ObjectModel,
    table: Option<Halfspace>,
    pairs: Vec<CollisionPair>,
    cache: WitnessCache,
    settings: RefinementSettings,
}

/// Objective, constraints and derivatives at one configuration.
#[derive(Debug, Clone)]
pub struct RefinementEval {
    pub metric: MinWeightSolution,
    pub grad_ell: DVector<f64>,
    pub surface: DVector<f64>,
    pub surface_jac: DMatrix<f64>,
    pub collision: DVector<f64>,
    pub collision_jac: DMatrix<f64>,
}

/// Fingertip surface constraint `s(FK_i(q))` and its gradient `J_iᵀ∇s`.
pub fn surface_constraint(hand: &HandModel, object: &ObjectModel, q: &DVector<f64>, finger: usize) -> (f64, DVector<f64>) {
    let p = hand.forward_kinematics(q, finger);
    let g = object.sdf_gradient(&p);
    (object.sdf_value(&p), hand.point_jacobian(q, finger).transpose() * g)
}

impl<'a> RefinementNlp<'a> {
    pub fn new(problem: &RefinementProblem<'a>, seed: u64) -> Self {
        let pairs = collision_pairs(problem.hand, problem.table.as_ref());
        let cache = WitnessCache::new(pairs.len(), seed);
        Self {
            hand: problem.hand,
            object: problem.object,
            table: problem.table,
            pairs,
            cache,
            settings: problem.settings.clone(),
        }
    }

    pub fn pairs(&self) -> &[CollisionPair] {
        &self.pairs
    }

    /// `ℓ*` with its gradient through contact frames and kinematics.
    pub fn metric_with_gradient(&self, q: &DVector<f64>) -> Result<(MinWeightSolution, DVector<f64>)> {
        let s = &self.settings;
        let delta = s.hessian_delta.unwrap_or_else(|| self.object.default_hessian_delta());
        let mut contacts = Vec::with_capacity(self.hand.num_fingers());
        let mut jacobians = Vec::with_capacity(self.hand.num_fingers());
        for i in 0..self.hand.num_fingers() {
            let p = self.hand.forward_kinematics(q, i);
            let g = self.object.sdf_gradient(&p);
            let h = self.object.sdf_hessian(&p, delta)?;
            contacts.push(ContactFrame::with_derivative(p, &g, &h)?);
            jacobians.push(self.hand.point_jacobian(q, i));
        }
        let frames: Vec<ContactFrame> = contacts.iter().map(|c| c.0).collect();
        let rho = self.object.bounding_radius();
        let ws = build_wrench_set(self.object, &frames, s.mu_opt, s.sides, rho)?;
        let dw = wrench_jacobian(&contacts, &jacobians, &self.object.origin(), s.mu_opt, s.sides, rho);
        let sol = solve_min_weight_matrix(&ws.matrix)?;
        let grad = grad_min_weight(&ws.matrix, &dw, &sol).grad;
        Ok((sol, grad))
    }

    pub fn evaluate_all(&mut self, q: &DVector<f64>) -> Result<RefinementEval> {
        let n = self.hand.dofs();
        let (metric, grad_ell) = self.metric_with_gradient(q)?;
        let nf = self.hand.num_fingers();
        let mut surface = DVector::zeros(nf);
        let mut surface_jac = DMatrix::zeros(nf, n);
        for i in 0..nf {
            let (v, g) = surface_constraint(self.hand, self.object, q, i);
            surface[i] = v;
            surface_jac.set_row(i, &g.transpose());
        }
        let np = self.pairs.len();
        let mut collision = DVector::zeros(np);
        let mut collision_jac = DMatrix::zeros(np, n);
        let scene = Scene { hand: self.hand, object: self.object, table: self.table.as_ref() };
        for j in 0..np {
            let (v, g) = collision_constraint(&scene, &self.pairs, j, q, &mut self.cache);
            collision[j] = v - self.pairs[j].margin;
            collision_jac.set_row(j, &g.transpose());
        }
        Ok(RefinementEval { metric, grad_ell, surface, surface_jac, collision, collision_jac })
    }
}

impl Nlp for RefinementNlp<'_> {
    fn dim(&self) -> usize {
        self.hand.dofs()
    }

    fn lower(&self) -> DVector<f64> {
        self.hand.lower().clone()
    }

    fn upper(&self) -> DVector<f64> {
        self.hand.upper().clone()
    }

    fn evaluate(&mut self, q: &DVector<f64>) -> Result<NlpEval> {
        let e = self.evaluate_all(q)?;
        let n = self.hand.dofs();
        let m = e.metric.alpha.len() as f64;
        let np = e.collision.len();
        let mut c_in = DVector::zeros(np + 1);
        let mut j_in = DMatrix::zeros(np + 1, n);
        c_in[0] = e.metric.ell_bar - self.settings.k_l;
        j_in.set_row(0, &(&e.grad_ell * m).transpose());
        c_in.rows_mut(1, np).copy_from(&e.collision);
        j_in.view_mut((1, 0), (np, n)).copy_from(&e.collision_jac);
        Ok(NlpEval { f: -e.metric.ell, grad: -e.grad_ell, c_eq: e.surface, j_eq: e.surface_jac, c_in, j_in })
    }

    fn normalize(&self, q: &mut DVector<f64>) -> bool {
        wrap_rotation(q)
    }
}

/// Counts of the assembled program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NlpShape {
    pub variables: usize,
    pub equalities: usize,
    pub inequalities: usize,
    pub bounds: usize,
}

pub fn assemble_nlp<'a>(problem: &RefinementProblem<'a>, seed: u64) -> (RefinementNlp<'a>, NlpShape) {
    let nlp = RefinementNlp::new(problem, seed);
    let n = problem.hand.dofs();
    let shape = NlpShape {
        variables: n,
        equalities: problem.hand.num_fingers(),
        inequalities: nlp.pairs.len() + 1,
        bounds: 2 * n,
    };
    (nlp, shape)
}

fn sqp_options(s: &RefinementSettings, deadline: Option<Instant>) -> SqpOptions {
    let mut limit = s.time_limit;
    if let Some(d) = deadline {
        limit = limit.min(d.saturating_duration_since(Instant::now()));
    }
    SqpOptions {
        max_iter: s.max_iter,
        time_limit: limit,
        step_tol: 1e-8,
        merit_tol: 1e-9,
        feas_tol: 0.1 * s.tol.surface.min(s.tol.collision),
        max_step: 0.05,
        memory: 3,
    }
}

fn refine(problem: &RefinementProblem, seed: u64, deadline: Option<Instant>) -> RefinementResult {
    let start = Instant::now();
    let q0 = problem.hand.clamp(&problem.q0);
    let (mut nlp, _) = assemble_nlp(problem, seed);
    let out = solve_sqp(&mut nlp, &q0, &sqp_options(&problem.settings, deadline));
    let cert = check_grasp(problem, &out.x);
    let feasible = cert.residuals.within(&problem.settings.tol);
    let status = if feasible {
        RefinementStatus::Feasible
    } else {
        match out.status {
            SqpStatus::Timeout => RefinementStatus::Timeout,
            SqpStatus::MaxIter => RefinementStatus::MaxIter,
            _ => RefinementStatus::SolverFailure,
        }
    };
    let epsilon = match (&cert.wrenches, cert.l_bar.is_finite()) {
        (Some(ws), true) => epsilon_exact_points(&ws.matrix, cert.l_bar / ws.len() as f64).map(|r| r.epsilon).unwrap_or(f64::NAN),
        _ => 0.0,
    };
    RefinementResult {
        status,
        q_star: out.x.iter().copied().collect(),
        l_bar: cert.l_bar,
        epsilon,
        iters: out.iterations,
        attempts: 1,
        wall_time_s: start.elapsed().as_secs_f64(),
        residuals: cert.residuals,
    }
}

/// Refines `problem.q0`; deterministic given the problem and seed unless a
/// time cap is hit.
pub fn solve_refinement(problem: &RefinementProblem, seed: u64) -> RefinementResult {
    refine(problem, seed, None)
}

/// Seed of attempt `k` of a run seeded with `seed`.
pub fn attempt_seed(seed: u64, k: u64) -> u64 {
    splitmix64(seed ^ splitmix64(k.wrapping_add(0x5bd1_e995)))
}

#[derive(Debug, Clone)]
pub struct SynthesisSettings {
    pub refinement: RefinementSettings,
    pub sampler: SamplerConfig,
    pub max_attempts: usize,
    pub budget: Duration,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        Self {
            refinement: RefinementSettings::default(),
            sampler: SamplerConfig::default(),
            max_attempts: 10,
            budget: Duration::from_secs(60),
        }
    }
}

/// Samples and refines candidates until one is feasible or the attempt or
/// time budget runs out. Returns the first feasible result, otherwise the
/// last attempt, with the attempt count and total wall time.
pub fn synthesize(
    hand: &HandModel,
    object: &ObjectModel,
    table: Option<Halfspace>,
    settings: &SynthesisSettings,
    seed: u64,
) -> Result<RefinementResult> {
    if settings.max_attempts == 0 {
        return Err(GraspError::Config("max_attempts must be at least 1".into()));
    }
    settings.refinement.validate(object)?;
    let start = Instant::now();
    let deadline = start + settings.budget;
    let mut last = None;
    for k in 0..settings.max_attempts {
        if k > 0 && Instant::now() >= deadline {
            break;
        }
        let s = attempt_seed(seed, k as u64);
        let q0 = sample_candidate(hand, object, &settings.sampler, s);
        let problem = RefinementProblem { hand, object, table, q0, settings: settings.refinement.clone() };
        let mut r = refine(&problem, s, Some(deadline));
        r.attempts = k + 1;
        r.wall_time_s = start.elapsed().as_secs_f64();
        let done = r.status == RefinementStatus::Feasible;
        last = Some(r);
        if done {
            break;
        }
    }
    let mut r = last.expect("at least one attempt");
    if r.status != RefinementStatus::Feasible && Instant::now() >= deadline {
        r.status = RefinementStatus::Timeout;
    }
    Ok(r)
}

/// Contact points of a configuration, for reporting.
pub fn contact_points(hand: &HandModel, q: &[f64]) -> Vec<V3> {
    hand.contact_points(&DVector::from_column_slice(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::three_finger_hand;

    #[test]
    fn program_shape() {
        let hand = three_finger_hand();
        let object = ObjectModel::sphere(0.05, V3::new(0.0, 0.0, 0.05), 0.1, 0.7).unwrap();
        let problem = RefinementProblem {
            hand: &hand,
            object: &object,
            table: Some(Halfspace::table()),
            q0: DVector::zeros(12),
            settings: RefinementSettings::default(),
        };
        let (_, shape) = assemble_nlp(&problem, 0);
        assert_eq!(shape, NlpShape { variables: 12, equalities: 3, inequalities: 70, bounds: 24 });
    }

    #[test]
    fn surface_value_off_the_sphere() {
        let hand = three_finger_hand();
        let q = DVector::zeros(12);
        let p = hand.forward_kinematics(&q, 0);
        let object = ObjectModel::sphere(p.norm() / 1.1, V3::zeros(), 0.1, 0.7).unwrap();
        let (v, g) = surface_constraint(&hand, &object, &q, 0);
        assert!((v - (p.norm() - p.norm() / 1.1)).abs() < 1e-12);
        let expected = hand.point_jacobian(&q, 0).transpose() * p.normalize();
        assert!((g - expected).amax() < 1e-12);
    }

    #[test]
    fn optimizer_friction_cannot_exceed_object() {
        let object = ObjectModel::sphere(0.05, V3::zeros(), 0.1, 0.4).unwrap();
        assert!(RefinementSettings::default().validate(&object).is_err());
    }
}
