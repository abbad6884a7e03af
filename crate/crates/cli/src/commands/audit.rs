use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use nalgebra::{DVector, Matrix3, Vector3};
use serde::Serialize;

use grasp_core::collision::{collision_constraint, collision_pairs, Scene, WitnessCache, CULL_DISTANCE};
use grasp_core::min_weight::solve_min_weight_matrix;
use grasp_core::refinement::{grasp_wrenches, surface_constraint, RefinementNlp};
use grasp_core::sampler::sample_candidate;
use grasp_core::{Halfspace, HandModel, ObjectModel, RefinementProblem, SamplerConfig};

use super::{prepare_out_dir, SolverArgs};
use crate::error::{config_err, CliError, CliResult};
use crate::inputs::{load_hand, load_object, load_sampler};
use crate::manifest::RunManifest;

const STEP: f64 = 1e-6;

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub hand: PathBuf,
    #[arg(long)]
    pub object: PathBuf,
    #[arg(long)]
    pub sampler: Option<PathBuf>,
    /// Number of sampled configurations to check.
    #[arg(short = 'n', long = "n-checks", default_value_t = 20)]
    pub n_checks: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted relative error, for every class.
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
    /// Directory for `audit.json`; nothing is written when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    GradEll,
    Surface,
    Collision,
    Hessian,
}

const CLASSES: [Class; 4] = [Class::GradEll, Class::Surface, Class::Collision, Class::Hessian];

impl Class {
    fn label(self) -> &'static str {
        match self {
            Class::GradEll => "grad_ell",
            Class::Surface => "surface",
            Class::Collision => "collision",
            Class::Hessian => "hessian",
        }
    }
}

/// Worst relative error per class at one configuration; `None` when the
/// class had nothing to check there.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub seed: u64,
    pub errors: [Option<f64>; 4],
    pub degenerate_vertex: bool,
    pub gradient_time_s: f64,
}

#[derive(Debug, Serialize)]
struct ClassReport {
    class: Class,
    checked: usize,
    max_rel_err: Option<f64>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct Report {
    manifest: String,
    threshold: f64,
    classes: Vec<ClassReport>,
    mean_gradient_time_s: Option<f64>,
    checks: Vec<CheckResult>,
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

fn central(f: impl Fn(&DVector<f64>) -> f64, q: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(q.len(), |k, _| {
        let (mut p, mut m) = (q.clone(), q.clone());
        p[k] += STEP;
        m[k] -= STEP;
        (f(&p) - f(&m)) / (2.0 * STEP)
    })
}

fn max_opt(a: Option<f64>, b: f64) -> Option<f64> {
    Some(a.map_or(b, |x| x.max(b)))
}

struct GradCheck {
    err: Option<f64>,
    degenerate: bool,
    time_s: f64,
}

/// Degenerate vertices are still checked: pyramid edges tie structurally
/// without creating a kink, and a real kink shows up as a failure.
fn grad_ell(problem: &RefinementProblem, q: &DVector<f64>, seed: u64) -> GradCheck {
    let nlp = RefinementNlp::new(problem, seed);
    let start = Instant::now();
    let Ok((sol, grad)) = nlp.metric_with_gradient(q) else {
        return GradCheck { err: None, degenerate: false, time_s: 0.0 };
    };
    let time_s = start.elapsed().as_secs_f64();
    let s = &problem.settings;
    let ell = |x: &DVector<f64>| {
        grasp_wrenches(problem.hand, problem.object, x, s.mu_opt, s.sides)
            .and_then(|ws| solve_min_weight_matrix(&ws.matrix))
            .map_or(f64::NAN, |sol| sol.ell)
    };
    let fd = central(ell, q);
    let err = if fd.iter().all(|v| v.is_finite()) { rel_err(&grad, &fd) } else { f64::INFINITY };
    GradCheck { err: Some(err), degenerate: sol.degenerate, time_s }
}

fn surface(hand: &HandModel, object: &ObjectModel, q: &DVector<f64>) -> f64 {
    (0..hand.num_fingers())
        .map(|f| {
            let (_, g) = surface_constraint(hand, object, q, f);
            rel_err(&g, &central(|x| surface_constraint(hand, object, x, f).0, q))
        })
        .fold(0.0, f64::max)
}

fn collision(hand: &HandModel, object: &ObjectModel, q: &DVector<f64>, seed: u64) -> Option<f64> {
    let table = Halfspace::table();
    let scene = Scene { hand, object, table: Some(&table) };
    let pairs = collision_pairs(hand, Some(&table));
    let mut cache = WitnessCache::new(pairs.len(), seed);
    let mut worst = None;
    for j in 0..pairs.len() {
        let (v, g) = collision_constraint(&scene, &pairs, j, q, &mut cache);
        if v > CULL_DISTANCE {
            continue;
        }
        let fd = central(|x| collision_constraint(&scene, &pairs, j, x, &mut WitnessCache::new(pairs.len(), seed)).0, q);
        worst = max_opt(worst, rel_err(&g, &fd));
    }
    worst
}

/// Hessian against central differences of the SDF gradient. On meshes both
/// sides use the smoothing step, but the estimate probes rotated directions,
/// so the two only agree where curvature varies slowly over that step.
fn hessian(object: &ObjectModel, points: &[Vector3<f64>], delta: Option<f64>) -> CliResult<f64> {
    let mut worst = 0.0f64;
    for p in points {
        let (h, step) = match delta {
            Some(d) => (object.sdf_hessian(p, d).map_err(config_err)?, d),
            None => (object.sdf_hessian(p, 1.0).map_err(config_err)?, STEP),
        };
        let fd = Matrix3::from_fn(|i, k| {
            let e = Vector3::ith(k, step);
            (object.sdf_gradient(&(p + e))[i] - object.sdf_gradient(&(p - e))[i]) / (2.0 * step)
        });
        let fd = 0.5 * (fd + fd.transpose());
        let scale = fd.amax().max(1.0);
        worst = worst.max((h - fd).amax() / scale);
    }
    Ok(worst)
}

pub fn check(
    hand: &HandModel,
    object: &ObjectModel,
    problem: &RefinementProblem,
    sampler: &SamplerConfig,
    seed: u64,
) -> CliResult<CheckResult> {
    let q = sample_candidate(hand, object, sampler, seed);
    let problem = RefinementProblem { q0: q.clone(), ..problem.clone() };
    let g = grad_ell(&problem, &q, seed);
    let delta = object.is_mesh().then(|| problem.settings.hessian_delta.unwrap_or(object.default_hessian_delta()));
    let h = hessian(object, &hand.contact_points(&q), delta)?;
    Ok(CheckResult {
        seed,
        errors: [g.err, Some(surface(hand, object, &q)), collision(hand, object, &q, seed), Some(h)],
        degenerate_vertex: g.degenerate,
        gradient_time_s: g.time_s,
    })
}

fn fmt_err(e: Option<f64>, threshold: f64) -> String {
    match e {
        Some(v) => format!("{v:.2e} {}", if v <= threshold { "ok" } else { "FAIL" }),
        None => "skipped".into(),
    }
}

pub fn run(args: &AuditArgs) -> CliResult<()> {
    if !(args.threshold >= 0.0) {
        return Err(CliError::Config(format!("--threshold must be non-negative, got {}", args.threshold)));
    }
    let mut files = Vec::new();
    let hand = load_hand(&args.hand, &mut files)?;
    let object = load_object(&args.object, &mut files)?;
    let sampler = load_sampler(args.sampler.as_deref(), &mut files)?;
    let settings = args.solver.settings(sampler.clone())?;
    settings.refinement.validate(&object).map_err(config_err)?;
    let problem = RefinementProblem {
        hand: &hand,
        object: &object,
        table: Some(Halfspace::table()),
        q0: DVector::zeros(hand.dofs()),
        settings: settings.refinement.clone(),
    };

    let checks = (0..args.n_checks)
        .map(|i| check(&hand, &object, &problem, &sampler, args.seed.wrapping_add(i)))
        .collect::<CliResult<Vec<_>>>()?;

    // One line per checked configuration.
    for c in &checks {
        let cols: Vec<String> =
            CLASSES.iter().zip(&c.errors).map(|(cl, e)| format!("{} {}", cl.label(), fmt_err(*e, args.threshold))).collect();
        println!("check seed {}: {}", c.seed, cols.join(", "));
    }

    let classes: Vec<ClassReport> = CLASSES
        .iter()
        .enumerate()
        .map(|(k, &class)| {
            let errs: Vec<f64> = checks.iter().filter_map(|c| c.errors[k]).collect();
            let max_rel_err = errs.iter().cloned().reduce(f64::max);
            ClassReport { class, checked: errs.len(), max_rel_err, pass: errs.iter().all(|&e| e <= args.threshold) }
        })
        .collect();
    let timed: Vec<f64> = checks.iter().map(|c| c.gradient_time_s).filter(|&t| t > 0.0).collect();
    let mean_gradient_time_s = (!timed.is_empty()).then(|| timed.iter().sum::<f64>() / timed.len() as f64);

    if let Some(out) = &args.out {
        prepare_out_dir(out)?;
        let path = out.join("audit.json");
        let manifest = RunManifest::new(
            "audit",
            files,
            args.seed,
            args.n_checks,
            args.solver.record(&sampler),
            std::slice::from_ref(&path),
        );
        let report = Report { manifest: manifest.hash.clone(), threshold: args.threshold, classes, mean_gradient_time_s, checks };
        std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
        manifest.write(out)?;
        return verdict(&report.classes);
    }
    verdict(&classes)
}

fn verdict(classes: &[ClassReport]) -> CliResult<()> {
    let failed: Vec<&str> = classes.iter().filter(|c| !c.pass).map(|c| c.class.label()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Audit(format!("classes above threshold: {}", failed.join(", "))))
    }
}
