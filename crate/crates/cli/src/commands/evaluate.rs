use std::path::PathBuf;

use clap::Args;
use nalgebra::DVector;
use serde::Serialize;

use grasp_core::epsilon::epsilon_exact_points;
use grasp_core::min_weight::solve_min_weight_matrix;
use grasp_core::refinement::check_grasp;
use grasp_core::{Halfspace, RefinementProblem, Residuals};

use super::SolverArgs;
use crate::error::{config_err, CliError, CliResult};
use crate::inputs::{load_hand, load_object, load_sampler};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub hand: PathBuf,
    #[arg(long)]
    pub object: PathBuf,
    /// Joint configuration, comma separated.
    #[arg(long, required = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub q: Vec<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Serialize)]
struct Evaluation {
    l_star: Option<f64>,
    l_bar: Option<f64>,
    epsilon: Option<f64>,
    feasible: bool,
    residuals: Residuals,
}

/// Metrics and constraint residuals of one configuration, printed as JSON.
pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    let mut files = Vec::new();
    let hand = load_hand(&args.hand, &mut files)?;
    let object = load_object(&args.object, &mut files)?;
    let settings = args.solver.settings(load_sampler(None, &mut files)?)?;
    settings.refinement.validate(&object).map_err(config_err)?;
    if args.q.len() != hand.dofs() {
        return Err(CliError::Config(format!("--q has {} values, the hand has {} joints", args.q.len(), hand.dofs())));
    }
    let q = DVector::from_vec(args.q.clone());
    let problem = RefinementProblem {
        hand: &hand,
        object: &object,
        table: Some(Halfspace::table()),
        q0: q.clone(),
        settings: settings.refinement,
    };
    let cert = check_grasp(&problem, &q);
    let sol = cert.wrenches.as_ref().and_then(|ws| solve_min_weight_matrix(&ws.matrix).ok());
    let epsilon = match (&cert.wrenches, &sol) {
        (Some(ws), Some(s)) => epsilon_exact_points(&ws.matrix, s.ell).ok().map(|e| e.epsilon),
        _ => None,
    };
    let eval = Evaluation {
        l_star: sol.as_ref().map(|s| s.ell),
        l_bar: sol.as_ref().map(|s| s.ell_bar),
        epsilon,
        feasible: cert.residuals.within(&problem.settings.tol),
        residuals: cert.residuals,
    };
    println!("{}", serde_json::to_string_pretty(&eval)?);
    Ok(())
}
