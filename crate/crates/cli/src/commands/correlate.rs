use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use grasp_core::epsilon::{correlation_from_pairs, pairs_to_csv, MIN_CORRELATION_SAMPLES};
use grasp_core::RefinementStatus;

use super::{prepare_out_dir, run_batch, SolverArgs};
use crate::error::{CliError, CliResult};
use crate::inputs::{load_hand, load_object, load_sampler};
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Object configs; at least two.
    #[arg(long = "object", required = true, num_args = 1.., value_delimiter = ',')]
    pub objects: Vec<PathBuf>,
    #[arg(long)]
    pub hand: PathBuf,
    #[arg(long)]
    pub sampler: Option<PathBuf>,
    /// Grasps per object.
    #[arg(short = 'n', default_value_t = 70)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Serialize)]
struct Report {
    manifest: String,
    grasps: u64,
    pairs: usize,
    pearson_r: Option<f64>,
    slope: Option<f64>,
}

pub fn run(args: &CorrelateArgs) -> CliResult<()> {
    if args.objects.len() < 2 {
        return Err(CliError::Config("correlate needs at least two --object configs".into()));
    }
    let mut files = Vec::new();
    let hand = load_hand(&args.hand, &mut files)?;
    let objects = args.objects.iter().map(|p| load_object(p, &mut files)).collect::<CliResult<Vec<_>>>()?;
    let sampler = load_sampler(args.sampler.as_deref(), &mut files)?;
    let settings = args.solver.settings(sampler.clone())?;
    prepare_out_dir(&args.out)?;

    let csv_path = args.out.join("pairs.csv");
    let report_path = args.out.join("correlation.json");
    let manifest = RunManifest::new(
        "correlate",
        files,
        args.seed,
        args.n,
        args.solver.record(&sampler),
        &[csv_path.clone(), report_path.clone()],
    );
    let grouped = run_batch(&hand, &objects, &settings, args.seed, args.n)?;
    let pairs: Vec<(f64, f64)> = grouped
        .iter()
        .flatten()
        .filter(|(_, r)| r.status == RefinementStatus::Feasible)
        .map(|(_, r)| (r.l_bar, r.epsilon))
        .collect();

    std::fs::write(&csv_path, format!("# manifest {}\n{}", manifest.hash, pairs_to_csv(&pairs)))?;
    let fit = (pairs.len() >= MIN_CORRELATION_SAMPLES).then(|| correlation_from_pairs(pairs.clone())).transpose();
    let fit = fit.map_err(|e| CliError::Other(e.into()))?;
    let report = Report {
        manifest: manifest.hash.clone(),
        grasps: args.n * objects.len() as u64,
        pairs: pairs.len(),
        pearson_r: fit.as_ref().map(|c| c.pearson_r),
        slope: fit.as_ref().map(|c| c.slope),
    };
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    manifest.write(&args.out)?;

    match fit {
        Some(c) => {
            println!("{} force-closure grasps, Pearson r = {:.4}, slope = {:.4}", pairs.len(), c.pearson_r, c.slope);
            Ok(())
        }
        None => Err(CliError::Insufficient(format!(
            "{} force-closure grasps, at least {MIN_CORRELATION_SAMPLES} needed",
            pairs.len()
        ))),
    }
}
