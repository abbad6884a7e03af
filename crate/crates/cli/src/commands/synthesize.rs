use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use grasp_core::{RefinementResult, RefinementStatus};

use super::{prepare_out_dir, run_batch, GraspRecord, SolverArgs};
use crate::error::{CliError, CliResult};
use crate::inputs::{load_hand, load_object, load_sampler};
use crate::manifest::RunManifest;
use crate::stats::{spread, Spread};

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub object: PathBuf,
    #[arg(long)]
    pub hand: PathBuf,
    #[arg(long)]
    pub sampler: Option<PathBuf>,
    /// Number of grasps.
    #[arg(short = 'n', default_value_t = 20)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub manifest: String,
    pub object: String,
    pub grasps: usize,
    pub feasible: usize,
    pub success_rate: Option<f64>,
    /// Over feasible grasps.
    pub l_bar: Spread,
    /// Over feasible grasps.
    pub epsilon: Spread,
    /// Wall time per refinement solve, over all grasps.
    pub solve_time_s: Spread,
    pub attempts: Spread,
}

pub fn summarize(manifest: &str, object: &str, results: &[(u64, RefinementResult)]) -> Summary {
    let ok: Vec<&RefinementResult> =
        results.iter().map(|(_, r)| r).filter(|r| r.status == RefinementStatus::Feasible).collect();
    Summary {
        manifest: manifest.into(),
        object: object.into(),
        grasps: results.len(),
        feasible: ok.len(),
        success_rate: (!results.is_empty()).then(|| ok.len() as f64 / results.len() as f64),
        l_bar: spread(ok.iter().map(|r| r.l_bar)),
        epsilon: spread(ok.iter().map(|r| r.epsilon)),
        solve_time_s: spread(results.iter().map(|(_, r)| r.wall_time_s / r.attempts as f64)),
        attempts: spread(results.iter().map(|(_, r)| r.attempts as f64)),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

pub fn print_summary(s: &Summary) {
    println!("{:<28} {:>7} {:>9} {:>18} {:>18} {:>18} {:>14}", "object", "grasps", "feasible", "l_bar med (iqr)", "eps med (iqr)", "solve s med (iqr)", "attempts med");
    let pair = |sp: &Spread| format!("{} ({})", cell(sp.median), cell(sp.iqr));
    println!(
        "{:<28} {:>7} {:>9} {:>18} {:>18} {:>18} {:>14}",
        s.object,
        s.grasps,
        s.feasible,
        pair(&s.l_bar),
        pair(&s.epsilon),
        pair(&s.solve_time_s),
        cell(s.attempts.median)
    );
}

pub fn run(args: &SynthesizeArgs) -> CliResult<()> {
    let mut files = Vec::new();
    let hand = load_hand(&args.hand, &mut files)?;
    let object = load_object(&args.object, &mut files)?;
    let sampler = load_sampler(args.sampler.as_deref(), &mut files)?;
    let settings = args.solver.settings(sampler.clone())?;
    prepare_out_dir(&args.out)?;

    let results_path = args.out.join("results.jsonl");
    let summary_path = args.out.join("summary.json");
    let manifest = RunManifest::new(
        "synthesize",
        files,
        args.seed,
        args.n,
        args.solver.record(&sampler),
        &[results_path.clone(), summary_path.clone()],
    );
    let results = run_batch(&hand, std::slice::from_ref(&object), &settings, args.seed, args.n)?.remove(0);

    let name = args.object.display().to_string();
    let mut out = std::io::BufWriter::new(std::fs::File::create(&results_path)?);
    for (seed, r) in &results {
        let rec = GraspRecord { object: &name, seed: *seed, result: r, manifest: &manifest.hash };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let summary = summarize(&manifest.hash, &name, &results);
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    manifest.write(&args.out)?;
    print_summary(&summary);

    if args.n > 0 && summary.feasible == 0 {
        return Err(CliError::Insufficient(format!("none of the {} grasps is feasible", args.n)));
    }
    Ok(())
}
