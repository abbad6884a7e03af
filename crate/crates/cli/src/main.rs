//! `grasp`: batch grasp synthesis, metric correlation and gradient audits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod inputs;
mod manifest;
mod stats;

use clap::{Parser, Subcommand};

use commands::{audit, correlate, evaluate, synthesize};

#[derive(Debug, Parser)]
#[command(name = "grasp", version, about = "Grasp synthesis and analysis with the min-weight metric")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample and refine grasps; writes results.jsonl, summary.json, manifest.json.
    Synthesize(synthesize::SynthesizeArgs),
    /// Pair min-weight and ε over several objects; writes pairs.csv, correlation.json.
    Correlate(correlate::CorrelateArgs),
    /// Compare analytic derivatives with finite differences.
    Audit(audit::AuditArgs),
    /// Report metrics and constraint residuals of one configuration.
    Evaluate(evaluate::EvaluateArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synthesize(a) => synthesize::run(a),
        Command::Correlate(a) => correlate::run(a),
        Command::Audit(a) => audit::run(a),
        Command::Evaluate(a) => evaluate::run(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
