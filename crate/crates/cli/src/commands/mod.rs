pub mod audit;
pub mod correlate;
pub mod evaluate;
pub mod synthesize;

use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use grasp_core::refinement::synthesize;
use grasp_core::{
    Halfspace, HandModel, ObjectModel, RefinementResult, RefinementSettings, SamplerConfig, SynthesisSettings,
};

use crate::error::{config_err, CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Wall-clock budget per grasp in seconds.
    #[arg(long = "budget-s", default_value_t = 60.0)]
    pub budget_s: f64,
    /// Required normalized min-weight value.
    #[arg(long = "kl", default_value_t = 0.3)]
    pub k_l: f64,
    /// Friction coefficient used by the optimizer.
    #[arg(long = "mu-opt", default_value_t = 0.5)]
    pub mu_opt: f64,
    /// Sides of each friction pyramid.
    #[arg(long = "ns", default_value_t = 4)]
    pub sides: usize,
    /// Sampled candidates per grasp.
    #[arg(long, default_value_t = 10)]
    pub attempts: usize,
}

/// Settings recorded in the manifest.
#[derive(Debug, Serialize)]
struct SettingsRecord {
    budget_s: f64,
    k_l: f64,
    mu_opt: f64,
    sides: usize,
    attempts: usize,
    sampler: SamplerConfig,
}

impl SolverArgs {
    pub fn settings(&self, sampler: SamplerConfig) -> CliResult<SynthesisSettings> {
        if !(self.budget_s > 0.0 && self.budget_s.is_finite()) {
            return Err(CliError::Config(format!("--budget-s must be positive, got {}", self.budget_s)));
        }
        if self.attempts == 0 {
            return Err(CliError::Config("--attempts must be at least 1".into()));
        }
        Ok(SynthesisSettings {
            refinement: RefinementSettings { k_l: self.k_l, mu_opt: self.mu_opt, sides: self.sides, ..Default::default() },
            sampler,
            max_attempts: self.attempts,
            budget: Duration::from_secs_f64(self.budget_s),
        })
    }

    pub fn record(&self, sampler: &SamplerConfig) -> serde_json::Value {
        serde_json::to_value(SettingsRecord {
            budget_s: self.budget_s,
            k_l: self.k_l,
            mu_opt: self.mu_opt,
            sides: self.sides,
            attempts: self.attempts,
            sampler: sampler.clone(),
        })
        .expect("settings serialize")
    }
}

/// One synthesized grasp as written to the results file.
#[derive(Debug, Serialize)]
pub struct GraspRecord<'a> {
    pub object: &'a str,
    pub seed: u64,
    #[serde(flatten)]
    pub result: &'a RefinementResult,
    pub manifest: &'a str,
}

/// Runs `n` grasps per object in parallel; grasp `i` uses seed `seed + i`.
/// Results come back grouped by object, then sorted by seed.
pub fn run_batch(
    hand: &HandModel,
    objects: &[ObjectModel],
    settings: &SynthesisSettings,
    seed: u64,
    n: u64,
) -> CliResult<Vec<Vec<(u64, RefinementResult)>>> {
    for object in objects {
        settings.refinement.validate(object).map_err(config_err)?;
    }
    let jobs: Vec<(usize, u64)> = (0..objects.len()).flat_map(|o| (0..n).map(move |i| (o, seed.wrapping_add(i)))).collect();
    let results = jobs
        .par_iter()
        .map(|&(o, s)| synthesize(hand, &objects[o], Some(Halfspace::table()), settings, s).map(|r| (o, s, r)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Other(e.into()))?;
    let mut grouped: Vec<Vec<(u64, RefinementResult)>> = vec![Vec::new(); objects.len()];
    for (o, s, r) in results {
        grouped[o].push((s, r));
    }
    Ok(grouped)
}

pub fn prepare_out_dir(out: &PathBuf) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", out.display())))
}
