//! Run orchestration: scenario execution, beta sweeps, and on-disk
//! artifacts.
//!
//! Every run emits three artifacts into its output directory:
//! `trajectory.csv`, `events.csv`, and `summary.json`, plus
//! `resolved_config.json` recording the fully-defaulted scenario that
//! produced them. Files are written atomically (temp file then rename) so
//! a crash never leaves a truncated artifact behind.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::simulator::{RunMode, RunOutput, Simulator};

/// Resolves and runs one scenario.
///
/// Triggered modes require the scalar-inequality validation to pass;
/// baseline runs skip it since no trigger formula is evaluated.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput> {
    run_scenario_with_beta(scenario, scenario.design.beta)
}

pub fn run_scenario_with_beta(scenario: &Scenario, beta: f64) -> Result<RunOutput> {
    let resolved = scenario.resolve_with_beta(beta)?;
    if resolved.mode != RunMode::Baseline && !resolved.validation.pass() {
        let failures: Vec<String> = resolved
            .validation
            .failures()
            .iter()
            .map(|c| format!("{} (slack {:.6e})", c.name, c.slack))
            .collect();
        return Err(Error::InvalidParams(format!(
            "scalar design inequalities violated: {}",
            failures.join("; ")
        )));
    }
    let sim = Simulator::new(
        &resolved.design,
        &resolved.attack,
        &resolved.params,
        resolved.mode,
        resolved.sim.clone(),
    )?;
    Ok(sim.run())
}

/// One row of a beta sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub mode: RunMode,
    pub events_physical: u64,
    pub events_auxiliary: u64,
    pub events_joint: u64,
    pub min_gap_physical: Option<f64>,
    pub min_gap_auxiliary: Option<f64>,
    pub min_gap_joint: Option<f64>,
    pub tau_x: Option<f64>,
    pub tau_z: Option<f64>,
    pub steady_mean_abs_err: f64,
    pub u_max: f64,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Whether the per-layer minimum inter-event gaps are non-increasing
    /// in beta across the triggered rows. Advisory, not an error.
    pub gaps_monotone_physical: bool,
    pub gaps_monotone_auxiliary: bool,
}

/// Runs the scenario once per beta in parallel; row order follows the
/// input order. `beta = 0` entries run in baseline mode.
pub fn sweep_beta(scenario: &Scenario, betas: &[f64]) -> Result<SweepReport> {
    if betas.is_empty() {
        return Err(Error::Config("sweep requires at least one beta".into()));
    }
    let outputs: Vec<Result<RunOutput>> = betas
        .par_iter()
        .map(|&beta| run_scenario_with_beta(scenario, beta))
        .collect();
    let mut rows = Vec::with_capacity(betas.len());
    for (beta, out) in betas.iter().zip(outputs) {
        let out = out?;
        let s = out.summary;
        rows.push(SweepRow {
            beta: *beta,
            mode: s.mode,
            events_physical: s.events_physical,
            events_auxiliary: s.events_auxiliary,
            events_joint: s.events_joint,
            min_gap_physical: s.min_gap_physical,
            min_gap_auxiliary: s.min_gap_auxiliary,
            min_gap_joint: s.min_gap_joint,
            tau_x: s.tau_x,
            tau_z: s.tau_z,
            steady_mean_abs_err: s.steady_mean_abs_err,
            u_max: s.u_max,
            aborted: s.aborted,
        });
    }
    let gaps_monotone_physical = non_increasing(rows.iter().filter_map(|r| {
        (r.beta > 0.0).then_some(r.min_gap_physical).flatten()
    }));
    let gaps_monotone_auxiliary = non_increasing(rows.iter().filter_map(|r| {
        (r.beta > 0.0).then_some(r.min_gap_auxiliary).flatten()
    }));
    Ok(SweepReport { rows, gaps_monotone_physical, gaps_monotone_auxiliary })
}

fn non_increasing<I: IntoIterator<Item = f64>>(values: I) -> bool {
    let mut prev = f64::INFINITY;
    for v in values {
        if v > prev {
            return false;
        }
        prev = v;
    }
    true
}

/// Average physical state per decimated sample, for consensus plots.
pub fn mean_state_trace(out: &RunOutput) -> Vec<(f64, f64)> {
    out.trajectory
        .rows
        .iter()
        .map(|row| (row.t, row.x.iter().sum::<f64>() / row.x.len() as f64))
        .collect()
}

/// Renders the decimated trajectory as CSV.
pub fn trajectory_csv(out: &RunOutput) -> String {
    let n = out.summary.n_agents;
    let mut s = String::new();
    let mut header = String::from("t");
    for prefix in ["x", "z", "x_bar", "z_bar"] {
        for i in 1..=n {
            let _ = write!(header, ",{prefix}{i}");
        }
    }
    header.push_str(",eta,nu");
    for i in 1..=n {
        let _ = write!(header, ",d{i}");
    }
    header.push_str(",dx_norm,dz_norm,v,u\n");
    s.push_str(&header);
    for row in &out.trajectory.rows {
        let _ = write!(s, "{}", row.t);
        for group in [&row.x, &row.z, &row.x_bar, &row.z_bar] {
            for v in group {
                let _ = write!(s, ",{v}");
            }
        }
        let _ = write!(s, ",{},{}", row.eta, row.nu);
        for v in &row.d {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{},{},{},{}", row.dx_norm, row.dz_norm, row.v, row.u);
    }
    s
}

/// Renders the event log as CSV.
pub fn events_csv(out: &RunOutput) -> String {
    let mut s = String::from("time,layer,gap_since_last,lhs,threshold\n");
    for e in &out.events {
        let _ = writeln!(s, "{},{},{},{},{}", e.t, e.layer, e.gap_since_last, e.lhs, e.threshold);
    }
    s
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().ok_or_else(|| Error::Config("output path has no parent".into()))?;
    std::fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config("output path has no file name".into()))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{file_name}.tmp"));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes `trajectory.csv`, `events.csv`, `summary.json`, and
/// `resolved_config.json` into `dir`.
pub fn write_outputs(dir: &Path, scenario: &Scenario, out: &RunOutput) -> Result<()> {
    write_atomic(&dir.join("trajectory.csv"), &trajectory_csv(out))?;
    write_atomic(&dir.join("events.csv"), &events_csv(out))?;
    write_atomic(
        &dir.join("summary.json"),
        &serde_json::to_string_pretty(&out.summary)?,
    )?;
    write_atomic(&dir.join("resolved_config.json"), &scenario.to_json()?)?;
    Ok(())
}

/// Outcome of comparing a fresh run against previously written artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub trajectory_match: bool,
    pub events_match: bool,
    pub summary_match: bool,
}

impl ReplayReport {
    pub fn pass(&self) -> bool {
        self.trajectory_match && self.events_match && self.summary_match
    }
}

/// Re-runs the scenario and byte-compares against artifacts in `dir`.
pub fn replay(scenario: &Scenario, dir: &Path) -> Result<ReplayReport> {
    let out = run_scenario(scenario)?;
    let read = |name: &str| -> Result<String> { Ok(std::fs::read_to_string(dir.join(name))?) };
    Ok(ReplayReport {
        trajectory_match: read("trajectory.csv")? == trajectory_csv(&out),
        events_match: read("events.csv")? == events_csv(&out),
        summary_match: read("summary.json")? == serde_json::to_string_pretty(&out.summary)?,
    })
}
