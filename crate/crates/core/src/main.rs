use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

use auxlayer::config::Scenario;
use auxlayer::design::coupling_validate;
use auxlayer::experiment::{replay, run_scenario, sweep_beta, write_outputs};
use auxlayer::simulator::RunMode;

#[derive(Parser)]
#[command(
    name = "auxlayer",
    about = "Simulate auxiliary-layer resilient consensus with event-triggered inter-layer communication",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario: graph, matrix certificates, scalar inequalities.
    Validate {
        scenario: PathBuf,
    },
    /// Run a scenario and write trajectory, event, and summary artifacts.
    Run {
        scenario: PathBuf,
        /// Output directory for the artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the scenario once per beta and print the comparison table.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated beta values; defaults to the scenario's sweep section.
        #[arg(long, value_delimiter = ',')]
        betas: Vec<f64>,
        /// Where to write sweep.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the resolved matrix bundle and certificates as JSON.
    DesignReport {
        scenario: PathBuf,
    },
    /// Re-run a scenario and byte-compare against existing artifacts.
    Replay {
        scenario: PathBuf,
        /// Directory holding the artifacts of a previous run.
        #[arg(long, default_value = "out")]
        dir: PathBuf,
    },
}

#[derive(Serialize)]
struct DesignReport {
    n_agents: usize,
    beta: f64,
    a: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    b: Vec<f64>,
    d: Vec<f64>,
    px_diag: Vec<f64>,
    pz_diag: Vec<f64>,
    lambda_min_qx: f64,
    lambda_min_qz: f64,
    px_norm: f64,
    px_k_norm: f64,
    pz_g_norm: f64,
    coupling_residual: f64,
    d_residual: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    kappa: f64,
    epsilon: f64,
    mu: f64,
    omega: f64,
    sigma1: f64,
    sigma2: f64,
    d_bar: f64,
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> auxlayer::Result<ExitCode> {
    match cli.command {
        Command::Validate { scenario } => {
            let scenario = Scenario::from_path(&scenario)?;
            let resolved = scenario.resolve()?;
            let coupling = coupling_validate(&resolved.design);
            println!(
                "graph: {} agents, system matrix Hurwitz: ok",
                resolved.design.n_agents()
            );
            println!(
                "coupling: |K^T Px - Pz G| = {:.3e}, |D - G 1| = {:.3e} ({})",
                coupling.coupling_residual,
                coupling.d_residual,
                if coupling.pass { "pass" } else { "FAIL" }
            );
            for check in &resolved.validation.checks {
                println!(
                    "{:<40} slack = {:>13.6e}  {}",
                    check.name,
                    check.slack,
                    if check.pass { "pass" } else { "FAIL" }
                );
            }
            let scalars_ok =
                resolved.mode == RunMode::Baseline || resolved.validation.pass();
            if coupling.pass && scalars_ok {
                println!("scenario valid");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("scenario INVALID");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Run { scenario, out } => {
            let sc = Scenario::from_path(&scenario)?;
            let output = run_scenario(&sc)?;
            write_outputs(&out, &sc, &output)?;
            let s = &output.summary;
            println!(
                "ran {} steps (dt = {}, horizon = {} s, mode {:?}, beta = {})",
                s.steps, s.dt, s.horizon, s.mode, s.beta
            );
            println!(
                "events: physical {}, auxiliary {}, joint {}",
                s.events_physical, s.events_auxiliary, s.events_joint
            );
            if let Some(g) = s.min_gap_physical {
                println!("min physical gap {g:.6} (analytic bound {:?})", s.tau_x);
            }
            if let Some(g) = s.min_gap_auxiliary {
                println!("min auxiliary gap {g:.6} (analytic bound {:?})", s.tau_z);
            }
            println!(
                "steady |x0 - x_avg| = {:.6e}, final max |x_i - x0| = {:.6e}",
                s.steady_mean_abs_err, s.final_max_x_err
            );
            println!("artifacts written to {}", out.display());
            if let Some(reason) = &s.aborted {
                eprintln!("run aborted early: {reason}");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { scenario, betas, out } => {
            let sc = Scenario::from_path(&scenario)?;
            let betas = if betas.is_empty() {
                sc.sweep
                    .as_ref()
                    .map(|s| s.betas.clone())
                    .ok_or_else(|| {
                        auxlayer::Error::Config(
                            "no --betas given and the scenario has no sweep section".into(),
                        )
                    })?
            } else {
                betas
            };
            let report = sweep_beta(&sc, &betas)?;
            println!(
                "{:>6} {:>10} {:>8} {:>8} {:>12} {:>12} {:>12}",
                "beta", "mode", "ev_phys", "ev_aux", "min_gap_x", "min_gap_z", "steady_err"
            );
            for row in &report.rows {
                println!(
                    "{:>6} {:>10} {:>8} {:>8} {:>12} {:>12} {:>12.4e}",
                    row.beta,
                    format!("{:?}", row.mode),
                    row.events_physical,
                    row.events_auxiliary,
                    row.min_gap_physical.map_or("-".into(), |g| format!("{g:.6}")),
                    row.min_gap_auxiliary.map_or("-".into(), |g| format!("{g:.6}")),
                    row.steady_mean_abs_err,
                );
            }
            println!(
                "min gaps non-increasing in beta: physical {}, auxiliary {}",
                if report.gaps_monotone_physical { "PASS" } else { "FAIL" },
                if report.gaps_monotone_auxiliary { "PASS" } else { "FAIL" },
            );
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&report)?)?;
            let aborted = report.rows.iter().any(|r| r.aborted.is_some());
            Ok(if aborted { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::DesignReport { scenario } => {
            let sc = Scenario::from_path(&scenario)?;
            let resolved = sc.resolve()?;
            let d = &resolved.design;
            let p = &resolved.params;
            let coupling = coupling_validate(d);
            let report = DesignReport {
                n_agents: d.n_agents(),
                beta: d.beta,
                a: rows(&d.a),
                h: rows(&d.h),
                k: rows(&d.k),
                g: rows(&d.g),
                b: d.b.iter().copied().collect(),
                d: d.d.iter().copied().collect(),
                px_diag: d.px.diagonal().iter().copied().collect(),
                pz_diag: d.pz.diagonal().iter().copied().collect(),
                lambda_min_qx: d.lambda_min_qx,
                lambda_min_qz: d.lambda_min_qz,
                px_norm: d.px_norm,
                px_k_norm: d.px_k_norm,
                pz_g_norm: d.pz_g_norm,
                coupling_residual: coupling.coupling_residual,
                d_residual: coupling.d_residual,
                c1: p.c1,
                c2: p.c2,
                c3: p.c3,
                kappa: p.kappa,
                epsilon: p.epsilon,
                mu: p.mu,
                omega: p.omega,
                sigma1: p.sigma1,
                sigma2: p.sigma2,
                d_bar: p.d_bar,
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { scenario, dir } => {
            let sc = Scenario::from_path(&scenario)?;
            let report = replay(&sc, &dir)?;
            println!(
                "trajectory: {}, events: {}, summary: {}",
                if report.trajectory_match { "match" } else { "MISMATCH" },
                if report.events_match { "match" } else { "MISMATCH" },
                if report.summary_match { "match" } else { "MISMATCH" },
            );
            Ok(if report.pass() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
