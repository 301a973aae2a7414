//! Command-line driver: solve problems, build p(x)-harmonic replacements,
//! measure decay profiles, and run the full verification pipeline.
//!
//! Exit codes: 0 all checks pass, 1 usage/configuration error, 2 assumption
//! failure, 3 solver non-convergence, 4 verdict failure.

use anyhow::Context;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vexlab::harness::experiment::{build_problem, ExperimentStatus};
use vexlab::harness::{analyze_solution, convergence_study, run_experiment, ExperimentConfig};
use vexlab::harness::{report, table};
use vexlab::solver::{pxharmonic_replacement, solve_dirichlet};
use vexlab::spaces::verify_assumptions;

#[derive(Parser)]
#[command(
    name = "vexlab",
    about = "variable-exponent p(x)-Laplacian laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the Dirichlet problem and write the solution table.
    Solve { config: PathBuf },
    /// Solve, then compute the p(x)-harmonic replacement on the analysis patch.
    Replace { config: PathBuf },
    /// Solve and write decay profiles for each analysis center.
    Decay { config: PathBuf },
    /// Full pipeline: assumptions, solve, all regularity verdicts.
    Verify { config: PathBuf },
    /// Compute the explicit constants table for the solved problem.
    Constants { config: PathBuf },
    /// Solve a preset at several resolutions and fit error orders.
    Convergence {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Solve { config } => solve_cmd(&config),
        Cmd::Replace { config } => replace_cmd(&config),
        Cmd::Decay { config } => decay_cmd(&config),
        Cmd::Verify { config } => verify_cmd(&config),
        Cmd::Constants { config } => constants_cmd(&config),
        Cmd::Convergence { config, levels } => convergence_cmd(&config, levels),
    }
}

fn load(config: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::from_path(config)
        .with_context(|| format!("loading config {}", config.display()))
}

/// Check assumptions, print any violations by their schema inequality, and
/// return the gate exit code if violated.
fn gate_assumptions(problem: &vexlab::ProblemSpec) -> Option<ExitCode> {
    let report = verify_assumptions(problem);
    for e in &report.entries {
        let status = match e.status {
            vexlab::spaces::AssumptionStatus::Pass => "pass",
            vexlab::spaces::AssumptionStatus::Marginal => "marginal pass",
            vexlab::spaces::AssumptionStatus::Fail => {
                if e.informational {
                    "fail (informational)"
                } else {
                    "FAILED"
                }
            }
        };
        println!("assumption ({}) {}: {} [{}]", e.id, e.inequality, status, e.detail);
    }
    if report.all_pass() {
        None
    } else {
        for e in report.hard_failures() {
            eprintln!("assumption ({}) {} violated: {}", e.id, e.inequality, e.detail);
        }
        Some(ExitCode::from(2))
    }
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn solve_cmd(config: &Path) -> anyhow::Result<ExitCode> {
    let cfg = load(config)?;
    let built = build_problem(&cfg)?;
    if let Some(code) = gate_assumptions(&built.problem) {
        return Ok(code);
    }
    let (u, diag) = solve_dirichlet(&built.problem)?;
    ensure_dir(&cfg.output.dir)?;
    let grid = &built.problem.grid;
    table::write_node_table(&cfg.output.dir.join("solution.vex"), grid.nx(), grid.ny(),
        u.values())?;
    report::write_diagnostics_csv(&cfg.output.dir.join("diagnostics.csv"), &diag)?;
    println!(
        "{}: {} outer iterations, {} linear iterations, residual {:.3e}, converged: {}",
        built.label, diag.outer_iterations, diag.linear_iterations, diag.final_residual,
        diag.converged
    );
    Ok(if diag.converged { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn replace_cmd(config: &Path) -> anyhow::Result<ExitCode> {
    let cfg = load(config)?;
    let built = build_problem(&cfg)?;
    if let Some(code) = gate_assumptions(&built.problem) {
        return Ok(code);
    }
    let (u, diag) = solve_dirichlet(&built.problem)?;
    if !diag.converged {
        eprintln!("solver did not converge (residual {:.3e})", diag.final_residual);
        return Ok(ExitCode::from(3));
    }
    let grid = &built.problem.grid;
    let center = cfg
        .analysis
        .centers
        .first()
        .copied()
        .unwrap_or_else(|| grid.bounds().center());
    let dist = {
        let b = grid.bounds();
        (center[0] - b.a1)
            .min(b.b1 - center[0])
            .min(center[1] - b.a2)
            .min(b.b2 - center[1])
    };
    let radius = cfg.analysis.radius_max.unwrap_or(0.45 * dist);
    let patch = grid.ball_patch(center, radius)?;
    let (v, _) = pxharmonic_replacement(&u, &patch, &built.problem)?;

    let cmp = vexlab::regularity::check_energy_comparison(grid, &u, &v, &patch,
        &built.problem.exponents)?;
    let inner = v.max_abs_over(patch.node_ids());
    let bdry = u.max_abs_over(patch.boundary_node_ids());
    ensure_dir(&cfg.output.dir)?;
    table::write_node_table(&cfg.output.dir.join("replacement.vex"), grid.nx(), grid.ny(),
        v.values())?;
    println!(
        "replacement on B_{radius:.4}({:.4}, {:.4}): energy ratio {:.6} (bound {:.6}), \
         max |v| {:.6} vs boundary max {:.6}",
        center[0], center[1], cmp.ratio, cmp.verdict.threshold, inner, bdry
    );
    let ok = cmp.verdict.pass && inner <= bdry + vexlab::harness::experiment::MAX_PRINCIPLE_SLACK;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(4) })
}

fn decay_cmd(config: &Path) -> anyhow::Result<ExitCode> {
    let cfg = load(config)?;
    let built = build_problem(&cfg)?;
    if let Some(code) = gate_assumptions(&built.problem) {
        return Ok(code);
    }
    let (u, diag) = solve_dirichlet(&built.problem)?;
    if !diag.converged {
        eprintln!("solver did not converge (residual {:.3e})", diag.final_residual);
        return Ok(ExitCode::from(3));
    }
    let analysis = analyze_solution(&built.problem, &u, &cfg.analysis)?;
    ensure_dir(&cfg.output.dir)?;
    for (i, c) in analysis.centers.iter().enumerate() {
        report::write_profile_csv(&cfg.output.dir.join(format!("profile_c{i}.csv")),
            &c.profile_px)?;
        if cfg.output.plots {
            report::write_profile_svg(
                &cfg.output.dir.join(format!("profile_c{i}.svg")),
                &c.profile_px,
                Some(&c.decay_fit),
            )?;
        }
        println!(
            "center ({:.4}, {:.4}): p_m = {:.4}, decay slope {:.4} (threshold {:.4})",
            c.center[0], c.center[1], c.p_m, c.decay_fit.slope, c.morrey.verdict.threshold
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(config: &Path) -> anyhow::Result<ExitCode> {
    let cfg = load(config)?;
    let report = run_experiment(&cfg)?;
    for row in &report.rows {
        println!(
            "{}: threshold {:.6e}, measured {:.6e}, margin {:.1e} -> {}",
            row.name,
            row.threshold,
            row.measured,
            row.margin,
            if row.pass { "pass" } else { "FAIL" }
        );
    }
    if report.status == ExperimentStatus::AssumptionFailure {
        for e in report.assumptions.hard_failures() {
            eprintln!("assumption ({}) {} violated: {}", e.id, e.inequality, e.detail);
        }
    }
    println!("status: {:?} (exit {})", report.status, report.status.exit_code());
    Ok(ExitCode::from(report.status.exit_code() as u8))
}

fn constants_cmd(config: &Path) -> anyhow::Result<ExitCode> {
    let cfg = load(config)?;
    let built = build_problem(&cfg)?;
    if let Some(code) = gate_assumptions(&built.problem) {
        return Ok(code);
    }
    let (u, diag) = solve_dirichlet(&built.problem)?;
    if !diag.converged {
        eprintln!("solver did not converge (residual {:.3e})", diag.final_residual);
        return Ok(ExitCode::from(3));
    }
    let grid = &built.problem.grid;
    let norms = vexlab::solver::gradient_of(grid, &u)?.norms();
    let energy_total = vexlab::spaces::modular(
        &norms,
        &built.problem.exponents,
        vexlab::mesh::Region::whole(grid),
    )?;
    let constants = vexlab::regularity::compute_decay_constants(
        built.problem.dim(),
        built.problem.exponents.sobolev_s(),
        vexlab::spaces::grad_p_norm(grid, &built.problem.exponents),
        grid.bounds().diameter(),
        energy_total,
        cfg.analysis.c_abstract,
    )?;
    ensure_dir(&cfg.output.dir)?;
    report::write_constants_csv(&cfg.output.dir.join("constants.csv"), &constants)?;
    println!(
        "n = {}, s = {}, beta = {:.6}, delta = {:.6}, q = {:.6}, m = {:.6}, eps0 = {:.6}, \
         K = {:.6e}, R1 = {:.6e}",
        constants.n,
        constants.s,
        constants.beta,
        constants.delta,
        constants.q,
        constants.m,
        constants.eps0,
        constants.k,
        constants.r1
    );
    Ok(ExitCode::SUCCESS)
}

fn convergence_cmd(config: &Path, levels: usize) -> anyhow::Result<ExitCode> {
    let cfg = load(config)?;
    let study = convergence_study(&cfg, levels)?;
    ensure_dir(&cfg.output.dir)?;
    let rows: Vec<(usize, f64, f64, f64)> = study
        .rows
        .iter()
        .map(|r| (r.resolution, r.h, r.l2_error, r.max_error))
        .collect();
    report::write_convergence_csv(
        &cfg.output.dir.join("convergence.csv"),
        &rows,
        study.l2_order,
        study.max_order,
    )?;
    println!("resolution          h          l2_error         max_error");
    for r in &study.rows {
        println!(
            "{:>10}   {:>9.3e}   {:>12.6e}   {:>12.6e}",
            r.resolution, r.h, r.l2_error, r.max_error
        );
    }
    println!("fitted orders: l2 {:.3}, max {:.3}", study.l2_order, study.max_order);
    Ok(ExitCode::SUCCESS)
}
