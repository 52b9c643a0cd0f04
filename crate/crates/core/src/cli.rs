//! The `cutflux` command line: argument parsing, output files, exit codes.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::{value::StrDeserializer, DeserializeOwned, IntoDeserializer};

use crate::amr::{run_amr_observed, uniform_study, IterationRecord, StopReason};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::mixed_oracle::{compare, solve_mixed};
use crate::output;

#[derive(Debug, Parser)]
#[command(name = "cutflux", version, about = "Cut finite elements with equilibrated flux recovery and adaptivity")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run configuration (TOML); flags override its keys.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve once, recover the flux and estimate.
    Solve(SolveArgs),
    /// Convergence study on uniformly refined meshes.
    Uniform(UniformArgs),
    /// Adaptive solve, estimate, mark, refine loop.
    Amr(AmrArgs),
    /// Compare the local flux pipeline with the global mixed solve.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// Benchmark problem: peak, franke, flower or reentrant.
    #[arg(long)]
    pub problem: Option<String>,
    /// Structured cells per side of the initial mesh.
    #[arg(long)]
    pub cells: Option<usize>,
    /// regular or crossed.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Nitsche penalty [default: 10]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Ghost penalty [default: 0.1]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// rt0 or rt1.
    #[arg(long)]
    pub flux_order: Option<String>,
    /// Output directory [default: $CUTFLUX_OUT_DIR, else ./cutflux-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip CSV output
    #[arg(long)]
    pub no_csv: bool,
    /// Skip VTK output
    #[arg(long)]
    pub no_vtk: bool,
}

#[derive(Debug, Default, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Estimator whose efficiency is reported: eta1, eta2 or eta_res.
    #[arg(long)]
    pub estimator: Option<String>,
}

#[derive(Debug, Default, Args)]
pub struct UniformArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of meshes; each halves the cell size of the previous one.
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct AmrArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// eta1, eta2 or eta_res.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Dörfler bulk fraction in (0, 1].
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Stop before a mesh with more dofs than this
    #[arg(long)]
    pub max_dofs: Option<usize>,
    /// Stop after this many solves
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// squared or linear.
    #[arg(long)]
    pub marking_metric: Option<String>,
    /// Write a VTK file for every iteration.
    #[arg(long)]
    pub snapshots: bool,
}

#[derive(Debug, Default, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Largest number of broken-space unknowns for the dense mixed solve.
    #[arg(long)]
    pub max_unknowns: Option<usize>,
    /// Max-norm tolerance of the comparison [default: 1e-8]
    #[arg(long)]
    pub tolerance: Option<f64>,
}

/// How a successful run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// A check ran but did not pass.
    CheckFailed(String),
    /// The adaptive loop stopped early; partial results were written.
    Aborted(String),
}

/// `2` for configuration problems, `3` for solver failures, `1` otherwise.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidInput(_) | Error::EmptyDomain => 2,
        Error::SolverFailure { .. } | Error::OracleFailure(_) | Error::Internal(_) => 3,
        Error::Io(_) => 1,
    }
}

pub fn outcome_code(outcome: &Outcome) -> u8 {
    match outcome {
        Outcome::Ok => 0,
        Outcome::CheckFailed(_) => 1,
        Outcome::Aborted(_) => 3,
    }
}

fn parse_enum<T: DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    let de: StrDeserializer<serde::de::value::Error> = s.into_deserializer();
    T::deserialize(de).map_err(|_| Error::Config(format!("invalid {what} `{s}`")))
}

fn parse_estimator(s: Option<&String>) -> Result<Option<Estimator>> {
    s.map(|s| s.parse()).transpose()
}

impl CommonArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(p) = &self.problem {
            cfg.problem.name = Some(p.clone());
            cfg.problem.custom = None;
        }
        if self.cells.is_some() {
            cfg.mesh.cells = self.cells;
        }
        if let Some(p) = &self.pattern {
            cfg.mesh.pattern = Some(parse_enum("mesh pattern", p)?);
        }
        let d = &mut cfg.discretization;
        d.beta = self.beta.or(d.beta);
        d.gamma = self.gamma.or(d.gamma);
        if let Some(o) = &self.flux_order {
            d.flux_order = Some(parse_enum("flux order", o)?);
        }
        if self.out.is_some() {
            cfg.output.dir = self.out.clone();
        }
        cfg.output.csv &= !self.no_csv;
        cfg.output.vtk &= !self.no_vtk;
        Ok(())
    }
}

/// Loads the configuration file, if any, and applies the flags of `command`.
pub fn resolve_config(config: Option<&Path>, command: &Command) -> Result<RunConfig> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match command {
        Command::Solve(a) => {
            a.common.apply(&mut cfg)?;
            cfg.amr.estimator = parse_estimator(a.estimator.as_ref())?.or(cfg.amr.estimator);
        }
        Command::Uniform(a) => {
            a.common.apply(&mut cfg)?;
            cfg.uniform.levels = a.levels.unwrap_or(cfg.uniform.levels);
        }
        Command::Amr(a) => {
            a.common.apply(&mut cfg)?;
            let s = &mut cfg.amr;
            s.estimator = parse_estimator(a.estimator.as_ref())?.or(s.estimator);
            s.fraction = a.fraction.or(s.fraction);
            s.max_dofs = a.max_dofs.or(s.max_dofs);
            s.max_iterations = a.max_iterations.or(s.max_iterations);
            if let Some(m) = &a.marking_metric {
                s.marking_metric = Some(parse_enum("marking metric", m)?);
            }
            s.snapshots |= a.snapshots;
        }
        Command::OracleCheck(a) => {
            a.common.apply(&mut cfg)?;
            cfg.oracle.max_unknowns = a.max_unknowns.unwrap_or(cfg.oracle.max_unknowns);
            cfg.oracle.tolerance = a.tolerance.unwrap_or(cfg.oracle.tolerance);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    if cfg.output.csv || cfg.output.vtk {
        std::fs::create_dir_all(&dir)?;
    }
    Ok(dir)
}

fn fmt_opt(x: Option<f64>, prec: usize) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$e}"))
}

fn print_record(out: &mut impl std::io::Write, r: &IterationRecord, estimator: Estimator) -> Result<()> {
    writeln!(
        out,
        "{:>4} {:>7} {:>11.4e} {:>11.4e} {:>11.4e} {:>11} {:>11} {:>7}",
        r.iteration,
        r.dofs,
        r.eta1,
        r.eta2,
        r.eta_res,
        fmt_opt(r.errors.map(|e| e.energy), 4),
        fmt_opt(r.errors.map(|e| e.flux), 4),
        r.efficiency(estimator).map_or("-".to_string(), |e| format!("{e:.3}")),
    )?;
    Ok(())
}

fn print_trace_header(out: &mut impl std::io::Write) -> Result<()> {
    writeln!(
        out,
        "{:>4} {:>7} {:>11} {:>11} {:>11} {:>11} {:>11} {:>7}",
        "it", "dofs", "eta1", "eta2", "eta_res", "energy", "flux", "eff"
    )?;
    Ok(())
}

pub fn cmd_solve(cfg: &RunConfig, out: &mut impl std::io::Write) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let estimator = cfg.amr_config(&problem).estimator;
    let mesh = problem.initial_mesh()?;
    let analysis = problem.analyze(&mesh, &cfg.params(), cfg.flux_order())?;
    let record = IterationRecord::from_analysis(0, &analysis, 0);
    print_trace_header(out)?;
    print_record(out, &record, estimator)?;
    writeln!(
        out,
        "conservation {:.2e}, normal jump {:.2e}, multiplier stability {:.3}",
        record.conservation, record.normal_jump, analysis.reconstruction.multiplier.stability
    )?;
    let dir = prepare_dir(cfg)?;
    if cfg.output.vtk {
        output::solution_grid(&analysis).write(&dir.join("solution.vtk"))?;
        output::flux_grid(&analysis).write(&dir.join("flux.vtk"))?;
    }
    if cfg.output.csv {
        let records = [record];
        output::write_text(&dir.join("report.csv"), &output::trace_csv(&records, estimator))?;
        output::write_text(&dir.join("diagnostics.csv"), &output::diagnostics_csv(&records))?;
    }
    Ok(Outcome::Ok)
}

pub fn cmd_uniform(cfg: &RunConfig, out: &mut impl std::io::Write) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let rows = uniform_study(&problem, problem.initial_cells, cfg.uniform.levels, &cfg.params(), cfg.flux_order())?;
    writeln!(
        out,
        "{:>6} {:>7} {:>10} {:>11} {:>7} {:>11} {:>7} {:>11}",
        "cells", "dofs", "h", "energy", "rate", "flux", "rate", "eta1"
    )?;
    let rate = |r: Option<f64>| r.map_or("-".to_string(), |r| format!("{r:.3}"));
    for row in &rows {
        let r = &row.record;
        writeln!(
            out,
            "{:>6} {:>7} {:>10.4e} {:>11} {:>7} {:>11} {:>7} {:>11.4e}",
            row.cells,
            r.dofs,
            r.h,
            fmt_opt(r.errors.map(|e| e.energy), 4),
            rate(row.energy_rate),
            fmt_opt(r.errors.map(|e| e.flux), 4),
            rate(row.flux_rate),
            r.eta1
        )?;
    }
    let dir = prepare_dir(cfg)?;
    if cfg.output.csv {
        output::write_text(&dir.join("uniform.csv"), &output::uniform_csv(&rows))?;
    }
    Ok(Outcome::Ok)
}

pub fn cmd_amr(cfg: &RunConfig, out: &mut impl std::io::Write) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let config = cfg.amr_config(&problem);
    let dir = prepare_dir(cfg)?;
    let snapshots = cfg.output.vtk && cfg.amr.snapshots;
    let mut last_vtk = String::new();
    print_trace_header(out)?;
    let trace = run_amr_observed(&problem, &config, problem.initial_mesh()?, |record, analysis| {
        print_record(out, record, config.estimator)?;
        if cfg.output.vtk {
            last_vtk = output::solution_grid(analysis).to_vtk_string();
            if snapshots {
                output::write_text(&dir.join(format!("iteration_{:03}.vtk", record.iteration)), &last_vtk)?;
            }
        }
        Ok(())
    })?;
    if cfg.output.csv {
        output::write_text(&dir.join("trace.csv"), &output::amr_trace_csv(&trace))?;
        output::write_text(&dir.join("diagnostics.csv"), &output::diagnostics_csv(&trace.iterations))?;
    }
    if cfg.output.vtk && !last_vtk.is_empty() {
        output::write_text(&dir.join("final_mesh.vtk"), &last_vtk)?;
    }
    for e in [Estimator::Eta1, Estimator::Eta2, Estimator::EtaRes] {
        writeln!(
            out,
            "{e}: mean efficiency {}, slope over last 5 iterations {}",
            trace.mean_efficiency(e).map_or("-".into(), |m| format!("{m:.3}")),
            trace.decay_slope(e, 5).map_or("-".into(), |s| format!("{s:.3}")),
        )?;
    }
    writeln!(out, "stopped: {}", stop_name(trace.stop))?;
    Ok(match (trace.stop, trace.failure) {
        (StopReason::Failed, failure) => Outcome::Aborted(failure.unwrap_or_else(|| "adaptive loop failed".into())),
        _ => Outcome::Ok,
    })
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::DofCap => "dof cap reached",
        StopReason::MaxIterations => "iteration limit reached",
        StopReason::Converged => "all indicators vanished",
        StopReason::Failed => "failed",
    }
}

pub fn cmd_oracle_check(cfg: &RunConfig, out: &mut impl std::io::Write) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let params = cfg.params();
    let mesh = problem.initial_mesh()?;
    let analysis = problem.analyze(&mesh, &params, cfg.flux_order())?;
    let mixed = solve_mixed(&analysis.topology, &analysis.data, &params, cfg.oracle.max_unknowns)?;
    let c = compare(&analysis.topology, &analysis.solution, &analysis.reconstruction.multiplier, &mixed);
    let tol = cfg.oracle.tolerance;
    writeln!(out, "unknowns          {}", c.unknowns)?;
    writeln!(out, "max |u - u_mixed| {:.3e}", c.u_difference)?;
    writeln!(out, "max |θ - θ_mixed| {:.3e} (scale {:.3e})", c.theta_difference, c.theta_scale)?;
    writeln!(out, "max jump of u     {:.3e}", c.max_jump)?;
    writeln!(out, "saddle residual   {:.3e}", c.saddle_residual)?;
    if c.passes(tol) {
        writeln!(out, "PASS at tolerance {tol:e}")?;
        Ok(Outcome::Ok)
    } else {
        writeln!(out, "FAIL at tolerance {tol:e}")?;
        Ok(Outcome::CheckFailed(format!("local and mixed solutions differ beyond {tol:e}")))
    }
}

/// Resolves the configuration and runs the subcommand on `out`.
pub fn run(cli: &Cli, out: &mut (impl std::io::Write + Send)) -> Result<Outcome> {
    let cfg = resolve_config(cli.config.as_deref(), &cli.command)?;
    let go = |out: &mut _| match &cli.command {
        Command::Solve(_) => cmd_solve(&cfg, out),
        Command::Uniform(_) => cmd_uniform(&cfg, out),
        Command::Amr(_) => cmd_amr(&cfg, out),
        Command::OracleCheck(_) => cmd_oracle_check(&cfg, out),
    };
    match cli.threads {
        Some(0) => Err(Error::Config("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
            pool.install(|| go(out))
        }
        None => go(out),
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let mut stdout = std::io::stdout();
    let code = match run(&cli, &mut stdout) {
        Ok(outcome) => {
            match &outcome {
                Outcome::Ok => {}
                Outcome::CheckFailed(msg) | Outcome::Aborted(msg) => eprintln!("cutflux: {msg}"),
            }
            outcome_code(&outcome)
        }
        Err(e) => {
            eprintln!("cutflux: {e}");
            exit_code(&e)
        }
    };
    let _ = stdout.flush();
    ExitCode::from(code)
}
