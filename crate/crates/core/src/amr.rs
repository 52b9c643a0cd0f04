//! Adaptive loop with Dörfler marking, and uniform convergence studies.

use serde::{Deserialize, Serialize};

use crate::cutfem::CutFemParams;
use crate::error::{Error, Result};
use crate::estimate::{Estimator, TrueErrors};
use crate::flux::FluxOrder;
use crate::mesh::BackgroundMesh;
use crate::problems::{Analysis, Problem};
use crate::refine::refine;

/// Whether the bulk criterion sums squared or plain indicators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkingMetric {
    #[default]
    Squared,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Marking {
    /// Positions into the indicator slice, largest indicator first.
    pub marked: Vec<usize>,
    /// All indicators vanish; nothing left to refine.
    pub converged: bool,
}

/// Smallest set of largest indicators whose share reaches `fraction` of the total.
///
/// Ties are broken by position, which keeps the result deterministic.
pub fn dorfler_mark(indicators: &[f64], fraction: f64, metric: MarkingMetric) -> Result<Marking> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("marking fraction {fraction} outside (0, 1]")));
    }
    if indicators.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidArgument("indicators must be finite and nonnegative".into()));
    }
    let weight = |x: f64| match metric {
        MarkingMetric::Squared => x * x,
        MarkingMetric::Linear => x,
    };
    let total: f64 = indicators.iter().map(|&x| weight(x)).sum();
    if total == 0.0 {
        return Ok(Marking { marked: Vec::new(), converged: true });
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let target = fraction * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for i in order {
        if indicators[i] == 0.0 {
            break;
        }
        marked.push(i);
        acc += weight(indicators[i]);
        // relative slack so that fraction = 1 is reachable despite round-off
        if acc >= target * (1.0 - 1e-12) {
            break;
        }
    }
    Ok(Marking { marked, converged: false })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmrConfig {
    pub estimator: Estimator,
    pub fraction: f64,
    /// Stop before recording a mesh with more dofs than this.
    pub max_dofs: usize,
    pub max_iterations: usize,
    pub marking_metric: MarkingMetric,
    pub flux_order: FluxOrder,
    pub params: CutFemParams,
}

impl Default for AmrConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::Eta1,
            fraction: 0.25,
            max_dofs: 5000,
            max_iterations: 100,
            marking_metric: MarkingMetric::Squared,
            flux_order: FluxOrder::Rt1,
            params: CutFemParams::default(),
        }
    }
}

impl AmrConfig {
    /// The adaptive protocol recommended for `problem`.
    pub fn for_problem(problem: &Problem) -> Self {
        Self {
            estimator: problem.protocol.estimator,
            fraction: problem.protocol.fraction,
            max_dofs: problem.protocol.max_dofs,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Config(format!("fraction must lie in (0, 1], got {}", self.fraction)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        self.params.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// One recorded mesh of a study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub dofs: usize,
    pub active_triangles: usize,
    /// Largest element diameter of the background mesh.
    pub h: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta_res: f64,
    pub errors: Option<TrueErrors>,
    /// Relative local conservation defect of the recovered flux.
    pub conservation: f64,
    /// Largest normal jump of the flux relative to its largest magnitude.
    pub normal_jump: f64,
    pub marked: usize,
}

impl IterationRecord {
    pub fn from_analysis(iteration: usize, analysis: &Analysis, marked: usize) -> Self {
        let report = &analysis.report;
        let (jump, scale) = analysis.normal_jump;
        Self {
            iteration,
            dofs: report.dofs,
            active_triangles: report.triangles.len(),
            h: analysis.topology.mesh().max_diameter(),
            eta1: report.eta1,
            eta2: report.eta2,
            eta_res: report.eta_res,
            errors: report.errors,
            conservation: analysis.conservation.relative(),
            normal_jump: if scale > 0.0 { jump / scale } else { jump },
            marked,
        }
    }

    pub fn estimator(&self, which: Estimator) -> f64 {
        match which {
            Estimator::Eta1 => self.eta1,
            Estimator::Eta2 => self.eta2,
            Estimator::EtaRes => self.eta_res,
        }
    }

    /// `η / ‖∇(u - u_h)‖`, when the error is known and nonzero.
    pub fn efficiency(&self, which: Estimator) -> Option<f64> {
        let e = self.errors?.energy;
        (e > 0.0).then(|| self.estimator(which) / e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    DofCap,
    MaxIterations,
    Converged,
    Failed,
}

#[derive(Clone, Debug)]
pub struct AmrTrace {
    pub problem: String,
    pub config: AmrConfig,
    pub iterations: Vec<IterationRecord>,
    /// Last mesh that was solved and recorded.
    pub final_mesh: BackgroundMesh,
    pub stop: StopReason,
    /// Set when the loop aborted; the recorded iterations are kept.
    pub failure: Option<String>,
}

impl AmrTrace {
    pub fn mean_efficiency(&self, which: Estimator) -> Option<f64> {
        let v: Vec<f64> = self.iterations.iter().filter_map(|r| r.efficiency(which)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Least-squares slope of `log η` against `log dofs` over the last `n` iterations.
    pub fn decay_slope(&self, which: Estimator, n: usize) -> Option<f64> {
        let tail = &self.iterations[self.iterations.len().saturating_sub(n)..];
        let pts: Vec<(f64, f64)> = tail.iter().map(|r| ((r.dofs as f64).ln(), r.estimator(which).ln())).collect();
        least_squares_slope(&pts)
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs solve, estimate, mark, refine until a stopping rule fires.
///
/// Errors before the first recorded iteration are returned; later failures
/// end the loop and are reported in the trace.
pub fn run_amr(problem: &Problem, config: &AmrConfig) -> Result<AmrTrace> {
    run_amr_from(problem, config, problem.initial_mesh()?)
}

pub fn run_amr_from(problem: &Problem, config: &AmrConfig, initial: BackgroundMesh) -> Result<AmrTrace> {
    run_amr_observed(problem, config, initial, |_, _| Ok(()))
}

/// As [`run_amr_from`], calling `observer` on every recorded iteration; an
/// observer error ends the loop like a solver failure.
pub fn run_amr_observed(
    problem: &Problem,
    config: &AmrConfig,
    initial: BackgroundMesh,
    mut observer: impl FnMut(&IterationRecord, &Analysis) -> Result<()>,
) -> Result<AmrTrace> {
    config.validate()?;
    let mut trace = AmrTrace {
        problem: problem.name.clone(),
        config: *config,
        iterations: Vec::new(),
        final_mesh: initial.clone(),
        stop: StopReason::MaxIterations,
        failure: None,
    };
    let mut mesh = initial;
    for iteration in 0..config.max_iterations {
        let step = (|| -> Result<Option<(IterationRecord, Vec<usize>, bool)>> {
            let analysis = problem.analyze(&mesh, &config.params, config.flux_order)?;
            let report = &analysis.report;
            if report.dofs > config.max_dofs && iteration > 0 {
                return Ok(None);
            }
            let marking = dorfler_mark(report.local(config.estimator), config.fraction, config.marking_metric)?;
            let marked: Vec<usize> = marking.marked.iter().map(|&i| report.triangles[i]).collect();
            let record = IterationRecord::from_analysis(iteration, &analysis, marked.len());
            observer(&record, &analysis)?;
            Ok(Some((record, marked, marking.converged)))
        })();
        match step {
            Ok(None) => {
                trace.stop = StopReason::DofCap;
                return Ok(trace);
            }
            Ok(Some((record, marked, converged))) => {
                log::info!(
                    "{} iteration {}: {} dofs, eta1 {:.3e}, eta_res {:.3e}",
                    problem.name,
                    iteration,
                    record.dofs,
                    record.eta1,
                    record.eta_res
                );
                trace.iterations.push(record);
                trace.final_mesh = mesh.clone();
                if converged {
                    trace.stop = StopReason::Converged;
                    return Ok(trace);
                }
                match refine(&mesh, &marked) {
                    Ok(r) => mesh = r.mesh,
                    Err(e) => {
                        trace.stop = StopReason::Failed;
                        trace.failure = Some(e.to_string());
                        return Ok(trace);
                    }
                }
            }
            Err(e) if trace.iterations.is_empty() => return Err(e),
            Err(e) => {
                log::warn!("adaptive loop aborted: {e}");
                trace.stop = StopReason::Failed;
                trace.failure = Some(e.to_string());
                return Ok(trace);
            }
        }
    }
    Ok(trace)
}

/// One row of a uniform refinement study; rates are against the previous row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformRow {
    pub level: usize,
    pub cells: usize,
    pub record: IterationRecord,
    pub energy_rate: Option<f64>,
    pub flux_rate: Option<f64>,
}

/// Solves on structured meshes with `cells · 2^level` cells per side.
pub fn uniform_study(
    problem: &Problem,
    cells: usize,
    levels: usize,
    params: &CutFemParams,
    order: FluxOrder,
) -> Result<Vec<UniformRow>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("a study needs at least one level".into()));
    }
    let mut rows: Vec<UniformRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let n = cells << level;
        let mesh = problem.mesh(n)?;
        let analysis = problem.analyze(&mesh, params, order)?;
        let record = IterationRecord::from_analysis(level, &analysis, 0);
        let rate = |prev: &IterationRecord, pick: fn(&TrueErrors) -> f64| {
            let (a, b) = (prev.errors?, record.errors?);
            Some((pick(&a) / pick(&b)).ln() / (prev.h / record.h).ln())
        };
        let (energy_rate, flux_rate) = match rows.last() {
            Some(prev) => (rate(&prev.record, |e| e.energy), rate(&prev.record, |e| e.flux)),
            None => (None, None),
        };
        log::info!("{} level {level}: {} dofs", problem.name, record.dofs);
        rows.push(UniformRow { level, cells: n, record, energy_rate, flux_rate });
    }
    Ok(rows)
}
