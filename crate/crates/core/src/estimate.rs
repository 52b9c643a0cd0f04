//! Element indicators, global estimators, and errors against a known solution.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cut::CutTopology;
use crate::cutfem::{element_size, jump_normal_derivative, CutFemSolution};
use crate::data::ProblemData;
use crate::error::Result;
use crate::flux::RecoveredFlux;
use crate::quadrature::{polygon_points, segment_points, subdivided_polygon_points, triangle_points};
use crate::Point;

pub type GradientFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Default number of uniform subdivisions used when integrating exact errors.
pub const DEFAULT_ERROR_LEVELS: usize = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    /// `‖σ_h - ∇u_h‖` over whole active triangles.
    #[default]
    #[serde(rename = "eta1")]
    Eta1,
    /// `‖σ_h - ∇u_h‖` over the parts inside `Ω_h`.
    #[serde(rename = "eta2")]
    Eta2,
    /// Residual-based indicator.
    #[serde(rename = "eta_res")]
    EtaRes,
}

impl std::str::FromStr for Estimator {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta1" => Ok(Self::Eta1),
            "eta2" => Ok(Self::Eta2),
            "eta_res" => Ok(Self::EtaRes),
            other => Err(crate::Error::Config(format!("unknown estimator `{other}` (expected eta1, eta2 or eta_res)"))),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Eta1 => "eta1",
            Self::Eta2 => "eta2",
            Self::EtaRes => "eta_res",
        })
    }
}

/// `(η_{K,1}, η_{K,2})` for one active triangle.
pub fn flux_indicator(ct: &CutTopology, u: &CutFemSolution, flux: &RecoveredFlux, k: usize) -> Result<(f64, f64)> {
    let mesh = ct.mesh();
    let grad = u.gradient(mesh, k);
    let whole: f64 = triangle_points(&mesh.triangle_points(k), 4)?
        .iter()
        .map(|q| q.w * (flux.eval(mesh, k, q.x) - grad).norm_squared())
        .sum();
    let inside: f64 = if ct.inside_area(k) <= 0.0 {
        0.0
    } else if ct.cut_cell(k).is_none() {
        whole
    } else {
        polygon_points(&ct.inside_polygon(k), 4)?
            .iter()
            .map(|q| q.w * (flux.eval(mesh, k, q.x) - grad).norm_squared())
            .sum()
    };
    Ok((whole.sqrt(), inside.sqrt()))
}

/// `η_{K,res}` for one active triangle.
pub fn residual_indicator(ct: &CutTopology, data: &ProblemData, u: &CutFemSolution, k: usize) -> Result<f64> {
    let mesh = ct.mesh();
    let degree = u.params.quadrature_degree;
    let hk = element_size(mesh, k);
    let mut f_sq = 0.0;
    if ct.inside_area(k) > 0.0 {
        for q in polygon_points(&ct.inside_polygon(k), degree)? {
            f_sq += q.w * data.f(mesh, k, q.x).powi(2);
        }
    }
    let mut g_sq = 0.0;
    for piece in ct.boundary_pieces(k) {
        for q in segment_points(&piece.segment, degree)? {
            g_sq += q.w * (data.g(mesh, k, q.x) - u.value(mesh, k, q.x)).powi(2);
        }
    }
    let mut jump_sq = 0.0;
    for f in mesh.triangle_facets(k) {
        if ct.facet_kind(f) == crate::cut::FacetKind::Interior {
            let h = mesh.facet_length(f);
            jump_sq += h / 2.0 * h * jump_normal_derivative(mesh, u, f).powi(2);
        }
    }
    let beta = u.params.beta;
    Ok((hk * hk * f_sq + beta * beta / hk * g_sq + jump_sq).sqrt())
}

/// `‖∇(u - u_h)‖_{Ω_h}` and `‖∇u - σ_h‖_{Ω_h}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrueErrors {
    pub energy: f64,
    pub flux: f64,
}

/// Integrates the exact errors over `Ω_h` with a composite rule.
pub fn true_errors(
    ct: &CutTopology,
    exact_gradient: &GradientFn,
    u: &CutFemSolution,
    flux: &RecoveredFlux,
    levels: usize,
) -> Result<TrueErrors> {
    let mesh = ct.mesh();
    let local: Vec<(f64, f64)> = ct
        .active_triangles()
        .par_iter()
        .map(|&k| {
            if ct.inside_area(k) <= 0.0 {
                return Ok((0.0, 0.0));
            }
            let grad = u.gradient(mesh, k);
            let mut e = (0.0, 0.0);
            for q in subdivided_polygon_points(&ct.inside_polygon(k), 4, levels)? {
                let g = exact_gradient(q.x);
                e.0 += q.w * (g - grad).norm_squared();
                e.1 += q.w * (g - flux.eval(mesh, k, q.x)).norm_squared();
            }
            Ok(e)
        })
        .collect::<Result<_>>()?;
    let (energy, flux_sq) = local.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(TrueErrors { energy: energy.sqrt(), flux: flux_sq.sqrt() })
}

/// Indicators and, when the solution is known, true errors for one mesh.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub dofs: usize,
    /// Active triangles, in the order of the indicator vectors.
    pub triangles: Vec<usize>,
    pub eta1_local: Vec<f64>,
    pub eta2_local: Vec<f64>,
    pub eta_res_local: Vec<f64>,
    pub eta1: f64,
    pub eta2: f64,
    pub eta_res: f64,
    pub errors: Option<TrueErrors>,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl ErrorReport {
    pub fn local(&self, which: Estimator) -> &[f64] {
        match which {
            Estimator::Eta1 => &self.eta1_local,
            Estimator::Eta2 => &self.eta2_local,
            Estimator::EtaRes => &self.eta_res_local,
        }
    }

    pub fn global(&self, which: Estimator) -> f64 {
        match which {
            Estimator::Eta1 => self.eta1,
            Estimator::Eta2 => self.eta2,
            Estimator::EtaRes => self.eta_res,
        }
    }

    /// `η / ‖∇(u - u_h)‖`; `None` without a known solution or for zero error.
    pub fn efficiency(&self, which: Estimator) -> Option<f64> {
        let e = self.errors?.energy;
        (e > 0.0).then(|| self.global(which) / e)
    }
}

/// Computes all indicators, plus true errors when `exact_gradient` is given.
pub fn estimate(
    ct: &CutTopology,
    data: &ProblemData,
    u: &CutFemSolution,
    flux: &RecoveredFlux,
    exact_gradient: Option<&GradientFn>,
) -> Result<ErrorReport> {
    let triangles = ct.active_triangles().to_vec();
    let local: Vec<(f64, f64, f64)> = triangles
        .par_iter()
        .map(|&k| {
            let (a, b) = flux_indicator(ct, u, flux, k)?;
            Ok((a, b, residual_indicator(ct, data, u, k)?))
        })
        .collect::<Result<_>>()?;
    let eta1_local: Vec<f64> = local.iter().map(|x| x.0).collect();
    let eta2_local: Vec<f64> = local.iter().map(|x| x.1).collect();
    let eta_res_local: Vec<f64> = local.iter().map(|x| x.2).collect();
    let errors = match exact_gradient {
        Some(g) => Some(true_errors(ct, g, u, flux, DEFAULT_ERROR_LEVELS)?),
        None => None,
    };
    Ok(ErrorReport {
        dofs: u.num_dofs(),
        eta1: l2(&eta1_local),
        eta2: l2(&eta2_local),
        eta_res: l2(&eta_res_local),
        triangles,
        eta1_local,
        eta2_local,
        eta_res_local,
        errors,
    })
}
