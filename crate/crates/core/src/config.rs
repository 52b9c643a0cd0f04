//! Run configuration: one TOML document per run, every section optional.
//!
//! ```toml
//! [problem]
//! name = "peak"            # or a [problem.custom] table
//!
//! [mesh]
//! cells = 5
//! pattern = "regular"
//!
//! [discretization]
//! beta = 10.0
//! gamma = 0.1
//! flux_order = "rt1"
//!
//! [amr]
//! estimator = "eta1"
//! fraction = 0.25
//! max_dofs = 5000
//!
//! [uniform]
//! levels = 4
//!
//! [output]
//! dir = "out"
//! csv = true
//! vtk = true
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::amr::{AmrConfig, MarkingMetric};
use crate::cutfem::CutFemParams;
use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::expr::Expr;
use crate::flux::FluxOrder;
use crate::levelset::LevelSet;
use crate::mesh::{BoundingBox, MeshPattern};
use crate::mixed_oracle::DEFAULT_CAP;
use crate::problems::{self, Problem};
use crate::sparse::SolverKind;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CUTFLUX_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "cutflux-out";

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub amr: AmrSection,
    #[serde(default)]
    pub uniform: UniformSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// One of the benchmark names; defaults to `peak` when no custom table is given.
    pub name: Option<String>,
    /// Flower geometry only: petal ordinates from `sin` (default) or `cos`.
    pub flower_y_uses_sine: Option<bool>,
    pub custom: Option<CustomProblem>,
}

/// A problem given by expressions in `x` and `y`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    /// A level set built from primitives.
    pub levelset: Option<LevelSet>,
    /// A level set given as an expression; used when `levelset` is absent.
    pub levelset_expr: Option<String>,
    pub domain: Option<BoundingBox>,
    /// Exact solution; enables error columns.
    pub u: Option<String>,
    /// Source; defaults to `-Δu`.
    pub f: Option<String>,
    /// Dirichlet datum; defaults to `u`, or zero without `u`.
    pub g: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Structured cells per side of the initial mesh.
    pub cells: Option<usize>,
    pub pattern: Option<MeshPattern>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub quadrature_degree: Option<usize>,
    pub solver: Option<SolverKind>,
    pub flux_order: Option<FluxOrder>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmrSection {
    pub estimator: Option<Estimator>,
    pub fraction: Option<f64>,
    pub max_dofs: Option<usize>,
    pub max_iterations: Option<usize>,
    pub marking_metric: Option<MarkingMetric>,
    /// Write a VTK file for every iteration.
    #[serde(default)]
    pub snapshots: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformSection {
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    4
}

impl Default for UniformSection {
    fn default() -> Self {
        Self { levels: default_levels() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Largest number of broken-space unknowns the dense solve accepts.
    #[serde(default = "default_cap")]
    pub max_unknowns: usize,
    #[serde(default = "default_oracle_tolerance")]
    pub tolerance: f64,
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

fn default_oracle_tolerance() -> f64 {
    1e-8
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { max_unknowns: default_cap(), tolerance: default_oracle_tolerance() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub vtk: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, csv: true, vtk: true }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks everything that can be checked without building a mesh.
    pub fn validate(&self) -> Result<()> {
        let problem = self.problem()?;
        if self.mesh.cells == Some(0) {
            return Err(Error::Config("mesh.cells must be positive".into()));
        }
        if self.uniform.levels == 0 {
            return Err(Error::Config("uniform.levels must be positive".into()));
        }
        if !(self.oracle.tolerance > 0.0) {
            return Err(Error::Config("oracle.tolerance must be positive".into()));
        }
        self.amr_config(&problem).validate()
    }

    /// Builds the problem with mesh overrides applied.
    pub fn problem(&self) -> Result<Problem> {
        let p = &self.problem;
        let mut problem = match (&p.name, &p.custom) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either problem.name or [problem.custom], not both".into()))
            }
            (_, Some(c)) => custom_problem(c)?,
            (name, None) => {
                let name = name.as_deref().unwrap_or("peak");
                match (name, p.flower_y_uses_sine) {
                    ("flower", Some(sine)) => problems::flower_with(sine),
                    (_, Some(_)) => {
                        return Err(Error::Config("flower_y_uses_sine applies to the flower problem only".into()))
                    }
                    (_, None) => problems::by_name(name)?,
                }
            }
        };
        if let Some(cells) = self.mesh.cells {
            problem.initial_cells = cells;
        }
        if let Some(pattern) = self.mesh.pattern {
            problem.pattern = pattern;
        }
        Ok(problem)
    }

    pub fn params(&self) -> CutFemParams {
        let d = &self.discretization;
        let mut p = CutFemParams::default();
        p.beta = d.beta.unwrap_or(p.beta);
        p.gamma = d.gamma.unwrap_or(p.gamma);
        p.quadrature_degree = d.quadrature_degree.unwrap_or(p.quadrature_degree);
        p.solver = d.solver.unwrap_or(p.solver);
        p
    }

    pub fn flux_order(&self) -> FluxOrder {
        self.discretization.flux_order.unwrap_or_default()
    }

    /// The problem's protocol with the `[amr]` and `[discretization]` overrides.
    pub fn amr_config(&self, problem: &Problem) -> AmrConfig {
        let a = &self.amr;
        let mut c = AmrConfig::for_problem(problem);
        c.estimator = a.estimator.unwrap_or(c.estimator);
        c.fraction = a.fraction.unwrap_or(c.fraction);
        c.max_dofs = a.max_dofs.unwrap_or(c.max_dofs);
        c.max_iterations = a.max_iterations.unwrap_or(c.max_iterations);
        c.marking_metric = a.marking_metric.unwrap_or(c.marking_metric);
        c.flux_order = self.flux_order();
        c.params = self.params();
        c
    }

    /// `output.dir`, else the environment variable, else `cutflux-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

fn custom_problem(c: &CustomProblem) -> Result<Problem> {
    let levelset = match (&c.levelset, &c.levelset_expr) {
        (Some(ls), None) => ls.clone(),
        (None, Some(src)) => {
            let f = Expr::parse(src)?.into_fn();
            LevelSet::Custom(f)
        }
        (None, None) => LevelSet::Everywhere,
        (Some(_), Some(_)) => return Err(Error::Config("give either levelset or levelset_expr, not both".into())),
    };
    let domain = c.domain.unwrap_or_else(BoundingBox::unit_square);
    if !(domain.width() > 0.0 && domain.height() > 0.0) {
        return Err(Error::Config("custom domain must have positive extent".into()));
    }
    problems::custom(levelset, domain, c.u.as_deref(), c.f.as_deref(), c.g.as_deref())
}
