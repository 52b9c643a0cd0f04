//! Benchmark problems and the per-mesh solve/recover/estimate pipeline.

use std::sync::Arc;

use crate::cut::CutTopology;
use crate::cutfem::{self, CutFemParams, CutFemSolution};
use crate::data::{BoundaryField, ProblemData, SourceField};
use crate::error::{Error, Result};
use crate::estimate::{estimate, ErrorReport, Estimator, GradientFn};
use crate::expr::Expr;
use crate::flux::{normal_jump, reconstruct, ConservationReport, FluxOrder, Reconstruction};
use crate::levelset::{flower_petals, LevelSet, ScalarFn};
use crate::mesh::{BackgroundMesh, BoundingBox, MeshPattern, StarOrientation};
use crate::Point;

/// How the source enters the discrete problem.
#[derive(Clone)]
pub enum SourceRule {
    /// Evaluated pointwise at quadrature points.
    Analytic(ScalarFn),
    /// Nodal P1 interpolant on the background mesh.
    Interpolated(ScalarFn),
    /// Element means computed with `levels` uniform subdivisions.
    ProjectedP0 { f: ScalarFn, levels: usize },
}

/// How the Dirichlet datum enters the discrete problem.
#[derive(Clone)]
pub enum BoundaryRule {
    /// The exact trace, evaluated at quadrature points.
    Analytic(ScalarFn),
    /// Nodal P1 interpolant on the background mesh.
    Interpolated(ScalarFn),
    Zero,
}

#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarFn,
    pub gradient: GradientFn,
}

/// Adaptive protocol used with a problem unless overridden.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Protocol {
    pub estimator: Estimator,
    pub fraction: f64,
    pub max_dofs: usize,
}

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub levelset: LevelSet,
    pub domain: BoundingBox,
    pub initial_cells: usize,
    pub pattern: MeshPattern,
    pub exact: Option<ExactSolution>,
    pub source: SourceRule,
    pub boundary: BoundaryRule,
    pub protocol: Protocol,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("levelset", &self.levelset)
            .field("domain", &self.domain)
            .field("initial_cells", &self.initial_cells)
            .field("pattern", &self.pattern)
            .field("exact", &self.exact.is_some())
            .field("protocol", &self.protocol)
            .finish()
    }
}

/// Exact solution and `f = -Δu` from one expression.
fn from_expression(src: &str) -> (ExactSolution, ScalarFn) {
    let u = Expr::parse(src).expect("built-in expression parses");
    let [dx, dy] = u.gradient();
    let f = Expr::Neg(Box::new(u.laplacian()));
    let gradient: GradientFn = Arc::new(move |p| Point::new(dx.eval(p), dy.eval(p)));
    (ExactSolution { value: u.into_fn(), gradient }, f.into_fn())
}

pub const PEAK_SOLUTION: &str = "exp(-100*((x - 0.5)^2 + (y - 0.5)^2))";

pub const FRANKE_SOLUTION: &str = "0.75*exp(-(9*x - 2)^2/4 - (9*y - 2)^2/4) \
     + 0.75*exp(-(9*x + 1)^2/49 - (9*y + 1)/10) \
     + 0.5*exp(-(9*x - 7)^2/4 - (9*y - 3)^2/4) \
     - 0.2*exp(-(9*x - 4)^2 - (9*y - 7)^2)";

fn unit_square_problem(name: &str, src: &str, max_dofs: usize) -> Problem {
    let (exact, f) = from_expression(src);
    Problem {
        name: name.into(),
        // the domain is the whole background square; its boundary is fitted
        levelset: LevelSet::Everywhere,
        domain: BoundingBox::unit_square(),
        initial_cells: 5,
        pattern: MeshPattern::Regular,
        boundary: BoundaryRule::Interpolated(exact.value.clone()),
        exact: Some(exact),
        source: SourceRule::Interpolated(f),
        protocol: Protocol { estimator: Estimator::Eta1, fraction: 0.25, max_dofs },
    }
}

/// Gaussian peak at `(0.5, 0.5)` on the unit square.
pub fn peak() -> Problem {
    unit_square_problem("peak", PEAK_SOLUTION, 5000)
}

/// Franke's test function on the unit square.
pub fn franke() -> Problem {
    unit_square_problem("franke", FRANKE_SOLUTION, 7500)
}

/// Flower-shaped domain with a constant heat source in one petal and `g = 0`.
pub fn flower() -> Problem {
    flower_with(true)
}

/// As [`flower`]; `y_uses_sine == false` keeps all petal centers on `y = x`.
pub fn flower_with(y_uses_sine: bool) -> Problem {
    let (centers, r1) = flower_petals(y_uses_sine);
    let c = centers[0];
    let r2 = r1 * r1 / 2.0;
    let f: ScalarFn = Arc::new(move |p: Point| if (p - c).norm_squared() <= r2 { 10.0 } else { 0.0 });
    Problem {
        name: "flower".into(),
        levelset: LevelSet::Flower { y_uses_sine },
        domain: BoundingBox::new([-4.0, -4.0], [4.0, 4.0]),
        initial_cells: 8,
        pattern: MeshPattern::Crossed,
        exact: None,
        source: SourceRule::ProjectedP0 { f, levels: 3 },
        boundary: BoundaryRule::Zero,
        protocol: Protocol { estimator: Estimator::Eta1, fraction: 0.15, max_dofs: 7000 },
    }
}

pub const REENTRANT_EXPONENT: f64 = 2.0 / 3.0;
pub const REENTRANT_RADIUS: f64 = 0.95;

/// Polar angle in `[-π/4, 7π/4)`, so the branch cut runs through the removed quadrant.
pub fn reentrant_angle(p: Point) -> f64 {
    use std::f64::consts::PI;
    let t = p.y.atan2(p.x);
    if t < -PI / 4.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

pub fn reentrant_solution(p: Point) -> f64 {
    let r = p.norm();
    r.powf(REENTRANT_EXPONENT) * (REENTRANT_EXPONENT * reentrant_angle(p)).sin()
}

pub fn reentrant_gradient(p: Point) -> Point {
    let a = REENTRANT_EXPONENT;
    let r = p.norm();
    if r == 0.0 {
        // singular point; never a quadrature node
        return Point::zeros();
    }
    let t = (a - 1.0) * reentrant_angle(p);
    Point::new(t.sin(), t.cos()) * (a * r.powf(a - 1.0))
}

/// L-shaped corner cut from a disk: `([-1,1]² ∖ [0,1]×[-1,0]) ∩ B(0.95)`.
pub fn reentrant_levelset() -> LevelSet {
    LevelSet::Max {
        parts: vec![
            LevelSet::Min {
                parts: vec![
                    LevelSet::HalfPlane { normal: [1.0, 0.0], offset: 0.0 },
                    LevelSet::HalfPlane { normal: [0.0, -1.0], offset: 0.0 },
                ],
            },
            LevelSet::circle([0.0, 0.0], REENTRANT_RADIUS),
        ],
    }
}

/// `r^{2/3} sin(2θ/3)` on the reentrant domain, with `f = 0`.
pub fn reentrant() -> Problem {
    let value: ScalarFn = Arc::new(reentrant_solution);
    Problem {
        name: "reentrant".into(),
        levelset: reentrant_levelset(),
        domain: BoundingBox::new([-1.0, -1.0], [1.0, 1.0]),
        initial_cells: 10,
        pattern: MeshPattern::Regular,
        exact: Some(ExactSolution { value: value.clone(), gradient: Arc::new(reentrant_gradient) }),
        source: SourceRule::Analytic(Arc::new(|_| 0.0)),
        boundary: BoundaryRule::Interpolated(value),
        protocol: Protocol { estimator: Estimator::Eta2, fraction: 0.10, max_dofs: 5000 },
    }
}

/// The built-in problems by name.
pub fn by_name(name: &str) -> Result<Problem> {
    match name {
        "peak" => Ok(peak()),
        "franke" => Ok(franke()),
        "flower" => Ok(flower()),
        "reentrant" => Ok(reentrant()),
        other => Err(Error::Config(format!("unknown problem `{other}` (expected peak, franke, flower or reentrant)"))),
    }
}

pub const PROBLEM_NAMES: [&str; 4] = ["peak", "franke", "flower", "reentrant"];

/// A user problem from expressions. Without `f`, the source is `-Δu`; without
/// `g`, the boundary datum is the trace of `u`.
pub fn custom(
    levelset: LevelSet,
    domain: BoundingBox,
    u: Option<&str>,
    f: Option<&str>,
    g: Option<&str>,
) -> Result<Problem> {
    let parsed_u = u.map(Expr::parse).transpose()?;
    let source = match (f, &parsed_u) {
        (Some(src), _) => Expr::parse(src)?.into_fn(),
        (None, Some(u)) => Expr::Neg(Box::new(u.laplacian())).into_fn(),
        (None, None) => return Err(Error::Config("a custom problem needs `u` or `f`".into())),
    };
    let boundary = match (g, &parsed_u) {
        (Some(src), _) => BoundaryRule::Analytic(Expr::parse(src)?.into_fn()),
        (None, Some(u)) => BoundaryRule::Analytic(u.clone().into_fn()),
        (None, None) => BoundaryRule::Zero,
    };
    let exact = parsed_u.map(|u| {
        let [dx, dy] = u.gradient();
        let gradient: GradientFn = Arc::new(move |p| Point::new(dx.eval(p), dy.eval(p)));
        ExactSolution { value: u.into_fn(), gradient }
    });
    Ok(Problem {
        name: "custom".into(),
        levelset,
        domain,
        initial_cells: 8,
        pattern: MeshPattern::Regular,
        exact,
        source: SourceRule::Analytic(source),
        boundary,
        protocol: Protocol { estimator: Estimator::Eta1, fraction: 0.25, max_dofs: 5000 },
    })
}

/// Per-mesh results of the full pipeline.
pub struct Analysis<'m> {
    pub topology: CutTopology<'m>,
    pub data: ProblemData,
    pub solution: CutFemSolution,
    pub reconstruction: Reconstruction,
    pub report: ErrorReport,
    pub conservation: ConservationReport,
    /// `(max normal jump, max |σ_h|)` at facet quadrature points.
    pub normal_jump: (f64, f64),
}

impl Problem {
    pub fn source_function(&self) -> &ScalarFn {
        match &self.source {
            SourceRule::Analytic(f) | SourceRule::Interpolated(f) | SourceRule::ProjectedP0 { f, .. } => f,
        }
    }

    pub fn initial_mesh(&self) -> Result<BackgroundMesh> {
        self.mesh(self.initial_cells)
    }

    pub fn mesh(&self, cells: usize) -> Result<BackgroundMesh> {
        BackgroundMesh::structured(cells, cells, self.domain, self.pattern)
    }

    pub fn data(&self, mesh: &BackgroundMesh) -> ProblemData {
        let source = match &self.source {
            SourceRule::Analytic(f) => SourceField::Analytic(f.clone()),
            SourceRule::Interpolated(f) => SourceField::interpolate(mesh, f),
            SourceRule::ProjectedP0 { f, levels } => SourceField::project_p0(mesh, f, *levels),
        };
        let boundary = match &self.boundary {
            BoundaryRule::Analytic(g) => BoundaryField::Analytic(g.clone()),
            BoundaryRule::Interpolated(g) => BoundaryField::interpolate(mesh, g),
            BoundaryRule::Zero => BoundaryField::Zero,
        };
        ProblemData::new(source, boundary)
    }

    pub fn topology<'m>(&self, mesh: &'m BackgroundMesh) -> Result<CutTopology<'m>> {
        CutTopology::from_levelset(mesh, &self.levelset)
    }

    /// Solve, recover the flux, and estimate on one mesh.
    pub fn analyze<'m>(
        &self,
        mesh: &'m BackgroundMesh,
        params: &CutFemParams,
        order: FluxOrder,
    ) -> Result<Analysis<'m>> {
        let topology = self.topology(mesh)?;
        let data = self.data(mesh);
        let solution = cutfem::solve(&topology, &data, params)?;
        let reconstruction = reconstruct(&topology, &data, &solution, order, StarOrientation::CounterClockwise)?;
        let exact = self.exact.as_ref().map(|e| &e.gradient);
        let report = estimate(&topology, &data, &solution, &reconstruction.flux, exact)?;
        let conservation = reconstruction.conservation(&topology);
        let normal_jump = normal_jump(&topology, &reconstruction.flux);
        Ok(Analysis { topology, data, solution, reconstruction, report, conservation, normal_jump })
    }

    /// Largest `|Δ_h u + f| / max(1, |f|)` over `points`, with a centered
    /// five-point difference of step `h`.
    pub fn laplacian_defect(&self, points: &[Point], h: f64) -> Option<f64> {
        let u = &self.exact.as_ref()?.value;
        let f = self.source_function();
        let mut worst: f64 = 0.0;
        for &p in points {
            let ex = Point::new(h, 0.0);
            let ey = Point::new(0.0, h);
            let lap = (u(p + ex) + u(p - ex) + u(p + ey) + u(p - ey) - 4.0 * u(p)) / (h * h);
            worst = worst.max((lap + f(p)).abs() / f(p).abs().max(1.0));
        }
        Some(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halton(i: usize, base: usize) -> f64 {
        let (mut f, mut r, mut i) = (1.0, 0.0, i);
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }

    fn interior_points(p: &Problem, n: usize) -> Vec<Point> {
        (1..=n * 50)
            .map(|i| {
                let b = p.domain;
                Point::new(b.min[0] + b.width() * halton(i, 2), b.min[1] + b.height() * halton(i, 3))
            })
            .filter(|&x| p.levelset.eval(x) < -1e-2)
            .take(n)
            .collect()
    }

    #[test]
    fn peak_values() {
        let p = peak();
        let c = Point::new(0.5, 0.5);
        assert_eq!((p.exact.as_ref().unwrap().value)(c), 1.0);
        assert!(((p.source_function())(c) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn exact_solutions_satisfy_the_equation() {
        for p in [peak(), franke(), reentrant()] {
            let pts = interior_points(&p, 20);
            assert_eq!(pts.len(), 20);
            let d = p.laplacian_defect(&pts, 1e-4).unwrap();
            assert!(d < 1e-6 * 400.0, "{}: {d}", p.name);
        }
    }

    #[test]
    fn franke_shape() {
        let u = franke().exact.unwrap().value;
        // the sink term enters with a negative sign
        let sink = Point::new(4.0 / 9.0, 7.0 / 9.0);
        let plain = Expr::parse(&FRANKE_SOLUTION.replace("- 0.2*", "+ 0.2*")).unwrap();
        assert!(u(sink) < plain.eval(sink));
        // the other terms shift each extremum slightly off its bump center
        let extremum = |c: Point, sign: f64| {
            let mut best = (f64::NEG_INFINITY, c);
            for i in -20..=20 {
                for j in -20..=20 {
                    let p = c + Point::new(i as f64, j as f64) * 0.005;
                    if sign * u(p) > best.0 {
                        best = (sign * u(p), p);
                    }
                }
            }
            best.1
        };
        for (c, sign) in
            [(Point::new(2.0 / 9.0, 2.0 / 9.0), 1.0), (Point::new(7.0 / 9.0, 1.0 / 3.0), 1.0), (sink, -1.0)]
        {
            let e = extremum(c, sign);
            assert!((e - c).norm() < 0.04, "{e:?} vs {c:?}");
            assert!((e - c).amax() < 0.099, "extremum on the search border");
        }
    }

    #[test]
    fn reentrant_values() {
        use std::f64::consts::PI;
        assert_eq!(REENTRANT_EXPONENT, PI / (1.5 * PI));
        assert_eq!(reentrant_solution(Point::new(0.5, 0.0)), 0.0);
        assert!(reentrant_solution(Point::new(0.0, -0.5)).abs() < 1e-15);
        assert!(reentrant_solution(Point::new(-0.5, 0.1)) > 0.0);
        let p = reentrant();
        for inside in [Point::new(-0.5, -0.5), Point::new(0.3, 0.4), Point::new(-0.2, 0.6)] {
            assert!(p.levelset.eval(inside) < 0.0);
        }
        for outside in [Point::new(0.5, -0.5), Point::new(0.9, 0.9)] {
            assert!(p.levelset.eval(outside) > 0.0);
        }
        // gradient against central differences
        let x = Point::new(-0.3, 0.45);
        let h = 1e-6;
        let fd = Point::new(
            reentrant_solution(x + Point::new(h, 0.0)) - reentrant_solution(x - Point::new(h, 0.0)),
            reentrant_solution(x + Point::new(0.0, h)) - reentrant_solution(x - Point::new(0.0, h)),
        ) / (2.0 * h);
        assert!((fd - reentrant_gradient(x)).norm() < 1e-8);
    }

    #[test]
    fn flower_source() {
        let p = flower();
        let (centers, _) = flower_petals(true);
        assert_eq!((p.source_function())(centers[0]), 10.0);
        assert_eq!((p.source_function())(Point::zeros()), 0.0);
        assert!(p.levelset.eval(Point::zeros()) < 0.0);
    }

    #[test]
    fn custom_problem_from_u() {
        let p = custom(LevelSet::circle([0.0, 0.0], 1.0), BoundingBox::unit_square(), Some("x^2 + y^2"), None, None)
            .unwrap();
        assert!(((p.source_function())(Point::new(0.2, 0.1)) + 4.0).abs() < 1e-14);
        assert!(custom(LevelSet::Everywhere, BoundingBox::unit_square(), None, None, None).is_err());
        assert!(by_name("nope").is_err());
    }
}
