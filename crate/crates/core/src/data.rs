//! Source and boundary data as seen by the discrete problem.

use std::fmt;

use crate::levelset::ScalarFn;
use crate::mesh::BackgroundMesh;
use crate::quadrature::subdivided_triangle_points;
use crate::Point;

/// The right-hand side `f` on the active mesh.
#[derive(Clone)]
pub enum SourceField {
    Analytic(ScalarFn),
    /// Continuous P1 field from values at the background vertices.
    NodalP1(Vec<f64>),
    /// Piecewise constant field, one value per background triangle.
    ElementP0(Vec<f64>),
}

/// The boundary datum `g_h` on `∂Ω_h`.
#[derive(Clone)]
pub enum BoundaryField {
    Analytic(ScalarFn),
    NodalP1(Vec<f64>),
    Zero,
}

impl fmt::Debug for SourceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Analytic(_) => write!(f, "Analytic(..)"),
            Self::NodalP1(v) => write!(f, "NodalP1({} values)", v.len()),
            Self::ElementP0(v) => write!(f, "ElementP0({} values)", v.len()),
        }
    }
}

impl fmt::Debug for BoundaryField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Analytic(_) => write!(f, "Analytic(..)"),
            Self::NodalP1(v) => write!(f, "NodalP1({} values)", v.len()),
            Self::Zero => write!(f, "Zero"),
        }
    }
}

fn nodal_value(mesh: &BackgroundMesh, values: &[f64], k: usize, p: Point) -> f64 {
    let l = mesh.barycentric(k, p);
    let t = mesh.triangle(k);
    l[0] * values[t[0]] + l[1] * values[t[1]] + l[2] * values[t[2]]
}

impl SourceField {
    pub fn interpolate(mesh: &BackgroundMesh, f: &ScalarFn) -> Self {
        Self::NodalP1(mesh.vertices().iter().map(|&p| f(p)).collect())
    }

    /// Element means of `f`, computed with a composite rule so that
    /// discontinuous sources are resolved inside each triangle.
    pub fn project_p0(mesh: &BackgroundMesh, f: &ScalarFn, levels: usize) -> Self {
        let values = (0..mesh.num_triangles())
            .map(|k| {
                let pts =
                    subdivided_triangle_points(&mesh.triangle_points(k), 4, levels).expect("degree 4 is supported");
                pts.iter().map(|q| q.w * f(q.x)).sum::<f64>() / mesh.area(k)
            })
            .collect();
        Self::ElementP0(values)
    }

    /// Value at `p`, which must lie in background triangle `k`.
    pub fn eval(&self, mesh: &BackgroundMesh, k: usize, p: Point) -> f64 {
        match self {
            Self::Analytic(f) => f(p),
            Self::NodalP1(v) => nodal_value(mesh, v, k, p),
            Self::ElementP0(v) => v[k],
        }
    }
}

impl BoundaryField {
    pub fn interpolate(mesh: &BackgroundMesh, g: &ScalarFn) -> Self {
        Self::NodalP1(mesh.vertices().iter().map(|&p| g(p)).collect())
    }

    pub fn eval(&self, mesh: &BackgroundMesh, k: usize, p: Point) -> f64 {
        match self {
            Self::Analytic(g) => g(p),
            Self::NodalP1(v) => nodal_value(mesh, v, k, p),
            Self::Zero => 0.0,
        }
    }
}

/// `f` and `g_h` for one background mesh.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub source: SourceField,
    pub boundary: BoundaryField,
}

impl ProblemData {
    pub fn new(source: SourceField, boundary: BoundaryField) -> Self {
        Self { source, boundary }
    }

    pub fn f(&self, mesh: &BackgroundMesh, k: usize, p: Point) -> f64 {
        self.source.eval(mesh, k, p)
    }

    pub fn g(&self, mesh: &BackgroundMesh, k: usize, p: Point) -> f64 {
        self.boundary.eval(mesh, k, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundingBox, MeshPattern};
    use std::sync::Arc;

    #[test]
    fn interpolation_reproduces_linears() {
        let m = BackgroundMesh::structured(3, 3, BoundingBox::unit_square(), MeshPattern::Crossed).unwrap();
        let f: ScalarFn = Arc::new(|p: Point| 2.0 * p.x - p.y + 0.5);
        let s = SourceField::interpolate(&m, &f);
        let b = BoundaryField::interpolate(&m, &f);
        for k in 0..m.num_triangles() {
            let c = m.centroid(k);
            assert!((s.eval(&m, k, c) - f(c)).abs() < 1e-14);
            assert!((b.eval(&m, k, c) - f(c)).abs() < 1e-14);
        }
    }

    #[test]
    fn p0_projection_of_indicator() {
        let m = BackgroundMesh::structured(1, 1, BoundingBox::unit_square(), MeshPattern::Regular).unwrap();
        let one: ScalarFn = Arc::new(|_| 1.0);
        let SourceField::ElementP0(v) = SourceField::project_p0(&m, &one, 2) else { unreachable!() };
        assert!(v.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        // half-plane indicator splits each triangle exactly along sub-triangle edges
        let step: ScalarFn = Arc::new(|p: Point| if p.x + p.y < 1.0 { 10.0 } else { 0.0 });
        let SourceField::ElementP0(v) = SourceField::project_p0(&m, &step, 3) else { unreachable!() };
        let total: f64 = v.iter().zip(0..).map(|(x, k)| x * m.area(k)).sum();
        assert!((total - 5.0).abs() < 0.2);
    }
}
