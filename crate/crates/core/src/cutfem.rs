//! Stabilized Nitsche cut finite element discretization of `-Δu = f`.
//!
//! The boundary terms act on every piece of `∂Ω_h`: the level-set segments of
//! cut triangles and the inside parts of background-boundary facets, each with
//! the penalty weight `β / h_K` of the triangle it belongs to.

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cut::CutTopology;
use crate::data::ProblemData;
use crate::error::{Error, Result};
use crate::mesh::BackgroundMesh;
use crate::quadrature::{polygon_points, segment_points, DEFAULT_DEGREE};
use crate::sparse::{self, SolveStats, SolverKind, TripletBuilder};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutFemParams {
    /// Nitsche penalty.
    pub beta: f64,
    /// Ghost penalty.
    pub gamma: f64,
    pub quadrature_degree: usize,
    #[serde(skip)]
    pub solver: SolverKind,
}

impl Default for CutFemParams {
    fn default() -> Self {
        Self { beta: 10.0, gamma: 0.1, quadrature_degree: DEFAULT_DEGREE, solver: SolverKind::Auto }
    }
}

impl CutFemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if self.beta == 0.0 {
            log::warn!("beta = 0: the discrete form may lose coercivity");
        }
        Ok(())
    }
}

/// Active vertices numbered in increasing background index order.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    vertex_dof: Vec<Option<usize>>,
    dof_vertex: Vec<usize>,
}

impl DofMap {
    pub fn new(ct: &CutTopology) -> Self {
        let dof_vertex = ct.active_vertices();
        let mut vertex_dof = vec![None; ct.mesh().num_vertices()];
        for (d, &v) in dof_vertex.iter().enumerate() {
            vertex_dof[v] = Some(d);
        }
        Self { vertex_dof, dof_vertex }
    }

    pub fn len(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dof_vertex.is_empty()
    }

    pub fn dof(&self, vertex: usize) -> Option<usize> {
        self.vertex_dof[vertex]
    }

    pub fn vertex(&self, dof: usize) -> usize {
        self.dof_vertex[dof]
    }

    /// Dofs of the three vertices of an active triangle.
    pub fn triangle_dofs(&self, mesh: &BackgroundMesh, k: usize) -> [usize; 3] {
        mesh.triangle(k).map(|v| self.vertex_dof[v].expect("vertex of an active triangle"))
    }

    /// Nodal values of `f` at the active vertices.
    pub fn interpolate(&self, mesh: &BackgroundMesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.dof_vertex.iter().map(|&v| f(mesh.vertex(v))).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix<f64>,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

/// The discrete solution `u_h ∈ CG_h`.
#[derive(Clone, Debug)]
pub struct CutFemSolution {
    pub coefficients: Vec<f64>,
    pub params: CutFemParams,
    pub dofs: DofMap,
    pub stats: SolveStats,
}

impl CutFemSolution {
    /// Wraps given coefficients, e.g. an interpolant, as a solution.
    pub fn from_coefficients(dofs: DofMap, coefficients: Vec<f64>, params: CutFemParams) -> Self {
        Self { coefficients, params, dofs, stats: SolveStats { iterations: 0, relative_residual: 0.0, dense: false } }
    }

    pub fn num_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn local_values(&self, mesh: &BackgroundMesh, k: usize) -> [f64; 3] {
        self.dofs.triangle_dofs(mesh, k).map(|d| self.coefficients[d])
    }

    pub fn gradient(&self, mesh: &BackgroundMesh, k: usize) -> Point {
        let u = self.local_values(mesh, k);
        let g = mesh.barycentric_gradients(k);
        g[0] * u[0] + g[1] * u[1] + g[2] * u[2]
    }

    pub fn value(&self, mesh: &BackgroundMesh, k: usize, p: Point) -> f64 {
        let u = self.local_values(mesh, k);
        let l = mesh.barycentric(k, p);
        l[0] * u[0] + l[1] * u[1] + l[2] * u[2]
    }

    /// Values at the background vertices (`NaN` where inactive).
    pub fn vertex_values(&self, mesh: &BackgroundMesh) -> Vec<f64> {
        (0..mesh.num_vertices()).map(|v| self.dofs.dof(v).map_or(f64::NAN, |d| self.coefficients[d])).collect()
    }
}

/// `h_K`: the longest edge of the triangle.
pub fn element_size(mesh: &BackgroundMesh, k: usize) -> f64 {
    mesh.diameter(k)
}

/// Coefficients of `[∂_{n_F} φ_v]` across an interior facet for the (up to
/// four) vertices of its two neighbors.
pub fn normal_derivative_jump(mesh: &BackgroundMesh, f: usize) -> Vec<(usize, f64)> {
    let (p, q) = mesh.facet_triangles(f);
    let q = q.expect("jump across an interior facet");
    let n = mesh.facet_normal(f);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(4);
    for (k, sign) in [(p, 1.0), (q, -1.0)] {
        let grads = mesh.barycentric_gradients(k);
        for (i, &v) in mesh.triangle(k).iter().enumerate() {
            let c = sign * grads[i].dot(&n);
            match out.iter_mut().find(|(w, _)| *w == v) {
                Some(entry) => entry.1 += c,
                None => out.push((v, c)),
            }
        }
    }
    out
}

/// `[∂_{n_F} u_h]` on an interior facet.
pub fn jump_normal_derivative(mesh: &BackgroundMesh, u: &CutFemSolution, f: usize) -> f64 {
    let (p, q) = mesh.facet_triangles(f);
    let n = mesh.facet_normal(f);
    (u.gradient(mesh, p) - u.gradient(mesh, q.expect("interior facet"))).dot(&n)
}

struct ElementBlock {
    dofs: [usize; 3],
    a: [[f64; 3]; 3],
    b: [f64; 3],
}

fn element_block(
    ct: &CutTopology,
    data: Option<&ProblemData>,
    dofs: &DofMap,
    params: &CutFemParams,
    k: usize,
) -> Result<ElementBlock> {
    let mesh = ct.mesh();
    let grads = mesh.barycentric_gradients(k);
    let hk = element_size(mesh, k);
    let area = ct.inside_area(k);
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = area * grads[i].dot(&grads[j]);
        }
    }
    let degree = params.quadrature_degree;
    if let Some(data) = data {
        if area > 0.0 {
            for q in polygon_points(&ct.inside_polygon(k), degree)? {
                let l = mesh.barycentric(k, q.x);
                let fq = q.w * data.f(mesh, k, q.x);
                for i in 0..3 {
                    b[i] += fq * l[i];
                }
            }
        }
    }
    let penalty = params.beta / hk;
    for piece in ct.boundary_pieces(k) {
        let dn: [f64; 3] = std::array::from_fn(|i| grads[i].dot(&piece.normal));
        for q in segment_points(&piece.segment, degree)? {
            let l = mesh.barycentric(k, q.x);
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] += q.w * (-dn[j] * l[i] - l[j] * dn[i] + penalty * l[j] * l[i]);
                }
            }
            if let Some(data) = data {
                let gq = q.w * data.g(mesh, k, q.x);
                for i in 0..3 {
                    b[i] += gq * (penalty * l[i] - dn[i]);
                }
            }
        }
    }
    Ok(ElementBlock { dofs: dofs.triangle_dofs(mesh, k), a, b })
}

fn assemble_impl(ct: &CutTopology, data: Option<&ProblemData>, params: &CutFemParams) -> Result<SparseSystem> {
    params.validate()?;
    let mesh = ct.mesh();
    let dofs = DofMap::new(ct);
    let blocks: Vec<ElementBlock> =
        ct.active_triangles().par_iter().map(|&k| element_block(ct, data, &dofs, params, k)).collect::<Result<_>>()?;
    let n = dofs.len();
    let mut t = TripletBuilder::new(n);
    let mut rhs = vec![0.0; n];
    for blk in &blocks {
        for i in 0..3 {
            rhs[blk.dofs[i]] += blk.b[i];
            for j in 0..3 {
                t.add(blk.dofs[i], blk.dofs[j], blk.a[i][j]);
            }
        }
    }
    if params.gamma > 0.0 {
        for f in ct.ghost_facets() {
            let h = mesh.facet_length(f);
            let w = params.gamma * h * h;
            let jump = normal_derivative_jump(mesh, f);
            for &(vi, ci) in &jump {
                for &(vj, cj) in &jump {
                    let (di, dj) = (dofs.dof(vi).unwrap(), dofs.dof(vj).unwrap());
                    t.add(di, dj, w * ci * cj);
                }
            }
        }
    }
    Ok(SparseSystem { matrix: t.build(), rhs, dofs })
}

/// Assembles `a_h` and `l_h` on the active mesh.
pub fn assemble(ct: &CutTopology, data: &ProblemData, params: &CutFemParams) -> Result<SparseSystem> {
    assemble_impl(ct, Some(data), params)
}

/// Assembles `a_h` only; the right-hand side is zero.
pub fn assemble_matrix(ct: &CutTopology, params: &CutFemParams) -> Result<SparseSystem> {
    assemble_impl(ct, None, params)
}

pub fn solve_system(sys: &SparseSystem, kind: SolverKind) -> Result<(Vec<f64>, SolveStats)> {
    sparse::solve(&sys.matrix, &sys.rhs, kind)
}

/// Assembles and solves the discrete problem.
pub fn solve(ct: &CutTopology, data: &ProblemData, params: &CutFemParams) -> Result<CutFemSolution> {
    let sys = assemble(ct, data, params)?;
    let (coefficients, stats) = solve_system(&sys, params.solver)?;
    log::debug!(
        "solved {} dofs in {} iterations (residual {:.2e})",
        sys.dofs.len(),
        stats.iterations,
        stats.relative_residual
    );
    Ok(CutFemSolution { coefficients, params: *params, dofs: sys.dofs, stats })
}

/// `max_i |l_h(φ_i) - a_h(u, φ_i)|`.
pub fn galerkin_residual(sys: &SparseSystem, u: &[f64]) -> f64 {
    let mut au = vec![0.0; u.len()];
    sparse::matvec(&sys.matrix, u, &mut au);
    sys.rhs.iter().zip(&au).map(|(b, a)| (b - a).abs()).fold(0.0, f64::max)
}

/// Terms of the discrete energy norm `|||v|||_h`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyNorm {
    /// `‖∇v‖²_{Ω_h}`
    pub gradient: f64,
    /// `Σ h_K ‖∂_{n_h} v‖²` over the boundary pieces.
    pub normal_derivative: f64,
    /// `Σ h_K⁻¹ ‖v‖²` over the boundary pieces.
    pub boundary: f64,
    /// `j_h(v, v)`
    pub ghost: f64,
}

impl EnergyNorm {
    pub fn squared(&self) -> f64 {
        self.gradient + self.normal_derivative + self.boundary + self.ghost
    }

    pub fn value(&self) -> f64 {
        self.squared().sqrt()
    }
}

/// `|||v|||_h` for a P1 field given by its coefficients on `dofs`.
pub fn energy_norm_h(ct: &CutTopology, dofs: &DofMap, v: &[f64], gamma: f64) -> EnergyNorm {
    let mesh = ct.mesh();
    let field = CutFemSolution::from_coefficients(dofs.clone(), v.to_vec(), CutFemParams::default());
    let mut out = EnergyNorm::default();
    for &k in ct.active_triangles() {
        let g = field.gradient(mesh, k);
        let hk = element_size(mesh, k);
        out.gradient += ct.inside_area(k) * g.norm_squared();
        for piece in ct.boundary_pieces(k) {
            let len = piece.length();
            out.normal_derivative += hk * len * g.dot(&piece.normal).powi(2);
            let [a, b] = piece.segment.map(|p| field.value(mesh, k, p));
            out.boundary += len * (a * a + a * b + b * b) / 3.0 / hk;
        }
    }
    for f in ct.ghost_facets() {
        let h = mesh.facet_length(f);
        out.ghost += gamma * h * h * jump_normal_derivative(mesh, &field, f).powi(2);
    }
    out
}

/// Extreme eigenvalues of the assembled matrix (dense, small meshes only).
#[derive(Clone, Copy, Debug)]
pub struct ConditionEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Smallest `|λ|`; differs from `lambda_min` when the matrix is indefinite,
    /// which happens without ghost penalty on small cuts.
    pub smallest_magnitude: f64,
}

impl ConditionEstimate {
    /// Spectral condition number `max |λ| / min |λ|`.
    pub fn condition_number(&self) -> f64 {
        self.lambda_max.abs().max(self.lambda_min.abs()) / self.smallest_magnitude
    }

    pub fn is_positive_definite(&self) -> bool {
        self.lambda_min > 0.0
    }
}

pub fn condition_probe(ct: &CutTopology, params: &CutFemParams) -> Result<ConditionEstimate> {
    let sys = assemble_matrix(ct, params)?;
    if sys.dofs.len() > sparse::DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!("{} dofs is too many for a dense eigen solve", sys.dofs.len())));
    }
    let m: DMatrix<f64> = sparse::to_dense(&sys.matrix);
    let eig = m.symmetric_eigen();
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let smallest_magnitude = eig.eigenvalues.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
    Ok(ConditionEstimate { lambda_min, lambda_max, smallest_magnitude })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{BoundaryField, SourceField};
    use crate::levelset::LevelSet;
    use crate::mesh::{BoundingBox, MeshPattern};
    use std::sync::Arc;

    fn linear(p: Point) -> f64 {
        1.0 + 2.0 * p.x - 3.0 * p.y
    }

    fn linear_data() -> ProblemData {
        ProblemData::new(SourceField::Analytic(Arc::new(|_| 0.0)), BoundaryField::Analytic(Arc::new(linear)))
    }

    #[test]
    fn uncut_square_matches_stiffness_plus_nitsche() {
        let m = BackgroundMesh::structured(1, 1, BoundingBox::unit_square(), MeshPattern::Regular).unwrap();
        let ct = CutTopology::from_levelset(&m, &LevelSet::Everywhere).unwrap();
        let p = CutFemParams::default();
        let sys = assemble_matrix(&ct, &p).unwrap();
        let a = sparse::to_dense(&sys.matrix);
        // independent element-by-element construction
        let mut expect = DMatrix::zeros(4, 4);
        for k in 0..2 {
            let g = m.barycentric_gradients(k);
            let t = m.triangle(k);
            let hk = m.diameter(k);
            for i in 0..3 {
                for j in 0..3 {
                    expect[(t[i], t[j])] += m.area(k) * g[i].dot(&g[j]);
                }
            }
            for f in m.triangle_facets(k) {
                if !m.is_boundary_facet(f) {
                    continue;
                }
                let n = m.outward_normal(k, f);
                let len = m.facet_length(f);
                let [fa, fb] = m.facet(f);
                for i in 0..3 {
                    for j in 0..3 {
                        let on = |v: usize| v == fa || v == fb;
                        let mass = if on(t[i]) && on(t[j]) {
                            if i == j {
                                len / 3.0
                            } else {
                                len / 6.0
                            }
                        } else {
                            0.0
                        };
                        let mean_i = if on(t[i]) { len / 2.0 } else { 0.0 };
                        let mean_j = if on(t[j]) { len / 2.0 } else { 0.0 };
                        expect[(t[i], t[j])] += -g[j].dot(&n) * mean_i - g[i].dot(&n) * mean_j + p.beta / hk * mass;
                    }
                }
            }
        }
        assert!((a - &expect).norm() < 1e-12 * expect.norm());
        // no ghost facets: γ is irrelevant
        let sys0 = assemble_matrix(&ct, &CutFemParams { gamma: 0.0, ..p }).unwrap();
        assert_eq!(sparse::to_dense(&sys0.matrix), sparse::to_dense(&sys.matrix));
    }

    #[test]
    fn ghost_block_vanishes_without_gamma() {
        let m = BackgroundMesh::from_triangles(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let ct = CutTopology::build(&m, vec![-1.0, -1.0, 1.0]).unwrap();
        assert_eq!(ct.ghost_facets().count(), 0);
        let a = assemble_matrix(&ct, &CutFemParams { gamma: 0.0, ..Default::default() }).unwrap();
        let b = assemble_matrix(&ct, &CutFemParams::default()).unwrap();
        assert_eq!(sparse::to_dense(&a.matrix), sparse::to_dense(&b.matrix));
    }

    #[test]
    fn symmetric_matrix_on_cut_mesh() {
        let m =
            BackgroundMesh::structured(8, 8, BoundingBox::new([-1.3, -1.3], [1.3, 1.3]), MeshPattern::Crossed).unwrap();
        let ct = CutTopology::from_levelset(&m, &LevelSet::circle([0.03, 0.01], 1.0)).unwrap();
        let sys = assemble(&ct, &linear_data(), &CutFemParams::default()).unwrap();
        let a = sparse::to_dense(&sys.matrix);
        assert!((&a - a.transpose()).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn linear_patch_test() {
        let m =
            BackgroundMesh::structured(7, 7, BoundingBox::new([-1.3, -1.3], [1.3, 1.3]), MeshPattern::Regular).unwrap();
        for offset in [[0.0, 0.0], [0.11, -0.07], [0.31, 0.2]] {
            let ls = LevelSet::circle(offset, 0.9);
            let ct = CutTopology::from_levelset(&m, &ls).unwrap();
            let p = CutFemParams::default();
            let sys = assemble(&ct, &linear_data(), &p).unwrap();
            let ui = sys.dofs.interpolate(&m, linear);
            let scale = sys.rhs.iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert!(galerkin_residual(&sys, &ui) <= 1e-10 * scale);
            let u = solve(&ct, &linear_data(), &p).unwrap();
            let diff: Vec<f64> = u.coefficients.iter().zip(&ui).map(|(a, b)| a - b).collect();
            assert!(energy_norm_h(&ct, &u.dofs, &diff, p.gamma).value() < 1e-10);
        }
    }

    #[test]
    fn energy_norm_examples() {
        let m = BackgroundMesh::structured(1, 1, BoundingBox::unit_square(), MeshPattern::Regular).unwrap();
        let ct = CutTopology::from_levelset(&m, &LevelSet::Everywhere).unwrap();
        let dofs = DofMap::new(&ct);
        assert_eq!(energy_norm_h(&ct, &dofs, &[0.0; 4], 0.1).value(), 0.0);
        let one = energy_norm_h(&ct, &dofs, &[1.0; 4], 0.1);
        // four unit facets, each in a triangle with h_K = √2
        let expect = 4.0 / 2f64.sqrt();
        assert!((one.squared() - expect).abs() < 1e-14);
        let m =
            BackgroundMesh::structured(6, 6, BoundingBox::new([-1.3, -1.3], [1.3, 1.3]), MeshPattern::Regular).unwrap();
        let ct = CutTopology::from_levelset(&m, &LevelSet::circle([0.0, 0.0], 1.0)).unwrap();
        let dofs = DofMap::new(&ct);
        let v = dofs.interpolate(&m, linear);
        assert!(energy_norm_h(&ct, &dofs, &v, 0.1).ghost < 1e-24);
    }

    #[test]
    fn rejects_negative_parameters() {
        let m = BackgroundMesh::structured(1, 1, BoundingBox::unit_square(), MeshPattern::Regular).unwrap();
        let ct = CutTopology::from_levelset(&m, &LevelSet::Everywhere).unwrap();
        let bad = CutFemParams { gamma: -1.0, ..Default::default() };
        assert!(matches!(assemble_matrix(&ct, &bad), Err(Error::InvalidArgument(_))));
    }
}
