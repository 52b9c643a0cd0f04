//! Raviart–Thomas flux assembled from facet moments and element moments.
//!
//! On each triangle the flux is written in the scaled variable
//! `ξ = (x - x_K) / h_K` as `σ = a + B ξ + ξ (ξ · p)`; the lowest order
//! space uses `σ = a + c ξ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cut::{CutTopology, FacetKind};
use crate::cutfem::{element_size, jump_normal_derivative, CutFemSolution};
use crate::data::ProblemData;
use crate::error::{Error, Result};
use crate::flux::extension::ProjectedSource;
use crate::flux::multiplier::MultiplierField;
use crate::mesh::BackgroundMesh;
use crate::quadrature::{segment_points, triangle_points};
use crate::Point;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxOrder {
    Rt0,
    #[default]
    Rt1,
}

/// The recovered flux `σ_h`.
#[derive(Clone, Debug)]
pub struct RecoveredFlux {
    pub order: FluxOrder,
    /// `⟨σ · n_F, φ_a⟩_F` against the Lagrange basis at the two facet vertices
    /// (order of `mesh.facet(f)`), stored once per facet.
    pub facet_moments: Vec<[f64; 2]>,
    /// `∫_K σ` per triangle (lowest order: unused, zero).
    pub interior_moments: Vec<Point>,
    /// Local coefficients `[a₀, a₁, B₀₀, B₀₁, B₁₀, B₁₁, p₀, p₁]` per triangle.
    pub coefficients: Vec<[f64; 8]>,
    active: Vec<bool>,
}

fn basis_value(c: &[f64; 8], xi: Point) -> Point {
    let a = Point::new(c[0], c[1]);
    let bxi = Point::new(c[2] * xi.x + c[3] * xi.y, c[4] * xi.x + c[5] * xi.y);
    let p = Point::new(c[6], c[7]);
    a + bxi + xi * xi.dot(&p)
}

impl RecoveredFlux {
    fn scaled(mesh: &BackgroundMesh, k: usize, x: Point) -> Point {
        (x - mesh.centroid(k)) / element_size(mesh, k)
    }

    pub fn is_defined(&self, k: usize) -> bool {
        self.active[k]
    }

    /// `σ_h|_K(x)`.
    pub fn eval(&self, mesh: &BackgroundMesh, k: usize, x: Point) -> Point {
        basis_value(&self.coefficients[k], Self::scaled(mesh, k, x))
    }

    /// `∇ · σ_h|_K(x)`.
    pub fn divergence(&self, mesh: &BackgroundMesh, k: usize, x: Point) -> f64 {
        let c = &self.coefficients[k];
        let xi = Self::scaled(mesh, k, x);
        (c[2] + c[5] + 3.0 * (c[6] * xi.x + c[7] * xi.y)) / element_size(mesh, k)
    }

    /// `∇ · σ_h` at the three vertices of `K`.
    pub fn divergence_nodal(&self, mesh: &BackgroundMesh, k: usize) -> [f64; 3] {
        mesh.triangle_points(k).map(|p| self.divergence(mesh, k, p))
    }
}

/// Normal moments on every facet touching the active mesh.
pub fn facet_moments(
    ct: &CutTopology,
    data: &ProblemData,
    u: &CutFemSolution,
    theta: &MultiplierField,
) -> Result<Vec<[f64; 2]>> {
    let mesh = ct.mesh();
    let degree = u.params.quadrature_degree;
    (0..mesh.num_facets())
        .into_par_iter()
        .map(|f| {
            let len = mesh.facet_length(f);
            let n = mesh.facet_normal(f);
            let (p, q) = mesh.facet_triangles(f);
            match ct.facet_kind(f) {
                FacetKind::Inactive => Ok([0.0; 2]),
                FacetKind::Interior => {
                    let avg = 0.5 * (u.gradient(mesh, p) + u.gradient(mesh, q.unwrap())).dot(&n);
                    Ok(std::array::from_fn(|a| avg * len / 2.0 - len / 2.0 * theta.theta[f][a]))
                }
                FacetKind::Boundary => {
                    let k = if ct.is_active(p) { p } else { q.unwrap() };
                    let dn = u.gradient(mesh, k).dot(&n);
                    let mut m: [f64; 2] = std::array::from_fn(|a| dn * len / 2.0 + theta.end_corrections[f][a]);
                    if mesh.is_boundary_facet(f) {
                        if let Some(seg) = ct.facet_inside_portion(f) {
                            let penalty = u.params.beta / element_size(mesh, k);
                            let [va, vb] = mesh.facet_points(f);
                            for qp in segment_points(&seg, degree)? {
                                let t = (qp.x - va).dot(&(vb - va)) / (len * len);
                                let d = qp.w * penalty * (data.g(mesh, k, qp.x) - u.value(mesh, k, qp.x));
                                m[0] += d * (1.0 - t);
                                m[1] += d * t;
                            }
                        }
                    }
                    Ok(m)
                }
            }
        })
        .collect()
}

/// `(σ_K, ζ)_K` for the two constant unit fields `ζ`.
pub fn interior_moment(ct: &CutTopology, data: &ProblemData, u: &CutFemSolution, k: usize) -> Result<Point> {
    let mesh = ct.mesh();
    let mut m = u.gradient(mesh, k) * mesh.area(k);
    for f in mesh.triangle_facets(k) {
        if ct.is_ghost(f) {
            let h = mesh.facet_length(f);
            let jump = jump_normal_derivative(mesh, u, f);
            m += mesh.facet_normal(f) * (u.params.gamma * h * h * jump * mesh.sign_triangle(k, f));
        }
    }
    for piece in ct.boundary_pieces(k) {
        for q in segment_points(&piece.segment, u.params.quadrature_degree)? {
            m += piece.normal * (q.w * (data.g(mesh, k, q.x) - u.value(mesh, k, q.x)));
        }
    }
    Ok(m)
}

fn local_rt1(mesh: &BackgroundMesh, k: usize, fm: &[[f64; 2]], interior: Point) -> Result<[f64; 8]> {
    let mut a = DMatrix::<f64>::zeros(8, 8);
    let mut b = DVector::<f64>::zeros(8);
    let unit = |m: usize| {
        let mut c = [0.0; 8];
        c[m] = 1.0;
        c
    };
    for (row0, f) in mesh.triangle_facets(k).into_iter().enumerate() {
        let [va, vb] = mesh.facet_points(f);
        let n = mesh.facet_normal(f);
        let len = mesh.facet_length(f);
        for q in segment_points(&[va, vb], 4)? {
            let t = (q.x - va).dot(&(vb - va)) / (len * len);
            let xi = RecoveredFlux::scaled(mesh, k, q.x);
            for m in 0..8 {
                let s = basis_value(&unit(m), xi).dot(&n) * q.w;
                a[(2 * row0, m)] += s * (1.0 - t);
                a[(2 * row0 + 1, m)] += s * t;
            }
        }
        b[2 * row0] = fm[f][0];
        b[2 * row0 + 1] = fm[f][1];
    }
    for q in triangle_points(&mesh.triangle_points(k), 4)? {
        let xi = RecoveredFlux::scaled(mesh, k, q.x);
        for m in 0..8 {
            let v = basis_value(&unit(m), xi) * q.w;
            a[(6, m)] += v.x;
            a[(7, m)] += v.y;
        }
    }
    b[6] = interior.x;
    b[7] = interior.y;
    let c = a.lu().solve(&b).ok_or_else(|| Error::Internal(format!("singular RT1 moment system on triangle {k}")))?;
    Ok(std::array::from_fn(|i| c[i]))
}

fn local_rt0(mesh: &BackgroundMesh, k: usize, fm: &[[f64; 2]]) -> Result<[f64; 8]> {
    // σ = a + c ξ has constant normal component on each facet
    let mut a = DMatrix::<f64>::zeros(3, 3);
    let mut b = DVector::<f64>::zeros(3);
    let xc = mesh.centroid(k);
    let hk = element_size(mesh, k);
    for (row, f) in mesh.triangle_facets(k).into_iter().enumerate() {
        let [va, vb] = mesh.facet_points(f);
        let n = mesh.facet_normal(f);
        let len = mesh.facet_length(f);
        let xi_mid = ((va + vb) / 2.0 - xc) / hk;
        a[(row, 0)] = n.x * len;
        a[(row, 1)] = n.y * len;
        a[(row, 2)] = xi_mid.dot(&n) * len;
        b[row] = fm[f][0] + fm[f][1];
    }
    let c = a.lu().solve(&b).ok_or_else(|| Error::Internal(format!("singular RT0 system on triangle {k}")))?;
    Ok([c[0], c[1], c[2], 0.0, 0.0, c[2], 0.0, 0.0])
}

/// Builds `σ_h` on every active triangle from `u_h` and `θ_h`.
pub fn recover_flux(
    ct: &CutTopology,
    data: &ProblemData,
    u: &CutFemSolution,
    theta: &MultiplierField,
    order: FluxOrder,
) -> Result<RecoveredFlux> {
    let mesh = ct.mesh();
    let fm = facet_moments(ct, data, u, theta)?;
    let nt = mesh.num_triangles();
    let local: Vec<(Point, [f64; 8])> = ct
        .active_triangles()
        .par_iter()
        .map(|&k| match order {
            FluxOrder::Rt1 => {
                let m = interior_moment(ct, data, u, k)?;
                Ok((m, local_rt1(mesh, k, &fm, m)?))
            }
            FluxOrder::Rt0 => Ok((Point::zeros(), local_rt0(mesh, k, &fm)?)),
        })
        .collect::<Result<_>>()?;
    let mut interior_moments = vec![Point::zeros(); nt];
    let mut coefficients = vec![[0.0; 8]; nt];
    let mut active = vec![false; nt];
    for (&k, (m, c)) in ct.active_triangles().iter().zip(local) {
        interior_moments[k] = m;
        coefficients[k] = c;
        active[k] = true;
    }
    Ok(RecoveredFlux { order, facet_moments: fm, interior_moments, coefficients, active })
}

/// Local conservation defect of `σ_h` against the projected extended source.
#[derive(Clone, Copy, Debug)]
pub struct ConservationReport {
    /// `max_K ‖∇·σ_h + Π f̃‖_K`.
    pub max_defect: f64,
    /// `(‖Π f̃‖² + ‖∇·σ_h‖²)^{1/2}` over the active mesh.
    pub scale: f64,
    pub worst_triangle: Option<usize>,
}

impl ConservationReport {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_defect / self.scale
        } else {
            self.max_defect
        }
    }
}

fn p1_norm_sq(area: f64, c: [f64; 3]) -> f64 {
    let s = c[0] + c[1] + c[2];
    let sq = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
    area / 12.0 * (sq + s * s)
}

/// Measures `-∇·σ_h = Π₁ f̃` (or `Π₀ f̃` for the lowest order) on every active triangle.
pub fn conservation_defect(ct: &CutTopology, flux: &RecoveredFlux, source: &ProjectedSource) -> ConservationReport {
    let mesh = ct.mesh();
    let mut report = ConservationReport { max_defect: 0.0, scale: 0.0, worst_triangle: None };
    let mut scale_sq = 0.0;
    for &k in ct.active_triangles() {
        let area = mesh.area(k);
        let div = flux.divergence_nodal(mesh, k);
        let target = match flux.order {
            FluxOrder::Rt1 => source.p1[k],
            FluxOrder::Rt0 => [source.p0[k]; 3],
        };
        let q: [f64; 3] = std::array::from_fn(|i| div[i] + target[i]);
        let d = p1_norm_sq(area, q).max(0.0).sqrt();
        scale_sq += p1_norm_sq(area, target) + p1_norm_sq(area, div);
        if d > report.max_defect || report.worst_triangle.is_none() {
            report.max_defect = report.max_defect.max(d);
            report.worst_triangle = Some(k);
        }
    }
    report.scale = scale_sq.sqrt();
    report
}

/// Largest jump of `σ_h · n_F` over interior facets at three Gauss points,
/// together with the largest `|σ_h|` seen at those points.
pub fn normal_jump(ct: &CutTopology, flux: &RecoveredFlux) -> (f64, f64) {
    let mesh = ct.mesh();
    let mut jump: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for f in ct.interior_facets() {
        let (p, q) = mesh.facet_triangles(f);
        let q = q.unwrap();
        let n = mesh.facet_normal(f);
        for qp in segment_points(&mesh.facet_points(f), 4).expect("supported degree") {
            let sp = flux.eval(mesh, p, qp.x);
            let sq = flux.eval(mesh, q, qp.x);
            jump = jump.max((sp.dot(&n) - sq.dot(&n)).abs());
            scale = scale.max(sp.norm()).max(sq.norm());
        }
    }
    (jump, scale)
}
