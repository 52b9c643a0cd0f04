//! Residuals `r(λ_N χ_K)` of the discrete solution tested with one-element hat pieces.

use rayon::prelude::*;

use crate::cut::{CutTopology, FacetKind};
use crate::cutfem::{element_size, jump_normal_derivative, CutFemSolution};
use crate::data::ProblemData;
use crate::error::Result;
use crate::quadrature::{polygon_points, segment_points};

/// `r(λ_j χ_K)` for every active triangle `K` and local vertex `j`.
#[derive(Clone, Debug)]
pub struct ResidualTable {
    values: Vec<[f64; 3]>,
}

impl ResidualTable {
    pub fn from_values(values: Vec<[f64; 3]>) -> Self {
        Self { values }
    }

    pub fn get(&self, k: usize, local: usize) -> f64 {
        self.values[k][local]
    }

    pub fn triangle(&self, k: usize) -> [f64; 3] {
        self.values[k]
    }

    /// `r(λ_N χ_K)` with `N` given by its background index.
    pub fn at_vertex(&self, ct: &CutTopology, k: usize, vertex: usize) -> f64 {
        let i = ct.mesh().local_index(k, vertex).expect("vertex of the triangle");
        self.values[k][i]
    }

    /// `Σ_{K ∋ N} r(λ_N χ_K)`, which vanishes for the discrete solution.
    pub fn vertex_sum(&self, ct: &CutTopology, vertex: usize) -> f64 {
        let mesh = ct.mesh();
        mesh.vertex_triangles(vertex).iter().filter(|&&k| ct.is_active(k)).map(|&k| self.at_vertex(ct, k, vertex)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Largest `|Σ_i r_{i,N}|` over the active vertices, relative to the
    /// largest entry of the table.
    pub fn compatibility_defect(&self, ct: &CutTopology) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        ct.active_vertices().iter().map(|&v| self.vertex_sum(ct, v).abs()).fold(0.0, f64::max) / scale
    }
}

fn triangle_residuals(ct: &CutTopology, data: &ProblemData, u: &CutFemSolution, k: usize) -> Result<[f64; 3]> {
    let mesh = ct.mesh();
    let params = &u.params;
    let degree = params.quadrature_degree;
    let grads = mesh.barycentric_gradients(k);
    let hk = element_size(mesh, k);
    let mut r = [0.0; 3];

    if ct.inside_area(k) > 0.0 {
        for q in polygon_points(&ct.inside_polygon(k), degree)? {
            let l = mesh.barycentric(k, q.x);
            let fq = q.w * data.f(mesh, k, q.x);
            for j in 0..3 {
                r[j] += fq * l[j];
            }
        }
    }

    let penalty = params.beta / hk;
    for piece in ct.boundary_pieces(k) {
        let dn: [f64; 3] = std::array::from_fn(|j| grads[j].dot(&piece.normal));
        for q in segment_points(&piece.segment, degree)? {
            let l = mesh.barycentric(k, q.x);
            let d = q.w * (data.g(mesh, k, q.x) - u.value(mesh, k, q.x));
            for j in 0..3 {
                r[j] += d * (penalty * l[j] - dn[j]);
            }
        }
    }

    for f in mesh.triangle_facets(k) {
        if ct.facet_kind(f) != FacetKind::Interior {
            continue;
        }
        let jump = jump_normal_derivative(mesh, u, f);
        if let Some(seg) = ct.facet_inside_portion(f) {
            let len = (seg[1] - seg[0]).norm();
            let l = mesh.barycentric(k, (seg[0] + seg[1]) / 2.0);
            for j in 0..3 {
                r[j] -= 0.5 * jump * len * l[j];
            }
        }
        if ct.is_ghost(f) {
            let h = mesh.facet_length(f);
            let n = mesh.facet_normal(f);
            let s = mesh.sign_triangle(k, f);
            for j in 0..3 {
                r[j] -= params.gamma * h * h * s * grads[j].dot(&n) * jump;
            }
        }
    }
    Ok(r)
}

/// Evaluates `r(λ_N χ_K) = l_h(λ_N χ_K) - ã_h(u_h, λ_N χ_K)` in its
/// integrated-by-parts form on every active triangle.
pub fn compute_residuals(ct: &CutTopology, data: &ProblemData, u: &CutFemSolution) -> Result<ResidualTable> {
    let active = ct.active_triangles();
    let local: Vec<[f64; 3]> = active.par_iter().map(|&k| triangle_residuals(ct, data, u, k)).collect::<Result<_>>()?;
    let mut values = vec![[0.0; 3]; ct.mesh().num_triangles()];
    for (&k, r) in active.iter().zip(local) {
        values[k] = r;
    }
    Ok(ResidualTable { values })
}
