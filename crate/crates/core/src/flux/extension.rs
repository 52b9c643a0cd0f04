//! Extension of `f` to the outside part of cut triangles and its element-wise projection.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::cut::{CellClass, CutTopology, FacetKind};
use crate::cutfem::{element_size, jump_normal_derivative, CutFemSolution};
use crate::data::ProblemData;
use crate::error::Result;
use crate::quadrature::{polygon_area, polygon_points, segment_points};

/// `(f̃, λ_j)_{K ∩ Ω_hᶜ}` prescribed by the boundary residual of the discrete solution:
/// `β/h_K ⟨g_h - u_h, λ_j⟩_{Γ_K} + Σ_{F ∈ ℰ_I ∩ ℰ_K} ½ ⟨[∂_{n_F} u_h], λ_j⟩_{F ∩ Ω_hᶜ}`.
pub fn extension_moments(ct: &CutTopology, data: &ProblemData, u: &CutFemSolution, k: usize) -> Result<[f64; 3]> {
    let mesh = ct.mesh();
    let mut m = [0.0; 3];
    let Some(cell) = ct.cut_cell(k) else {
        return Ok(m);
    };
    let penalty = u.params.beta / element_size(mesh, k);
    for q in segment_points(&cell.segment, u.params.quadrature_degree)? {
        let l = mesh.barycentric(k, q.x);
        let d = q.w * (data.g(mesh, k, q.x) - u.value(mesh, k, q.x));
        for j in 0..3 {
            m[j] += penalty * d * l[j];
        }
    }
    for f in mesh.triangle_facets(k) {
        if ct.facet_kind(f) != FacetKind::Interior {
            continue;
        }
        let jump = jump_normal_derivative(mesh, u, f);
        for seg in ct.facet_outside_portions(f) {
            let len = (seg[1] - seg[0]).norm();
            let l = mesh.barycentric(k, (seg[0] + seg[1]) / 2.0);
            for j in 0..3 {
                m[j] += 0.5 * jump * len * l[j];
            }
        }
    }
    Ok(m)
}

/// The linear extension of `f` on `K ∩ Ω_hᶜ`, as nodal values at the vertices of `K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FExtension {
    pub nodal: [f64; 3],
    /// The outside part is too small for its mass matrix; `nodal` is zero.
    pub degenerate: bool,
}

/// Solves the 3×3 moment system on `K ∩ Ω_hᶜ` for the linear extension of `f`.
pub fn extend_f(ct: &CutTopology, data: &ProblemData, u: &CutFemSolution, k: usize) -> Result<FExtension> {
    let mesh = ct.mesh();
    if ct.class(k) != CellClass::Cut {
        return Ok(FExtension { nodal: [0.0; 3], degenerate: false });
    }
    let poly = ct.outside_polygon(k);
    if polygon_area(&poly) < 1e-14 * mesh.area(k) {
        return Ok(FExtension { nodal: [0.0; 3], degenerate: true });
    }
    let mut mass = Matrix3::<f64>::zeros();
    for q in polygon_points(&poly, 2)? {
        let l = mesh.barycentric(k, q.x);
        for i in 0..3 {
            for j in 0..3 {
                mass[(i, j)] += q.w * l[i] * l[j];
            }
        }
    }
    let rhs = Vector3::from(extension_moments(ct, data, u, k)?);
    match mass.lu().solve(&rhs) {
        Some(c) => Ok(FExtension { nodal: [c[0], c[1], c[2]], degenerate: false }),
        None => Ok(FExtension { nodal: [0.0; 3], degenerate: true }),
    }
}

/// `Π₁ f̃` on each active triangle, where `f̃ = f` on `K ∩ Ω_h` and the
/// extension on the rest, as nodal values; `Π₀ f̃` as element means.
#[derive(Clone, Debug)]
pub struct ProjectedSource {
    pub p1: Vec<[f64; 3]>,
    pub p0: Vec<f64>,
    /// `(f̃, λ_j)_K`.
    pub moments: Vec<[f64; 3]>,
}

/// Element-wise `L²` projection of the extended source over the full triangles.
///
/// The projection is computed from the moments of `f̃` with the mass matrix
/// of the whole triangle, so tiny outside parts never need to be inverted on.
pub fn project_f(ct: &CutTopology, data: &ProblemData, u: &CutFemSolution) -> Result<ProjectedSource> {
    let mesh = ct.mesh();
    let degree = u.params.quadrature_degree;
    let nt = mesh.num_triangles();
    let local: Vec<[f64; 3]> = ct
        .active_triangles()
        .par_iter()
        .map(|&k| {
            let mut m = extension_moments(ct, data, u, k)?;
            if ct.inside_area(k) > 0.0 {
                for q in polygon_points(&ct.inside_polygon(k), degree)? {
                    let l = mesh.barycentric(k, q.x);
                    let fq = q.w * data.f(mesh, k, q.x);
                    for j in 0..3 {
                        m[j] += fq * l[j];
                    }
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let mut out = ProjectedSource { p1: vec![[0.0; 3]; nt], p0: vec![0.0; nt], moments: vec![[0.0; 3]; nt] };
    for (&k, m) in ct.active_triangles().iter().zip(local) {
        let area = mesh.area(k);
        let s = m[0] + m[1] + m[2];
        out.p1[k] = std::array::from_fn(|i| 3.0 / area * (4.0 * m[i] - s));
        out.p0[k] = s / area;
        out.moments[k] = m;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    #[test]
    fn inverse_mass_matrix_formula() {
        // M = |K|/12 [[2,1,1],[1,2,1],[1,1,2]]; check M * M⁻¹ m = m on a sample
        let area = 0.37;
        let m = [0.3, -1.1, 0.25];
        let s = m[0] + m[1] + m[2];
        let c: [f64; 3] = std::array::from_fn(|i| 3.0 / area * (4.0 * m[i] - s));
        for i in 0..3 {
            let back: f64 = (0..3).map(|j| area / 12.0 * if i == j { 2.0 } else { 1.0 } * c[j]).sum();
            assert!((back - m[i]).abs() < 1e-14);
        }
    }
}
