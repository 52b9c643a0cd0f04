//! The facet multiplier `θ_h`, computed vertex by vertex from the residuals.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cut::{CutTopology, FacetKind};
use crate::error::{Error, Result};
use crate::flux::residual::ResidualTable;
use crate::mesh::{BackgroundMesh, StarOrientation, VertexStar};

/// `θ_h` on the interior facets of the active mesh.
#[derive(Clone, Debug)]
pub struct MultiplierField {
    /// `θ|_F(N)` at the two vertices of every facet, in the order of `mesh.facet(f)`.
    /// Zero off the interior facets.
    pub theta: Vec<[f64; 2]>,
    /// Normal-moment corrections on active-boundary facets that close open
    /// fans whose residuals do not sum to zero (two fans touching at a vertex).
    pub end_corrections: Vec<[f64; 2]>,
    /// Largest `‖θ̃_N‖ / ‖r_N‖` over the processed vertices.
    pub stability: f64,
}

/// Per-vertex output of the local solves.
#[derive(Clone, Debug)]
pub struct VertexMultiplier {
    pub vertex: usize,
    /// `(facet, θ|_F(N))` for the interior facets of every fan at `N`.
    pub values: Vec<(usize, f64)>,
    /// `(facet, correction)` for fan-closing facets.
    pub corrections: Vec<(usize, f64)>,
    pub theta_tilde_norm: f64,
    pub residual_norm: f64,
}

/// Solves the local equations of one fan for `θ|_F(N)` on its interior facets.
///
/// `residuals[i]` is `r(λ_N χ_{K_i})` for `star.triangles[i]`. For a closed
/// star the equations are completed by the multiplier-space constraint at `N`;
/// the residuals must sum to zero up to round-off, and any defect is spread
/// evenly over the star. For an open fan the residuals must be compatible.
pub fn solve_theta_vertex(mesh: &BackgroundMesh, star: &VertexStar, residuals: &[f64]) -> Result<Vec<f64>> {
    let n = star.triangles.len();
    let m = star.facets.len();
    if residuals.len() != n {
        return Err(Error::InvalidArgument(format!("{} residuals for a star of {n} triangles", residuals.len())));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let v = star.vertex;
    let mut r = residuals.to_vec();
    if star.closed {
        let defect = r.iter().sum::<f64>() / n as f64;
        for x in &mut r {
            *x -= defect;
        }
    }
    // unknowns θ̃_j = s_N(F_j) h_{F_j} θ_j(N); triangle equations read
    // Σ_j ½ s_K(F_j) s_N(F_j) θ̃_j = r_K
    let rows = if star.closed { n } else { n - 1 };
    let mut a = DMatrix::<f64>::zeros(rows, m);
    let mut b = DVector::<f64>::zeros(rows);
    for i in 0..n - 1 {
        let k = star.triangles[i];
        for (j, &f) in star.facets.iter().enumerate() {
            let (p, q) = mesh.facet_triangles(f);
            if p == k || q == Some(k) {
                a[(i, j)] = 0.5 * mesh.sign_triangle(k, f) * mesh.sign_vertex(v, f);
            }
        }
        b[i] = r[i];
    }
    if star.closed {
        for j in 0..m {
            a[(n - 1, j)] = 1.0;
        }
    }
    let tilde =
        a.lu().solve(&b).ok_or_else(|| Error::Internal(format!("singular local multiplier system at vertex {v}")))?;
    Ok(star
        .facets
        .iter()
        .zip(tilde.iter())
        .map(|(&f, &t)| t / (mesh.sign_vertex(v, f) * mesh.facet_length(f)))
        .collect())
}

/// The two facets of `k` through vertex `v`.
fn facets_through(mesh: &BackgroundMesh, k: usize, v: usize) -> [usize; 2] {
    let i = mesh.local_index(k, v).expect("vertex of the triangle");
    let f = mesh.triangle_facets(k);
    [f[(i + 1) % 3], f[(i + 2) % 3]]
}

fn solve_vertex(
    ct: &CutTopology,
    table: &ResidualTable,
    v: usize,
    orientation: StarOrientation,
) -> Result<VertexMultiplier> {
    let mesh = ct.mesh();
    let fans = mesh.vertex_fans(v, |k| ct.is_active(k), orientation);
    let mut out = VertexMultiplier {
        vertex: v,
        values: Vec::new(),
        corrections: Vec::new(),
        theta_tilde_norm: 0.0,
        residual_norm: 0.0,
    };
    let mut tilde_sq = 0.0;
    let mut res_sq = 0.0;
    for fan in &fans {
        let mut r: Vec<f64> = fan.triangles.iter().map(|&k| table.at_vertex(ct, k, v)).collect();
        res_sq += r.iter().map(|x| x * x).sum::<f64>();
        if !fan.closed {
            // An open fan is compatible when it is the whole active star of `v`;
            // otherwise the defect leaves through the two closing facets.
            let n = r.len();
            let defect = r.iter().sum::<f64>();
            let first = fan.triangles[0];
            let last = fan.triangles[n - 1];
            let closing = |k: usize, inner: Option<usize>| {
                facets_through(mesh, k, v)
                    .into_iter()
                    .find(|&f| Some(f) != inner && ct.facet_kind(f) != FacetKind::Interior)
                    .expect("open fan ends on a non-interior facet")
            };
            if n == 1 {
                let [f0, f1] = facets_through(mesh, first, v);
                out.corrections.push((f0, -mesh.sign_triangle(first, f0) * defect / 2.0));
                out.corrections.push((f1, -mesh.sign_triangle(first, f1) * defect / 2.0));
                continue;
            }
            let f0 = closing(first, fan.facets.first().copied());
            let f1 = closing(last, fan.facets.last().copied());
            out.corrections.push((f0, -mesh.sign_triangle(first, f0) * defect / 2.0));
            out.corrections.push((f1, -mesh.sign_triangle(last, f1) * defect / 2.0));
            r[0] -= defect / 2.0;
            r[n - 1] -= defect / 2.0;
        }
        let theta = solve_theta_vertex(mesh, fan, &r)?;
        for (&f, &t) in fan.facets.iter().zip(&theta) {
            tilde_sq += (mesh.facet_length(f) * t).powi(2);
            out.values.push((f, t));
        }
    }
    out.theta_tilde_norm = tilde_sq.sqrt();
    out.residual_norm = res_sq.sqrt();
    Ok(out)
}

/// Runs the local solves at every active vertex and assembles `θ_h = Σ_N θ_N`.
pub fn solve_multiplier(
    ct: &CutTopology,
    table: &ResidualTable,
    orientation: StarOrientation,
) -> Result<MultiplierField> {
    let mesh = ct.mesh();
    let vertices = ct.active_vertices();
    let local: Vec<VertexMultiplier> =
        vertices.par_iter().map(|&v| solve_vertex(ct, table, v, orientation)).collect::<Result<_>>()?;
    let mut theta = vec![[0.0; 2]; mesh.num_facets()];
    let mut end_corrections = vec![[0.0; 2]; mesh.num_facets()];
    let mut stability: f64 = 0.0;
    let global = table.max_abs();
    for vm in &local {
        for &(f, t) in &vm.values {
            let slot = if mesh.facet(f)[0] == vm.vertex { 0 } else { 1 };
            theta[f][slot] = t;
        }
        for &(f, c) in &vm.corrections {
            let slot = if mesh.facet(f)[0] == vm.vertex { 0 } else { 1 };
            end_corrections[f][slot] += c;
        }
        if vm.residual_norm > 1e-8 * global {
            stability = stability.max(vm.theta_tilde_norm / vm.residual_norm);
        }
    }
    let field = MultiplierField { theta, end_corrections, stability };
    let violation = constraint_violation(ct, &field);
    if violation > 1e-9 {
        return Err(Error::Internal(format!("multiplier constraint violated by {violation:.3e}")));
    }
    Ok(field)
}

/// Largest `|Σ_F s_N(F) h_F θ|_F(N)|` over interior vertices of the active mesh,
/// relative to `Σ_F |h_F θ|_F(N)|` at the same vertex.
pub fn constraint_violation(ct: &CutTopology, field: &MultiplierField) -> f64 {
    let mesh = ct.mesh();
    let mut worst: f64 = 0.0;
    for v in ct.active_vertices() {
        if mesh.is_boundary_vertex(v) || mesh.vertex_triangles(v).iter().any(|&k| !ct.is_active(k)) {
            continue;
        }
        let mut sum = 0.0;
        let mut scale = 0.0;
        for &f in mesh.vertex_facets(v) {
            let slot = if mesh.facet(f)[0] == v { 0 } else { 1 };
            let x = mesh.facet_length(f) * field.theta[f][slot];
            sum += mesh.sign_vertex(v, f) * x;
            scale += x.abs();
        }
        if scale > 0.0 {
            worst = worst.max(sum.abs() / scale);
        }
    }
    worst
}
