//! Dense global solver for the discontinuous saddle-point formulation.
//!
//! Only meant for small meshes: it checks that the vertex-local multiplier
//! construction and the continuous CutFEM solve agree with one global system
//! posed over broken P1 functions and facet multipliers.

use nalgebra::{DMatrix, DVector};

use crate::cut::{CutTopology, FacetKind};
use crate::cutfem::{element_size, CutFemParams, CutFemSolution};
use crate::data::ProblemData;
use crate::error::{Error, Result};
use crate::flux::{MultiplierField, ResidualTable};
use crate::quadrature::{polygon_points, segment_points};

/// Default bound on `dim DG_h + dim M_h` for the dense solve.
pub const DEFAULT_CAP: usize = 2000;

/// Index maps of the broken space and the facet multipliers.
#[derive(Clone, Debug)]
pub struct MixedLayout {
    /// Active triangles; DG dof `3 i + j` is local vertex `j` of `triangles[i]`.
    pub triangles: Vec<usize>,
    dg_index: Vec<Option<usize>>,
    /// `(facet, slot)` for every unconstrained multiplier dof.
    pub multipliers: Vec<(usize, usize)>,
    /// Constrained interior vertices, with the eliminated `(facet, slot)`.
    pub eliminated: Vec<(usize, (usize, usize))>,
}

impl MixedLayout {
    pub fn new(ct: &CutTopology) -> Self {
        let mesh = ct.mesh();
        let triangles = ct.active_triangles().to_vec();
        let mut dg_index = vec![None; mesh.num_triangles()];
        for (i, &k) in triangles.iter().enumerate() {
            dg_index[k] = Some(i);
        }
        let multipliers: Vec<(usize, usize)> = ct.interior_facets().flat_map(|f| [(f, 0), (f, 1)]).collect();
        let eliminated = constrained_vertices(ct)
            .into_iter()
            .map(|v| {
                let f = mesh.vertex_facets(v)[0];
                (v, (f, slot_of(ct, f, v)))
            })
            .collect();
        Self { triangles, dg_index, multipliers, eliminated }
    }

    pub fn num_dg(&self) -> usize {
        3 * self.triangles.len()
    }

    pub fn dg(&self, k: usize, local: usize) -> usize {
        3 * self.dg_index[k].expect("active triangle") + local
    }
}

fn slot_of(ct: &CutTopology, f: usize, v: usize) -> usize {
    if ct.mesh().facet(f)[0] == v {
        0
    } else {
        1
    }
}

/// Vertices carrying a multiplier-space constraint: not on the background
/// boundary and surrounded by active triangles only.
pub fn constrained_vertices(ct: &CutTopology) -> Vec<usize> {
    let mesh = ct.mesh();
    ct.active_vertices()
        .into_iter()
        .filter(|&v| !mesh.is_boundary_vertex(v) && mesh.vertex_triangles(v).iter().all(|&k| ct.is_active(k)))
        .collect()
}

/// `ã_h` on the broken space, its load vector, and the unconstrained `b`.
#[derive(Clone, Debug)]
pub struct MixedSystem {
    pub layout: MixedLayout,
    pub a_tilde: DMatrix<f64>,
    pub load: DVector<f64>,
    /// `b(μ, v)` with one row per entry of `layout.multipliers`.
    pub b_full: DMatrix<f64>,
    /// Columns span the constrained multipliers, in the full row numbering.
    pub null_basis: DMatrix<f64>,
}

fn jump_coefficients(ct: &CutTopology, layout: &MixedLayout, f: usize) -> Vec<(usize, f64, usize)> {
    // (dg dof, sign, background vertex) for the four facet traces
    let mesh = ct.mesh();
    let (p, q) = mesh.facet_triangles(f);
    let mut out = Vec::with_capacity(4);
    for (k, s) in [(p, 1.0), (q.expect("interior facet"), -1.0)] {
        for &v in &mesh.facet(f) {
            let j = mesh.local_index(k, v).expect("facet vertex");
            out.push((layout.dg(k, j), s, v));
        }
    }
    out
}

/// Assembles the broken forms. `data` may be `None` for the matrices alone.
pub fn assemble_mixed(ct: &CutTopology, data: Option<&ProblemData>, params: &CutFemParams) -> Result<MixedSystem> {
    params.validate()?;
    let mesh = ct.mesh();
    let layout = MixedLayout::new(ct);
    let n = layout.num_dg();
    let degree = params.quadrature_degree;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut load = DVector::<f64>::zeros(n);

    for &k in &layout.triangles {
        let g = mesh.barycentric_gradients(k);
        let d: [usize; 3] = std::array::from_fn(|j| layout.dg(k, j));
        let area = ct.inside_area(k);
        for i in 0..3 {
            for j in 0..3 {
                a[(d[i], d[j])] += area * g[i].dot(&g[j]);
            }
        }
        if let Some(data) = data {
            if area > 0.0 {
                for q in polygon_points(&ct.inside_polygon(k), degree)? {
                    let l = mesh.barycentric(k, q.x);
                    for i in 0..3 {
                        load[d[i]] += q.w * data.f(mesh, k, q.x) * l[i];
                    }
                }
            }
        }
        let penalty = params.beta / element_size(mesh, k);
        for piece in ct.boundary_pieces(k) {
            let dn: [f64; 3] = std::array::from_fn(|i| g[i].dot(&piece.normal));
            for q in segment_points(&piece.segment, degree)? {
                let l = mesh.barycentric(k, q.x);
                for i in 0..3 {
                    for j in 0..3 {
                        a[(d[i], d[j])] += q.w * (penalty * l[i] * l[j] - dn[j] * l[i] - dn[i] * l[j]);
                    }
                    if let Some(data) = data {
                        load[d[i]] += q.w * data.g(mesh, k, q.x) * (penalty * l[i] - dn[i]);
                    }
                }
            }
        }
    }

    for f in ct.interior_facets() {
        let (p, q) = mesh.facet_triangles(f);
        let q = q.expect("interior facet");
        let nf = mesh.facet_normal(f);
        // broken normal derivative coefficients: (dof, value) with the jump sign folded in
        let mut dn_jump: Vec<(usize, f64)> = Vec::with_capacity(6);
        let mut dn_avg: Vec<(usize, f64)> = Vec::with_capacity(6);
        for (k, s) in [(p, 1.0), (q, -1.0)] {
            let g = mesh.barycentric_gradients(k);
            for j in 0..3 {
                dn_jump.push((layout.dg(k, j), s * g[j].dot(&nf)));
                dn_avg.push((layout.dg(k, j), 0.5 * g[j].dot(&nf)));
            }
        }
        if ct.is_ghost(f) {
            let h = mesh.facet_length(f);
            for &(i, ci) in &dn_jump {
                for &(j, cj) in &dn_jump {
                    a[(i, j)] += params.gamma * h * h * ci * cj;
                }
            }
        }
        if let Some(seg) = ct.facet_inside_portion(f) {
            // ∫_{F∩Ω_h} [v] for each trace dof
            let len = (seg[1] - seg[0]).norm();
            let [va, vb] = mesh.facet_points(f);
            let flen = mesh.facet_length(f);
            let mid = (seg[0] + seg[1]) / 2.0;
            let t = (mid - va).dot(&(vb - va)) / (flen * flen);
            let jumps: Vec<(usize, f64)> = jump_coefficients(ct, &layout, f)
                .into_iter()
                .map(|(dof, s, v)| {
                    let w = if v == mesh.facet(f)[0] { 1.0 - t } else { t };
                    (dof, s * w * len)
                })
                .collect();
            for &(i, ji) in &jumps {
                for &(j, cj) in &dn_avg {
                    a[(i, j)] -= ji * cj;
                    a[(j, i)] -= ji * cj;
                }
            }
        }
    }

    let nm = layout.multipliers.len();
    let mut b_full = DMatrix::<f64>::zeros(nm, n);
    let mut row_of = std::collections::HashMap::with_capacity(nm);
    for (r, &(f, slot)) in layout.multipliers.iter().enumerate() {
        row_of.insert((f, slot), r);
        let v = mesh.facet(f)[slot];
        let h = mesh.facet_length(f);
        for (dof, s, w) in jump_coefficients(ct, &layout, f) {
            if w == v {
                b_full[(r, dof)] += 0.5 * h * s;
            }
        }
    }

    let eliminated: std::collections::HashSet<usize> = layout.eliminated.iter().map(|(_, key)| row_of[key]).collect();
    let free: Vec<usize> = (0..nm).filter(|r| !eliminated.contains(r)).collect();
    let mut col_of = vec![usize::MAX; nm];
    for (c, &r) in free.iter().enumerate() {
        col_of[r] = c;
    }
    let mut null_basis = DMatrix::<f64>::zeros(nm, free.len());
    for (c, &r) in free.iter().enumerate() {
        null_basis[(r, c)] = 1.0;
    }
    for &(v, (f0, s0)) in &layout.eliminated {
        let r0 = row_of[&(f0, s0)];
        let w0 = mesh.sign_vertex(v, f0) * mesh.facet_length(f0);
        for &f in mesh.vertex_facets(v) {
            if f == f0 {
                continue;
            }
            let r = row_of[&(f, slot_of(ct, f, v))];
            null_basis[(r0, col_of[r])] = -mesh.sign_vertex(v, f) * mesh.facet_length(f) / w0;
        }
    }
    Ok(MixedSystem { layout, a_tilde: a, load, b_full, null_basis })
}

/// Solution of the saddle-point problem.
#[derive(Clone, Debug)]
pub struct MixedSolution {
    /// Broken `u_h` as vertex values per background triangle (zero off the active mesh).
    pub u: Vec<[f64; 3]>,
    /// `θ_h|_F(N)` per facet, in the order of `mesh.facet(f)`.
    pub theta: Vec<[f64; 2]>,
    /// Max-norm residual of the block system relative to the load.
    pub saddle_residual: f64,
    pub num_dg: usize,
    pub num_multipliers: usize,
}

/// Solves `ã_h(u, w) + b(θ, w) = l_h(w)`, `b(μ, u) = 0` on the constrained multipliers.
pub fn solve_mixed(ct: &CutTopology, data: &ProblemData, params: &CutFemParams, cap: usize) -> Result<MixedSolution> {
    let sys = assemble_mixed(ct, Some(data), params)?;
    let n = sys.layout.num_dg();
    let b = sys.null_basis.transpose() * &sys.b_full;
    let m = b.nrows();
    if n + m > cap {
        return Err(Error::InvalidArgument(format!("{} saddle-point unknowns exceed the cap of {cap}", n + m)));
    }
    let mut k = DMatrix::<f64>::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&sys.a_tilde);
    k.view_mut((0, n), (n, m)).copy_from(&b.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(&b);
    let mut rhs = DVector::<f64>::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&sys.load);
    let x = k.clone().lu().solve(&rhs).ok_or_else(|| Error::OracleFailure("singular saddle-point system".into()))?;
    let scale = rhs.amax().max(f64::MIN_POSITIVE);
    let saddle_residual = (&k * &x - &rhs).amax() / scale;
    if !saddle_residual.is_finite() {
        return Err(Error::OracleFailure("non-finite saddle-point solution".into()));
    }

    let mesh = ct.mesh();
    let mut u = vec![[0.0; 3]; mesh.num_triangles()];
    for (i, &t) in sys.layout.triangles.iter().enumerate() {
        u[t] = [x[3 * i], x[3 * i + 1], x[3 * i + 2]];
    }
    let full = &sys.null_basis * x.rows(n, m);
    let mut theta = vec![[0.0; 2]; mesh.num_facets()];
    for (r, &(f, slot)) in sys.layout.multipliers.iter().enumerate() {
        theta[f][slot] = full[r];
    }
    Ok(MixedSolution { u, theta, saddle_residual, num_dg: n, num_multipliers: m })
}

impl MixedSolution {
    /// Largest `|[u_h](N)|` over interior facet endpoints.
    pub fn max_jump(&self, ct: &CutTopology) -> f64 {
        let mesh = ct.mesh();
        let mut worst: f64 = 0.0;
        for f in ct.interior_facets() {
            let (p, q) = mesh.facet_triangles(f);
            let q = q.expect("interior facet");
            for &v in &mesh.facet(f) {
                let a = self.u[p][mesh.local_index(p, v).expect("facet vertex")];
                let b = self.u[q][mesh.local_index(q, v).expect("facet vertex")];
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

/// `l_h(λ_j χ_K) - ã_h(u_h, λ_j χ_K)` evaluated from the assembled broken forms.
pub fn dg_residual(ct: &CutTopology, data: &ProblemData, u: &CutFemSolution) -> Result<ResidualTable> {
    let sys = assemble_mixed(ct, Some(data), &u.params)?;
    let mesh = ct.mesh();
    let mut x = DVector::<f64>::zeros(sys.layout.num_dg());
    for &k in &sys.layout.triangles {
        let vals = u.local_values(mesh, k);
        for j in 0..3 {
            x[sys.layout.dg(k, j)] = vals[j];
        }
    }
    let r = &sys.load - &sys.a_tilde * x;
    let mut values = vec![[0.0; 3]; mesh.num_triangles()];
    for &k in &sys.layout.triangles {
        values[k] = std::array::from_fn(|j| r[sys.layout.dg(k, j)]);
    }
    Ok(ResidualTable::from_values(values))
}

/// `|||·|||_{h,*}` Gram matrix on the broken space.
fn dg_norm_gram(ct: &CutTopology, layout: &MixedLayout) -> DMatrix<f64> {
    let mesh = ct.mesh();
    let n = layout.num_dg();
    let mut v = DMatrix::<f64>::zeros(n, n);
    for &k in &layout.triangles {
        let g = mesh.barycentric_gradients(k);
        let d: [usize; 3] = std::array::from_fn(|j| layout.dg(k, j));
        let hk = element_size(mesh, k);
        for i in 0..3 {
            for j in 0..3 {
                v[(d[i], d[j])] += mesh.area(k) * g[i].dot(&g[j]);
            }
        }
        for piece in ct.boundary_pieces(k) {
            let len = piece.length();
            let dn: [f64; 3] = std::array::from_fn(|i| g[i].dot(&piece.normal));
            let la = mesh.barycentric(k, piece.segment[0]);
            let lb = mesh.barycentric(k, piece.segment[1]);
            for i in 0..3 {
                for j in 0..3 {
                    let mass = len / 6.0 * (2.0 * la[i] * la[j] + la[i] * lb[j] + lb[i] * la[j] + 2.0 * lb[i] * lb[j]);
                    v[(d[i], d[j])] += hk * len * dn[i] * dn[j] + mass / hk;
                }
            }
        }
    }
    for f in ct.interior_facets() {
        let h = mesh.facet_length(f);
        for (di, si, wi) in jump_coefficients(ct, layout, f) {
            for (dj, sj, wj) in jump_coefficients(ct, layout, f) {
                let mass = if wi == wj { h / 3.0 } else { h / 6.0 };
                v[(di, dj)] += si * sj * mass / h;
            }
        }
    }
    v
}

/// Smallest singular value of `b` measured in `‖·‖_{M_h}` and `|||·|||_{h,*}`.
pub fn infsup_probe(ct: &CutTopology, params: &CutFemParams) -> Result<f64> {
    let sys = assemble_mixed(ct, None, params)?;
    let mesh = ct.mesh();
    let nm = sys.layout.multipliers.len();
    let mut mass = DMatrix::<f64>::zeros(nm, nm);
    for (r, &(f, slot)) in sys.layout.multipliers.iter().enumerate() {
        let h = mesh.facet_length(f);
        mass[(r, r)] += h * h / 3.0;
        mass[(r, if slot == 0 { r + 1 } else { r - 1 })] += h * h / 6.0;
    }
    let z = &sys.null_basis;
    let m_red = z.transpose() * mass * z;
    let b = z.transpose() * &sys.b_full;
    let lv = dg_norm_gram(ct, &sys.layout)
        .cholesky()
        .ok_or_else(|| Error::OracleFailure("broken-space norm is not definite".into()))?;
    let lm = m_red.cholesky().ok_or_else(|| Error::OracleFailure("multiplier norm is not definite".into()))?;
    // C = L_V⁻¹ Bᵀ L_M⁻ᵀ
    let lm_l = lm.l();
    let bt_scaled = lm_l
        .solve_lower_triangular(&b)
        .ok_or_else(|| Error::OracleFailure("singular multiplier factor".into()))?
        .transpose();
    let c = lv
        .l()
        .solve_lower_triangular(&bt_scaled)
        .ok_or_else(|| Error::OracleFailure("singular broken-space factor".into()))?;
    let sv = c.singular_values();
    Ok(sv.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Rank deficiency of `b` over unconstrained facet multipliers, which should
/// equal the number of constrained vertices.
pub fn unconstrained_rank_deficiency(ct: &CutTopology, params: &CutFemParams) -> Result<usize> {
    let sys = assemble_mixed(ct, None, params)?;
    let sv = sys.b_full.transpose().singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * top).count();
    Ok(sys.layout.multipliers.len() - rank)
}

/// Differences between the local pipeline and the global saddle-point solve.
#[derive(Clone, Copy, Debug)]
pub struct OracleComparison {
    pub u_difference: f64,
    pub theta_difference: f64,
    /// `max |θ_h|` of the global solve.
    pub theta_scale: f64,
    pub max_jump: f64,
    pub saddle_residual: f64,
    pub unknowns: usize,
}

impl OracleComparison {
    pub fn passes(&self, tol: f64) -> bool {
        self.u_difference <= tol && self.theta_difference <= tol * self.theta_scale.max(1.0) && self.max_jump <= tol
    }
}

pub fn compare(
    ct: &CutTopology,
    u: &CutFemSolution,
    theta: &MultiplierField,
    mixed: &MixedSolution,
) -> OracleComparison {
    let mesh = ct.mesh();
    let mut u_difference: f64 = 0.0;
    for &k in ct.active_triangles() {
        let local = u.local_values(mesh, k);
        for j in 0..3 {
            u_difference = u_difference.max((local[j] - mixed.u[k][j]).abs());
        }
    }
    let mut theta_difference: f64 = 0.0;
    let mut theta_scale: f64 = 0.0;
    for f in 0..mesh.num_facets() {
        if ct.facet_kind(f) != FacetKind::Interior {
            continue;
        }
        for s in 0..2 {
            theta_difference = theta_difference.max((theta.theta[f][s] - mixed.theta[f][s]).abs());
            theta_scale = theta_scale.max(mixed.theta[f][s].abs());
        }
    }
    OracleComparison {
        u_difference,
        theta_difference,
        theta_scale,
        max_jump: mixed.max_jump(ct),
        saddle_residual: mixed.saddle_residual,
        unknowns: mixed.num_dg + mixed.num_multipliers,
    }
}
