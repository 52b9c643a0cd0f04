//! Cut-cell topology: the discrete domain `Ω_h = {ρ_h < 0}` where `ρ_h` is the
//! nodal P1 interpolant of a level set, intersected with the background mesh.

use crate::error::{Error, Result};
use crate::levelset::LevelSet;
use crate::mesh::BackgroundMesh;
use crate::quadrature::polygon_area;
use crate::Point;

/// Relative snapping tolerance for vertex values of the level set.
pub const SNAP_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellClass {
    Inside,
    Cut,
    Outside,
}

/// Geometry of a triangle crossed by the discrete boundary.
#[derive(Clone, Debug)]
pub struct CutCell {
    /// `Γ_K`, ordered so that `Ω_h` lies to its left.
    pub segment: [Point; 2],
    /// Outward unit normal of `Ω_h` on `Γ_K`.
    pub normal: Point,
    /// `K ∩ Ω_h`, counter-clockwise.
    pub inside: Vec<Point>,
    /// `K ∩ Ω_hᶜ`, counter-clockwise.
    pub outside: Vec<Point>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PieceKind {
    /// The level-set segment crossing the triangle.
    Cut,
    /// The inside portion of a facet on the boundary of the background domain.
    Fitted { facet: usize },
}

/// A straight piece of `∂Ω_h` inside one active triangle.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPiece {
    pub segment: [Point; 2],
    pub normal: Point,
    pub kind: PieceKind,
}

impl BoundaryPiece {
    pub fn length(&self) -> f64 {
        (self.segment[1] - self.segment[0]).norm()
    }
}

/// Role of a background facet relative to the active mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FacetKind {
    /// Both neighbors active (`ℰ_I`).
    Interior,
    /// Exactly one active neighbor (`ℰ_∂`).
    Boundary,
    Inactive,
}

#[derive(Clone, Debug)]
pub struct CutTopology<'m> {
    mesh: &'m BackgroundMesh,
    levelset: Vec<f64>,
    class: Vec<CellClass>,
    active: Vec<usize>,
    active_index: Vec<Option<usize>>,
    cut: Vec<Option<CutCell>>,
    pieces: Vec<Vec<BoundaryPiece>>,
    inside_area: Vec<f64>,
    facet_kind: Vec<FacetKind>,
    ghost: Vec<bool>,
    facet_inside: Vec<Option<(f64, f64)>>,
    vertex_active: Vec<bool>,
}

/// Nodal values of the level set, with near-zero values pushed to `+tol·h`.
pub fn interpolate_levelset(mesh: &BackgroundMesh, ls: &LevelSet) -> Result<Vec<f64>> {
    let mut h = vec![0.0f64; mesh.num_vertices()];
    for f in 0..mesh.num_facets() {
        let [a, b] = mesh.facet(f);
        let len = mesh.facet_length(f);
        h[a] = h[a].max(len);
        h[b] = h[b].max(len);
    }
    mesh.vertices()
        .iter()
        .enumerate()
        .map(|(v, &p)| {
            let value = ls.eval(p);
            if !value.is_finite() {
                return Err(Error::InvalidInput(format!("level set is not finite at vertex {v} ({p:?})")));
            }
            let tol = SNAP_TOLERANCE * h[v];
            Ok(if value.abs() < tol { tol } else { value })
        })
        .collect()
}

/// Inside parameter interval `[t0, t1]` of a segment whose end values are `a`, `b`.
fn inside_interval(a: f64, b: f64) -> Option<(f64, f64)> {
    match (a < 0.0, b < 0.0) {
        (true, true) => Some((0.0, 1.0)),
        (false, false) => None,
        (true, false) => Some((0.0, a / (a - b))),
        (false, true) => Some((a / (a - b), 1.0)),
    }
}

impl<'m> CutTopology<'m> {
    /// Classifies all triangles and builds the cut geometry from snapped nodal values.
    pub fn build(mesh: &'m BackgroundMesh, levelset: Vec<f64>) -> Result<Self> {
        if levelset.len() != mesh.num_vertices() {
            return Err(Error::InvalidArgument("one level-set value per vertex is required".into()));
        }
        if let Some(v) = levelset.iter().position(|&x| x == 0.0 || !x.is_finite()) {
            return Err(Error::InvalidInput(format!("level-set value at vertex {v} is not snapped")));
        }
        let nt = mesh.num_triangles();
        let mut class = Vec::with_capacity(nt);
        let mut cut = Vec::with_capacity(nt);
        let mut inside_area = vec![0.0; nt];
        for k in 0..nt {
            let t = mesh.triangle(k);
            let vals = t.map(|v| levelset[v]);
            let neg = vals.iter().filter(|&&x| x < 0.0).count();
            let c = match neg {
                3 => CellClass::Inside,
                0 => CellClass::Outside,
                _ => CellClass::Cut,
            };
            class.push(c);
            match c {
                CellClass::Inside => {
                    inside_area[k] = mesh.area(k);
                    cut.push(None);
                }
                CellClass::Outside => cut.push(None),
                CellClass::Cut => {
                    let cell = Self::build_cut_cell(mesh, k, vals);
                    inside_area[k] = polygon_area(&cell.inside);
                    cut.push(Some(cell));
                }
            }
        }

        let active: Vec<usize> = (0..nt).filter(|&k| class[k] != CellClass::Outside).collect();
        if active.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut active_index = vec![None; nt];
        for (i, &k) in active.iter().enumerate() {
            active_index[k] = Some(i);
        }
        let mut vertex_active = vec![false; mesh.num_vertices()];
        for &k in &active {
            for v in mesh.triangle(k) {
                vertex_active[v] = true;
            }
        }

        let is_active = |k: usize| class[k] != CellClass::Outside;
        let nf = mesh.num_facets();
        let mut facet_kind = Vec::with_capacity(nf);
        let mut ghost = Vec::with_capacity(nf);
        let mut facet_inside = Vec::with_capacity(nf);
        for f in 0..nf {
            let (p, q) = mesh.facet_triangles(f);
            let n_active = is_active(p) as usize + q.map_or(0, |q| is_active(q) as usize);
            let kind = match (n_active, q) {
                (2, _) => FacetKind::Interior,
                (1, _) => FacetKind::Boundary,
                _ => FacetKind::Inactive,
            };
            facet_kind.push(kind);
            ghost.push(
                kind == FacetKind::Interior
                    && (class[p] == CellClass::Cut || q.is_some_and(|q| class[q] == CellClass::Cut)),
            );
            let [a, b] = mesh.facet(f);
            facet_inside.push(inside_interval(levelset[a], levelset[b]));
        }

        let mut pieces = vec![Vec::new(); nt];
        for &k in &active {
            if let Some(cell) = &cut[k] {
                pieces[k].push(BoundaryPiece { segment: cell.segment, normal: cell.normal, kind: PieceKind::Cut });
            }
            for f in mesh.triangle_facets(k) {
                if !mesh.is_boundary_facet(f) {
                    continue;
                }
                if let Some((t0, t1)) = facet_inside[f] {
                    let [pa, pb] = mesh.facet_points(f);
                    let seg = [pa + (pb - pa) * t0, pa + (pb - pa) * t1];
                    pieces[k].push(BoundaryPiece {
                        segment: seg,
                        normal: mesh.outward_normal(k, f),
                        kind: PieceKind::Fitted { facet: f },
                    });
                }
            }
        }

        Ok(Self {
            mesh,
            levelset,
            class,
            active,
            active_index,
            cut,
            pieces,
            inside_area,
            facet_kind,
            ghost,
            facet_inside,
            vertex_active,
        })
    }

    /// Convenience: interpolate `ls` and build the topology.
    pub fn from_levelset(mesh: &'m BackgroundMesh, ls: &LevelSet) -> Result<Self> {
        Self::build(mesh, interpolate_levelset(mesh, ls)?)
    }

    fn build_cut_cell(mesh: &BackgroundMesh, k: usize, vals: [f64; 3]) -> CutCell {
        let pts = mesh.triangle_points(k);
        let mut inside = Vec::with_capacity(4);
        let mut outside = Vec::with_capacity(4);
        let mut crossings = Vec::with_capacity(2);
        for i in 0..3 {
            let j = (i + 1) % 3;
            if vals[i] < 0.0 {
                inside.push(pts[i]);
            } else {
                outside.push(pts[i]);
            }
            if (vals[i] < 0.0) != (vals[j] < 0.0) {
                let t = vals[i] / (vals[i] - vals[j]);
                let x = pts[i] + (pts[j] - pts[i]) * t;
                inside.push(x);
                outside.push(x);
                crossings.push(x);
            }
        }
        let grads = mesh.barycentric_gradients(k);
        let g = grads[0] * vals[0] + grads[1] * vals[1] + grads[2] * vals[2];
        let normal = g / g.norm();
        let mut segment = [crossings[0], crossings[1]];
        // Ω_h to the left: the direction of travel rotated clockwise is the outward normal
        let d = segment[1] - segment[0];
        if Point::new(d.y, -d.x).dot(&normal) < 0.0 {
            segment.swap(0, 1);
        }
        CutCell { segment, normal, inside, outside }
    }

    pub fn mesh(&self) -> &'m BackgroundMesh {
        self.mesh
    }

    pub fn levelset_values(&self) -> &[f64] {
        &self.levelset
    }

    pub fn class(&self, k: usize) -> CellClass {
        self.class[k]
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.class[k] != CellClass::Outside
    }

    /// Active triangles (`𝒯_h`) in increasing id order.
    pub fn active_triangles(&self) -> &[usize] {
        &self.active
    }

    pub fn active_index(&self, k: usize) -> Option<usize> {
        self.active_index[k]
    }

    pub fn cut_triangles(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().copied().filter(|&k| self.class[k] == CellClass::Cut)
    }

    pub fn cut_cell(&self, k: usize) -> Option<&CutCell> {
        self.cut[k].as_ref()
    }

    /// The pieces of `∂Ω_h` inside triangle `k`.
    pub fn boundary_pieces(&self, k: usize) -> &[BoundaryPiece] {
        &self.pieces[k]
    }

    /// `K ∩ Ω_h` as a counter-clockwise polygon (empty for outside triangles).
    pub fn inside_polygon(&self, k: usize) -> Vec<Point> {
        match self.class[k] {
            CellClass::Inside => self.mesh.triangle_points(k).to_vec(),
            CellClass::Cut => self.cut[k].as_ref().unwrap().inside.clone(),
            CellClass::Outside => Vec::new(),
        }
    }

    /// `K ∩ Ω_hᶜ` as a counter-clockwise polygon.
    pub fn outside_polygon(&self, k: usize) -> Vec<Point> {
        match self.class[k] {
            CellClass::Inside => Vec::new(),
            CellClass::Cut => self.cut[k].as_ref().unwrap().outside.clone(),
            CellClass::Outside => self.mesh.triangle_points(k).to_vec(),
        }
    }

    pub fn inside_area(&self, k: usize) -> f64 {
        self.inside_area[k]
    }

    pub fn facet_kind(&self, f: usize) -> FacetKind {
        self.facet_kind[f]
    }

    /// `F ∈ ℰ_g`: an interior facet with a cut neighbor.
    pub fn is_ghost(&self, f: usize) -> bool {
        self.ghost[f]
    }

    pub fn ghost_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.ghost.len()).filter(|&f| self.ghost[f])
    }

    pub fn interior_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.facet_kind.len()).filter(|&f| self.facet_kind[f] == FacetKind::Interior)
    }

    pub fn is_vertex_active(&self, v: usize) -> bool {
        self.vertex_active[v]
    }

    /// `F ∩ Ω_h` as a parameter interval along the facet from its first to its second vertex.
    pub fn facet_inside_interval(&self, f: usize) -> Option<(f64, f64)> {
        self.facet_inside[f]
    }

    /// The sub-segment `F ∩ Ω_h`, or `None` when it is empty.
    pub fn facet_inside_portion(&self, f: usize) -> Option<[Point; 2]> {
        let (t0, t1) = self.facet_inside[f]?;
        let [a, b] = self.mesh.facet_points(f);
        Some([a + (b - a) * t0, a + (b - a) * t1])
    }

    /// The parts of `F` outside `Ω_h` (at most two sub-segments).
    pub fn facet_outside_portions(&self, f: usize) -> Vec<[Point; 2]> {
        let [a, b] = self.mesh.facet_points(f);
        let at = |t: f64| a + (b - a) * t;
        match self.facet_inside[f] {
            None => vec![[a, b]],
            Some((t0, t1)) => {
                let mut out = Vec::new();
                if t0 > 0.0 {
                    out.push([a, at(t0)]);
                }
                if t1 < 1.0 {
                    out.push([at(t1), b]);
                }
                out
            }
        }
    }

    /// Area of `Ω_h`.
    pub fn domain_area(&self) -> f64 {
        self.active.iter().map(|&k| self.inside_area[k]).sum()
    }

    /// Total length of the level-set part of `∂Ω_h`.
    pub fn cut_boundary_length(&self) -> f64 {
        self.cut_triangles()
            .map(|k| {
                let s = self.cut[k].as_ref().unwrap().segment;
                (s[1] - s[0]).norm()
            })
            .sum()
    }

    /// Active vertices in increasing index order.
    pub fn active_vertices(&self) -> Vec<usize> {
        (0..self.vertex_active.len()).filter(|&v| self.vertex_active[v]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundingBox, MeshPattern};

    fn right_triangle() -> BackgroundMesh {
        BackgroundMesh::from_triangles(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn interpolation_and_snapping() {
        let m = BackgroundMesh::from_triangles(
            vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(0.0, 2.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let vals = interpolate_levelset(&m, &LevelSet::circle([0.0, 0.0], 2.0)).unwrap();
        assert_eq!(vals[0], -4.0);
        assert_eq!(vals[1], 12.0);
        // (0, 2) lies exactly on the circle and is pushed outside
        assert!(vals[2] > 0.0 && vals[2] < 1e-9);
        let bad = LevelSet::custom(|p| if p.x > 1.0 { f64::NAN } else { -1.0 });
        assert!(matches!(interpolate_levelset(&m, &bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_cut_triangle() {
        let m = right_triangle();
        let ct = CutTopology::build(&m, vec![-1.0, -1.0, 1.0]).unwrap();
        assert_eq!(ct.class(0), CellClass::Cut);
        let cell = ct.cut_cell(0).unwrap();
        let mut ends = cell.segment.to_vec();
        ends.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert!((ends[0] - Point::new(0.0, 0.5)).norm() < 1e-15);
        assert!((ends[1] - Point::new(0.5, 0.5)).norm() < 1e-15);
        assert!((ct.inside_area(0) - 0.375).abs() < 1e-15);
        let out = polygon_area(&cell.outside);
        assert!((ct.inside_area(0) + out - 0.5).abs() <= 1e-12 * 0.5);
        assert!(cell.normal.y > 0.0);
        let pieces = ct.boundary_pieces(0);
        // the level-set segment plus the inside parts of the two boundary facets it meets,
        // and the fully inside bottom facet
        assert_eq!(pieces.iter().filter(|p| p.kind == PieceKind::Cut).count(), 1);
        assert_eq!(pieces.len(), 4);
    }

    #[test]
    fn inside_triangle_has_no_cut() {
        let m = right_triangle();
        let ct = CutTopology::build(&m, vec![-1.0, -2.0, -3.0]).unwrap();
        assert_eq!(ct.class(0), CellClass::Inside);
        assert!(ct.cut_cell(0).is_none());
    }

    #[test]
    fn all_outside_is_empty_domain() {
        let m = right_triangle();
        assert!(matches!(CutTopology::build(&m, vec![1.0, 1.0, 1.0]), Err(Error::EmptyDomain)));
    }

    #[test]
    fn facet_portions() {
        assert_eq!(inside_interval(-1.0, -2.0), Some((0.0, 1.0)));
        assert_eq!(inside_interval(1.0, 2.0), None);
        assert_eq!(inside_interval(-1.0, 1.0), Some((0.0, 0.5)));
        assert_eq!(inside_interval(1.0, -1.0), Some((0.5, 1.0)));
    }

    fn circle_topology(n: usize) -> (BackgroundMesh, Vec<f64>) {
        let m =
            BackgroundMesh::structured(n, n, BoundingBox::new([-1.5, -1.5], [1.5, 1.5]), MeshPattern::Regular).unwrap();
        let vals = interpolate_levelset(&m, &LevelSet::circle([0.05, -0.02], 1.0)).unwrap();
        (m, vals)
    }

    #[test]
    fn circle_invariants() {
        let (m, vals) = circle_topology(24);
        let ct = CutTopology::build(&m, vals).unwrap();
        // closed boundary: ∫ n dx over ∂Ω_h vanishes
        let mut flux = Point::zeros();
        for &k in ct.active_triangles() {
            for p in ct.boundary_pieces(k) {
                flux += p.normal * p.length();
            }
        }
        assert!(flux.norm() < 1e-10);
        for k in ct.cut_triangles() {
            let cell = ct.cut_cell(k).unwrap();
            let total = ct.inside_area(k) + polygon_area(&cell.outside);
            assert!((total - m.area(k)).abs() <= 1e-12 * m.area(k));
            // outward: the level set grows along the normal
            let mid = (cell.segment[0] + cell.segment[1]) / 2.0;
            assert!((mid - Point::new(0.05, -0.02)).dot(&cell.normal) > 0.0);
        }
        for f in 0..m.num_facets() {
            let (p, q) = m.facet_triangles(f);
            let expect = ct.facet_kind(f) == FacetKind::Interior
                && (ct.class(p) == CellClass::Cut || q.is_some_and(|q| ct.class(q) == CellClass::Cut));
            assert_eq!(ct.is_ghost(f), expect);
        }
        // each Γ_K endpoint is shared by exactly one neighbouring cut triangle
        let ends: Vec<Point> = ct.cut_triangles().flat_map(|k| ct.cut_cell(k).unwrap().segment).collect();
        for (i, a) in ends.iter().enumerate() {
            let matches = ends.iter().enumerate().filter(|(j, b)| *j != i && (*a - **b).norm() < 1e-12).count();
            assert_eq!(matches, 1);
        }
    }

    #[test]
    fn circle_perimeter_and_area_converge() {
        let mut errs = Vec::new();
        for n in [12, 24, 48] {
            let (m, vals) = circle_topology(n);
            let ct = CutTopology::build(&m, vals).unwrap();
            errs.push((
                (ct.cut_boundary_length() - 2.0 * std::f64::consts::PI).abs(),
                (ct.domain_area() - std::f64::consts::PI).abs(),
            ));
        }
        for w in errs.windows(2) {
            // second order: roughly a factor four per halving of h
            assert!(w[1].0 < w[0].0 / 2.5, "{errs:?}");
            assert!(w[1].1 < w[0].1 / 2.5, "{errs:?}");
        }
    }

    #[test]
    fn classes_stable_under_refinement() {
        let (m, _) = circle_topology(6);
        let ls = LevelSet::circle([0.05, -0.02], 1.0);
        let ct = CutTopology::from_levelset(&m, &ls).unwrap();
        let r = crate::refine::refine(&m, &[0, 5, 17]).unwrap();
        let ct2 = CutTopology::from_levelset(&r.mesh, &ls).unwrap();
        for (c, &p) in r.parent.iter().enumerate() {
            if ct.class(p) != CellClass::Cut {
                assert_eq!(ct2.class(c), ct.class(p));
            }
        }
    }
}
