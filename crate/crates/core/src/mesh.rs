//! Conforming triangulations of a rectangular background domain.
//!
//! Triangles are stored counter-clockwise with the *newest vertex* in local
//! position 0; the edge opposite to it is the refinement edge used by
//! newest-vertex bisection (see [`crate::refine`]).
//!
//! Facet orientation: an interior facet is shared by `K⁺` (lower triangle id)
//! and `K⁻` (higher id) and its unit normal `n_F` is the outward normal of
//! `K⁺`. Boundary facets point out of the background domain.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BoundingBox {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn unit_square() -> Self {
        Self::new([0.0, 0.0], [1.0, 1.0])
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Subdivision of each structured cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshPattern {
    /// Two triangles per cell, split along the lower-left to upper-right diagonal.
    Regular,
    /// Four triangles per cell meeting at the cell center.
    Crossed,
}

/// Traversal direction of a vertex star.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StarOrientation {
    #[default]
    CounterClockwise,
    Clockwise,
}

/// A maximal fan of triangles around one vertex, connected through shared facets.
///
/// For a closed star (`closed == true`), `facets[i]` is the facet shared by
/// `triangles[i - 1]` and `triangles[i]` (indices taken cyclically). For an
/// open fan, `facets[i]` is shared by `triangles[i]` and `triangles[i + 1]`,
/// so there are `triangles.len() - 1` of them.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexStar {
    pub vertex: usize,
    pub triangles: Vec<usize>,
    pub facets: Vec<usize>,
    pub closed: bool,
}

#[derive(Clone, Debug)]
pub struct BackgroundMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    facets: Vec<[usize; 2]>,
    facet_triangles: Vec<(usize, Option<usize>)>,
    triangle_facets: Vec<[usize; 3]>,
    facet_normals: Vec<Point>,
    facet_lengths: Vec<f64>,
    vertex_triangles: Vec<Vec<usize>>,
    vertex_facets: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
}

fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(b - a, c - a)
}

impl BackgroundMesh {
    /// Builds adjacency for a list of counter-clockwise triangles.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidArgument("mesh has no triangles".into()));
        }
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!("triangle {k} references a missing vertex")));
            }
            let area = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if !(area > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {k} is not counter-clockwise with positive area (area {area:e})"
                )));
            }
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut facets = Vec::new();
        let mut facet_triangles: Vec<(usize, Option<usize>)> = Vec::new();
        let mut triangle_facets = vec![[0usize; 3]; triangles.len()];
        for (k, t) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = t[(i + 1) % 3];
                let b = t[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let f = match edge_index.get(&key) {
                    Some(&f) => {
                        if facet_triangles[f].1.is_some() {
                            return Err(Error::InvalidArgument(format!(
                                "edge ({}, {}) is shared by more than two triangles",
                                key.0, key.1
                            )));
                        }
                        facet_triangles[f].1 = Some(k);
                        f
                    }
                    None => {
                        let f = facets.len();
                        edge_index.insert(key, f);
                        facets.push([key.0, key.1]);
                        facet_triangles.push((k, None));
                        f
                    }
                };
                triangle_facets[k][i] = f;
            }
        }

        let mut facet_normals = Vec::with_capacity(facets.len());
        let mut facet_lengths = Vec::with_capacity(facets.len());
        for (f, &[a, b]) in facets.iter().enumerate() {
            let d = vertices[b] - vertices[a];
            let len = d.norm();
            let mut n = Point::new(d.y, -d.x) / len;
            // K⁺ is the lower id, which is always the first triangle that saw the edge.
            let kp = facet_triangles[f].0;
            let opposite = triangles[kp].iter().copied().find(|&v| v != a && v != b).unwrap();
            if n.dot(&(vertices[opposite] - vertices[a])) > 0.0 {
                n = -n;
            }
            facet_normals.push(n);
            facet_lengths.push(len);
        }

        let mut boundary_vertex = vec![false; vertices.len()];
        for (f, &(_, minus)) in facet_triangles.iter().enumerate() {
            if minus.is_none() {
                boundary_vertex[facets[f][0]] = true;
                boundary_vertex[facets[f][1]] = true;
            }
        }

        let mut mesh = Self {
            vertices,
            triangles,
            facets,
            facet_triangles,
            triangle_facets,
            facet_normals,
            facet_lengths,
            vertex_triangles: Vec::new(),
            vertex_facets: Vec::new(),
            boundary_vertex,
        };
        mesh.build_vertex_stars();
        Ok(mesh)
    }

    fn build_vertex_stars(&mut self) {
        let nv = self.vertices.len();
        let mut tris: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (k, t) in self.triangles.iter().enumerate() {
            for &v in t {
                tris[v].push(k);
            }
        }
        let mut facets: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (f, &[a, b]) in self.facets.iter().enumerate() {
            facets[a].push(f);
            facets[b].push(f);
        }
        for v in 0..nv {
            let p = self.vertices[v];
            let angle_of = |q: Point| {
                let d = q - p;
                d.y.atan2(d.x)
            };
            tris[v].sort_by(|&a, &b| angle_of(self.centroid(a)).total_cmp(&angle_of(self.centroid(b))).then(a.cmp(&b)));
            facets[v].sort_by(|&a, &b| {
                let qa = self.vertices[self.facet_other_vertex(a, v)];
                let qb = self.vertices[self.facet_other_vertex(b, v)];
                angle_of(qa).total_cmp(&angle_of(qb)).then(a.cmp(&b))
            });
        }
        self.vertex_triangles = tris;
        self.vertex_facets = facets;
    }

    /// Structured mesh of `nx × ny` cells over `bbox`.
    pub fn structured(nx: usize, ny: usize, bbox: BoundingBox, pattern: MeshPattern) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("nx and ny must be at least 1".into()));
        }
        if !(bbox.width() > 0.0 && bbox.height() > 0.0) || !bbox.area().is_finite() {
            return Err(Error::InvalidArgument(format!("degenerate bounding box {bbox:?}")));
        }
        let hx = bbox.width() / nx as f64;
        let hy = bbox.height() / ny as f64;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Point::new(bbox.min[0] + i as f64 * hx, bbox.min[1] + j as f64 * hy));
            }
        }
        let grid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let p00 = grid(i, j);
                let p10 = grid(i + 1, j);
                let p11 = grid(i + 1, j + 1);
                let p01 = grid(i, j + 1);
                match pattern {
                    MeshPattern::Regular => {
                        triangles.push([p10, p11, p00]);
                        triangles.push([p01, p00, p11]);
                    }
                    MeshPattern::Crossed => {
                        let c = vertices.len();
                        vertices
                            .push(Point::new(bbox.min[0] + (i as f64 + 0.5) * hx, bbox.min[1] + (j as f64 + 0.5) * hy));
                        triangles.push([c, p00, p10]);
                        triangles.push([c, p10, p11]);
                        triangles.push([c, p11, p01]);
                        triangles.push([c, p01, p00]);
                    }
                }
            }
        }
        Self::from_triangles(vertices, triangles)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, k: usize) -> [usize; 3] {
        self.triangles[k]
    }

    pub fn triangle_points(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn facets(&self) -> &[[usize; 2]] {
        &self.facets
    }

    pub fn facet(&self, f: usize) -> [usize; 2] {
        self.facets[f]
    }

    pub fn facet_points(&self, f: usize) -> [Point; 2] {
        let [a, b] = self.facets[f];
        [self.vertices[a], self.vertices[b]]
    }

    /// `(K⁺, K⁻)`; `K⁻` is `None` on the boundary of the background domain.
    pub fn facet_triangles(&self, f: usize) -> (usize, Option<usize>) {
        self.facet_triangles[f]
    }

    /// Facets of triangle `k`; entry `i` is opposite local vertex `i`.
    pub fn triangle_facets(&self, k: usize) -> [usize; 3] {
        self.triangle_facets[k]
    }

    pub fn facet_normal(&self, f: usize) -> Point {
        self.facet_normals[f]
    }

    pub fn facet_length(&self, f: usize) -> f64 {
        self.facet_lengths[f]
    }

    pub fn is_boundary_facet(&self, f: usize) -> bool {
        self.facet_triangles[f].1.is_none()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Incident triangles ordered by centroid angle about the vertex.
    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    /// Incident facets ordered by angle about the vertex.
    pub fn vertex_facets(&self, v: usize) -> &[usize] {
        &self.vertex_facets[v]
    }

    pub fn facet_other_vertex(&self, f: usize, v: usize) -> usize {
        let [a, b] = self.facets[f];
        if a == v {
            b
        } else {
            a
        }
    }

    /// Neighbor of `k` across facet `f`, if any.
    pub fn neighbor(&self, k: usize, f: usize) -> Option<usize> {
        match self.facet_triangles[f] {
            (p, Some(m)) if p == k => Some(m),
            (p, m) if m == Some(k) => Some(p),
            _ => None,
        }
    }

    pub fn area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        signed_area(a, b, c)
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [a, b, c] = self.triangle_points(k);
        (a + b + c) / 3.0
    }

    /// Diameter of triangle `k` (its longest edge).
    pub fn diameter(&self, k: usize) -> f64 {
        self.triangle_facets[k].iter().map(|&f| self.facet_lengths[f]).fold(0.0, f64::max)
    }

    /// Outward unit normal of triangle `k` on its facet `f`.
    pub fn outward_normal(&self, k: usize, f: usize) -> Point {
        self.facet_normals[f] * self.sign_triangle(k, f)
    }

    /// `s_K(F)`: `+1` when `n_F` is the outward normal of `K` on `F`.
    pub fn sign_triangle(&self, k: usize, f: usize) -> f64 {
        if self.facet_triangles[f].0 == k {
            1.0
        } else {
            -1.0
        }
    }

    /// `s_N(F)`: `+1` when `n_F` is oriented counter-clockwise about vertex `N`.
    pub fn sign_vertex(&self, v: usize, f: usize) -> f64 {
        let m = self.facet_other_vertex(f, v);
        let d = self.vertices[m] - self.vertices[v];
        let ccw = Point::new(-d.y, d.x);
        if self.facet_normals[f].dot(&ccw) > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Gradients of the three barycentric coordinates of triangle `k`.
    pub fn barycentric_gradients(&self, k: usize) -> [Point; 3] {
        let [a, b, c] = self.triangle_points(k);
        let two_area = cross(b - a, c - a);
        let perp = |e: Point| Point::new(-e.y, e.x) / two_area;
        [perp(c - b), perp(a - c), perp(b - a)]
    }

    /// Barycentric coordinates of `p` with respect to triangle `k`.
    pub fn barycentric(&self, k: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(k);
        let area = cross(b - a, c - a);
        let l0 = cross(b - p, c - p) / area;
        let l1 = cross(c - p, a - p) / area;
        [l0, l1, 1.0 - l0 - l1]
    }

    pub fn local_index(&self, k: usize, v: usize) -> Option<usize> {
        self.triangles[k].iter().position(|&w| w == v)
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.num_triangles())
            .map(|k| {
                let p = self.triangle_points(k);
                (0..3)
                    .map(|i| {
                        let u = p[(i + 1) % 3] - p[i];
                        let w = p[(i + 2) % 3] - p[i];
                        (u.dot(&w) / (u.norm() * w.norm())).clamp(-1.0, 1.0).acos()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.num_triangles()).map(|k| self.diameter(k)).fold(0.0, f64::max)
    }

    /// The full star of `v` in the background mesh.
    pub fn vertex_star(&self, v: usize) -> Option<VertexStar> {
        self.vertex_fans(v, |_| true, StarOrientation::CounterClockwise).into_iter().next()
    }

    /// Splits the triangles around `v` accepted by `include` into maximal fans.
    ///
    /// Two consecutive triangles belong to the same fan when they share a facet
    /// through `v`. An isolated vertex yields no fans.
    pub fn vertex_fans(
        &self,
        v: usize,
        include: impl Fn(usize) -> bool,
        orientation: StarOrientation,
    ) -> Vec<VertexStar> {
        let members: Vec<usize> = self.vertex_triangles[v].iter().copied().filter(|&k| include(k)).collect();
        if members.is_empty() {
            return Vec::new();
        }
        // In a counter-clockwise triangle (v, a, b) the clockwise edge at v is (v, a)
        // and the counter-clockwise edge is (v, b).
        let sides = |k: usize| {
            let t = self.triangles[k];
            let i = t.iter().position(|&w| w == v).unwrap();
            (t[(i + 1) % 3], t[(i + 2) % 3])
        };
        let facet_toward = |k: usize, w: usize| {
            let i = self.triangles[k].iter().position(|&x| x != v && x != w).unwrap();
            self.triangle_facets[k][i]
        };
        let mut next: HashMap<usize, usize> = HashMap::new();
        let mut has_prev: HashMap<usize, bool> = members.iter().map(|&k| (k, false)).collect();
        for &k in &members {
            let (_, ccw) = sides(k);
            let f = facet_toward(k, ccw);
            if let Some(m) = self.neighbor(k, f) {
                if has_prev.contains_key(&m) {
                    next.insert(k, m);
                    has_prev.insert(m, true);
                }
            }
        }

        let mut fans = Vec::new();
        let mut visited: HashMap<usize, bool> = HashMap::new();
        let mut starts: Vec<usize> = members.iter().copied().filter(|k| !has_prev[k]).collect();
        let closed_cycle = starts.is_empty();
        if closed_cycle {
            starts.push(members[0]);
        }
        for start in starts {
            if visited.contains_key(&start) {
                continue;
            }
            let mut tris = vec![start];
            visited.insert(start, true);
            let mut cur = start;
            while let Some(&n) = next.get(&cur) {
                if n == start {
                    break;
                }
                tris.push(n);
                visited.insert(n, true);
                cur = n;
            }
            let mut facets = Vec::new();
            if closed_cycle {
                let last = *tris.last().unwrap();
                facets.push(facet_toward(last, sides(last).1));
            }
            for w in tris.windows(2) {
                facets.push(facet_toward(w[0], sides(w[0]).1));
            }
            let mut star = VertexStar { vertex: v, triangles: tris, facets, closed: closed_cycle };
            if orientation == StarOrientation::Clockwise {
                star = star.reversed();
            }
            fans.push(star);
        }
        fans
    }
}

impl VertexStar {
    /// The same fan traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let triangles: Vec<usize> = self.triangles.iter().rev().copied().collect();
        let facets = if self.closed {
            // facets[i] sits between triangles[i-1] and triangles[i].
            let n = self.triangles.len();
            (0..n).map(|i| self.facets[(n - i) % n]).collect()
        } else {
            self.facets.iter().rev().copied().collect()
        };
        Self { vertex: self.vertex, triangles, facets, closed: self.closed }
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit2() -> BackgroundMesh {
        BackgroundMesh::structured(1, 1, BoundingBox::unit_square(), MeshPattern::Regular).unwrap()
    }

    #[test]
    fn minimal_mesh_counts() {
        let m = unit2();
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_facets(), 5);
        assert_eq!((0..5).filter(|&f| !m.is_boundary_facet(f)).count(), 1);
    }

    #[test]
    fn crossed_8x8_counts() {
        let m =
            BackgroundMesh::structured(8, 8, BoundingBox::new([-4.0, -4.0], [4.0, 4.0]), MeshPattern::Crossed).unwrap();
        assert_eq!(m.num_triangles(), 256);
        assert_eq!(m.num_vertices(), 81 + 64);
    }

    #[test]
    fn regular_5x5_counts() {
        let m = BackgroundMesh::structured(5, 5, BoundingBox::unit_square(), MeshPattern::Regular).unwrap();
        assert_eq!(m.num_triangles(), 50);
    }

    #[test]
    fn zero_size_bbox_rejected() {
        let r = BackgroundMesh::structured(2, 2, BoundingBox::new([0.0, 0.0], [0.0, 1.0]), MeshPattern::Regular);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn areas_euler_and_signs() {
        for pattern in [MeshPattern::Regular, MeshPattern::Crossed] {
            let bbox = BoundingBox::new([-1.0, 0.5], [2.0, 3.0]);
            let m = BackgroundMesh::structured(7, 4, bbox, pattern).unwrap();
            let total: f64 = (0..m.num_triangles()).map(|k| m.area(k)).sum();
            assert!((total - bbox.area()).abs() <= 1e-12 * bbox.area());
            let euler = m.num_vertices() as i64 - m.num_facets() as i64 + m.num_triangles() as i64;
            assert_eq!(euler, 1);
            for f in 0..m.num_facets() {
                let (p, q) = m.facet_triangles(f);
                assert_eq!(m.sign_triangle(p, f), 1.0);
                if let Some(q) = q {
                    assert!(p < q);
                    assert_eq!(m.sign_triangle(q, f), -1.0);
                    assert_eq!(m.sign_triangle(p, f) + m.sign_triangle(q, f), 0.0);
                } else {
                    // boundary normals point away from the centroid of the owner
                    let mid = (m.facet_points(f)[0] + m.facet_points(f)[1]) / 2.0;
                    assert!(m.facet_normal(f).dot(&(mid - m.centroid(p))) > 0.0);
                }
            }
        }
    }

    #[test]
    fn stars_of_structured_meshes() {
        let m = BackgroundMesh::structured(4, 4, BoundingBox::unit_square(), MeshPattern::Regular).unwrap();
        let interior = (0..m.num_vertices()).find(|&v| !m.is_boundary_vertex(v)).unwrap();
        let star = m.vertex_star(interior).unwrap();
        assert!(star.closed);
        assert_eq!(star.len(), 6);
        assert_eq!(star.facets.len(), 6);
        let n = star.len();
        for i in 0..n {
            let f = star.facets[i];
            let prev = star.triangles[(i + n - 1) % n];
            assert_eq!(m.neighbor(prev, f), Some(star.triangles[i]));
        }

        let corner = unit2();
        // vertex 0 is (0,0), touched only by one triangle of the diagonal split... (1,0) corner too
        let v = (0..4).find(|&v| corner.vertex_triangles(v).len() == 1).unwrap();
        let s = corner.vertex_star(v).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.facets.is_empty());
        assert!(!s.closed);

        let crossed = BackgroundMesh::structured(2, 2, BoundingBox::unit_square(), MeshPattern::Crossed).unwrap();
        let center = 9; // first cell center
        let s = crossed.vertex_star(center).unwrap();
        assert!(s.closed);
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn open_fan_at_boundary_vertex() {
        let m = BackgroundMesh::structured(3, 3, BoundingBox::unit_square(), MeshPattern::Regular).unwrap();
        for v in 0..m.num_vertices() {
            let s = m.vertex_star(v).unwrap();
            assert_eq!(s.closed, !m.is_boundary_vertex(v));
            if !s.closed {
                assert_eq!(s.facets.len(), s.len() - 1);
                for (i, &f) in s.facets.iter().enumerate() {
                    assert_eq!(m.neighbor(s.triangles[i], f), Some(s.triangles[i + 1]));
                }
            }
        }
    }

    #[test]
    fn reversed_star_flips_vertex_sign_pattern() {
        let m = BackgroundMesh::structured(3, 3, BoundingBox::unit_square(), MeshPattern::Crossed).unwrap();
        let v = (0..m.num_vertices()).find(|&v| !m.is_boundary_vertex(v) && m.vertex_triangles(v).len() == 8).unwrap();
        let s = m.vertex_star(v).unwrap();
        let r = s.reversed();
        let n = s.len();
        for i in 0..n {
            // same facet between the same pair, traversed backwards
            let f = r.facets[i];
            let prev = r.triangles[(i + n - 1) % n];
            assert_eq!(m.neighbor(prev, f), Some(r.triangles[i]));
        }
        // for a ccw traversal the incoming facet of K_i has n_F pointing into K_i exactly when s_N = +1
        for i in 0..n {
            let f = s.facets[i];
            let k = s.triangles[i];
            assert_eq!(m.sign_vertex(v, f), -m.sign_triangle(k, f));
        }
    }

    #[test]
    fn barycentric_gradients_sum_to_zero() {
        let m =
            BackgroundMesh::structured(2, 3, BoundingBox::new([0.0, 0.0], [1.0, 2.0]), MeshPattern::Crossed).unwrap();
        for k in 0..m.num_triangles() {
            let g = m.barycentric_gradients(k);
            let s = g[0] + g[1] + g[2];
            assert!(s.norm() < 1e-12);
            let p = m.triangle_points(k);
            for i in 0..3 {
                for j in 0..3 {
                    let val = if i == j { 1.0 } else { 0.0 };
                    let lam = m.barycentric(k, p[j])[i];
                    assert!((lam - val).abs() < 1e-12);
                }
            }
        }
    }
}
