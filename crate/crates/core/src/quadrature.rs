//! Fixed-degree quadrature on triangles, convex polygons and segments.

use crate::error::{Error, Result};
use crate::mesh::signed_area;
use crate::Point;

/// Highest polynomial degree integrated exactly by the built-in rules.
pub const MAX_DEGREE: usize = 5;

/// Default degree for volume and boundary integrals.
pub const DEFAULT_DEGREE: usize = 4;

/// A reference rule: barycentric points on the triangle (or a parameter in
/// `[0, 1]` on the segment) with weights summing to one.
#[derive(Clone, Debug)]
pub struct QuadRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

pub type TriangleRule = QuadRule<3>;
pub type SegmentRule = QuadRule<1>;

/// Physical quadrature point with its weight (already scaled by the measure).
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub x: Point,
    pub w: f64,
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "quadrature degree {degree} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    Ok(())
}

pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    check_degree(degree)?;
    let rule = match degree {
        0 | 1 => QuadRule { points: vec![[1.0 / 3.0; 3]], weights: vec![1.0], degree: 1 },
        2 => {
            let a = 1.0 / 6.0;
            let b = 2.0 / 3.0;
            QuadRule { points: vec![[b, a, a], [a, b, a], [a, a, b]], weights: vec![1.0 / 3.0; 3], degree: 2 }
        }
        _ => {
            // Radon's seven-point rule, exact for degree 5.
            let s15 = 15f64.sqrt();
            let a1 = (6.0 - s15) / 21.0;
            let b1 = 1.0 - 2.0 * a1;
            let a2 = (6.0 + s15) / 21.0;
            let b2 = 1.0 - 2.0 * a2;
            let w1 = (155.0 - s15) / 1200.0;
            let w2 = (155.0 + s15) / 1200.0;
            QuadRule {
                points: vec![
                    [1.0 / 3.0; 3],
                    [b1, a1, a1],
                    [a1, b1, a1],
                    [a1, a1, b1],
                    [b2, a2, a2],
                    [a2, b2, a2],
                    [a2, a2, b2],
                ],
                weights: vec![0.225, w1, w1, w1, w2, w2, w2],
                degree: 5,
            }
        }
    };
    Ok(rule)
}

pub fn segment_rule(degree: usize) -> Result<SegmentRule> {
    check_degree(degree)?;
    let rule = match degree {
        0 | 1 => QuadRule { points: vec![[0.5]], weights: vec![1.0], degree: 1 },
        2 | 3 => {
            let d = 0.5 / 3f64.sqrt();
            QuadRule { points: vec![[0.5 - d], [0.5 + d]], weights: vec![0.5, 0.5], degree: 3 }
        }
        _ => {
            let d = 0.5 * 0.6f64.sqrt();
            QuadRule {
                points: vec![[0.5 - d], [0.5], [0.5 + d]],
                weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
                degree: 5,
            }
        }
    };
    Ok(rule)
}

/// Quadrature points on a triangle given by its corners. Zero-area triangles
/// produce zero weights.
pub fn triangle_points(tri: &[Point; 3], degree: usize) -> Result<Vec<QuadPoint>> {
    let rule = triangle_rule(degree)?;
    let area = signed_area(tri[0], tri[1], tri[2]).abs();
    Ok(rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(l, &w)| QuadPoint { x: tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2], w: w * area })
        .collect())
}

/// Composite rule: the triangle is split `levels` times into four similar
/// children and the degree-`degree` rule is applied on each.
pub fn subdivided_triangle_points(tri: &[Point; 3], degree: usize, levels: usize) -> Result<Vec<QuadPoint>> {
    let mut tris = vec![*tri];
    for _ in 0..levels {
        tris = tris
            .iter()
            .flat_map(|&[a, b, c]| {
                let (ab, bc, ca) = ((a + b) / 2.0, (b + c) / 2.0, (c + a) / 2.0);
                [[a, ab, ca], [ab, b, bc], [ca, bc, c], [bc, ca, ab]]
            })
            .collect();
    }
    let mut out = Vec::with_capacity(tris.len() * 7);
    for t in &tris {
        out.extend(triangle_points(t, degree)?);
    }
    Ok(out)
}

/// Composite rule on a convex polygon: fan triangles, each subdivided.
pub fn subdivided_polygon_points(poly: &[Point], degree: usize, levels: usize) -> Result<Vec<QuadPoint>> {
    if poly.len() < 3 {
        return Err(Error::InvalidArgument(format!("polygon with {} vertices", poly.len())));
    }
    check_convex(poly)?;
    let mut out = Vec::new();
    for i in 1..poly.len() - 1 {
        out.extend(subdivided_triangle_points(&[poly[0], poly[i], poly[i + 1]], degree, levels)?);
    }
    Ok(out)
}

/// Quadrature points on a convex polygon by a fan from its first vertex.
pub fn polygon_points(poly: &[Point], degree: usize) -> Result<Vec<QuadPoint>> {
    if poly.len() < 3 {
        return Err(Error::InvalidArgument(format!("polygon with {} vertices", poly.len())));
    }
    check_convex(poly)?;
    let mut out = Vec::new();
    for i in 1..poly.len() - 1 {
        out.extend(triangle_points(&[poly[0], poly[i], poly[i + 1]], degree)?);
    }
    Ok(out)
}

/// Quadrature points on the segment `[a, b]`.
pub fn segment_points(seg: &[Point; 2], degree: usize) -> Result<Vec<QuadPoint>> {
    let rule = segment_rule(degree)?;
    let len = (seg[1] - seg[0]).norm();
    Ok(rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(t, &w)| QuadPoint { x: seg[0] + (seg[1] - seg[0]) * t[0], w: w * len })
        .collect())
}

fn check_convex(poly: &[Point]) -> Result<()> {
    let n = poly.len();
    let scale = poly.iter().map(|p| (p - poly[0]).norm_squared()).fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let mut sign = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        let cr = 2.0 * signed_area(a, b, c);
        if cr.abs() <= tol {
            continue;
        }
        if sign == 0.0 {
            sign = cr.signum();
        } else if cr.signum() != sign {
            return Err(Error::InvalidArgument("polygon is not convex or self-intersects".into()));
        }
    }
    Ok(())
}

pub fn integrate_triangle(f: impl Fn(Point) -> f64, tri: &[Point; 3], degree: usize) -> Result<f64> {
    let area = signed_area(tri[0], tri[1], tri[2]).abs();
    let scale = (tri[1] - tri[0]).norm_squared().max((tri[2] - tri[0]).norm_squared());
    if !(area > 1e-14 * scale) {
        return Err(Error::InvalidArgument("degenerate triangle".into()));
    }
    Ok(triangle_points(tri, degree)?.iter().map(|q| q.w * f(q.x)).sum())
}

pub fn integrate_polygon(f: impl Fn(Point) -> f64, poly: &[Point], degree: usize) -> Result<f64> {
    Ok(polygon_points(poly, degree)?.iter().map(|q| q.w * f(q.x)).sum())
}

pub fn integrate_segment(f: impl Fn(Point) -> f64, seg: &[Point; 2], degree: usize) -> Result<f64> {
    Ok(segment_points(seg, degree)?.iter().map(|q| q.w * f(q.x)).sum())
}

/// Signed area of a simple polygon (shoelace).
pub fn polygon_area(poly: &[Point]) -> f64 {
    // relative to the first vertex; absolute coordinates cancel badly on small cells
    let Some(&o) = poly.first() else { return 0.0 };
    poly.windows(2).skip(1).map(|w| (w[0] - o).perp(&(w[1] - o))).sum::<f64>() / 2.0
}
