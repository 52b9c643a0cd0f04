//! Analytic level-set functions: negative inside the domain, positive outside.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::Point;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevelSet {
    /// `|x - c|² - r²`.
    Circle { center: [f64; 2], radius: f64 },
    /// `n · x - offset`; the domain is the side the normal points away from.
    HalfPlane { normal: [f64; 2], offset: f64 },
    /// `max(x_min - x, x - x_max, y_min - y, y - y_max)`.
    Rectangle { min: [f64; 2], max: [f64; 2] },
    /// Constant `-1`: the whole background domain.
    Everywhere,
    /// Union of domains.
    Min { parts: Vec<LevelSet> },
    /// Intersection of domains.
    Max { parts: Vec<LevelSet> },
    /// Sign flip.
    Complement { inner: Box<LevelSet> },
    /// `inner(x - offset)`.
    Translate { offset: [f64; 2], inner: Box<LevelSet> },
    /// A disk of radius 2 with eight overlapping petal disks.
    Flower {
        #[serde(default = "default_true")]
        y_uses_sine: bool,
    },
    #[serde(skip)]
    Custom(ScalarFn),
}

fn default_true() -> bool {
    true
}

impl fmt::Debug for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Circle { center, radius } => write!(f, "Circle({center:?}, {radius})"),
            Self::HalfPlane { normal, offset } => write!(f, "HalfPlane({normal:?}, {offset})"),
            Self::Rectangle { min, max } => write!(f, "Rectangle({min:?}, {max:?})"),
            Self::Everywhere => write!(f, "Everywhere"),
            Self::Min { parts } => f.debug_tuple("Min").field(parts).finish(),
            Self::Max { parts } => f.debug_tuple("Max").field(parts).finish(),
            Self::Complement { inner } => f.debug_tuple("Complement").field(inner).finish(),
            Self::Translate { offset, inner } => f.debug_tuple("Translate").field(offset).field(inner).finish(),
            Self::Flower { y_uses_sine } => write!(f, "Flower(y_uses_sine: {y_uses_sine})"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Petal centers and radius of the flower geometry.
///
/// With `y_uses_sine == false` the petal ordinates repeat the cosine of the
/// abscissae, placing every center on the diagonal `y = x`.
pub fn flower_petals(y_uses_sine: bool) -> (Vec<Point>, f64) {
    let r = 2.0;
    let (s, c) = (PI / 8.0).sin_cos();
    let petal_radius = 2f64.sqrt() * r * (s + c) * s;
    let centers = (1..=8)
        .map(|i| {
            let phi = i as f64 * PI / 4.0;
            let x = r * (c + s) * phi.cos();
            let y = if y_uses_sine { r * (c + s) * phi.sin() } else { r * (c + s) * phi.cos() };
            Point::new(x, y)
        })
        .collect();
    (centers, petal_radius)
}

impl LevelSet {
    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        Self::Circle { center, radius }
    }

    pub fn custom(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    pub fn translated(self, offset: [f64; 2]) -> Self {
        Self::Translate { offset, inner: Box::new(self) }
    }

    pub fn eval(&self, p: Point) -> f64 {
        match self {
            Self::Circle { center, radius } => {
                let d = p - Point::new(center[0], center[1]);
                d.norm_squared() - radius * radius
            }
            Self::HalfPlane { normal, offset } => normal[0] * p.x + normal[1] * p.y - offset,
            Self::Rectangle { min, max } => (min[0] - p.x).max(p.x - max[0]).max(min[1] - p.y).max(p.y - max[1]),
            Self::Everywhere => -1.0,
            Self::Min { parts } => parts.iter().map(|l| l.eval(p)).fold(f64::INFINITY, f64::min),
            Self::Max { parts } => parts.iter().map(|l| l.eval(p)).fold(f64::NEG_INFINITY, f64::max),
            Self::Complement { inner } => -inner.eval(p),
            Self::Translate { offset, inner } => inner.eval(p - Point::new(offset[0], offset[1])),
            Self::Flower { y_uses_sine } => {
                let (centers, rp) = flower_petals(*y_uses_sine);
                let base = p.norm_squared() - 4.0;
                centers.iter().map(|c| (p - c).norm_squared() - rp * rp).fold(base, f64::min)
            }
            Self::Custom(f) => f(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_values() {
        let ls = LevelSet::circle([0.0, 0.0], 2.0);
        assert_eq!(ls.eval(Point::new(0.0, 0.0)), -4.0);
        assert_eq!(ls.eval(Point::new(4.0, 0.0)), 12.0);
    }

    #[test]
    fn flower_geometry() {
        let ls = LevelSet::Flower { y_uses_sine: true };
        assert_eq!(ls.eval(Point::new(0.0, 0.0)), -4.0);
        let (centers, rp) = flower_petals(true);
        let (s, c) = (PI / 8.0).sin_cos();
        assert!((rp - 2f64.sqrt() * 2.0 * (s + c) * s).abs() < 1e-15);
        for ctr in &centers {
            assert!(ls.eval(*ctr) < 0.0);
            assert!((ctr.norm() - 2.0 * (c + s)).abs() < 1e-12);
        }
        let (diag, _) = flower_petals(false);
        assert!(diag.iter().all(|p| (p.x - p.y).abs() < 1e-12));
    }

    #[test]
    fn compositions() {
        let l_shape = LevelSet::Min {
            parts: vec![
                LevelSet::HalfPlane { normal: [1.0, 0.0], offset: 0.0 },
                LevelSet::HalfPlane { normal: [0.0, -1.0], offset: 0.0 },
            ],
        };
        assert!(l_shape.eval(Point::new(-0.5, -0.5)) < 0.0);
        assert!(l_shape.eval(Point::new(0.5, 0.5)) < 0.0);
        assert!(l_shape.eval(Point::new(0.5, -0.5)) > 0.0);
        let shifted = LevelSet::circle([0.0, 0.0], 1.0).translated([3.0, 0.0]);
        assert!(shifted.eval(Point::new(3.0, 0.5)) < 0.0);
        let cfg: LevelSet = toml::from_str("type = \"circle\"\ncenter = [0.0, 1.0]\nradius = 0.5").unwrap();
        assert!(cfg.eval(Point::new(0.0, 1.0)) < 0.0);
    }
}
