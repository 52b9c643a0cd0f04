use std::sync::Arc;

use cutflux::cut::CutTopology;
use cutflux::cutfem::{solve, CutFemParams};
use cutflux::data::{BoundaryField, ProblemData, SourceField};
use cutflux::flux::{normal_jump, reconstruct, FluxOrder};
use cutflux::levelset::LevelSet;
use cutflux::mesh::{BackgroundMesh, BoundingBox, MeshPattern, StarOrientation};
use cutflux::Point;

fn quadratic_data() -> ProblemData {
    // u = x² + 2y² - xy, -Δu = -6
    ProblemData::new(
        SourceField::Analytic(Arc::new(|_| -6.0)),
        BoundaryField::Analytic(Arc::new(|p: Point| p.x * p.x + 2.0 * p.y * p.y - p.x * p.y)),
    )
}

fn square(n: usize, pattern: MeshPattern) -> BackgroundMesh {
    BackgroundMesh::structured(n, n, BoundingBox::new([-1.0, -1.0], [1.0, 1.0]), pattern).unwrap()
}

#[test]
fn linear_solution_gives_its_gradient() {
    let mesh = square(10, MeshPattern::Regular);
    let ct = CutTopology::from_levelset(&mesh, &LevelSet::circle([0.07, -0.03], 0.71)).unwrap();
    let data = ProblemData::new(
        SourceField::Analytic(Arc::new(|_| 0.0)),
        BoundaryField::Analytic(Arc::new(|p: Point| 1.0 + 2.0 * p.x - p.y)),
    );
    let params = CutFemParams::default();
    let u = solve(&ct, &data, &params).unwrap();
    let rec = reconstruct(&ct, &data, &u, FluxOrder::Rt1, StarOrientation::CounterClockwise).unwrap();
    for &k in ct.active_triangles() {
        for p in mesh.triangle_points(k) {
            let s = rec.flux.eval(&mesh, k, p);
            assert!((s - Point::new(2.0, -1.0)).norm() < 1e-8, "triangle {k}: {s:?}");
        }
    }
}

fn check_equilibrated(mesh: &BackgroundMesh, ls: &LevelSet, order: FluxOrder) {
    let ct = CutTopology::from_levelset(mesh, ls).unwrap();
    let data = quadratic_data();
    let u = solve(&ct, &data, &CutFemParams::default()).unwrap();
    let rec = reconstruct(&ct, &data, &u, order, StarOrientation::CounterClockwise).unwrap();
    assert!(rec.residuals.compatibility_defect(&ct) < 1e-11);
    let c = rec.conservation(&ct);
    assert!(c.relative() < 1e-11, "conservation {:.3e} at {:?}", c.relative(), c.worst_triangle);
    let (jump, scale) = normal_jump(&ct, &rec.flux);
    assert!(jump <= 1e-11 * scale, "normal jump {jump:.3e} vs {scale:.3e}");
}

#[test]
fn cut_circle_flux_is_equilibrated() {
    let ls = LevelSet::circle([0.05, 0.02], 0.77);
    for pattern in [MeshPattern::Regular, MeshPattern::Crossed] {
        for order in [FluxOrder::Rt0, FluxOrder::Rt1] {
            check_equilibrated(&square(12, pattern), &ls, order);
        }
    }
}

#[test]
fn fitted_domain_flux_is_equilibrated() {
    check_equilibrated(&square(8, MeshPattern::Regular), &LevelSet::Everywhere, FluxOrder::Rt1);
}

#[test]
fn partly_fitted_domain_flux_is_equilibrated() {
    // the circle leaves the box, so the boundary mixes cut and fitted pieces
    check_equilibrated(&square(12, MeshPattern::Regular), &LevelSet::circle([0.6, 0.1], 0.9), FluxOrder::Rt1);
}

#[test]
fn star_orientation_does_not_change_the_flux() {
    let mesh = square(10, MeshPattern::Crossed);
    let ct = CutTopology::from_levelset(&mesh, &LevelSet::circle([0.0, 0.1], 0.8)).unwrap();
    let data = quadratic_data();
    let u = solve(&ct, &data, &CutFemParams::default()).unwrap();
    let a = reconstruct(&ct, &data, &u, FluxOrder::Rt1, StarOrientation::CounterClockwise).unwrap();
    let b = reconstruct(&ct, &data, &u, FluxOrder::Rt1, StarOrientation::Clockwise).unwrap();
    for &k in ct.active_triangles() {
        let p = mesh.centroid(k);
        assert!((a.flux.eval(&mesh, k, p) - b.flux.eval(&mesh, k, p)).norm() < 1e-10);
    }
}
