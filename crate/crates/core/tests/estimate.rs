use cutflux::cutfem::CutFemParams;
use cutflux::flux::FluxOrder;
use cutflux::levelset::LevelSet;
use cutflux::mesh::{BoundingBox, MeshPattern};
use cutflux::problems::{self, Problem};
use proptest::prelude::*;

fn circle_problem(center: [f64; 2], u: &str) -> Problem {
    let mut p =
        problems::custom(LevelSet::circle(center, 0.31), BoundingBox::unit_square(), Some(u), None, None).unwrap();
    p.initial_cells = 9;
    p
}

#[test]
fn linear_solution_has_vanishing_indicators() {
    for pattern in [MeshPattern::Regular, MeshPattern::Crossed] {
        let mut p = circle_problem([0.52, 0.47], "1 + 2*x - 3*y");
        p.pattern = pattern;
        let mesh = p.initial_mesh().unwrap();
        let a = p.analyze(&mesh, &CutFemParams::default(), FluxOrder::Rt1).unwrap();
        let r = &a.report;
        assert!(r.eta1 < 1e-10 && r.eta2 < 1e-10 && r.eta_res < 1e-9, "{} {} {}", r.eta1, r.eta2, r.eta_res);
        let e = r.errors.unwrap();
        assert!(e.energy < 1e-10 && e.flux < 1e-10);
    }
}

#[test]
fn global_estimators_are_l2_sums_of_local_ones() {
    let p = problems::reentrant();
    let mesh = p.mesh(8).unwrap();
    let a = p.analyze(&mesh, &CutFemParams::default(), FluxOrder::Rt1).unwrap();
    let r = &a.report;
    for (global, local) in [(r.eta1, &r.eta1_local), (r.eta2, &r.eta2_local), (r.eta_res, &r.eta_res_local)] {
        let sum: f64 = local.iter().map(|x| x * x).sum();
        assert!((global * global - sum).abs() <= 1e-12 * sum);
    }
}

#[test]
fn indicators_bound_the_error_on_the_benchmarks() {
    // η₁ is a guaranteed bound up to the discarded boundary and oscillation terms
    for p in [problems::peak(), problems::franke(), problems::reentrant()] {
        for cells in [8, 16] {
            let mesh = p.mesh(cells).unwrap();
            let a = p.analyze(&mesh, &CutFemParams::default(), FluxOrder::Rt1).unwrap();
            let e = a.report.errors.unwrap().energy;
            assert!(a.report.eta1 >= 0.9 * e, "{} at {cells}: eta1 {} vs error {e}", p.name, a.report.eta1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inside_part_never_exceeds_whole_triangle(dx in -0.05f64..0.05, dy in -0.05f64..0.05) {
        let p = circle_problem([0.5 + dx, 0.5 + dy], "sin(3*x) * exp(y)");
        let mesh = p.initial_mesh().unwrap();
        let a = p.analyze(&mesh, &CutFemParams::default(), FluxOrder::Rt1).unwrap();
        let r = &a.report;
        for (e1, e2) in r.eta1_local.iter().zip(&r.eta2_local) {
            prop_assert!(*e2 <= *e1 * (1.0 + 1e-12) + 1e-15);
        }
        prop_assert!(r.eta2 <= r.eta1);
    }
}
