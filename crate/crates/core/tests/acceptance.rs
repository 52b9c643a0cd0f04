//! End-to-end acceptance checks. Every criterion writes one PASS/FAIL line to
//! stderr, uncaptured, and then asserts.

use std::io::Write;
use std::sync::OnceLock;

use cutflux::amr::{run_amr, uniform_study, AmrConfig, AmrTrace};
use cutflux::cut::CutTopology;
use cutflux::cutfem::{condition_probe, energy_norm_h, solve, CutFemParams};
use cutflux::estimate::Estimator;
use cutflux::flux::{constraint_violation, reconstruct, FluxOrder};
use cutflux::levelset::LevelSet;
use cutflux::mesh::{BackgroundMesh, BoundingBox, MeshPattern, StarOrientation};
use cutflux::mixed_oracle::{compare, solve_mixed};
use cutflux::problems::{self, Problem};
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

fn report(n: u32, title: &str, pass: bool, detail: &str) {
    let line = format!("criterion {n:>2} {}  {title}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{line}");
}

fn benchmarks() -> [Problem; 4] {
    [problems::peak(), problems::franke(), problems::flower(), problems::reentrant()]
}

/// The four adaptive runs with their own protocols, computed once.
fn traces() -> &'static [AmrTrace] {
    static TRACES: OnceLock<Vec<AmrTrace>> = OnceLock::new();
    TRACES.get_or_init(|| {
        std::thread::scope(|s| {
            let handles: Vec<_> = benchmarks()
                .into_iter()
                .map(|p| s.spawn(move || run_amr(&p, &AmrConfig::for_problem(&p)).expect("adaptive run")))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    })
}

fn trace(name: &str) -> &'static AmrTrace {
    traces().iter().find(|t| t.problem == name).unwrap()
}

#[test]
fn c01_local_conservation() {
    let mut worst: Vec<String> = Vec::new();
    let mut pass = true;
    for t in traces() {
        let w = t.iterations.iter().map(|r| r.conservation).fold(0.0, f64::max);
        pass &= w <= 1e-9 && t.failure.is_none();
        worst.push(format!("{} {:.1e} ({} meshes)", t.problem, w, t.iterations.len()));
    }
    report(1, "local conservation <= 1e-9", pass, &worst.join(", "));
}

#[test]
fn c02_normal_continuity() {
    let mut worst: Vec<String> = Vec::new();
    let mut pass = true;
    for t in traces() {
        let w = t.iterations.iter().map(|r| r.normal_jump).fold(0.0, f64::max);
        pass &= w <= 1e-11;
        worst.push(format!("{} {:.1e}", t.problem, w));
    }
    report(2, "normal jump <= 1e-11 max|sigma|", pass, &worst.join(", "));
}

#[test]
fn c03_mixed_oracle() {
    let circle = problems::custom(
        LevelSet::circle([0.47, 0.53], 0.36),
        BoundingBox::unit_square(),
        Some("sin(2*x) * exp(y)"),
        None,
        None,
    )
    .unwrap();
    let mut flower = problems::flower();
    flower.pattern = MeshPattern::Crossed;
    let cases = [(problems::reentrant(), 6), (flower, 5), (circle, 8)];
    let params = CutFemParams::default();
    let mut pass = true;
    let mut details = Vec::new();
    for (p, cells) in &cases {
        let mesh = p.mesh(*cells).unwrap();
        let a = p.analyze(&mesh, &params, FluxOrder::Rt1).unwrap();
        let cut = a.topology.cut_triangles().count();
        let mixed = solve_mixed(&a.topology, &a.data, &params, 4000).unwrap();
        let c = compare(&a.topology, &a.solution, &a.reconstruction.multiplier, &mixed);
        pass &= a.report.dofs <= 200 && cut > 0 && c.passes(1e-8);
        details.push(format!(
            "{} {} dofs |du| {:.1e} |dtheta| {:.1e}",
            p.name, a.report.dofs, c.u_difference, c.theta_difference
        ));
    }
    report(3, "local construction matches global mixed solve to 1e-8", pass, &details.join(", "));
}

fn uniform_rates(n: u32, p: Problem) {
    // 32 cells is the start of the asymptotic range for the peak width
    let rows = uniform_study(&p, 32, 4, &CutFemParams::default(), FluxOrder::Rt1).unwrap();
    let mut rates = Vec::new();
    for r in &rows[1..] {
        rates.push(r.energy_rate.unwrap());
        rates.push(r.flux_rate.unwrap());
    }
    let pass = rates.iter().all(|r| (0.85..=1.15).contains(r));
    let fmt: Vec<String> =
        rows[1..].iter().map(|r| format!("{:.3}/{:.3}", r.energy_rate.unwrap(), r.flux_rate.unwrap())).collect();
    report(n, &format!("{} uniform rates (energy/flux) in [0.85, 1.15]", p.name), pass, &fmt.join(" "));
}

#[test]
fn c04_uniform_peak() {
    uniform_rates(4, problems::peak());
}

#[test]
fn c05_uniform_franke() {
    uniform_rates(5, problems::franke());
}

fn mean(t: &AmrTrace, e: Estimator) -> f64 {
    t.mean_efficiency(e).unwrap()
}

#[test]
fn c06_peak_efficiency() {
    let t = trace("peak");
    let (e1, er) = (mean(t, Estimator::Eta1), mean(t, Estimator::EtaRes));
    let pass = (1.1..=2.2).contains(&e1) && (3.5..=7.5).contains(&er);
    report(
        6,
        "peak mean efficiency eta1 in [1.1, 2.2], eta_res in [3.5, 7.5]",
        pass,
        &format!("eta1 {e1:.3}, eta_res {er:.3}"),
    );
}

#[test]
fn c07_reentrant_efficiency() {
    let t = trace("reentrant");
    let got = [mean(t, Estimator::EtaRes), mean(t, Estimator::Eta1), mean(t, Estimator::Eta2)];
    let target = [4.1, 2.4, 1.5];
    let pass = got.iter().zip(target).all(|(g, t)| (0.5 * t..=1.5 * t).contains(g));
    report(
        7,
        "reentrant mean efficiency within 50% of 4.1 / 2.4 / 1.5",
        pass,
        &format!("eta_res {:.3}, eta1 {:.3}, eta2 {:.3}", got[0], got[1], got[2]),
    );
}

#[test]
fn c08_optimal_decay() {
    let mut pass = true;
    let mut details = Vec::new();
    for t in traces() {
        let e = t.config.estimator;
        let slope = t.decay_slope(e, 5).unwrap();
        pass &= t.iterations.len() >= 5 && slope <= -0.4;
        details.push(format!("{} {e} {slope:.3}", t.problem));
    }
    report(8, "slope of the driving estimator over the last 5 iterations <= -0.4", pass, &details.join(", "));
}

#[test]
fn c09_ghost_penalty_conditioning() {
    let mesh = BackgroundMesh::structured(16, 16, BoundingBox::unit_square(), MeshPattern::Regular).unwrap();
    let spread = |gamma: f64| {
        let params = CutFemParams { gamma, ..CutFemParams::default() };
        let conds: Vec<f64> = (0..20)
            .map(|i| {
                let d = i as f64 / (20.0 * 16.0);
                let ct = CutTopology::from_levelset(&mesh, &LevelSet::circle([0.5 + d, 0.5 + 0.37 * d], 0.3)).unwrap();
                condition_probe(&ct, &params).unwrap().condition_number()
            })
            .collect();
        let hi = conds.iter().copied().fold(0.0, f64::max);
        let lo = conds.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    };
    let (stab, bare) = (spread(0.1), spread(0.0));
    // regression guard: measured 7.7 and 8.5e4 on this sweep
    let pass = stab <= 100.0 && bare >= 10.0 * stab && stab <= 12.0 && bare >= 1e3 * stab;
    report(
        9,
        "cond(A) spread over 20 positions, gamma 0.1 <= 100 and gamma 0 >= 10x that",
        pass,
        &format!("gamma 0.1 {stab:.2}, gamma 0 {bare:.3e}"),
    );
}

fn invariants(center: [f64; 2], radius: f64, pattern: MeshPattern) -> Result<(), TestCaseError> {
    let ls = LevelSet::circle(center, radius);
    let mut p = problems::custom(ls.clone(), BoundingBox::unit_square(), Some("sin(3*x) * exp(y) + x*y^2"), None, None)
        .unwrap();
    p.pattern = pattern;
    let mesh = p.mesh(12).unwrap();
    let a = p.analyze(&mesh, &CutFemParams::default(), FluxOrder::Rt1).unwrap();
    let ct = &a.topology;
    let rec = &a.reconstruction;

    let compat = rec.residuals.compatibility_defect(ct);
    if compat > 1e-10 {
        return Err(TestCaseError::fail(format!("compatibility {compat:.2e}")));
    }
    let constraint = constraint_violation(ct, &rec.multiplier);
    if constraint > 1e-10 {
        return Err(TestCaseError::fail(format!("multiplier constraint {constraint:.2e}")));
    }
    if a.report.eta2_local.iter().zip(&a.report.eta1_local).any(|(e2, e1)| *e2 > *e1 * (1.0 + 1e-12) + 1e-15) {
        return Err(TestCaseError::fail("eta2 exceeds eta1"));
    }
    let cw = reconstruct(ct, &a.data, &a.solution, FluxOrder::Rt1, StarOrientation::Clockwise).unwrap();
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for &k in ct.active_triangles() {
        let c = mesh.centroid(k);
        let s = rec.flux.eval(&mesh, k, c);
        diff = diff.max((s - cw.flux.eval(&mesh, k, c)).norm());
        scale = scale.max(s.norm());
    }
    if diff > 1e-10 * scale {
        return Err(TestCaseError::fail(format!("orientation changes sigma by {diff:.2e}")));
    }

    let mut lin = problems::custom(ls, BoundingBox::unit_square(), Some("1 + 2*x - 3*y"), None, None).unwrap();
    lin.pattern = pattern;
    let lct = lin.topology(&mesh).unwrap();
    let u = solve(&lct, &lin.data(&mesh), &CutFemParams::default()).unwrap();
    let exact = u.dofs.interpolate(&mesh, |q| 1.0 + 2.0 * q.x - 3.0 * q.y);
    let e: Vec<f64> = u.coefficients.iter().zip(&exact).map(|(a, b)| a - b).collect();
    let patch = energy_norm_h(&lct, &u.dofs, &e, 0.1).value();
    if patch > 1e-10 {
        return Err(TestCaseError::fail(format!("linear patch test error {patch:.2e}")));
    }
    Ok(())
}

#[test]
fn c10_invariant_suite() {
    let config = Config { cases: 50, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let strategy = (-0.12f64..0.12, -0.12f64..0.12, 0.22f64..0.38, proptest::bool::ANY);
    let count = std::sync::atomic::AtomicUsize::new(0);
    let result = runner.run(&strategy, |(dx, dy, r, crossed)| {
        count.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let pattern = if crossed { MeshPattern::Crossed } else { MeshPattern::Regular };
        invariants([0.5 + dx, 0.5 + dy], r, pattern)
    });
    let detail = match &result {
        Ok(()) => format!("{} random cut configurations", count.into_inner()),
        Err(e) => e.to_string(),
    };
    report(10, "compatibility, M_h constraints, eta2 <= eta1, orientation, linear patch", result.is_ok(), &detail);
}
