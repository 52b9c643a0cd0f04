//! One solve on a benchmark: dofs, estimators, true errors and flux checks.
//!
//! Usage: `cargo run --release --example solve_benchmark -- [peak|franke|flower|reentrant] [cells]`

use cutflux::cutfem::CutFemParams;
use cutflux::estimate::Estimator;
use cutflux::flux::FluxOrder;
use cutflux::problems;

fn main() -> cutflux::Result<()> {
    let mut args = std::env::args().skip(1);
    let problem = problems::by_name(&args.next().unwrap_or_else(|| "peak".into()))?;
    let cells = args.next().map_or(Ok(problem.initial_cells), |s| s.parse()).expect("cells is an integer");
    let mesh = problem.mesh(cells)?;
    let a = problem.analyze(&mesh, &CutFemParams::default(), FluxOrder::Rt1)?;
    let r = &a.report;
    println!(
        "{}: {} triangles, {} active, {} cut",
        problem.name,
        mesh.num_triangles(),
        r.triangles.len(),
        a.topology.cut_triangles().count()
    );
    println!(
        "dofs {}, solver iterations {}, residual {:.1e}",
        r.dofs, a.solution.stats.iterations, a.solution.stats.relative_residual
    );
    println!("eta1 {:.4e}  eta2 {:.4e}  eta_res {:.4e}", r.eta1, r.eta2, r.eta_res);
    if let Some(e) = r.errors {
        println!("energy error {:.4e}  flux error {:.4e}", e.energy, e.flux);
        for which in [Estimator::Eta1, Estimator::Eta2, Estimator::EtaRes] {
            println!("efficiency {which}: {:.3}", r.efficiency(which).unwrap_or(f64::NAN));
        }
    }
    println!(
        "conservation {:.1e}, normal jump {:.1e} of max |sigma| {:.3}",
        a.conservation.relative(),
        a.normal_jump.0,
        a.normal_jump.1
    );
    Ok(())
}
