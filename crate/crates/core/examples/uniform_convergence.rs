//! Errors and observed rates on a sequence of uniformly refined meshes.
//!
//! Usage: `cargo run --release --example uniform_convergence -- [problem] [cells] [levels]`

use cutflux::amr::uniform_study;
use cutflux::cutfem::CutFemParams;
use cutflux::flux::FluxOrder;
use cutflux::problems;

fn main() -> cutflux::Result<()> {
    let mut args = std::env::args().skip(1);
    let problem = problems::by_name(&args.next().unwrap_or_else(|| "peak".into()))?;
    let cells: usize = args.next().map_or(Ok(8), |s| s.parse()).expect("cells must be an integer");
    let levels: usize = args.next().map_or(Ok(4), |s| s.parse()).expect("levels must be an integer");
    let rows = uniform_study(&problem, cells, levels, &CutFemParams::default(), FluxOrder::Rt1)?;
    println!(
        "{:>5} {:>7} {:>10} {:>11} {:>7} {:>11} {:>7} {:>11}",
        "cells", "dofs", "h", "energy", "rate", "flux", "rate", "eta1"
    );
    let fmt_rate = |r: Option<f64>| r.map_or("-".to_string(), |r| format!("{r:.3}"));
    for row in &rows {
        let r = &row.record;
        let e = r.errors.expect("benchmarks have exact solutions");
        println!(
            "{:>5} {:>7} {:>10.4e} {:>11.4e} {:>7} {:>11.4e} {:>7} {:>11.4e}",
            row.cells,
            r.dofs,
            r.h,
            e.energy,
            fmt_rate(row.energy_rate),
            e.flux,
            fmt_rate(row.flux_rate),
            r.eta1
        );
    }
    Ok(())
}
