//! Compares the vertex-local multiplier construction with the global
//! saddle-point solve on a small cut mesh.
//!
//! Usage: `cargo run --release --example mixed_oracle_check -- [peak|franke|flower|reentrant] [cells]`

use cutflux::cutfem::CutFemParams;
use cutflux::flux::FluxOrder;
use cutflux::mixed_oracle::{compare, infsup_probe, solve_mixed, DEFAULT_CAP};
use cutflux::problems;

fn main() -> cutflux::Result<()> {
    let mut args = std::env::args().skip(1);
    let problem = problems::by_name(&args.next().unwrap_or_else(|| "reentrant".into()))?;
    let cells: usize = args.next().map_or(6, |s| s.parse().expect("cells is an integer"));
    let mesh = problem.mesh(cells)?;
    let params = CutFemParams::default();
    let a = problem.analyze(&mesh, &params, FluxOrder::Rt1)?;
    let mixed = solve_mixed(&a.topology, &a.data, &params, DEFAULT_CAP)?;
    let c = compare(&a.topology, &a.solution, &a.reconstruction.multiplier, &mixed);
    println!("{} at {cells} cells: {} dofs, {} mixed unknowns", problem.name, a.report.dofs, c.unknowns);
    println!("max |u_h - u_mixed|     {:.2e}", c.u_difference);
    println!("max |theta - theta_mix| {:.2e} (max |theta| {:.2e})", c.theta_difference, c.theta_scale);
    println!("jump of mixed u         {:.2e}", c.max_jump);
    println!("saddle residual         {:.2e}", c.saddle_residual);
    println!("inf-sup estimate        {:.4}", infsup_probe(&a.topology, &params)?);
    println!("{}", if c.passes(1e-8) { "match at 1e-8" } else { "MISMATCH at 1e-8" });
    Ok(())
}
