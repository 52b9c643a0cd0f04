//! Writes the solution, flux and mesh of one solve as legacy VTK files.
//!
//! Usage: `cargo run --release --example vtk_export -- [problem] [cells] [out dir]`

use std::path::PathBuf;

use cutflux::cutfem::CutFemParams;
use cutflux::flux::FluxOrder;
use cutflux::output::{flux_grid, mesh_grid, solution_grid};
use cutflux::problems;

fn main() -> cutflux::Result<()> {
    let mut args = std::env::args().skip(1);
    let problem = problems::by_name(&args.next().unwrap_or_else(|| "flower".into()))?;
    let cells: usize = args.next().map_or(problem.initial_cells, |s| s.parse().expect("cells is an integer"));
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "vtk-out".into()));
    std::fs::create_dir_all(&dir)?;
    let mesh = problem.mesh(cells)?;
    let a = problem.analyze(&mesh, &CutFemParams::default(), FluxOrder::Rt1)?;
    solution_grid(&a).write(&dir.join("solution.vtk"))?;
    flux_grid(&a).write(&dir.join("flux.vtk"))?;
    mesh_grid(&a.topology).write(&dir.join("mesh.vtk"))?;
    println!("wrote solution.vtk, flux.vtk and mesh.vtk to {}", dir.display());
    Ok(())
}
