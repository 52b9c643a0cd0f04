//! Flux recovery on a cut circle, step by step: vertex residuals, the
//! multiplier, then the equilibrated flux and its checks.
//!
//! Usage: `cargo run --release --example flux_recovery -- [cells] [rt0|rt1]`

use std::sync::Arc;

use cutflux::cut::CutTopology;
use cutflux::cutfem::{solve, CutFemParams};
use cutflux::data::{BoundaryField, ProblemData, SourceField};
use cutflux::flux::{constraint_violation, normal_jump, reconstruct, FluxOrder};
use cutflux::levelset::LevelSet;
use cutflux::mesh::{BackgroundMesh, BoundingBox, MeshPattern, StarOrientation};
use cutflux::Point;

fn main() -> cutflux::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(16, |s| s.parse().expect("cells is an integer"));
    let order = match args.next().as_deref() {
        Some("rt0") => FluxOrder::Rt0,
        _ => FluxOrder::Rt1,
    };
    let mesh = BackgroundMesh::structured(cells, cells, BoundingBox::unit_square(), MeshPattern::Crossed)?;
    let ct = CutTopology::from_levelset(&mesh, &LevelSet::circle([0.51, 0.48], 0.37))?;
    // u = x² y, so f = -2y
    let data = ProblemData::new(
        SourceField::Analytic(Arc::new(|p: Point| -2.0 * p.y)),
        BoundaryField::Analytic(Arc::new(|p: Point| p.x * p.x * p.y)),
    );
    let u = solve(&ct, &data, &CutFemParams::default())?;
    let rec = reconstruct(&ct, &data, &u, order, StarOrientation::CounterClockwise)?;

    println!(
        "{} active triangles, {} cut, {} dofs",
        ct.active_triangles().len(),
        ct.cut_triangles().count(),
        u.num_dofs()
    );
    println!("largest residual r_iN            {:.3e}", rec.residuals.max_abs());
    println!("vertex sums of r_iN (relative)   {:.1e}", rec.residuals.compatibility_defect(&ct));
    println!("multiplier vertex constraints    {:.1e}", constraint_violation(&ct, &rec.multiplier));
    let c = rec.conservation(&ct);
    println!("local conservation (relative)    {:.1e} on triangle {:?}", c.relative(), c.worst_triangle);
    let (jump, scale) = normal_jump(&ct, &rec.flux);
    println!("normal jump / max |sigma|        {:.1e}", jump / scale);
    let worst = ct
        .active_triangles()
        .iter()
        .map(|&k| (rec.flux.eval(&mesh, k, mesh.centroid(k)) - u.gradient(&mesh, k)).norm())
        .fold(0.0, f64::max);
    println!("max |sigma - grad u_h| at centroids {worst:.3e}");
    Ok(())
}
