//! Newest-vertex bisection around a circle: marks the cut triangles a few
//! times and reports mesh size, quality and conformity.
//!
//! Usage: `cargo run --release --example mesh_refinement -- [rounds]`

use cutflux::cut::CutTopology;
use cutflux::levelset::LevelSet;
use cutflux::mesh::{BackgroundMesh, BoundingBox, MeshPattern};
use cutflux::refine::refine;

fn main() -> cutflux::Result<()> {
    let rounds: usize = std::env::args().nth(1).map_or(6, |s| s.parse().expect("rounds is an integer"));
    let ls = LevelSet::circle([0.5, 0.5], 0.3);
    let mut mesh = BackgroundMesh::structured(4, 4, BoundingBox::unit_square(), MeshPattern::Regular)?;
    println!("{:>5} {:>9} {:>9} {:>6} {:>10} {:>9}", "round", "vertices", "triangles", "cut", "min angle", "h max");
    for round in 0..=rounds {
        let ct = CutTopology::from_levelset(&mesh, &ls)?;
        let cut: Vec<usize> = ct.cut_triangles().collect();
        println!(
            "{round:>5} {:>9} {:>9} {:>6} {:>10.2} {:>9.4}",
            mesh.num_vertices(),
            mesh.num_triangles(),
            cut.len(),
            mesh.min_angle().to_degrees(),
            mesh.max_diameter()
        );
        if round < rounds {
            mesh = refine(&mesh, &cut)?.mesh;
        }
    }
    let total: f64 = (0..mesh.num_triangles()).map(|k| mesh.area(k)).sum();
    println!("area of the square after refinement: {total:.15}");
    Ok(())
}
