//! Condition numbers while a circle slides across a fixed mesh, with and
//! without the ghost penalty.
//!
//! Usage: `cargo run --release --example ghost_penalty -- [cells] [positions]`

use cutflux::cut::CutTopology;
use cutflux::cutfem::{condition_probe, CutFemParams};
use cutflux::levelset::LevelSet;
use cutflux::mesh::{BackgroundMesh, BoundingBox, MeshPattern};

fn main() -> cutflux::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(16, |s| s.parse().expect("cells is an integer"));
    let positions: usize = args.next().map_or(20, |s| s.parse().expect("positions is an integer"));
    let mesh = BackgroundMesh::structured(cells, cells, BoundingBox::unit_square(), MeshPattern::Regular)?;
    let stabilized = CutFemParams::default();
    let bare = CutFemParams { gamma: 0.0, ..stabilized };
    println!("{:>10} {:>14} {:>14} {:>6}", "shift", "cond gamma=0.1", "cond gamma=0", "SPD");
    let mut spread = [(f64::INFINITY, 0.0f64); 2];
    for i in 0..positions {
        // one cell width in total, so every cut configuration is visited
        let d = i as f64 / (positions * cells) as f64;
        let ct = CutTopology::from_levelset(&mesh, &LevelSet::circle([0.5 + d, 0.5 + 0.37 * d], 0.3))?;
        let a = condition_probe(&ct, &stabilized)?;
        let b = condition_probe(&ct, &bare)?;
        for (s, c) in spread.iter_mut().zip([a.condition_number(), b.condition_number()]) {
            *s = (s.0.min(c), s.1.max(c));
        }
        println!(
            "{d:>10.5} {:>14.4e} {:>14.4e} {:>6}",
            a.condition_number(),
            b.condition_number(),
            b.is_positive_definite()
        );
    }
    println!("max/min with ghost penalty {:.2}, without {:.3e}", spread[0].1 / spread[0].0, spread[1].1 / spread[1].0);
    Ok(())
}
