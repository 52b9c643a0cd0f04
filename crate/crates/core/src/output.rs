//! Legacy ASCII VTK files and CSV tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::amr::{AmrTrace, IterationRecord, UniformRow};
use crate::cut::{CellClass, CutTopology};
use crate::estimate::Estimator;
use crate::mesh::BackgroundMesh;
use crate::problems::Analysis;
use crate::Result;

/// Schema version of every CSV table; bumped when columns change.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const TRACE_COLUMNS: [&str; 8] =
    ["iteration", "dofs", "eta1", "eta2", "eta_res", "energy_error", "flux_error", "efficiency"];

pub const DIAGNOSTIC_COLUMNS: [&str; 7] =
    ["iteration", "dofs", "active_triangles", "h", "conservation", "normal_jump", "marked"];

pub const UNIFORM_COLUMNS: [&str; 11] = [
    "level",
    "cells",
    "dofs",
    "h",
    "energy_error",
    "energy_rate",
    "flux_error",
    "flux_rate",
    "eta1",
    "eta2",
    "eta_res",
];

/// An unstructured triangle grid with point and cell fields.
#[derive(Clone, Debug)]
pub struct VtkGrid<'m> {
    mesh: &'m BackgroundMesh,
    title: String,
    point_scalars: Vec<(String, Vec<f64>)>,
    cell_scalars: Vec<(String, Vec<f64>)>,
    cell_vectors: Vec<(String, Vec<[f64; 2]>)>,
}

impl<'m> VtkGrid<'m> {
    pub fn new(mesh: &'m BackgroundMesh, title: &str) -> Self {
        // the title line may not contain newlines
        let title = title.replace(['\n', '\r'], " ");
        Self { mesh, title, point_scalars: Vec::new(), cell_scalars: Vec::new(), cell_vectors: Vec::new() }
    }

    pub fn point_scalar(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        assert_eq!(values.len(), self.mesh.num_vertices(), "one value per vertex");
        self.point_scalars.push((name.into(), values));
        self
    }

    pub fn cell_scalar(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        assert_eq!(values.len(), self.mesh.num_triangles(), "one value per triangle");
        self.cell_scalars.push((name.into(), values));
        self
    }

    pub fn cell_vector(&mut self, name: &str, values: Vec<[f64; 2]>) -> &mut Self {
        assert_eq!(values.len(), self.mesh.num_triangles(), "one value per triangle");
        self.cell_vectors.push((name.into(), values));
        self
    }

    pub fn to_vtk_string(&self) -> String {
        let m = self.mesh;
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID", self.title);
        let _ = writeln!(s, "POINTS {} double", m.num_vertices());
        for p in m.vertices() {
            let _ = writeln!(s, "{} {} 0", p.x, p.y);
        }
        let nt = m.num_triangles();
        let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
        for t in m.triangles() {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "CELL_TYPES {nt}");
        for _ in 0..nt {
            s.push_str("5\n");
        }
        if !self.point_scalars.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", m.num_vertices());
            for (name, v) in &self.point_scalars {
                write_scalars(&mut s, name, v);
            }
        }
        if !self.cell_scalars.is_empty() || !self.cell_vectors.is_empty() {
            let _ = writeln!(s, "CELL_DATA {nt}");
            for (name, v) in &self.cell_scalars {
                write_scalars(&mut s, name, v);
            }
            for (name, v) in &self.cell_vectors {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v {
                    let _ = writeln!(s, "{} {} 0", x[0], x[1]);
                }
            }
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_vtk_string())?;
        Ok(())
    }
}

fn write_scalars(s: &mut String, name: &str, v: &[f64]) {
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for x in v {
        let _ = writeln!(s, "{x}");
    }
}

/// `0` inside, `1` cut, `2` outside.
pub fn cut_class_codes(ct: &CutTopology) -> Vec<f64> {
    (0..ct.mesh().num_triangles())
        .map(|k| match ct.class(k) {
            CellClass::Inside => 0.0,
            CellClass::Cut => 1.0,
            CellClass::Outside => 2.0,
        })
        .collect()
}

/// Spreads per-active-triangle values onto all background triangles, zero elsewhere.
fn on_background(mesh: &BackgroundMesh, triangles: &[usize], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_triangles()];
    for (&k, &v) in triangles.iter().zip(values) {
        out[k] = v;
    }
    out
}

/// `u_h` at the vertices (zero off the active mesh), with the indicators and cut class per triangle.
pub fn solution_grid<'m>(analysis: &Analysis<'m>) -> VtkGrid<'m> {
    let ct = &analysis.topology;
    let mesh = ct.mesh();
    let report = &analysis.report;
    let mut g = VtkGrid::new(mesh, "cutflux solution");
    // vertices outside the active mesh carry no dof
    let u = analysis.solution.vertex_values(mesh).into_iter().map(|x| if x.is_nan() { 0.0 } else { x }).collect();
    g.point_scalar("u_h", u);
    g.cell_scalar("cut_class", cut_class_codes(ct));
    g.cell_scalar("eta1", on_background(mesh, &report.triangles, &report.eta1_local));
    g.cell_scalar("eta2", on_background(mesh, &report.triangles, &report.eta2_local));
    g.cell_scalar("eta_res", on_background(mesh, &report.triangles, &report.eta_res_local));
    g
}

/// `σ_h` and `|σ_h - ∇u_h|` at triangle centroids, zero on inactive triangles.
pub fn flux_grid<'m>(analysis: &Analysis<'m>) -> VtkGrid<'m> {
    let ct = &analysis.topology;
    let mesh = ct.mesh();
    let flux = &analysis.reconstruction.flux;
    let nt = mesh.num_triangles();
    let mut sigma = vec![[0.0; 2]; nt];
    let mut mismatch = vec![0.0; nt];
    for &k in ct.active_triangles() {
        let c = mesh.centroid(k);
        let s = flux.eval(mesh, k, c);
        sigma[k] = [s.x, s.y];
        mismatch[k] = (s - analysis.solution.gradient(mesh, k)).norm();
    }
    let mut g = VtkGrid::new(mesh, "cutflux recovered flux");
    g.cell_scalar("cut_class", cut_class_codes(ct));
    g.cell_scalar("flux_mismatch", mismatch);
    g.cell_vector("sigma", sigma);
    g
}

/// Background mesh with the cut classes only.
pub fn mesh_grid<'m>(ct: &CutTopology<'m>) -> VtkGrid<'m> {
    let mut g = VtkGrid::new(ct.mesh(), "cutflux mesh");
    g.cell_scalar("cut_class", cut_class_codes(ct));
    g
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn header(columns: &[&str]) -> String {
    format!("# cutflux csv schema {CSV_SCHEMA_VERSION}\n{}\n", columns.join(","))
}

/// One row of [`TRACE_COLUMNS`]; the efficiency is that of `estimator`.
pub fn trace_row(r: &IterationRecord, estimator: Estimator) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.iteration,
        r.dofs,
        r.eta1,
        r.eta2,
        r.eta_res,
        opt(r.errors.map(|e| e.energy)),
        opt(r.errors.map(|e| e.flux)),
        opt(r.efficiency(estimator)),
    )
}

pub fn trace_csv(records: &[IterationRecord], estimator: Estimator) -> String {
    let mut s = header(&TRACE_COLUMNS);
    for r in records {
        s.push_str(&trace_row(r, estimator));
        s.push('\n');
    }
    s
}

pub fn diagnostics_csv(records: &[IterationRecord]) -> String {
    let mut s = header(&DIAGNOSTIC_COLUMNS);
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.iteration, r.dofs, r.active_triangles, r.h, r.conservation, r.normal_jump, r.marked
        );
    }
    s
}

pub fn uniform_csv(rows: &[UniformRow]) -> String {
    let mut s = header(&UNIFORM_COLUMNS);
    for row in rows {
        let r = &row.record;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.level,
            row.cells,
            r.dofs,
            r.h,
            opt(r.errors.map(|e| e.energy)),
            opt(row.energy_rate),
            opt(r.errors.map(|e| e.flux)),
            opt(row.flux_rate),
            r.eta1,
            r.eta2,
            r.eta_res,
        );
    }
    s
}

pub fn amr_trace_csv(trace: &AmrTrace) -> String {
    trace_csv(&trace.iterations, trace.config.estimator)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
