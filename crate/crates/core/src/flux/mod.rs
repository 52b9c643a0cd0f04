//! Equilibrated flux reconstruction from a CutFEM solution.
//!
//! The pipeline is: element residuals, local multiplier solves at every active
//! vertex, facet and element moments, and finally the local Raviart–Thomas
//! fields. The extended source closes the local conservation law on cut cells.

pub mod extension;
pub mod multiplier;
pub mod recovery;
pub mod residual;

pub use extension::{extend_f, extension_moments, project_f, FExtension, ProjectedSource};
pub use multiplier::{constraint_violation, solve_multiplier, solve_theta_vertex, MultiplierField};
pub use recovery::{conservation_defect, normal_jump, recover_flux, ConservationReport, FluxOrder, RecoveredFlux};
pub use residual::{compute_residuals, ResidualTable};

use crate::cut::CutTopology;
use crate::cutfem::CutFemSolution;
use crate::data::ProblemData;
use crate::error::Result;
use crate::mesh::StarOrientation;

/// Everything produced on the way from `u_h` to `σ_h`.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub residuals: ResidualTable,
    pub multiplier: MultiplierField,
    pub flux: RecoveredFlux,
    pub source: ProjectedSource,
}

impl Reconstruction {
    pub fn conservation(&self, ct: &CutTopology) -> ConservationReport {
        conservation_defect(ct, &self.flux, &self.source)
    }
}

pub fn reconstruct(
    ct: &CutTopology,
    data: &ProblemData,
    u: &CutFemSolution,
    order: FluxOrder,
    orientation: StarOrientation,
) -> Result<Reconstruction> {
    let residuals = compute_residuals(ct, data, u)?;
    let multiplier = solve_multiplier(ct, &residuals, orientation)?;
    let flux = recover_flux(ct, data, u, &multiplier, order)?;
    let source = project_f(ct, data, u)?;
    Ok(Reconstruction { residuals, multiplier, flux, source })
}
