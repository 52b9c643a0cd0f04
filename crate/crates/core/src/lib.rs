//! Cut finite elements on unfitted triangular meshes with equilibrated flux
//! recovery and a posteriori error estimation.

pub mod amr;
pub mod cli;
pub mod config;
pub mod cut;
pub mod cutfem;
pub mod data;
pub mod error;
pub mod estimate;
pub mod expr;
pub mod flux;
pub mod levelset;
pub mod mesh;
pub mod mixed_oracle;
pub mod output;
pub mod problems;
pub mod quadrature;
pub mod refine;
pub mod sparse;

pub use error::{Error, Result};

/// A point or vector in the plane.
pub type Point = nalgebra::Vector2<f64>;
