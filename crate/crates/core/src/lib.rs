//! Smooth molecular surfaces from atom-derived scalar fields.
//!
//! The pipeline rasterizes a molecule onto a periodic grid, low-pass filters
//! the field with a high-order linear PDE solved exactly in the 3D
//! Clifford-Fourier domain, and extracts a triangle mesh at an isovalue.
//!
//! * [`ga`]: Clifford algebras R_2 and R_3.
//! * [`cft`]: Clifford-Fourier transforms and spectral derivatives.
//! * [`pde`]: frequency response, low-pass filter, mode decomposition.
//! * [`molecule`]: PQR / XYZR / PDB input.
//! * [`volume`]: grid construction, initial data, OpenDX / raw output.
//! * [`surface`]: marching cubes, mesh metrics, OBJ / OFF output.
//! * [`pipeline`]: end-to-end runs and parameter sweeps.

pub mod cft;
pub mod error;
pub mod ga;
pub mod grid;
pub mod molecule;
pub mod pde;
pub mod pipeline;
pub mod surface;
pub mod volume;

pub use error::{Error, Result};
pub use grid::{GridSpec, ScalarField3};
