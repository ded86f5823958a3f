//! Discrete midsurface geometry, polyconvex shell energies, numerical
//! certification probes and a barrier-based constrained minimizer.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admissibility;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod minimize;
pub mod scalar;
pub mod surfaces;
pub mod verify;

pub use admissibility::{check_admissible, AdmissibilityReport, BoundaryConditions, Edge, Gamma0Spec, MPoint, ShellConfig};
pub use energy::{EnergySpec, EnergyVariant, GammaPrimitive, HelfrichParams, LoadSpec, PolyFamily, PolyTerm};
pub use error::{Result, ShellError};
pub use geometry::{CurvatureData, FundamentalForms, SurfaceConfiguration};
pub use grid::{build_grid, ParamGrid, Rect};
pub use surfaces::SurfacePreset;
