//! Two-dimensional magnetostatic finite elements for rotating machines, with
//! stator and rotor meshes glued across a circular air-gap interface by a
//! Fourier-mode multiplier space.
//!
//! Rotation enters only through a block-diagonal operator on the multiplier
//! coefficients, so subdomain factorizations are computed once and reused for
//! every rotor angle. Torque comes from the derivative of the discrete energy.

pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod machine_model;
pub mod mesh;
pub mod mortar;
pub mod registry;
pub mod solver;

pub use error::{Error, Result};
pub use machine_model::{default_config, MachineConfig};
pub use solver::{AssembledSystem, SolutionState};
