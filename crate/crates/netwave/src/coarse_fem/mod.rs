//! Coarse finite element layer: the uniform hypercube mesh `T_H`, restriction
//! of bilinear basis functions to network nodes, the quasi-interpolation
//! operator with element-local dual functions, and patch machinery.

mod interpolator;
mod mesh;
mod patch;

pub use interpolator::{build_interpolator, Interpolator};
pub use mesh::{build_mesh, CoarseMesh};
pub use patch::{build_patch, Patch, PatchSeed};
