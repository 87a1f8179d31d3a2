//! Kernels, box domains, midpoint grids and the assembled nonlocal operator.

mod grid;
mod kernel;
mod operator;

pub use grid::{build_grid, build_grid_axes, BoundaryType, DomainSpec, Grid};
pub use kernel::{build_kernel, gauss_legendre, Kernel, KernelProfile, MASS_TOLERANCE};
pub use operator::{assemble_nonlocal, NonlocalOperatorMatrix};
