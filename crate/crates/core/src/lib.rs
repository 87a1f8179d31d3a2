//! Principal spectrum points of time-periodic cooperative linear systems with
//! nonlocal dispersal.
//!
//! The pipeline is: discretise the dispersal operator on a box
//! ([`discretization`]), compile the coefficient field ([`coupling`]), solve
//! the pointwise periodic problems ([`floquet`]), compute the principal
//! spectrum point of the coupled system by two independent routes
//! ([`spectral`]), and evaluate the existence criteria ([`criteria`]).

pub mod coupling;
pub mod criteria;
pub mod discretization;
pub mod error;
pub mod floquet;
pub mod instances;
mod linalg;
pub mod spectral;
pub mod system;

pub use coupling::{sample_coupling, CouplingField, CouplingSpec, HypothesisReport};
pub use discretization::{
    assemble_nonlocal, build_grid, build_kernel, BoundaryType, DomainSpec, Grid, Kernel, KernelProfile,
    NonlocalOperatorMatrix,
};
pub use error::{Error, Result};
pub use floquet::PointwiseField;
pub use spectral::{SemiDiscreteSystem, SpectrumResult};
pub use system::{KernelSpec, Numerics, SystemSpec};
