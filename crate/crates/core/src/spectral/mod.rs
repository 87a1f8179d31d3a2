//! Principal spectrum point of the coupled semi-discrete system by two
//! routes (period-map power iteration and resolvent root finding), and the
//! comparison-principle harness.

mod comparison;
mod monodromy;
mod resolvent;
mod system;

pub use comparison::{comparison_check, ComparisonReport};
pub use monodromy::{principal_spectrum_point, SimplicityCheck, SpectralMethod, SpectrumResult};
pub use resolvent::{
    birman_schwinger_eigenvalue, birman_schwinger_radius, resolvent_identity_check, BirmanSchwingerReport,
    PeriodicResolvent, ResolventProbe,
};
pub use system::{step_evolution, SemiDiscreteSystem};
