//! Time-periodic coefficient fields and the cooperativity/irreducibility checks.

mod expr;
mod field;
mod hypotheses;

pub use expr::{BasisPoint, Expr};
pub use field::{sample_coupling, CouplingField, CouplingSpec};
pub use hypotheses::{
    strongly_connected, validate_cooperative, validate_irreducible, weakest_partition, CooperativeCheck,
    HypothesisReport, IrreducibilityMethod, IrreducibleCheck, PartitionWitness, SampleWitness, DEFAULT_TIME_SAMPLES,
    HYPOTHESIS_TOL, MAX_CROSS_CHECK_SIZE, MAX_ENUMERATION_SIZE,
};
