//! Benchmark fixtures shared by the criterion targets.

use nlpe_core::{BoundaryType, CouplingSpec, DomainSpec, KernelProfile, KernelSpec, Numerics, SystemSpec};

/// A two-component system on the unit interval with `nodes` nodes.
pub fn interval_k2(boundary: BoundaryType, nodes: usize, time_steps: usize) -> SystemSpec {
    SystemSpec {
        domain: DomainSpec::new(boundary, vec![0.0], vec![1.0]).expect("unit interval"),
        kernel: KernelSpec {
            profile: KernelProfile::Bump,
            delta: 0.2,
        },
        coupling: CouplingSpec::new(
            1.0,
            &[&["x1 + 0.5*sin_t", "1 + 0.5*cos_t"], &["0.5 + x1^2", "-x1"]],
        ),
        numerics: Numerics {
            resolution: vec![nodes],
            time_steps,
            ..Numerics::default()
        },
    }
}

/// A scalar system on the unit square with `nodes` nodes per axis.
pub fn square_k1(nodes: usize) -> SystemSpec {
    SystemSpec {
        domain: DomainSpec::new(BoundaryType::Dirichlet, vec![0.0; 2], vec![1.0; 2]).expect("unit square"),
        kernel: KernelSpec {
            profile: KernelProfile::Bump,
            delta: 0.25,
        },
        coupling: CouplingSpec::new(1.0, &[&["-(x1 - 0.5)^2 - (x2 - 0.5)^2 + 0.3*sin_t"]]),
        numerics: Numerics {
            resolution: vec![nodes],
            time_steps: 64,
            ..Numerics::default()
        },
    }
}
