#![allow(dead_code)]

use nlpe_core::{BoundaryType, CouplingSpec, DomainSpec, KernelProfile, KernelSpec, Numerics, SystemSpec};

pub fn interval_spec<S: AsRef<str>>(
    boundary: BoundaryType,
    matrix: &[&[S]],
    delta: f64,
    nodes: usize,
    steps: usize,
) -> SystemSpec {
    box_spec(boundary, 1, matrix, delta, nodes, steps)
}

pub fn box_spec<S: AsRef<str>>(
    boundary: BoundaryType,
    dim: usize,
    matrix: &[&[S]],
    delta: f64,
    nodes: usize,
    steps: usize,
) -> SystemSpec {
    let domain = DomainSpec::new(boundary, vec![0.0; dim], vec![1.0; dim]).unwrap();
    SystemSpec {
        domain,
        kernel: KernelSpec {
            profile: KernelProfile::Bump,
            delta,
        },
        coupling: CouplingSpec::new(1.0, matrix),
        numerics: Numerics {
            resolution: vec![nodes],
            time_steps: steps,
            ..Numerics::default()
        },
    }
}

/// The K = 1, three-dimensional instance whose quadratic maximum makes
/// `1 / (alpha - h)` integrable.
pub fn degenerate_3d(nodes: usize) -> SystemSpec {
    let a = "-200*(x1 - 0.52)^2 - 200*(x2 - 0.52)^2 - 200*(x3 - 0.52)^2";
    let mut s = box_spec(BoundaryType::Dirichlet, 3, &[&[a]], 0.4, nodes, 64);
    s.numerics.eigen_mesh = 4;
    s.numerics.rank_test_max_dim = 0;
    s.numerics.gap_iterations = 4;
    s
}
