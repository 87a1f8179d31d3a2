//! Random cooperative, irreducible test systems.

use rand::Rng;

use crate::coupling::CouplingSpec;
use crate::discretization::{BoundaryType, DomainSpec, KernelProfile};
use crate::system::{KernelSpec, Numerics, SystemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOptions {
    pub sizes: Vec<usize>,
    pub boundaries: Vec<BoundaryType>,
    /// Inclusive range of nodes on the unit interval.
    pub resolution: (usize, usize),
    pub delta: (f64, f64),
    pub time_steps: usize,
}

impl Default for InstanceOptions {
    fn default() -> Self {
        InstanceOptions {
            sizes: vec![1, 2, 3],
            boundaries: vec![BoundaryType::Dirichlet, BoundaryType::Neumann, BoundaryType::Periodic],
            resolution: (24, 32),
            delta: (0.2, 0.35),
            time_steps: Numerics::default().time_steps,
        }
    }
}

fn coef<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    // two decimals keep the expressions readable
    (rng.random_range(-scale..scale) * 100.0).round() / 100.0
}

fn diagonal<R: Rng>(rng: &mut R, boundary: BoundaryType) -> String {
    let (c0, c1, c2, c3) = (coef(rng, 1.0), coef(rng, 1.0), coef(rng, 1.0), coef(rng, 0.5));
    let time = if rng.random_bool(0.5) { "sin_t" } else { "cos_t" };
    match boundary {
        BoundaryType::Periodic => format!("{c0} + {c1}*sin_x1 + {c2}*cos_x1 + {c3}*{time}"),
        _ => format!("{c0} + {c1}*x1 + {c2}*x1^2 + {c3}*{time}"),
    }
}

fn off_diagonal<R: Rng>(rng: &mut R, boundary: BoundaryType, required: bool) -> String {
    if !required && rng.random_bool(0.5) {
        return "0".into();
    }
    let b = (rng.random_range(0.2f64..1.0) * 100.0).round() / 100.0;
    match rng.random_range(0..3) {
        0 => format!("{b}"),
        1 => format!("{b}*(1 + 0.5*sin_t)"),
        _ => match boundary {
            BoundaryType::Periodic => format!("{b}*(1.5 + cos_x1)"),
            _ => format!("{b}*(0.5 + x1^2)"),
        },
    }
}

/// A one-dimensional instance on the unit interval (or unit cell). The
/// off-diagonal entries contain a positive cycle, so the coupling is
/// cooperative and irreducible at every point.
pub fn random_instance<R: Rng>(rng: &mut R, opts: &InstanceOptions) -> SystemSpec {
    let k = opts.sizes[rng.random_range(0..opts.sizes.len())];
    let boundary = opts.boundaries[rng.random_range(0..opts.boundaries.len())];
    let n = rng.random_range(opts.resolution.0..=opts.resolution.1);
    let delta = (rng.random_range(opts.delta.0..opts.delta.1) * 1000.0).round() / 1000.0;
    let matrix: Vec<Vec<String>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        diagonal(rng, boundary)
                    } else {
                        off_diagonal(rng, boundary, j == (i + 1) % k)
                    }
                })
                .collect()
        })
        .collect();
    let rows: Vec<&[String]> = matrix.iter().map(Vec::as_slice).collect();
    let domain = match boundary {
        BoundaryType::Periodic => DomainSpec::periodic(vec![1.0]).expect("unit cell"),
        b => DomainSpec::unit_interval(b),
    };
    SystemSpec {
        domain,
        kernel: KernelSpec {
            profile: KernelProfile::Bump,
            delta,
        },
        coupling: CouplingSpec::new(1.0, &rows),
        numerics: Numerics {
            resolution: vec![n],
            time_steps: opts.time_steps,
            ..Numerics::default()
        },
    }
}
