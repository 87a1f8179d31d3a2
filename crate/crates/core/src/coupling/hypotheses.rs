use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::field::CouplingField;
use crate::discretization::Grid;

/// Tolerance for sign and support tests on sampled coefficients.
pub const HYPOTHESIS_TOL: f64 = 1e-12;

/// Default number of time samples per period.
pub const DEFAULT_TIME_SAMPLES: usize = 16;

/// Partition enumeration is exhaustive up to this system size.
pub const MAX_ENUMERATION_SIZE: usize = 12;

/// Both irreducibility tests run and are compared up to this size.
pub const MAX_CROSS_CHECK_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWitness {
    pub t: f64,
    pub x: Vec<f64>,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooperativeCheck {
    pub holds: bool,
    /// Smallest sampled off-diagonal entry; `None` when `K = 1`.
    pub min_off_diagonal: Option<f64>,
    pub worst: Option<SampleWitness>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrreducibilityMethod {
    /// `K = 1`: nothing to check.
    Vacuous,
    PartitionEnumeration,
    /// Used alone only above [`MAX_ENUMERATION_SIZE`].
    StrongConnectivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionWitness {
    pub t: f64,
    pub x: Vec<f64>,
    /// 0-based component indices of `S`; the complement is `S'`.
    pub subset: Vec<usize>,
    /// Largest `|a_kj|` over `k in S`, `j in S'` at this sample.
    pub crossing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibleCheck {
    pub holds: bool,
    pub method: IrreducibilityMethod,
    /// Set when the size forced the connectivity fallback.
    pub fallback: bool,
    /// Samples at which the two tests disagreed (cross-checked sizes only).
    pub disagreements: usize,
    /// Samples at which some partition had no crossing entry above tolerance.
    pub flagged_samples: usize,
    pub weakest: Option<PartitionWitness>,
}

/// Outcome of the sample-based hypothesis checks. Each validator fills its
/// own part; [`HypothesisReport::merge`] combines them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub samples_checked: usize,
    pub time_samples: usize,
    pub tolerance: f64,
    pub cooperative: Option<CooperativeCheck>,
    pub irreducible: Option<IrreducibleCheck>,
}

impl HypothesisReport {
    pub fn merge(mut self, other: HypothesisReport) -> Self {
        self.samples_checked = self.samples_checked.max(other.samples_checked);
        self.cooperative = self.cooperative.or(other.cooperative);
        self.irreducible = self.irreducible.or(other.irreducible);
        self
    }

    pub fn is_cooperative(&self) -> bool {
        self.cooperative.as_ref().is_some_and(|c| c.holds)
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible.as_ref().is_some_and(|c| c.holds)
    }

    pub fn passes(&self) -> bool {
        self.is_cooperative() && self.is_irreducible()
    }
}

fn time_points(field: &CouplingField, time_samples: usize) -> Vec<f64> {
    let n = time_samples.max(1);
    (0..n).map(|q| q as f64 * field.period() / n as f64).collect()
}

/// Checks `a_kj(t, x) >= -tol` for `k != j` over time samples x grid nodes.
pub fn validate_cooperative(field: &CouplingField, grid: &Grid, time_samples: usize) -> HypothesisReport {
    let k = field.size();
    let times = time_points(field, time_samples);
    let mut a = vec![0.0; k * k];
    let mut worst: Option<SampleWitness> = None;
    for &t in &times {
        for m in 0..grid.len() {
            let x = grid.node(m);
            field.sample_into(t, x, &mut a);
            for r in 0..k {
                for c in 0..k {
                    let v = a[r * k + c];
                    if r != c && worst.as_ref().is_none_or(|w| v < w.value) {
                        worst = Some(SampleWitness {
                            t,
                            x: x.to_vec(),
                            row: r,
                            col: c,
                            value: v,
                        });
                    }
                }
            }
        }
    }
    let min = worst.as_ref().map(|w| w.value);
    HypothesisReport {
        samples_checked: times.len() * grid.len(),
        time_samples: times.len(),
        tolerance: HYPOTHESIS_TOL,
        cooperative: Some(CooperativeCheck {
            holds: min.is_none_or(|v| v >= -HYPOTHESIS_TOL),
            min_off_diagonal: min,
            worst,
        }),
        irreducible: None,
    }
}

/// Weakest partition at one sample: the subset `S` (bitmask) minimising the
/// largest crossing entry `|a_kj|`, `k in S`, `j notin S`.
pub fn weakest_partition(a: &[f64], k: usize) -> (u32, f64) {
    let full: u32 = (1u32 << k) - 1;
    let mut best = (0u32, f64::INFINITY);
    for s in 1..full {
        let mut crossing = 0.0f64;
        for r in (0..k).filter(|r| s & (1 << r) != 0) {
            for c in (0..k).filter(|c| s & (1 << c) == 0) {
                crossing = crossing.max(a[r * k + c].abs());
            }
        }
        if crossing < best.1 {
            best = (s, crossing);
        }
    }
    best
}

/// Strong connectivity of the graph with an edge `k -> j` wherever
/// `|a_kj| > tol`, `k != j`.
pub fn strongly_connected(a: &[f64], k: usize, tol: f64) -> bool {
    let mut g = DiGraph::<(), ()>::with_capacity(k, k * k);
    let nodes: Vec<_> = (0..k).map(|_| g.add_node(())).collect();
    for r in 0..k {
        for c in 0..k {
            if r != c && a[r * k + c].abs() > tol {
                g.add_edge(nodes[r], nodes[c], ());
            }
        }
    }
    kosaraju_scc(&g).len() == 1
}

/// Checks that every partition of the components is crossed by an entry
/// above tolerance, at every sample.
pub fn validate_irreducible(field: &CouplingField, grid: &Grid, time_samples: usize) -> HypothesisReport {
    let k = field.size();
    let times = time_points(field, time_samples);
    let samples_checked = times.len() * grid.len();
    let report = |irreducible| HypothesisReport {
        samples_checked,
        time_samples: times.len(),
        tolerance: HYPOTHESIS_TOL,
        cooperative: None,
        irreducible: Some(irreducible),
    };
    if k == 1 {
        return report(IrreducibleCheck {
            holds: true,
            method: IrreducibilityMethod::Vacuous,
            fallback: false,
            disagreements: 0,
            flagged_samples: 0,
            weakest: None,
        });
    }
    let enumerate = k <= MAX_ENUMERATION_SIZE;
    let cross_check = k <= MAX_CROSS_CHECK_SIZE;
    let mut a = vec![0.0; k * k];
    let mut flagged = 0;
    let mut disagreements = 0;
    let mut weakest: Option<PartitionWitness> = None;
    for &t in &times {
        for m in 0..grid.len() {
            let x = grid.node(m);
            field.sample_into(t, x, &mut a);
            let ok = if enumerate {
                let (mask, crossing) = weakest_partition(&a, k);
                if weakest.as_ref().is_none_or(|w| crossing < w.crossing) {
                    weakest = Some(PartitionWitness {
                        t,
                        x: x.to_vec(),
                        subset: (0..k).filter(|r| mask & (1 << r) != 0).collect(),
                        crossing,
                    });
                }
                let ok = crossing > HYPOTHESIS_TOL;
                if cross_check && ok != strongly_connected(&a, k, HYPOTHESIS_TOL) {
                    disagreements += 1;
                }
                ok
            } else {
                strongly_connected(&a, k, HYPOTHESIS_TOL)
            };
            if !ok {
                flagged += 1;
            }
        }
    }
    report(IrreducibleCheck {
        holds: flagged == 0 && disagreements == 0,
        method: if enumerate {
            IrreducibilityMethod::PartitionEnumeration
        } else {
            IrreducibilityMethod::StrongConnectivity
        },
        fallback: !enumerate,
        disagreements,
        flagged_samples: flagged,
        weakest,
    })
}
