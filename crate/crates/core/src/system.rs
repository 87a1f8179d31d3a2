//! Serializable problem description and numerical settings.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingSpec;
use crate::discretization::{DomainSpec, KernelProfile};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub profile: KernelProfile,
    pub delta: f64,
}

/// Discretisation and solver settings. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Nodes per axis; a single entry applies to every axis.
    pub resolution: Vec<usize>,
    /// RK4 steps per period.
    pub time_steps: usize,
    /// Relative eigen-residual at which the period-map iteration stops.
    pub power_tol: f64,
    pub max_power_iterations: usize,
    /// Iterations of the deflated iteration used for the gap estimate.
    pub gap_iterations: usize,
    /// Successive-iterate tolerance for the resolvent power iteration.
    pub resolvent_tol: f64,
    pub max_resolvent_iterations: usize,
    /// Width at which the root bracket in alpha is accepted.
    pub bracket_tol: f64,
    /// Time samples of the eigenfunction over one period (excluding `t = T`).
    pub eigen_mesh: usize,
    /// Time samples per period for the hypothesis checks.
    pub time_samples: usize,
    /// Largest admitted state dimension `M K`.
    pub max_state_dim: usize,
    /// The dense simplicity test runs up to this state dimension.
    pub rank_test_max_dim: usize,
    /// Existence requires `lambda - max h > margin_factor * grid tolerance`.
    pub margin_factor: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            resolution: vec![32],
            time_steps: 256,
            power_tol: 1e-11,
            max_power_iterations: 20_000,
            gap_iterations: 60,
            resolvent_tol: 1e-12,
            max_resolvent_iterations: 20_000,
            bracket_tol: 1e-11,
            eigen_mesh: 16,
            time_samples: 16,
            max_state_dim: 250_000,
            rank_test_max_dim: 128,
            margin_factor: 2.0,
        }
    }
}

impl Numerics {
    pub fn resolution_for(&self, dim: usize) -> Vec<usize> {
        if self.resolution.len() == 1 {
            vec![self.resolution[0]; dim]
        } else {
            self.resolution.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution.is_empty() || self.resolution.iter().any(|&n| n < 2) {
            return Err(invalid("numerics.resolution", "every entry must be at least 2"));
        }
        if self.time_steps < crate::floquet::MIN_STEPS {
            return Err(invalid(
                "numerics.time_steps",
                format!("must be at least {}", crate::floquet::MIN_STEPS),
            ));
        }
        for (name, v) in [
            ("numerics.power_tol", self.power_tol),
            ("numerics.resolvent_tol", self.resolvent_tol),
            ("numerics.bracket_tol", self.bracket_tol),
            ("numerics.margin_factor", self.margin_factor),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("numerics.max_power_iterations", self.max_power_iterations),
            ("numerics.max_resolvent_iterations", self.max_resolvent_iterations),
            ("numerics.eigen_mesh", self.eigen_mesh),
            ("numerics.time_samples", self.time_samples),
            ("numerics.max_state_dim", self.max_state_dim),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be positive"));
            }
        }
        if self.time_steps % self.eigen_mesh != 0 {
            return Err(invalid(
                "numerics.eigen_mesh",
                format!("{} does not divide time_steps {}", self.eigen_mesh, self.time_steps),
            ));
        }
        Ok(())
    }
}

/// Everything needed to build a discretised system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub domain: DomainSpec,
    pub kernel: KernelSpec,
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub numerics: Numerics,
}

impl SystemSpec {
    /// Stable within one build: hash of the canonical JSON form.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_string(self).expect("spec serializes");
        let mut h = DefaultHasher::new();
        json.hash(&mut h);
        h.finish()
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.numerics.resolution = vec![resolution];
        self
    }

    pub fn with_time_steps(mut self, steps: usize) -> Self {
        self.numerics.time_steps = steps;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.kernel.delta = delta;
        self
    }

    /// Same system with `A` replaced by `A + c I`.
    pub fn shifted(mut self, c: f64) -> Self {
        self.coupling = self.coupling.shifted(c);
        self
    }
}
