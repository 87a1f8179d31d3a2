//! Existence criteria for the principal eigenvalue, evaluated on computed
//! fields and spectra.
//!
//! The verdict compares the principal spectrum point with `max h`; the
//! remaining checks test sufficient premises and are cross-checked against
//! that verdict.

mod local;
mod report;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::discretization::BoundaryType;
use crate::error::{Error, Result};
use crate::floquet::PointwiseField;
use crate::spectral::SpectrumResult;

pub use local::{
    check_l1_divergence, check_vanishing_condition, l1_divergence_from_samples, vanishing_from_samples,
    DerivativeEstimate, L1DivergenceCheck, PowerFit, VanishingCheck, DERIVATIVE_TOL, DIVERGENCE_SLACK,
};
pub use report::{assemble_report, evaluate_criteria, CriteriaOptions, CriteriaReport, ReportInputs, RouteAgreement};
pub use sweep::{check_small_delta, DeltaRow, SmallDeltaCheck};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Exists,
    NotExistsAtResolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceCheck {
    pub verdict: Verdict,
    pub lambda_principal: f64,
    pub max_h: f64,
    /// `lambda_principal - max_h`.
    pub margin: f64,
    pub margin_tol: f64,
}

impl ExistenceCheck {
    pub fn exists(&self) -> bool {
        self.verdict == Verdict::Exists
    }
}

/// A principal eigenvalue exists iff `lambda - max h > margin_tol`.
pub fn check_existence(spectrum: &SpectrumResult, field: &PointwiseField, margin_tol: f64) -> Result<ExistenceCheck> {
    if spectrum.fingerprint != field.fingerprint {
        return Err(Error::FingerprintMismatch(spectrum.fingerprint, field.fingerprint));
    }
    let margin = spectrum.lambda_principal - field.max_h;
    Ok(ExistenceCheck {
        verdict: if margin > margin_tol {
            Verdict::Exists
        } else {
            Verdict::NotExistsAtResolution
        },
        lambda_principal: spectrum.lambda_principal,
        max_h: field.max_h,
        margin,
        margin_tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationCheck {
    pub covered: bool,
    pub flag: bool,
    /// `max lambda - min lambda` over the nodes.
    pub lhs: f64,
    /// `(eta / eta_tilde) * kernel mass`; absent when not covered.
    pub rhs: Option<f64>,
    pub eta_ratio: f64,
    pub kernel_mass: Option<f64>,
    pub note: Option<String>,
}

/// Compares the oscillation of the pointwise eigenvalues with the
/// normalised kernel mass. Not covered for the Neumann type.
pub fn check_oscillation_bound(field: &PointwiseField, boundary: BoundaryType) -> OscillationCheck {
    let max = field.lambda_field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = field.lambda_field.iter().cloned().fold(f64::INFINITY, f64::min);
    let lhs = max - min;
    let eta_ratio = field.eta / field.eta_tilde;
    let mass = match boundary {
        BoundaryType::Dirichlet => Some(field.kernel_mass.iter().cloned().fold(f64::INFINITY, f64::min)),
        BoundaryType::Periodic => Some(1.0),
        BoundaryType::Neumann => None,
    };
    match mass {
        Some(mass) => {
            let rhs = eta_ratio * mass;
            OscillationCheck {
                covered: true,
                flag: lhs < rhs,
                lhs,
                rhs: Some(rhs),
                eta_ratio,
                kernel_mass: Some(mass),
                note: None,
            }
        }
        None => OscillationCheck {
            covered: false,
            flag: false,
            lhs,
            rhs: None,
            eta_ratio,
            kernel_mass: None,
            note: Some("not covered for the neumann type (open question)".into()),
        },
    }
}
