use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    check_existence, check_l1_divergence, check_oscillation_bound, check_small_delta, check_vanishing_condition,
    ExistenceCheck, L1DivergenceCheck, OscillationCheck, SmallDeltaCheck, VanishingCheck, Verdict,
};
use crate::coupling::HypothesisReport;
use crate::discretization::BoundaryType;
use crate::error::{Error, Result};
use crate::floquet::PointwiseField;
use crate::spectral::{
    birman_schwinger_eigenvalue, birman_schwinger_radius, principal_spectrum_point, SemiDiscreteSystem,
    SpectrumResult,
};

/// Monodromy result against the Birman-Schwinger root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteAgreement {
    pub lambda_monodromy: f64,
    pub alpha_star: Option<f64>,
    pub difference: Option<f64>,
    /// `r(lambda_monodromy)`, which should be 1.
    pub radius_at_monodromy: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub fingerprint: u64,
    pub boundary: BoundaryType,
    pub dim: usize,
    pub size: usize,
    pub max_h: f64,
    pub min_h: f64,
    pub lambda_principal: f64,
    pub grid_tolerance: f64,
    pub existence: ExistenceCheck,
    pub l1_divergence: L1DivergenceCheck,
    pub oscillation_bound: OscillationCheck,
    pub small_delta: Option<SmallDeltaCheck>,
    pub vanishing_condition: VanishingCheck,
    pub spectral_gap: Option<f64>,
    pub hypotheses: Option<HypothesisReport>,
    pub route_agreement: Option<RouteAgreement>,
    pub notes: Vec<String>,
}

pub struct ReportInputs<'a> {
    pub spectrum: &'a SpectrumResult,
    pub field: &'a PointwiseField,
    pub boundary: BoundaryType,
    pub dim: usize,
    pub grid_tolerance: f64,
    pub existence: ExistenceCheck,
    pub l1_divergence: L1DivergenceCheck,
    pub oscillation_bound: OscillationCheck,
    pub vanishing_condition: VanishingCheck,
    pub small_delta: Option<SmallDeltaCheck>,
    pub hypotheses: Option<HypothesisReport>,
    pub route_agreement: Option<RouteAgreement>,
    pub notes: Vec<String>,
}

/// Checks the component results against each other and builds the report.
/// A sufficient premise that holds without an exists verdict is an error.
pub fn assemble_report(inputs: ReportInputs<'_>) -> Result<CriteriaReport> {
    let spectrum = inputs.spectrum;
    let field = inputs.field;
    let existence = inputs.existence.clone();
    if spectrum.fingerprint != field.fingerprint {
        return Err(Error::FingerprintMismatch(spectrum.fingerprint, field.fingerprint));
    }
    if existence.lambda_principal != spectrum.lambda_principal || existence.max_h != field.max_h {
        return Err(Error::Soundness("existence check was computed from other inputs".into()));
    }
    if existence.margin != spectrum.lambda_principal - field.max_h {
        return Err(Error::Soundness(format!(
            "margin {} differs from lambda - max h = {}",
            existence.margin,
            spectrum.lambda_principal - field.max_h
        )));
    }
    if existence.exists() != (existence.margin > existence.margin_tol) {
        return Err(Error::Soundness("verdict disagrees with the margin threshold".into()));
    }
    let premises = [
        ("l1 divergence", inputs.l1_divergence.flag),
        ("oscillation bound", inputs.oscillation_bound.flag),
        ("vanishing condition", inputs.vanishing_condition.flag),
    ];
    if !existence.exists() {
        if let Some((name, _)) = premises.iter().find(|p| p.1) {
            return Err(Error::Soundness(format!(
                "the {name} premise holds but lambda - max h = {:.3e} does not exceed the tolerance {:.3e}; \
                 refine the grid",
                existence.margin, existence.margin_tol
            )));
        }
    }

    let mut notes = inputs.notes;
    notes.push(format!(
        "verdicts hold at this resolution; grid tolerance {:.3e}, margin tolerance {:.3e}",
        inputs.grid_tolerance, existence.margin_tol
    ));
    notes.push(format!(
        "[min h, max h] = [{:.6}, {:.6}] is sampled at the nodes only",
        field.min_h, field.max_h
    ));
    if inputs.vanishing_condition.flag && !inputs.l1_divergence.flag {
        notes.push("vanishing condition holds but the l1 divergence fit does not confirm it".into());
    }
    if let Some(n) = &inputs.oscillation_bound.note {
        notes.push(format!("oscillation bound: {n}"));
    }
    if let Some(h) = &inputs.hypotheses {
        if !h.passes() {
            notes.push("cooperativity or irreducibility failed on the sampled coefficients".into());
        }
    }
    Ok(CriteriaReport {
        fingerprint: spectrum.fingerprint,
        boundary: inputs.boundary,
        dim: inputs.dim,
        size: field.size,
        max_h: field.max_h,
        min_h: field.min_h,
        lambda_principal: spectrum.lambda_principal,
        grid_tolerance: inputs.grid_tolerance,
        existence,
        l1_divergence: inputs.l1_divergence,
        oscillation_bound: inputs.oscillation_bound,
        small_delta: inputs.small_delta,
        vanishing_condition: inputs.vanishing_condition,
        spectral_gap: spectrum.gap,
        hypotheses: inputs.hypotheses,
        route_agreement: inputs.route_agreement,
        notes,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaOptions {
    /// Kernel radii for the small-delta sweep; empty skips it.
    pub deltas: Vec<f64>,
    pub scale_resolution: bool,
    /// Also run the Birman-Schwinger route and compare.
    pub birman_schwinger: bool,
}

fn route_agreement(system: &SemiDiscreteSystem, spectrum: &SpectrumResult) -> Result<RouteAgreement> {
    let report = birman_schwinger_eigenvalue(system, system.spec.numerics.bracket_tol)?;
    let lambda = spectrum.lambda_principal;
    let max_h = report.max_h;
    let radius_at_monodromy = if lambda > max_h {
        Some(birman_schwinger_radius(system, lambda)?.radius)
    } else {
        None
    };
    Ok(RouteAgreement {
        lambda_monodromy: lambda,
        alpha_star: report.alpha_star,
        difference: report.alpha_star.map(|a| a - lambda),
        radius_at_monodromy,
        note: report.note,
    })
}

/// Runs every check on one system and assembles the report.
pub fn evaluate_criteria(system: &SemiDiscreteSystem, options: &CriteriaOptions) -> Result<CriteriaReport> {
    let hypotheses = system.hypotheses();
    let spectrum = principal_spectrum_point(system)?;
    let field = system.pointwise()?;
    let eps = system.grid_tolerance()?;
    let existence = check_existence(&spectrum, field, system.spec.numerics.margin_factor * eps)?;
    let domain = &system.spec.domain;
    let mut notes = Vec::new();
    let l1_divergence = match check_l1_divergence(field, &system.grid, domain) {
        Err(Error::InsufficientNodes(msg)) => {
            notes.push(format!("l1 divergence: {msg}; increase the resolution"));
            L1DivergenceCheck {
                flag: false,
                resolved: false,
                dim: domain.dim(),
                exponent: None,
                residual: None,
                fits: Vec::new(),
                x0: None,
                alpha: None,
                note: Some(msg),
            }
        }
        other => other?,
    };
    let vanishing_condition = match check_vanishing_condition(field, &system.grid, domain) {
        Err(Error::InsufficientNodes(msg) | Error::StencilOutside(msg)) => VanishingCheck {
            flag: false,
            dim: domain.dim(),
            vanishing_through: 0,
            derivatives: Vec::new(),
            x0: None,
            fit_residual: None,
            note: Some(format!("unresolved: {msg}")),
        },
        other => other?,
    };
    let oscillation_bound = check_oscillation_bound(field, domain.boundary);
    let small_delta = if options.deltas.is_empty() {
        None
    } else {
        Some(check_small_delta(&system.spec, &options.deltas, options.scale_resolution)?)
    };
    let route = if options.birman_schwinger {
        Some(route_agreement(system, &spectrum)?)
    } else {
        None
    };
    if existence.verdict == Verdict::NotExistsAtResolution {
        notes.push(format!(
            "no principal eigenvalue resolved: the eigenvector's smallest entry is {:.3e}",
            spectrum.min_component
        ));
    }
    assemble_report(ReportInputs {
        spectrum: &spectrum,
        field,
        boundary: domain.boundary,
        dim: domain.dim(),
        grid_tolerance: eps,
        existence,
        l1_divergence,
        oscillation_bound,
        vanishing_condition,
        small_delta,
        hypotheses: Some(hypotheses),
        route_agreement: route,
        notes,
    })
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

impl CriteriaReport {
    /// Plain-text summary.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let e = &self.existence;
        let _ = writeln!(s, "system {:016x}: {} boundary, N = {}, K = {}", self.fingerprint, self.boundary.name(), self.dim, self.size);
        let _ = writeln!(s, "lambda_principal  {:.10}", self.lambda_principal);
        let _ = writeln!(s, "h band            [{:.10}, {:.10}]", self.min_h, self.max_h);
        let _ = writeln!(
            s,
            "existence         {}  (margin {:.6e}, tolerance {:.6e})",
            match e.verdict {
                Verdict::Exists => "exists",
                Verdict::NotExistsAtResolution => "not_exists_at_resolution",
            },
            e.margin,
            e.margin_tol
        );
        let l1 = &self.l1_divergence;
        let _ = writeln!(
            s,
            "l1 divergence     {}  (p = {}, residual {}, resolved {})",
            yes(l1.flag),
            opt(l1.exponent),
            opt(l1.residual),
            yes(l1.resolved)
        );
        let o = &self.oscillation_bound;
        if o.covered {
            let _ = writeln!(s, "oscillation bound {}  ({:.6e} < {})", yes(o.flag), o.lhs, opt(o.rhs));
        } else {
            let _ = writeln!(s, "oscillation bound not covered  (lhs {:.6e})", o.lhs);
        }
        let v = &self.vanishing_condition;
        let _ = writeln!(
            s,
            "vanishing         {}  (derivatives vanish through order {})",
            yes(v.flag),
            v.vanishing_through
        );
        if let Some(g) = self.spectral_gap {
            let _ = writeln!(s, "spectral gap      {g:.6e}");
        }
        if let Some(r) = &self.route_agreement {
            let _ = writeln!(
                s,
                "birman-schwinger  alpha* = {}, difference {}, r(lambda) = {}",
                opt(r.alpha_star),
                opt(r.difference),
                opt(r.radius_at_monodromy)
            );
        }
        if let Some(d) = &self.small_delta {
            let _ = writeln!(s, "small delta sweep (monotone margins: {})", yes(d.margins_monotone));
            let _ = writeln!(s, "  {:>10} {:>10} {:>14} {:>14} {:>14}  verdict", "delta", "nodes", "lambda", "max h", "margin");
            for r in &d.rows {
                let nodes: usize = r.resolution.iter().product();
                match &r.skipped {
                    Some(why) => {
                        let _ = writeln!(s, "  {:>10.4} {:>10} skipped: {why}", r.delta, nodes);
                    }
                    None => {
                        let _ = writeln!(
                            s,
                            "  {:>10.4} {:>10} {:>14.8} {:>14.8} {:>14.6e}  {}",
                            r.delta,
                            nodes,
                            r.lambda.unwrap_or(f64::NAN),
                            r.max_h.unwrap_or(f64::NAN),
                            r.margin.unwrap_or(f64::NAN),
                            if r.verdict == Some(Verdict::Exists) { "exists" } else { "not_exists_at_resolution" }
                        );
                    }
                }
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}
