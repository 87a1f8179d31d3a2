mod common;

use common::{degenerate_3d, interval_spec};
use nlpe_core::criteria::*;
use nlpe_core::spectral::*;
use nlpe_core::{BoundaryType, Error};

fn periodic_constant() -> SemiDiscreteSystem {
    SemiDiscreteSystem::build(interval_spec(BoundaryType::Periodic, &[&["-0.5", "1"], &["1", "-0.5"]], 0.3, 24, 64))
        .unwrap()
}

fn inputs<'a>(
    sys: &'a SemiDiscreteSystem,
    spectrum: &'a SpectrumResult,
    existence: ExistenceCheck,
) -> ReportInputs<'a> {
    let field = sys.pointwise().unwrap();
    let domain = &sys.spec.domain;
    ReportInputs {
        spectrum,
        field,
        boundary: domain.boundary,
        dim: 1,
        grid_tolerance: sys.grid_tolerance().unwrap(),
        existence,
        l1_divergence: check_l1_divergence(field, &sys.grid, domain).unwrap(),
        oscillation_bound: check_oscillation_bound(field, domain.boundary),
        vanishing_condition: check_vanishing_condition(field, &sys.grid, domain).unwrap(),
        small_delta: None,
        hypotheses: None,
        route_agreement: None,
        notes: Vec::new(),
    }
}

#[test]
fn threshold_logic_on_synthetic_lambda() {
    let sys = periodic_constant();
    let field = sys.pointwise().unwrap();
    let mut spectrum = principal_spectrum_point(&sys).unwrap();
    let tol = 0.01;
    spectrum.lambda_principal = field.max_h + 10.0 * tol;
    let c = check_existence(&spectrum, field, tol).unwrap();
    assert!(c.exists());
    assert_eq!(c.margin, spectrum.lambda_principal - field.max_h);
    spectrum.lambda_principal = field.max_h + 0.5 * tol;
    assert_eq!(check_existence(&spectrum, field, tol).unwrap().verdict, Verdict::NotExistsAtResolution);
}

#[test]
fn mismatched_fingerprints_are_rejected() {
    let sys = periodic_constant();
    let other = SemiDiscreteSystem::build(sys.spec.clone().shifted(0.1)).unwrap();
    let spectrum = principal_spectrum_point(&other).unwrap();
    let field = sys.pointwise().unwrap();
    assert!(matches!(check_existence(&spectrum, field, 0.1), Err(Error::FingerprintMismatch(..))));

    let own = principal_spectrum_point(&sys).unwrap();
    let existence = check_existence(&own, field, 0.1).unwrap();
    assert!(matches!(
        assemble_report(inputs(&sys, &spectrum, existence)),
        Err(Error::FingerprintMismatch(..))
    ));
}

#[test]
fn constant_instance_satisfies_every_premise() {
    let sys = periodic_constant();
    let report = evaluate_criteria(&sys, &CriteriaOptions::default()).unwrap();
    assert!(report.existence.exists());
    assert!((report.lambda_principal - 0.5).abs() < 1e-9);
    assert!(report.l1_divergence.flag);
    assert!(report.oscillation_bound.flag);
    assert!(report.vanishing_condition.flag);
    assert_eq!(report.existence.margin, report.lambda_principal - report.max_h);
    let text = report.to_text();
    assert!(text.contains("existence         exists"));
    let json = serde_json::to_string(&report).unwrap();
    let back: CriteriaReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
}

#[test]
fn premise_without_verdict_is_a_soundness_error() {
    let sys = periodic_constant();
    let spectrum = principal_spectrum_point(&sys).unwrap();
    let existence = check_existence(&spectrum, sys.pointwise().unwrap(), 1e3).unwrap();
    assert!(!existence.exists());
    assert!(matches!(assemble_report(inputs(&sys, &spectrum, existence)), Err(Error::Soundness(_))));
}

#[test]
fn tampered_margin_is_a_soundness_error() {
    let sys = periodic_constant();
    let spectrum = principal_spectrum_point(&sys).unwrap();
    let mut existence = check_existence(&spectrum, sys.pointwise().unwrap(), 0.1).unwrap();
    existence.margin += 1e-12;
    assert!(matches!(assemble_report(inputs(&sys, &spectrum, existence)), Err(Error::Soundness(_))));
}

#[test]
fn neumann_swap_margin_is_the_smallest_kernel_mass() {
    let sys =
        SemiDiscreteSystem::build(interval_spec(BoundaryType::Neumann, &[&["0", "1"], &["1", "0"]], 0.3, 32, 64)).unwrap();
    let report = evaluate_criteria(&sys, &CriteriaOptions::default()).unwrap();
    let field = sys.pointwise().unwrap();
    let min_mass = field.kernel_mass.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(report.existence.exists());
    assert!((report.existence.margin - min_mass).abs() < 1e-8);
    assert!(!report.oscillation_bound.covered);
    assert!(report.notes.iter().any(|n| n.contains("not covered")));
}

#[test]
fn oscillation_of_two_exceeds_unit_mass() {
    let sys = SemiDiscreteSystem::build(interval_spec(BoundaryType::Periodic, &[&["sin_x1"]], 0.3, 32, 64)).unwrap();
    let o = check_oscillation_bound(sys.pointwise().unwrap(), BoundaryType::Periodic);
    assert!((o.lhs - 2.0).abs() < 0.02, "{o:?}");
    assert!((o.eta_ratio - 1.0).abs() < 1e-12);
    assert!(!o.flag);
}

/// Grows the perturbation until the oscillation premise fails; while it holds
/// the verdict must be exists.
#[test]
fn oscillation_premise_flips_under_growing_perturbation() {
    let mut flipped = None;
    for eps in [0.05, 0.1, 0.2, 0.4, 0.8, 1.6] {
        let a = format!("{eps}*sin_x1");
        let spec = interval_spec(BoundaryType::Periodic, &[&[a.as_str(), "1"], &["1", "0"]], 0.3, 24, 64);
        let report = evaluate_criteria(&SemiDiscreteSystem::build(spec).unwrap(), &CriteriaOptions::default()).unwrap();
        let o = &report.oscillation_bound;
        if o.flag {
            assert!(report.existence.exists());
            assert!(o.lhs < o.rhs.unwrap());
        } else if flipped.is_none() {
            flipped = Some(eps);
        }
    }
    let eps = flipped.expect("premise never failed");
    assert!(eps > 0.05);
}

#[test]
fn degenerate_instance_report() {
    let sys = SemiDiscreteSystem::build(degenerate_3d(6)).unwrap();
    let report = evaluate_criteria(&sys, &CriteriaOptions::default()).unwrap();
    assert_eq!(report.existence.verdict, Verdict::NotExistsAtResolution);
    assert!(!report.l1_divergence.flag);
    assert!(!report.vanishing_condition.flag);
    assert!(report.l1_divergence.exponent.unwrap() < 2.5);
}

#[test]
fn small_delta_sweep_with_scaled_resolution() {
    let mut spec = interval_spec(BoundaryType::Dirichlet, &[&["-4*(x1 - 0.5)^2"]], 0.4, 16, 64);
    spec.numerics.rank_test_max_dim = 0;
    let sweep = check_small_delta(&spec, &[0.4, 0.2, 0.1, 0.05], true).unwrap();
    assert!(sweep.margins_monotone);
    assert_eq!(sweep.smallest_exists, Some(true));
    assert!(sweep.threshold_consistent);
    let res: Vec<usize> = sweep.rows.iter().map(|r| r.resolution[0]).collect();
    assert_eq!(res, vec![16, 32, 64, 128]);
}

#[test]
fn sweep_guard_skips_unresolved_kernels() {
    let mut spec = interval_spec(BoundaryType::Neumann, &[&["0", "1"], &["1", "0"]], 0.3, 16, 64);
    spec.numerics.rank_test_max_dim = 0;
    let sweep = check_small_delta(&spec, &[0.3, 0.15, 0.05], false).unwrap();
    assert!(sweep.rows[2].skipped.as_ref().unwrap().contains("grid spacing"));
    assert!(sweep.rows[..2].iter().all(|r| r.skipped.is_none() && r.margin.is_some()));
    assert_eq!(sweep.rows[0].verdict, Some(Verdict::Exists));
    assert!(check_small_delta(&spec, &[], false).is_err());
    assert!(check_small_delta(&spec, &[-0.1], false).is_err());
}

#[test]
fn constant_coupling_exists_at_every_delta() {
    let mut spec = interval_spec(BoundaryType::Dirichlet, &[&["0", "1"], &["1", "0"]], 0.4, 16, 64);
    spec.numerics.rank_test_max_dim = 0;
    let sweep = check_small_delta(&spec, &[0.4, 0.3, 0.2], true).unwrap();
    assert!(sweep.rows.iter().all(|r| r.verdict == Some(Verdict::Exists)));
    assert_eq!(sweep.threshold_delta, Some(0.4));
}

#[test]
fn route_agreement_is_reported() {
    let sys = periodic_constant();
    let report = evaluate_criteria(
        &sys,
        &CriteriaOptions {
            birman_schwinger: true,
            ..Default::default()
        },
    )
    .unwrap();
    let r = report.route_agreement.unwrap();
    assert!(r.difference.unwrap().abs() < 1e-8);
    assert!((r.radius_at_monodromy.unwrap() - 1.0).abs() < 1e-6);
}
