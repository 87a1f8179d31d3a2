//! Acceptance suite: one PASS or FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the log.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use nlpe_cli::commands;
use nlpe_cli::RunConfig;
use nlpe_core::criteria::{check_existence, evaluate_criteria, CriteriaOptions, CriteriaReport, Verdict};
use nlpe_core::instances::{random_instance, InstanceOptions};
use nlpe_core::spectral::*;
use nlpe_core::{BoundaryType, CouplingSpec, DomainSpec, KernelProfile, KernelSpec, Numerics, SystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20261015;
const SUITE: usize = 20;

/// Criteria that are known not to be met by this implementation. Empty.
const UNATTAINED: &[usize] = &[];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn build(spec: SystemSpec) -> SemiDiscreteSystem {
    SemiDiscreteSystem::build(spec).expect("system builds")
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&config_path(name)).expect("config loads")
}

fn suite() -> Vec<SystemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let opts = InstanceOptions::default();
    (0..SUITE).map(|_| random_instance(&mut rng, &opts)).collect()
}

struct SuiteRun {
    report: Result<CriteriaReport, String>,
}

fn run_suite(specs: &[SystemSpec]) -> Vec<SuiteRun> {
    let options = CriteriaOptions {
        birman_schwinger: true,
        ..Default::default()
    };
    specs
        .iter()
        .map(|spec| SuiteRun {
            report: evaluate_criteria(&build(spec.clone()), &options).map_err(|e| e.to_string()),
        })
        .collect()
}

fn neumann_constant() -> Outcome {
    let start = Instant::now();
    let sys = build(load("neumann_constant").system().unwrap());
    let mono = principal_spectrum_point(&sys).unwrap();
    let bs = birman_schwinger_eigenvalue(&sys, sys.spec.numerics.bracket_tol).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let alpha = bs.alpha_star.unwrap_or(f64::NAN);
    let psi = &mono.eigenfunction;
    let max = psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = psi.iter().cloned().fold(f64::INFINITY, f64::min);
    let deviation = (max - min) / max;
    let pass = (mono.lambda_principal - 1.0).abs() < 1e-6
        && (alpha - 1.0).abs() < 1e-6
        && deviation < 1e-6
        && elapsed < 5.0
        && sys.nodes() == 32;
    outcome(
        pass,
        format!(
            "monodromy {:.10}, birman-schwinger {alpha:.10}, eigenfunction spread {deviation:.1e}, {elapsed:.2} s",
            mono.lambda_principal
        ),
    )
}

fn resolvent_identity(specs: &[SystemSpec]) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst: f64 = 0.0;
    for spec in specs.iter().take(10) {
        let sys = build(spec.clone());
        let max_h = sys.pointwise().unwrap().max_h;
        let alpha = max_h + rng.random_range(0.1..2.0);
        let v: Vec<f64> = (0..sys.nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.max(resolvent_identity_check(&sys, alpha, &v).unwrap());
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-6 && elapsed < 60.0,
        format!("10 instances, max relative error {worst:.2e}, {elapsed:.2} s"),
    )
}

fn route_agreement(runs: &[SuiteRun]) -> Outcome {
    let mut compared = 0;
    let mut worst_alpha: f64 = 0.0;
    let mut worst_radius: f64 = 0.0;
    let mut errors = 0;
    for run in runs {
        let Ok(report) = &run.report else {
            errors += 1;
            continue;
        };
        let r = report.route_agreement.as_ref().unwrap();
        if let Some(d) = r.difference {
            compared += 1;
            worst_alpha = worst_alpha.max(d.abs());
            worst_radius = worst_radius.max((r.radius_at_monodromy.unwrap_or(f64::NAN) - 1.0).abs());
        }
    }
    outcome(
        errors == 0 && compared > 0 && worst_alpha < 1e-4 && worst_radius < 1e-3,
        format!(
            "{compared}/{} brackets succeeded, max |alpha* - lambda| {worst_alpha:.2e}, max |r(lambda) - 1| {worst_radius:.2e}",
            runs.len()
        ),
    )
}

fn shift_equivariance(specs: &[SystemSpec]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let (mut worst_mono, mut worst_bs): (f64, f64) = (0.0, 0.0);
    let mut missing = 0;
    for spec in specs.iter().take(20) {
        let c = rng.random_range(-1.0..1.0);
        let base = build(spec.clone());
        let moved = build(spec.clone().shifted(c));
        let l0 = principal_spectrum_point(&base).unwrap().lambda_principal;
        let l1 = principal_spectrum_point(&moved).unwrap().lambda_principal;
        worst_mono = worst_mono.max((l1 - l0 - c).abs());
        let tol = base.spec.numerics.bracket_tol;
        let a0 = birman_schwinger_eigenvalue(&base, tol).unwrap().alpha_star;
        let a1 = birman_schwinger_eigenvalue(&moved, tol).unwrap().alpha_star;
        match (a0, a1) {
            (Some(a0), Some(a1)) => worst_bs = worst_bs.max((a1 - a0 - c).abs()),
            _ => missing += 1,
        }
    }
    outcome(
        worst_mono < 1e-8 && worst_bs < 1e-8 && missing == 0,
        format!("20 pairs, monodromy {worst_mono:.2e}, birman-schwinger {worst_bs:.2e}"),
    )
}

fn soundness(runs: &[SuiteRun]) -> Outcome {
    let mut exceptions = Vec::new();
    let mut premises = 0;
    for (i, run) in runs.iter().enumerate() {
        match &run.report {
            Err(e) => exceptions.push(format!("instance {i}: {e}")),
            Ok(r) => {
                let e = &r.existence;
                if e.exists() != (e.margin > e.margin_tol) {
                    exceptions.push(format!("instance {i}: verdict disagrees with margin"));
                }
                let premise = r.l1_divergence.flag || r.oscillation_bound.flag || r.vanishing_condition.flag;
                if premise {
                    premises += 1;
                    if !e.exists() {
                        exceptions.push(format!("instance {i}: premise without exists"));
                    }
                }
            }
        }
    }
    outcome(
        exceptions.is_empty(),
        format!(
            "{} instances, {premises} with a premise, {} exceptions {:?}",
            runs.len(),
            exceptions.len(),
            exceptions
        ),
    )
}

fn cube_spec(dim: usize, nodes: usize) -> SystemSpec {
    let a = (1..=dim)
        .map(|l| format!("-200*(x{l} - 0.52)^2"))
        .collect::<Vec<_>>()
        .join(" ");
    SystemSpec {
        domain: DomainSpec::new(BoundaryType::Dirichlet, vec![0.0; dim], vec![1.0; dim]).unwrap(),
        kernel: KernelSpec {
            profile: KernelProfile::Bump,
            delta: 0.4,
        },
        coupling: CouplingSpec::new(1.0, &[&[a.as_str()]]),
        numerics: Numerics {
            resolution: vec![nodes],
            time_steps: 64,
            eigen_mesh: 4,
            rank_test_max_dim: 0,
            gap_iterations: 4,
            ..Numerics::default()
        },
    }
}

struct Level {
    nodes: usize,
    margin: f64,
    eps: f64,
    exists: bool,
    min_component: f64,
}

fn level(dim: usize, nodes: usize) -> Level {
    let sys = build(cube_spec(dim, nodes));
    let spectrum = principal_spectrum_point(&sys).unwrap();
    let eps = sys.grid_tolerance().unwrap();
    let e = check_existence(&spectrum, sys.pointwise().unwrap(), sys.spec.numerics.margin_factor * eps).unwrap();
    Level {
        nodes,
        margin: e.margin,
        eps,
        exists: e.verdict == Verdict::Exists,
        min_component: spectrum.min_component,
    }
}

fn nonexistence_surrogate() -> Outcome {
    let cube: Vec<Level> = [6, 12].into_iter().map(|n| level(3, n)).collect();
    let line: Vec<Level> = [64, 128].into_iter().map(|n| level(1, n)).collect();
    let small = cube.iter().all(|l| l.margin < 5.0 * l.eps);
    let drop = cube[0].min_component / cube[1].min_component;
    let stable = line.iter().all(|l| l.exists && l.margin > 0.0)
        && (line[1].margin - line[0].margin).abs() <= 0.1 * line[0].margin;
    let fmt = |v: &[Level]| {
        v.iter()
            .map(|l| format!("n={} margin/eps={:.2} min={:.2e}", l.nodes, l.margin / l.eps, l.min_component))
            .collect::<Vec<_>>()
            .join(", ")
    };
    outcome(
        small && drop >= 2.0 && stable,
        format!(
            "N=3 [{}] drop {drop:.2}x; N=1 margins {:.4} -> {:.4}",
            fmt(&cube),
            line[0].margin,
            line[1].margin
        ),
    )
}

fn simplicity(runs: &[SuiteRun]) -> Outcome {
    let mut checked = 0;
    let mut smallest = f64::INFINITY;
    for run in runs {
        let Ok(r) = &run.report else { continue };
        if r.hypotheses.as_ref().is_some_and(|h| h.passes()) && r.existence.exists() {
            checked += 1;
            smallest = smallest.min(r.spectral_gap.unwrap_or(0.0));
        }
    }
    outcome(
        checked >= 20 && smallest > 1e-3,
        format!("{checked} eligible instances, smallest relative gap {smallest:.3e}"),
    )
}

fn comparison() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut lines = Vec::new();
    let mut pass = true;
    for boundary in [BoundaryType::Dirichlet, BoundaryType::Neumann, BoundaryType::Periodic] {
        let opts = InstanceOptions {
            boundaries: vec![boundary],
            ..Default::default()
        };
        let mut worst = f64::INFINITY;
        let mut positive = true;
        for _ in 0..50 {
            let sys = build(random_instance(&mut rng, &opts));
            let n = sys.state_dim();
            let lo: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..1.0) })
                .collect();
            let mut lo = lo;
            lo[rng.random_range(0..n)] = 1.0;
            let hi: Vec<f64> = lo.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
            let rep = comparison_check(&sys, &lo, &hi, 2.0 * sys.period(), 16).unwrap();
            worst = worst.min(rep.min_difference);
            positive &= rep.min_at_period.is_some_and(|m| m > 0.0);
        }
        pass &= worst >= -1e-10 && positive;
        lines.push(format!("{} min difference {worst:.2e} positive {positive}", boundary.name()));
    }
    outcome(pass, format!("50 pairs each: {}", lines.join("; ")))
}

fn dense_oracle_regression() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let s = commands::spectrum(&load("dirichlet_k2_16"), tmp.path(), 0).unwrap();
    let fixture = load_fixture();
    let dl = (s.lambda_principal - fixture.lambda).abs();
    let dpsi = max_abs_diff(&s.monodromy.eigenfunction, &fixture.eigenfunction);
    outcome(
        dl < 1e-8 && dpsi < 1e-8,
        format!("|lambda - oracle| {dl:.2e}, max eigenfunction difference {dpsi:.2e}"),
    )
}

fn delta_sweep() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let r = commands::criteria(&load("delta_sweep"), tmp.path()).unwrap();
    let Some(sweep) = r.small_delta else {
        return outcome(false, "no sweep in the report".into());
    };
    let margins: Vec<String> = sweep
        .rows
        .iter()
        .map(|row| format!("{}:{}", row.delta, row.margin.map_or("skipped".into(), |m| format!("{m:.4}"))))
        .collect();
    outcome(
        sweep.margins_monotone && sweep.smallest_exists == Some(true),
        format!("margins {}", margins.join(" ")),
    )
}

fn convergence() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("smooth_k1");
    let c = commands::convergence(&cfg, tmp.path(), cfg.command.levels).unwrap();
    let (space, time) = (c.space_order.unwrap_or(f64::NAN), c.time_order.unwrap_or(f64::NAN));
    let pairwise = |kind: commands::Refinement| {
        c.rows
            .iter()
            .filter(|r| r.kind == kind)
            .filter_map(|r| r.order)
            .map(|o| format!("{o:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        space >= 2.0 && time >= 3.5,
        format!(
            "fitted space order {space:.2} (pairwise {}), time order {time:.2} (pairwise {})",
            pairwise(commands::Refinement::Space),
            pairwise(commands::Refinement::Time)
        ),
    )
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; listing asks for no work
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let specs = suite();
    let runs = run_suite(&specs);
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "constant Neumann coupling", Box::new(neumann_constant)),
        (2, "resolvent identity", Box::new(|| resolvent_identity(&specs))),
        (3, "route agreement", Box::new(|| route_agreement(&runs))),
        (4, "shift equivariance", Box::new(|| shift_equivariance(&specs))),
        (5, "existence soundness", Box::new(|| soundness(&runs))),
        (6, "nonexistence surrogate", Box::new(nonexistence_surrogate)),
        (7, "simplicity gap", Box::new(|| simplicity(&runs))),
        (8, "comparison principle", Box::new(comparison)),
        (9, "dense oracle regression", Box::new(dense_oracle_regression)),
        (10, "small-delta sweep", Box::new(delta_sweep)),
        (11, "convergence orders", Box::new(convergence)),
    ];
    let mut unexpected = 0;
    for (n, name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {n}: {name}: {} [{:.1} s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass && !UNATTAINED.contains(&n) {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
