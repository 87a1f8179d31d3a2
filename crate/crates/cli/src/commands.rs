use std::fs;
use std::path::Path;

use nlpe_core::criteria::evaluate_criteria;
use nlpe_core::spectral::{
    birman_schwinger_eigenvalue, principal_spectrum_point, resolvent_identity_check, BirmanSchwingerReport,
    SemiDiscreteSystem, SpectrumResult,
};
use nlpe_core::{HypothesisReport, SystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::numerical(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn build(spec: SystemSpec) -> Result<SemiDiscreteSystem, CliError> {
    Ok(SemiDiscreteSystem::build(spec)?)
}

/// Cooperativity and irreducibility on the sampled coefficients.
fn validate(system: &SemiDiscreteSystem) -> Result<HypothesisReport, CliError> {
    let report = system.hypotheses();
    if !report.is_cooperative() {
        let worst = report.cooperative.as_ref().and_then(|c| c.worst.clone());
        return Err(CliError::validator(format!(
            "coupling is not cooperative: negative off-diagonal entry at {worst:?}"
        )));
    }
    if !report.is_irreducible() {
        return Err(CliError::validator(
            "coupling is not irreducible at every sampled point; see the weakest partition in the hypothesis report",
        ));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventIdentity {
    pub alpha: f64,
    pub seed: u64,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOutput {
    pub fingerprint: u64,
    pub lambda_principal: f64,
    pub max_h: f64,
    pub min_h: f64,
    pub grid_tolerance: f64,
    pub hypotheses: HypothesisReport,
    pub monodromy: SpectrumResult,
    pub birman_schwinger: Option<BirmanSchwingerReport>,
    /// `alpha* - lambda_monodromy`.
    pub route_difference: Option<f64>,
    pub resolvent_identity: ResolventIdentity,
}

fn eigenfunction_csv(dir: &Path, system: &SemiDiscreteSystem, psi: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(dir.join("eigenfunction.csv"))?;
    let dim = system.grid.dim;
    let mut header = vec!["node".to_string()];
    header.extend((1..=dim).map(|l| format!("x{l}")));
    header.extend(["component".to_string(), "psi".to_string()]);
    w.write_record(&header)?;
    let k = system.size();
    for m in 0..system.nodes() {
        for c in 0..k {
            let mut rec = vec![m.to_string()];
            rec.extend(system.grid.node(m).iter().map(|x| format!("{x:e}")));
            rec.push(c.to_string());
            rec.push(format!("{:e}", psi[m * k + c]));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn spectrum(cfg: &RunConfig, out: &Path, seed: u64) -> Result<SpectrumOutput, CliError> {
    let system = build(cfg.system()?)?;
    let hypotheses = validate(&system)?;
    let field = system.pointwise()?;
    let mono = principal_spectrum_point(&system)?;
    let bs = if cfg.command.birman_schwinger {
        Some(birman_schwinger_eigenvalue(&system, cfg.numerics.bracket_tol)?)
    } else {
        None
    };
    let route_difference = bs.as_ref().and_then(|b| b.alpha_star).map(|a| a - mono.lambda_principal);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..system.nodes()).map(|_| rng.random_range(0.5..1.5)).collect();
    let alpha = mono.lambda_principal.max(field.max_h) + 1.0;
    let resolvent_identity = ResolventIdentity {
        alpha,
        seed,
        max_relative_error: resolvent_identity_check(&system, alpha, &v)?,
    };
    let output = SpectrumOutput {
        fingerprint: system.fingerprint(),
        lambda_principal: mono.lambda_principal,
        max_h: field.max_h,
        min_h: field.min_h,
        grid_tolerance: system.grid_tolerance()?,
        hypotheses,
        birman_schwinger: bs,
        route_difference,
        resolvent_identity,
        monodromy: mono,
    };
    fs::create_dir_all(out)?;
    write_json(out, "spectrum.json", &output)?;
    eigenfunction_csv(out, &system, &output.monodromy.eigenfunction)?;
    Ok(output)
}

pub fn criteria(cfg: &RunConfig, out: &Path) -> Result<nlpe_core::criteria::CriteriaReport, CliError> {
    let system = build(cfg.system()?)?;
    validate(&system)?;
    let report = evaluate_criteria(&system, &cfg.criteria_options())?;
    fs::create_dir_all(out)?;
    write_json(out, "criteria.json", &report)?;
    fs::write(out.join("criteria.txt"), report.to_text())?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    Space,
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub kind: Refinement,
    pub level: usize,
    pub resolution: usize,
    pub time_steps: usize,
    pub lambda: f64,
    /// `|lambda_l - lambda_{l-1}|`.
    pub difference: Option<f64>,
    /// `log2` of the ratio of successive differences.
    pub order: Option<f64>,
}

fn refinement_rows(base: &SystemSpec, kind: Refinement, levels: usize) -> Result<Vec<ConvergenceRow>, CliError> {
    let n0 = base.numerics.resolution[0];
    let s0 = base.numerics.time_steps;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let (n, s) = match kind {
            Refinement::Space => (n0 << level, s0),
            Refinement::Time => (n0, s0 << level),
        };
        let mut spec = base.clone().with_resolution(n).with_time_steps(s);
        // only lambda is reported
        spec.numerics.rank_test_max_dim = 0;
        spec.numerics.gap_iterations = 2;
        let lambda = principal_spectrum_point(&build(spec)?)?.lambda_principal;
        let difference = rows.last().map(|r| (lambda - r.lambda).abs());
        let order = match (rows.last().and_then(|r| r.difference), difference) {
            (Some(prev), Some(d)) if d > 0.0 => Some((prev / d).log2()),
            _ => None,
        };
        rows.push(ConvergenceRow {
            kind,
            level,
            resolution: n,
            time_steps: s,
            lambda,
            difference,
            order,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `-log2 |difference|` against the level; steadier
/// than any single ratio when the kernel edge moves across cells.
pub fn fitted_order(rows: &[ConvergenceRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.difference.filter(|d| *d > 0.0).map(|d| (r.level as f64, d.log2())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub rows: Vec<ConvergenceRow>,
    pub space_order: Option<f64>,
    pub time_order: Option<f64>,
}

pub fn convergence(cfg: &RunConfig, out: &Path, levels: usize) -> Result<ConvergenceSummary, CliError> {
    if levels < 2 {
        return Err(CliError::config("`levels` must be at least 2"));
    }
    let base = cfg.system()?;
    let dim = base.domain.dim();
    let n_top = base.numerics.resolution_for(dim).iter().map(|&n| n << (levels - 1)).product::<usize>();
    let state = n_top * cfg.coupling.matrix.len();
    if state > base.numerics.max_state_dim {
        return Err(CliError::cap(format!(
            "finest level has state dimension {state}, above numerics.max_state_dim = {}",
            base.numerics.max_state_dim
        )));
    }
    validate(&build(base.clone())?)?;
    let space = refinement_rows(&base, Refinement::Space, levels)?;
    let time = refinement_rows(&base, Refinement::Time, levels)?;
    let summary = ConvergenceSummary {
        space_order: fitted_order(&space),
        time_order: fitted_order(&time),
        rows: space.into_iter().chain(time).collect(),
    };
    let rows = &summary.rows;
    fs::create_dir_all(out)?;
    write_json(out, "convergence.json", &summary)?;
    let mut w = csv::Writer::from_path(out.join("convergence.csv"))?;
    w.write_record(["kind", "level", "resolution", "time_steps", "lambda", "difference", "order"])?;
    for r in rows {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        w.write_record([
            match r.kind {
                Refinement::Space => "space".to_string(),
                Refinement::Time => "time".to_string(),
            },
            r.level.to_string(),
            r.resolution.to_string(),
            r.time_steps.to_string(),
            format!("{:e}", r.lambda),
            opt(r.difference),
            opt(r.order),
        ])?;
    }
    w.flush()?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSummary {
    pub fingerprint: u64,
    pub max_h: f64,
    pub min_h: f64,
    pub argmax_h: Vec<f64>,
    pub eta: f64,
    pub eta_tilde: f64,
    pub max_periodicity_defect: f64,
}

pub fn floquet_map(cfg: &RunConfig, out: &Path) -> Result<FloquetSummary, CliError> {
    let system = build(cfg.system()?)?;
    validate(&system)?;
    let field = system.pointwise()?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("floquet_map.csv"))?;
    let dim = system.grid.dim;
    let mut header = vec!["node".to_string()];
    header.extend((1..=dim).map(|l| format!("x{l}")));
    header.extend(["lambda".to_string(), "h".to_string(), "kernel_mass".to_string()]);
    w.write_record(&header)?;
    for m in 0..system.nodes() {
        let mut rec = vec![m.to_string()];
        rec.extend(system.grid.node(m).iter().map(|x| format!("{x:e}")));
        rec.push(format!("{:e}", field.lambda_field[m]));
        rec.push(format!("{:e}", field.h_field[m]));
        rec.push(format!("{:e}", field.kernel_mass[m]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let summary = FloquetSummary {
        fingerprint: system.fingerprint(),
        max_h: field.max_h,
        min_h: field.min_h,
        argmax_h: system.grid.node(field.argmax_h).to_vec(),
        eta: field.eta,
        eta_tilde: field.eta_tilde,
        max_periodicity_defect: field.max_periodicity_defect,
    };
    write_json(out, "floquet_map.json", &summary)?;
    Ok(summary)
}
