use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_existence, Verdict};
use crate::discretization::build_grid_axes;
use crate::error::{invalid, Error, Result};
use crate::spectral::{principal_spectrum_point, SemiDiscreteSystem};
use crate::system::SystemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta: f64,
    pub resolution: Vec<usize>,
    /// Set when the row was not computed.
    pub skipped: Option<String>,
    pub lambda: Option<f64>,
    pub max_h: Option<f64>,
    pub margin: Option<f64>,
    pub margin_tol: Option<f64>,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallDeltaCheck {
    /// Rows in the order the deltas were given.
    pub rows: Vec<DeltaRow>,
    /// Margins strictly increase as delta decreases over computed rows.
    pub margins_monotone: bool,
    /// Largest delta from which every smaller computed delta exists.
    pub threshold_delta: Option<f64>,
    /// Every computed row below the first exists-row also exists.
    pub threshold_consistent: bool,
    /// Verdict at the smallest computed delta.
    pub smallest_exists: Option<bool>,
}

fn row(template: &SystemSpec, delta: f64, scale_resolution: bool) -> Result<DeltaRow> {
    let dim = template.domain.dim();
    let base = template.numerics.resolution_for(dim);
    let resolution: Vec<usize> = if scale_resolution {
        let ratio = template.kernel.delta / delta;
        base.iter().map(|&n| ((n as f64 * ratio).ceil() as usize).max(2)).collect()
    } else {
        base
    };
    let mut out = DeltaRow {
        delta,
        resolution: resolution.clone(),
        skipped: None,
        lambda: None,
        max_h: None,
        margin: None,
        margin_tol: None,
        verdict: None,
    };
    let spacing = build_grid_axes(&template.domain, &resolution)?.max_spacing();
    if delta <= spacing {
        out.skipped = Some(format!("kernel radius {delta} does not exceed the grid spacing {spacing:.4}"));
        return Ok(out);
    }
    let mut spec = template.clone().with_delta(delta);
    spec.numerics.resolution = resolution;
    let system = match SemiDiscreteSystem::build(spec) {
        Ok(s) => s,
        Err(e @ (Error::ResourceCap { .. } | Error::KernelTooWide { .. })) => {
            out.skipped = Some(e.to_string());
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    let spectrum = principal_spectrum_point(&system)?;
    let field = system.pointwise()?;
    let tol = system.spec.numerics.margin_factor * system.grid_tolerance()?;
    let check = check_existence(&spectrum, field, tol)?;
    out.lambda = Some(check.lambda_principal);
    out.max_h = Some(check.max_h);
    out.margin = Some(check.margin);
    out.margin_tol = Some(tol);
    out.verdict = Some(check.verdict);
    Ok(out)
}

/// Re-runs the existence check for each kernel radius. With
/// `scale_resolution` the node count grows like `1 / delta`, keeping the
/// kernel support at a fixed number of cells.
pub fn check_small_delta(template: &SystemSpec, deltas: &[f64], scale_resolution: bool) -> Result<SmallDeltaCheck> {
    if deltas.is_empty() {
        return Err(invalid("deltas", "need at least one value"));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(invalid("deltas", format!("must be positive, got {d}")));
    }
    let rows: Vec<DeltaRow> = deltas
        .par_iter()
        .map(|&d| row(template, d, scale_resolution))
        .collect::<Result<_>>()?;
    let mut computed: Vec<&DeltaRow> = rows.iter().filter(|r| r.margin.is_some()).collect();
    computed.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let margins_monotone = computed.windows(2).all(|w| w[1].margin > w[0].margin);
    let first = computed.iter().position(|r| r.verdict == Some(Verdict::Exists));
    let threshold_consistent = first.is_none_or(|i| computed[i..].iter().all(|r| r.verdict == Some(Verdict::Exists)));
    let threshold_delta = first.filter(|_| threshold_consistent).map(|i| computed[i].delta);
    let smallest_exists = computed.last().map(|r| r.verdict == Some(Verdict::Exists));
    Ok(SmallDeltaCheck {
        rows,
        margins_monotone,
        threshold_delta,
        threshold_consistent,
        smallest_exists,
    })
}
