use serde::{Deserialize, Serialize};

use super::system::SemiDiscreteSystem;
use crate::error::{invalid, Error, Result};

/// Ordering slack tolerated at checkpoints.
pub const ORDERING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub checkpoints: Vec<f64>,
    /// Smallest entry of `u_plus(t) - u_minus(t)` over all checkpoints.
    pub min_difference: f64,
    /// For nonnegative nonzero `u_minus`: every entry of `u_minus(t)` is
    /// positive at every checkpoint.
    pub strictly_positive: Option<bool>,
    /// Smallest entry of `u_minus(T)` when the horizon reaches one period.
    pub min_at_period: Option<f64>,
}

fn snapshots(system: &SemiDiscreteSystem, u0: &[f64], steps: usize, every: usize) -> Result<Vec<Vec<f64>>> {
    let mut u = u0.to_vec();
    let mut out = Vec::new();
    system.evolve(&mut u, 0.0, system.dt(), steps, |s, state| {
        if (s + 1) % every == 0 {
            out.push(state.to_vec());
        }
    })?;
    Ok(out)
}

/// Evolves an ordered pair over `[0, horizon]` and checks that the order is
/// kept at `checkpoints` equally spaced times.
pub fn comparison_check(
    system: &SemiDiscreteSystem,
    u_minus: &[f64],
    u_plus: &[f64],
    horizon: f64,
    checkpoints: usize,
) -> Result<ComparisonReport> {
    let n = system.state_dim();
    if u_minus.len() != n || u_plus.len() != n {
        return Err(Error::DimensionMismatch(format!("states must have {n} entries")));
    }
    if u_minus.iter().zip(u_plus).any(|(a, b)| a > b) {
        return Err(invalid("u_minus", "must not exceed u_plus"));
    }
    let dt = system.dt();
    let steps = (horizon / dt).round() as usize;
    if checkpoints == 0 || steps == 0 || steps % checkpoints != 0 || (steps as f64 * dt - horizon).abs() > 1e-9 * horizon {
        return Err(invalid(
            "checkpoints",
            format!("{checkpoints} checkpoints do not divide {steps} steps of the horizon {horizon}"),
        ));
    }
    let every = steps / checkpoints;
    let lower = snapshots(system, u_minus, steps, every)?;
    let upper = snapshots(system, u_plus, steps, every)?;
    let times: Vec<f64> = (1..=checkpoints).map(|c| (c * every) as f64 * dt).collect();
    let mut min_difference = f64::INFINITY;
    for (c, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
        for (i, (a, b)) in lo.iter().zip(hi).enumerate() {
            let d = b - a;
            min_difference = min_difference.min(d);
            if d < -ORDERING_TOL {
                return Err(Error::OrderingViolation {
                    time: times[c],
                    index: i,
                    value: d,
                });
            }
        }
    }
    let nonnegative = u_minus.iter().all(|&v| v >= 0.0) && u_minus.iter().any(|&v| v > 0.0);
    let strictly_positive = nonnegative.then(|| lower.iter().all(|s| s.iter().all(|&v| v > 0.0)));
    let period_steps = system.steps();
    let min_at_period = (steps >= period_steps && period_steps % every == 0)
        .then(|| lower[period_steps / every - 1].iter().cloned().fold(f64::INFINITY, f64::min));
    Ok(ComparisonReport {
        checkpoints: times,
        min_difference,
        strictly_positive,
        min_at_period,
    })
}
