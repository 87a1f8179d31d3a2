use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::system::SemiDiscreteSystem;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, normalize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    Monodromy,
    BirmanSchwinger,
}

/// Dense surrogate for algebraic simplicity of the dominant eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplicityCheck {
    /// `|l . psi| / (|l| |psi|)` for the left and right Perron vectors; zero
    /// would indicate a generalized eigenvector.
    pub left_right_overlap: f64,
    /// Second smallest singular value of `Phi - r I`, relative to `r`; zero
    /// would indicate a second independent eigenvector.
    pub second_singular_value: f64,
    pub simple: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub method: SpectralMethod,
    pub lambda_principal: f64,
    /// `e^{lambda T}`, the spectral radius of the period map.
    pub radius: f64,
    /// `psi(0, .)`, node-major, unit Euclidean norm.
    pub eigenfunction: Vec<f64>,
    pub trajectory_times: Vec<f64>,
    /// `psi(t_q, .)` at `trajectory_times`.
    pub trajectory: Vec<Vec<f64>>,
    /// `|Phi(T, 0) psi - r psi| / |psi|`.
    pub residual: f64,
    /// `(|mu_1| - |mu_2|) / |mu_1|` from a deflated iteration.
    pub gap: Option<f64>,
    pub second_modulus: Option<f64>,
    pub min_component: f64,
    /// Smallest over largest entry of `psi(0, .)`.
    pub min_max_ratio: f64,
    pub iterations: usize,
    pub simplicity: Option<SimplicityCheck>,
    pub fingerprint: u64,
}

/// Extends `psi(0)` over one period as `e^{-lambda t} Phi(t, 0) psi(0)`.
fn eigen_trajectory(system: &SemiDiscreteSystem, psi: &[f64], lambda: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mesh = system.spec.numerics.eigen_mesh;
    let every = system.steps() / mesh;
    let dt = system.dt();
    let mut times = vec![0.0];
    let mut traj = vec![psi.to_vec()];
    let mut u = psi.to_vec();
    system.evolve(&mut u, 0.0, dt, system.steps(), |s, state| {
        if (s + 1) % every == 0 {
            let t = (s + 1) as f64 * dt;
            let scale = (-lambda * t).exp();
            times.push(t);
            traj.push(state.iter().map(|v| v * scale).collect());
        }
    })?;
    Ok((times, traj))
}

pub(crate) fn component_stats(psi: &[f64]) -> (f64, f64) {
    let min = psi.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, min / max)
}

/// Deterministic start vector with no special structure.
fn scrambled(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 7919 + 13) % 101) as f64 - 50.0).collect()
}

fn deflated_second_modulus(system: &SemiDiscreteSystem, psi: &[f64]) -> Result<f64> {
    let iterations = system.spec.numerics.gap_iterations.max(2);
    let mut v = scrambled(psi.len());
    let c = dot(&v, psi);
    v.iter_mut().zip(psi).for_each(|(x, p)| *x -= c * p);
    normalize(&mut v);
    let mut logs = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut y = system.period_map(&v)?;
        let c = dot(&y, psi);
        y.iter_mut().zip(psi).for_each(|(x, p)| *x -= c * p);
        let g = normalize(&mut y);
        if g == 0.0 {
            return Ok(0.0);
        }
        logs.push(g.ln());
        v = y;
    }
    let tail = &logs[iterations / 2..];
    Ok((tail.iter().sum::<f64>() / tail.len() as f64).exp())
}

fn simplicity_check(system: &SemiDiscreteSystem, psi: &[f64], r: f64) -> Result<SimplicityCheck> {
    let phi = system.period_map_dense()?;
    let n = phi.nrows();
    let shifted = &phi - DMatrix::identity(n, n) * r;
    let mut sv: Vec<f64> = shifted.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(f64::total_cmp);
    let second = sv.get(1).copied().unwrap_or(f64::INFINITY) / r;
    // left vector by inverse iteration on the transpose, slightly off the root
    let lu = (phi.transpose() - DMatrix::identity(n, n) * (r * (1.0 + 1e-9))).lu();
    let mut l = DVector::from_element(n, 1.0);
    for _ in 0..4 {
        l = lu.solve(&l).ok_or_else(|| Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
            oscillation: f64::NAN,
        })?;
        l /= l.norm();
    }
    let overlap = dot(l.as_slice(), psi).abs() / norm(psi);
    Ok(SimplicityCheck {
        left_right_overlap: overlap,
        second_singular_value: second,
        simple: overlap > 1e-8 && second > 1e-8,
    })
}

/// Power iteration on the period map from the all-ones vector.
pub fn principal_spectrum_point(system: &SemiDiscreteSystem) -> Result<SpectrumResult> {
    let num = &system.spec.numerics;
    let n = system.state_dim();
    let period = system.period();
    let mut psi = vec![1.0 / (n as f64).sqrt(); n];
    let mut residual = f64::INFINITY;
    let mut prev_residual;
    let mut r;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut y = system.period_map(&psi)?;
        r = dot(&psi, &y);
        prev_residual = residual;
        residual = y.iter().zip(&psi).map(|(a, b)| (a - r * b).powi(2)).sum::<f64>().sqrt();
        if residual <= num.power_tol * r.abs() {
            break;
        }
        if iterations >= num.max_power_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual: residual / r.abs(),
                oscillation: residual / prev_residual,
            });
        }
        if y.iter().sum::<f64>() < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        if normalize(&mut y) == 0.0 {
            return Err(Error::NoConvergence {
                iterations,
                residual: f64::NAN,
                oscillation: f64::NAN,
            });
        }
        psi = y;
    }
    let lambda = r.ln() / period;
    let second = deflated_second_modulus(system, &psi)?;
    let (times, trajectory) = eigen_trajectory(system, &psi, lambda)?;
    let simplicity = if n <= num.rank_test_max_dim {
        Some(simplicity_check(system, &psi, r)?)
    } else {
        None
    };
    let (min_component, min_max_ratio) = component_stats(&psi);
    Ok(SpectrumResult {
        method: SpectralMethod::Monodromy,
        lambda_principal: lambda,
        radius: r,
        eigenfunction: psi,
        trajectory_times: times,
        trajectory,
        residual,
        gap: Some((r - second) / r),
        second_modulus: Some(second),
        min_component,
        min_max_ratio,
        iterations,
        simplicity,
        fingerprint: system.fingerprint(),
    })
}

/// `|Phi(T, 0) psi - e^{lambda T} psi| / |psi|`.
pub(crate) fn eigen_residual(system: &SemiDiscreteSystem, psi: &[f64], lambda: f64) -> Result<f64> {
    let y = system.period_map(psi)?;
    let r = (lambda * system.period()).exp();
    Ok(y.iter().zip(psi).map(|(a, b)| (a - r * b).powi(2)).sum::<f64>().sqrt() / norm(psi))
}

pub(crate) fn build_result(
    system: &SemiDiscreteSystem,
    method: SpectralMethod,
    lambda: f64,
    psi: Vec<f64>,
    times: Vec<f64>,
    trajectory: Vec<Vec<f64>>,
    iterations: usize,
) -> Result<SpectrumResult> {
    let residual = eigen_residual(system, &psi, lambda)?;
    let (min_component, min_max_ratio) = component_stats(&psi);
    Ok(SpectrumResult {
        method,
        lambda_principal: lambda,
        radius: (lambda * system.period()).exp(),
        eigenfunction: psi,
        trajectory_times: times,
        trajectory,
        residual,
        gap: None,
        second_modulus: None,
        min_component,
        min_max_ratio,
        iterations,
        simplicity: None,
        fingerprint: system.fingerprint(),
    })
}
