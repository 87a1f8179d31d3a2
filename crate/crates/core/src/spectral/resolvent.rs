use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::monodromy::{build_result, SpectralMethod, SpectrumResult};
use super::system::SemiDiscreteSystem;
use crate::error::{Error, Result};
use crate::floquet::{rk4_step, Rk4Scratch};
use crate::linalg::{distance, normalize};

/// Doublings of `alpha - max h` tried before giving up on an upper bracket.
const MAX_DOUBLINGS: usize = 60;
const MAX_ROOT_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventProbe {
    pub alpha: f64,
    /// Spectral radius of `w -> K (alpha + d/dt - A)^{-1} w`.
    pub radius: f64,
    pub iterations: usize,
    /// Dissipativity shift applied inside the periodic solves.
    pub shift_m: f64,
}

/// The periodic resolvent `(alpha + d/dt - d - A)^{-1}` on the time lattice
/// `t_j = j T / S`, `j = 0..S`, acting on node-major functions
/// `w[(m * S + j) * K + k]`.
pub struct PeriodicResolvent<'a> {
    system: &'a SemiDiscreteSystem,
    pub alpha: f64,
    pub shift_m: f64,
    /// `(I - Y_m)^{-1}` per node, row-major, `Y_m` the fundamental matrix over one period.
    inverses: Vec<Vec<f64>>,
}

/// Largest Gershgorin bound of the symmetric part of `A` over the lattice.
fn dissipativity_shift(system: &SemiDiscreteSystem) -> f64 {
    let k = system.size();
    let halves = 2 * system.steps() + 1;
    let mut bound = 0.0f64;
    for m in 0..system.nodes() {
        let lattice = system.lattice(m);
        let count = if lattice.is_constant() { 1 } else { halves };
        for h in 0..count {
            let a = lattice.at(h);
            for i in 0..k {
                let mut row = a[i * k + i];
                for j in (0..k).filter(|&j| j != i) {
                    row += (0.5 * (a[i * k + j] + a[j * k + i])).abs();
                }
                bound = bound.max(row);
            }
        }
    }
    bound
}

impl<'a> PeriodicResolvent<'a> {
    pub fn new(system: &'a SemiDiscreteSystem, alpha: f64) -> Result<Self> {
        let max_h = system.pointwise()?.max_h;
        if !(alpha > max_h) {
            return Err(Error::AlphaBelowBand { alpha, max_h });
        }
        let shift_m = dissipativity_shift(system);
        let k = system.size();
        let s = system.steps();
        let dt = system.dt();
        let alpha_shifted = alpha - shift_m;
        let inverses = (0..system.nodes())
            .into_par_iter()
            .map(|m| {
                let lattice = system.lattice(m);
                let rate = system.operator.diagonal_part[m] - shift_m - alpha_shifted;
                let mut scratch = Rk4Scratch::new(k);
                let mut y = DMatrix::zeros(k, k);
                for c in 0..k {
                    let mut v = vec![0.0; k];
                    v[c] = 1.0;
                    for j in 0..s {
                        rk4_step([lattice.at(2 * j), lattice.at(2 * j + 1), lattice.at(2 * j + 2)], rate, dt, &mut v, None, &mut scratch);
                    }
                    for r in 0..k {
                        y[(r, c)] = v[r];
                    }
                }
                let inv = (DMatrix::identity(k, k) - y).try_inverse().ok_or_else(|| Error::PeriodicSolve {
                    node: m,
                    reason: "I - Y(T) is singular".into(),
                })?;
                if inv.iter().any(|v| !v.is_finite()) {
                    return Err(Error::PeriodicSolve {
                        node: m,
                        reason: "non-finite inverse".into(),
                    });
                }
                Ok(inv.transpose().as_slice().to_vec())
            })
            .collect::<Result<_>>()?;
        Ok(PeriodicResolvent {
            system,
            alpha,
            shift_m,
            inverses,
        })
    }

    pub fn len(&self) -> usize {
        self.system.nodes() * self.system.steps() * self.system.size()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Solves `v' = (A + d - alpha) v + w` for the `T`-periodic `v`, node by node.
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        let sys = self.system;
        let k = sys.size();
        let s = sys.steps();
        let dt = sys.dt();
        let alpha_shifted = self.alpha - self.shift_m;
        let block = s * k;
        let node = |(m, (vout, win)): (usize, (&mut [f64], &[f64]))| {
            let lattice = sys.lattice(m);
            let rate = sys.operator.diagonal_part[m] - self.shift_m - alpha_shifted;
            let at = |j: usize| &win[(j % s) * k..(j % s) * k + k];
            // forcing at half steps by periodic cubic interpolation
            let mut mid = vec![0.0; block];
            for j in 0..s {
                let (a, b, c, d) = (at(j + s - 1), at(j), at(j + 1), at(j + 2));
                for i in 0..k {
                    mid[j * k + i] = (-a[i] + 9.0 * b[i] + 9.0 * c[i] - d[i]) / 16.0;
                }
            }
            let mut scratch = Rk4Scratch::new(k);
            let mut y = vec![0.0; k];
            for j in 0..s {
                let force = [at(j), &mid[j * k..j * k + k], at(j + 1)];
                rk4_step([lattice.at(2 * j), lattice.at(2 * j + 1), lattice.at(2 * j + 2)], rate, dt, &mut y, Some(force), &mut scratch);
            }
            let inv = &self.inverses[m];
            let mut v0 = vec![0.0; k];
            crate::linalg::matvec(inv, &y, &mut v0, k);
            y.copy_from_slice(&v0);
            for j in 0..s {
                vout[j * k..j * k + k].copy_from_slice(&y);
                let force = [at(j), &mid[j * k..j * k + k], at(j + 1)];
                rk4_step([lattice.at(2 * j), lattice.at(2 * j + 1), lattice.at(2 * j + 2)], rate, dt, &mut y, Some(force), &mut scratch);
            }
        };
        out.par_chunks_mut(block)
            .zip(w.par_chunks(block))
            .enumerate()
            .for_each(node);
    }

    /// `K R w`: the resolvent followed by the integral part of the operator.
    pub fn apply_birman_schwinger(&self, w: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        self.apply(w, scratch);
        let block = self.system.steps() * self.system.size();
        self.system.operator.apply_blocks(scratch, out, block, false);
    }
}

/// Power iteration for the spectral radius, optionally warm-started.
fn radius_iteration(res: &PeriodicResolvent, start: Option<&[f64]>) -> Result<(ResolventProbe, Vec<f64>)> {
    let num = &res.system.spec.numerics;
    let n = res.len();
    let mut w = match start {
        Some(s) => s.to_vec(),
        None => vec![1.0; n],
    };
    normalize(&mut w);
    let mut scratch = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut dist = f64::INFINITY;
    let mut prev_dist = f64::INFINITY;
    let mut radius = 0.0;
    let mut iterations = 0;
    while dist >= num.resolvent_tol {
        if iterations == num.max_resolvent_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual: dist,
                oscillation: dist / prev_dist,
            });
        }
        iterations += 1;
        res.apply_birman_schwinger(&w, &mut scratch, &mut y);
        radius = normalize(&mut y);
        if radius == 0.0 || !radius.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                residual: f64::NAN,
                oscillation: f64::NAN,
            });
        }
        prev_dist = dist;
        dist = distance(&y, &w);
        std::mem::swap(&mut w, &mut y);
    }
    Ok((
        ResolventProbe {
            alpha: res.alpha,
            radius,
            iterations,
            shift_m: res.shift_m,
        },
        w,
    ))
}

/// `r(K (alpha + d/dt - A)^{-1})` for `alpha > max h`.
pub fn birman_schwinger_radius(system: &SemiDiscreteSystem, alpha: f64) -> Result<ResolventProbe> {
    let res = PeriodicResolvent::new(system, alpha)?;
    Ok(radius_iteration(&res, None)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirmanSchwingerReport {
    pub exists: bool,
    pub alpha_star: Option<f64>,
    pub spectrum: Option<SpectrumResult>,
    pub max_h: f64,
    /// Smallest `alpha - max h` examined before declaring nonexistence.
    pub epsilon_floor: f64,
    pub shift_m: f64,
    /// Every `(alpha, r(alpha))` evaluated, in order.
    pub probes: Vec<ResolventProbe>,
    pub note: String,
}

struct Prober<'a> {
    system: &'a SemiDiscreteSystem,
    max_h: f64,
    warm: Option<Vec<f64>>,
    probes: Vec<ResolventProbe>,
}

impl Prober<'_> {
    /// `ln r` at `alpha = max h + offset`.
    fn log_radius(&mut self, offset: f64) -> Result<f64> {
        let res = PeriodicResolvent::new(self.system, self.max_h + offset)?;
        let (probe, w) = radius_iteration(&res, self.warm.as_deref())?;
        self.warm = Some(w);
        let r = probe.radius;
        self.probes.push(probe);
        Ok(r.ln())
    }

    fn check_monotone(&self) -> Result<()> {
        let mut sorted: Vec<&ResolventProbe> = self.probes.iter().collect();
        sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        for pair in sorted.windows(2) {
            if pair[1].radius > pair[0].radius * (1.0 + 1e-9) {
                return Err(Error::Bracket(format!(
                    "r(alpha) increased from {:.12e} at alpha = {:.12e} to {:.12e} at alpha = {:.12e}",
                    pair[0].radius, pair[0].alpha, pair[1].radius, pair[1].alpha
                )));
            }
        }
        Ok(())
    }
}

/// Locates `alpha*` with `r(alpha*) = 1` above `max h`, or reports that no
/// crossing exists down to `max h + epsilon_floor`.
pub fn birman_schwinger_eigenvalue(system: &SemiDiscreteSystem, bracket_tol: f64) -> Result<BirmanSchwingerReport> {
    let max_h = system.pointwise()?.max_h;
    let floor = 1e-6 * (1.0 + max_h.abs());
    let mut p = Prober {
        system,
        max_h,
        warm: None,
        probes: Vec::new(),
    };
    // upper end: r < 1
    let mut hi = 1.0;
    let mut g_hi = p.log_radius(hi)?;
    let mut doublings = 0;
    while g_hi >= 0.0 {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Bracket(format!("r(alpha) >= 1 up to alpha = max h + {hi:e}")));
        }
        hi *= 2.0;
        g_hi = p.log_radius(hi)?;
    }
    // descend toward the band until r > 1
    let (mut lo, g_lo);
    loop {
        let next = hi / 2.0;
        if next < floor {
            p.check_monotone()?;
            let shift_m = p.probes.last().map_or(0.0, |q| q.shift_m);
            return Ok(BirmanSchwingerReport {
                exists: false,
                alpha_star: None,
                spectrum: None,
                max_h,
                epsilon_floor: floor,
                shift_m,
                probes: p.probes,
                note: format!(
                    "r(alpha) <= 1 down to alpha = max h + {floor:.3e}; principal spectrum point approximated by max h at this resolution"
                ),
            });
        }
        let g = p.log_radius(next)?;
        if g > 0.0 {
            lo = next;
            g_lo = g;
            break;
        }
        hi = next;
        g_hi = g;
        if g == 0.0 {
            lo = next;
            g_lo = g;
            break;
        }
    }
    // Illinois variant of regula falsi on ln r
    let mut best = if g_lo.abs() < g_hi.abs() { lo } else { hi };
    let (mut fa, mut fb) = (g_lo, g_hi);
    let mut side = 0i8;
    let mut iterations = 0;
    while hi - lo > bracket_tol && fa != 0.0 && fb != 0.0 {
        iterations += 1;
        if iterations > MAX_ROOT_ITERATIONS {
            return Err(Error::Bracket(format!("no convergence in [{lo:e}, {hi:e}] above max h")));
        }
        let mut c = (lo * fb - hi * fa) / (fb - fa);
        if !(c > lo && c < hi) {
            c = 0.5 * (lo + hi);
        }
        let fc = p.log_radius(c)?;
        best = c;
        if fc == 0.0 {
            break;
        }
        if fc > 0.0 {
            lo = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            hi = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    p.check_monotone()?;

    let alpha = max_h + best;
    let res = PeriodicResolvent::new(system, alpha)?;
    let (probe, w) = radius_iteration(&res, p.warm.as_deref())?;
    let mut v = vec![0.0; res.len()];
    res.apply(&w, &mut v);
    let (psi, times, trajectory) = trajectory_from_periodic(system, &v);
    let result = build_result(
        system,
        SpectralMethod::BirmanSchwinger,
        alpha,
        psi,
        times,
        trajectory,
        probe.iterations,
    )?;
    let shift_m = probe.shift_m;
    p.probes.push(probe);
    Ok(BirmanSchwingerReport {
        exists: true,
        alpha_star: Some(alpha),
        spectrum: Some(result),
        max_h,
        epsilon_floor: floor,
        shift_m,
        probes: p.probes,
        note: String::new(),
    })
}

/// Reorders a node-major periodic function into time samples, normalised so
/// that `|psi(0)| = 1`.
fn trajectory_from_periodic(system: &SemiDiscreteSystem, v: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let k = system.size();
    let s = system.steps();
    let mesh = system.spec.numerics.eigen_mesh;
    let every = s / mesh;
    let sample = |j: usize| -> Vec<f64> {
        let j = j % s;
        (0..system.nodes())
            .flat_map(|m| v[(m * s + j) * k..(m * s + j) * k + k].iter().copied())
            .collect()
    };
    let mut psi = sample(0);
    let sign = if psi.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    psi.iter_mut().for_each(|x| *x *= sign);
    let scale = normalize(&mut psi);
    let mut times = Vec::with_capacity(mesh + 1);
    let mut trajectory = Vec::with_capacity(mesh + 1);
    for q in 0..=mesh {
        times.push(q as f64 * system.dt() * every as f64);
        trajectory.push(sample(q * every).iter().map(|x| sign * x / scale).collect());
    }
    (psi, times, trajectory)
}

/// Applies the numerical resolvent to `phi v` and compares with the closed
/// form `phi v / (alpha - h)`; returns the max error relative to the largest
/// closed-form value.
pub fn resolvent_identity_check(system: &SemiDiscreteSystem, alpha: f64, v: &[f64]) -> Result<f64> {
    if v.len() != system.nodes() {
        return Err(Error::DimensionMismatch(format!(
            "scalar field has {} values, grid has {} nodes",
            v.len(),
            system.nodes()
        )));
    }
    let pf = system.pointwise()?;
    let res = PeriodicResolvent::new(system, alpha)?;
    let k = system.size();
    let s = system.steps();
    let mut w = vec![0.0; res.len()];
    let mut exact = vec![0.0; res.len()];
    for m in 0..system.nodes() {
        let denom = alpha - pf.h_field[m];
        for j in 0..s {
            let phi = pf.phi(m, j);
            for i in 0..k {
                let idx = (m * s + j) * k + i;
                w[idx] = phi[i] * v[m];
                exact[idx] = w[idx] / denom;
            }
        }
    }
    let mut out = vec![0.0; res.len()];
    res.apply(&w, &mut out);
    let scale = exact.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let err = out.iter().zip(&exact).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
    Ok(if scale == 0.0 { err } else { err / scale })
}
