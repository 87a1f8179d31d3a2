//! Pointwise periodic eigenproblems `phi' = (A(t, x) - lambda) phi` at each
//! grid node: monodromy matrices, Perron pairs, periodic eigenfunctions and
//! the local field `h(x)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingField;
use crate::discretization::{Grid, NonlocalOperatorMatrix};
use crate::error::{invalid, Error, Result};
use crate::linalg::{distance, matvec, norm, normalize};

pub const DEFAULT_STEPS: usize = 256;
pub const MIN_STEPS: usize = 16;
/// Stopping tolerance on the distance between successive power iterates.
pub const POWER_TOL: f64 = 1e-12;
pub const MAX_POWER_ITERATIONS: usize = 20_000;
pub const PERIODICITY_TOL: f64 = 1e-6;
/// The iteration matrix is squared this often to speed up slow ratios.
const SQUARING_INTERVAL: usize = 32;

/// `A(t, x)` for one node on the half-step lattice `t = j T / (2 steps)`.
#[derive(Debug, Clone)]
pub struct CoefficientLattice {
    pub size: usize,
    pub steps: usize,
    pub period: f64,
    data: Vec<f64>,
    constant: bool,
}

impl CoefficientLattice {
    pub fn new(field: &CouplingField, x: &[f64], steps: usize) -> Self {
        let size = field.size();
        let period = field.period();
        let constant = !field.is_time_dependent();
        let data = if constant {
            field.sample_row_major(0.0, x)
        } else {
            let mut data = vec![0.0; (2 * steps + 1) * size * size];
            for (j, chunk) in data.chunks_mut(size * size).enumerate() {
                field.sample_into(j as f64 * period / (2 * steps) as f64, x, chunk);
            }
            data
        };
        CoefficientLattice {
            size,
            steps,
            period,
            data,
            constant,
        }
    }

    pub fn dt(&self) -> f64 {
        self.period / self.steps as f64
    }

    /// Row-major `A` at half-step index `half`.
    #[inline]
    pub fn at(&self, half: usize) -> &[f64] {
        if self.constant {
            &self.data
        } else {
            let kk = self.size * self.size;
            &self.data[half * kk..(half + 1) * kk]
        }
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }
}

/// Scratch space for [`rk4_step`].
#[derive(Debug, Clone)]
pub struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    pub fn new(size: usize) -> Self {
        Rk4Scratch {
            k1: vec![0.0; size],
            k2: vec![0.0; size],
            k3: vec![0.0; size],
            k4: vec![0.0; size],
            tmp: vec![0.0; size],
        }
    }
}

#[inline]
fn rhs(a: &[f64], shift: f64, y: &[f64], force: Option<&[f64]>, out: &mut [f64], k: usize) {
    matvec(a, y, out, k);
    for i in 0..k {
        out[i] += shift * y[i] + force.map_or(0.0, |f| f[i]);
    }
}

/// One classical RK4 step of `y' = (A(t) + shift) y + f(t)` where
/// `a = [A(t), A(t + dt/2), A(t + dt)]` and `force` likewise.
pub fn rk4_step(a: [&[f64]; 3], shift: f64, dt: f64, y: &mut [f64], force: Option<[&[f64]; 3]>, s: &mut Rk4Scratch) {
    let k = y.len();
    let f = |i: usize| force.map(|f| f[i]);
    rhs(a[0], shift, y, f(0), &mut s.k1, k);
    for i in 0..k {
        s.tmp[i] = y[i] + 0.5 * dt * s.k1[i];
    }
    rhs(a[1], shift, &s.tmp, f(1), &mut s.k2, k);
    for i in 0..k {
        s.tmp[i] = y[i] + 0.5 * dt * s.k2[i];
    }
    rhs(a[1], shift, &s.tmp, f(1), &mut s.k3, k);
    for i in 0..k {
        s.tmp[i] = y[i] + dt * s.k3[i];
    }
    rhs(a[2], shift, &s.tmp, f(2), &mut s.k4, k);
    for i in 0..k {
        y[i] += dt / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
    }
}

/// Fundamental matrix `U(T; x)` of `U' = A(t, x) U`, `U(0) = I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyMatrix {
    pub u: DMatrix<f64>,
    pub x: Vec<f64>,
    pub steps: usize,
    /// Max-norm difference between the final step taken once and as two half steps.
    pub residual: f64,
}

fn monodromy_on_lattice(field: &CouplingField, lattice: &CoefficientLattice, x: &[f64]) -> Result<MonodromyMatrix> {
    let k = lattice.size;
    let steps = lattice.steps;
    let dt = lattice.dt();
    let mut s = Rk4Scratch::new(k);
    let mut u = DMatrix::zeros(k, k);
    let mut residual = 0.0f64;
    // coefficients at quarter points of the last step, for the residual
    let t_last = (steps - 1) as f64 * dt;
    let quarter: Vec<Vec<f64>> = (1..=3)
        .step_by(2)
        .map(|q| field.sample_row_major(t_last + q as f64 * dt / 4.0, x))
        .collect();
    for c in 0..k {
        let mut y = vec![0.0; k];
        y[c] = 1.0;
        let mut before_last = y.clone();
        for j in 0..steps {
            if j == steps - 1 {
                before_last.copy_from_slice(&y);
            }
            rk4_step([lattice.at(2 * j), lattice.at(2 * j + 1), lattice.at(2 * j + 2)], 0.0, dt, &mut y, None, &mut s);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    node: 0,
                    time: (j + 1) as f64 * dt,
                });
            }
        }
        let mut z = before_last;
        let mid = lattice.at(2 * steps - 1);
        rk4_step([lattice.at(2 * steps - 2), &quarter[0], mid], 0.0, dt / 2.0, &mut z, None, &mut s);
        rk4_step([mid, &quarter[1], lattice.at(2 * steps)], 0.0, dt / 2.0, &mut z, None, &mut s);
        residual = residual.max(distance_inf(&y, &z));
        for r in 0..k {
            u[(r, c)] = y[r];
        }
    }
    Ok(MonodromyMatrix {
        u,
        x: x.to_vec(),
        steps,
        residual,
    })
}

fn distance_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// RK4 integration of the matrix ODE over one period.
pub fn integrate_monodromy(field: &CouplingField, x: &[f64], steps: usize) -> Result<MonodromyMatrix> {
    if steps < MIN_STEPS {
        return Err(invalid("steps", format!("need at least {MIN_STEPS}, got {steps}")));
    }
    let lattice = CoefficientLattice::new(field, x, steps);
    monodromy_on_lattice(field, &lattice, x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetPointResult {
    /// `ln r(U(T; x)) / T`.
    pub lambda_x: f64,
    /// Perron root `r(U(T; x))`.
    pub root: f64,
    /// Positive Perron vector with unit Euclidean norm.
    pub phi0: Vec<f64>,
    /// `phi(t_q)` on a uniform mesh `t_q = q T / mesh`, `q = 0..=mesh`; empty until filled.
    pub phi_traj: Vec<Vec<f64>>,
    pub periodicity_defect: Option<f64>,
    pub iterations: usize,
}

/// Power iteration for the Perron pair of a single monodromy matrix.
pub fn pointwise_eigenpair(u: &MonodromyMatrix, period: f64) -> Result<FloquetPointResult> {
    let k = u.u.nrows();
    let mut b = u.u.clone();
    let scale = b.amax();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
            oscillation: f64::NAN,
        });
    }
    b /= scale;
    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    let mut w = vec![0.0; k];
    let mut diff = f64::INFINITY;
    let mut prev_diff = f64::INFINITY;
    let mut iterations = 0;
    while diff >= POWER_TOL {
        if iterations == MAX_POWER_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations,
                residual: diff,
                oscillation: diff / prev_diff,
            });
        }
        iterations += 1;
        matvec_dense(&b, &v, &mut w);
        if w.iter().sum::<f64>() < 0.0 {
            w.iter_mut().for_each(|x| *x = -*x);
        }
        if normalize(&mut w) == 0.0 {
            return Err(Error::NoConvergence {
                iterations,
                residual: f64::NAN,
                oscillation: f64::NAN,
            });
        }
        prev_diff = diff;
        diff = distance(&w, &v);
        std::mem::swap(&mut v, &mut w);
        if iterations % SQUARING_INTERVAL == 0 {
            b = &b * &b;
            let s = b.amax();
            b /= s;
        }
    }
    matvec_dense(&u.u, &v, &mut w);
    let root = norm(&w);
    Ok(FloquetPointResult {
        lambda_x: root.ln() / period,
        root,
        phi0: v,
        phi_traj: Vec::new(),
        periodicity_defect: None,
        iterations,
    })
}

fn matvec_dense(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let k = x.len();
    for r in 0..k {
        out[r] = (0..k).map(|c| a[(r, c)] * x[c]).sum();
    }
}

/// Samples `e^{-lambda t} U(t) phi0`, recording every `record_every` steps.
/// The scaling is applied after integration so that `phi(T) = U(T) phi0 / r`
/// holds at the discrete level. Returns the samples and `|phi(T) - phi(0)|`.
fn trajectory_on_lattice(
    lattice: &CoefficientLattice,
    phi0: &[f64],
    lambda: f64,
    record_every: usize,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let dt = lattice.dt();
    let mut s = Rk4Scratch::new(lattice.size);
    let mut y = phi0.to_vec();
    let mut traj = vec![y.clone()];
    for j in 0..lattice.steps {
        rk4_step([lattice.at(2 * j), lattice.at(2 * j + 1), lattice.at(2 * j + 2)], 0.0, dt, &mut y, None, &mut s);
        let t = (j + 1) as f64 * dt;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node: 0, time: t });
        }
        if (j + 1) % record_every == 0 {
            let scale = (-lambda * t).exp();
            traj.push(y.iter().map(|v| v * scale).collect());
        }
    }
    let last = traj.last().expect("at least one sample");
    let defect = distance(last, phi0);
    if defect > PERIODICITY_TOL {
        return Err(Error::PeriodicityDefect {
            node: 0,
            defect,
            tolerance: PERIODICITY_TOL,
        });
    }
    Ok((traj, defect))
}

/// `phi(t) = e^{-lambda t} U(t; x) phi0` sampled at `mesh + 1` uniform times.
pub fn periodic_eigenfunction(
    field: &CouplingField,
    x: &[f64],
    result: &FloquetPointResult,
    mesh: usize,
    steps: usize,
) -> Result<FloquetPointResult> {
    if mesh == 0 {
        return Err(invalid("mesh", "must be positive"));
    }
    let sub = steps.div_ceil(mesh).max(1);
    let lattice = CoefficientLattice::new(field, x, mesh * sub);
    let (traj, defect) = trajectory_on_lattice(&lattice, &result.phi0, result.lambda_x, sub)?;
    Ok(FloquetPointResult {
        phi_traj: traj,
        periodicity_defect: Some(defect),
        ..result.clone()
    })
}

/// Floquet data over the whole grid.
#[derive(Debug, Clone)]
pub struct PointwiseField {
    pub steps: usize,
    /// Trajectories are stored at `mesh + 1` times per node.
    pub mesh: usize,
    pub size: usize,
    pub lambda_field: Vec<f64>,
    /// `d_m + lambda(x_m)` with `d` the diagonal part of the dispersal operator.
    pub h_field: Vec<f64>,
    /// Quadrature kernel mass `sum_n kappa(x_n - x_m) w_n` per node.
    pub kernel_mass: Vec<f64>,
    /// Node-major trajectories: `phi[(m * (mesh + 1) + q) * K + k]`.
    phi: Vec<f64>,
    pub eta: f64,
    pub eta_tilde: f64,
    pub argmax_h: usize,
    pub max_h: f64,
    pub min_h: f64,
    pub max_periodicity_defect: f64,
    /// Fingerprint of the system the field was computed for; 0 when standalone.
    pub fingerprint: u64,
}

impl PointwiseField {
    /// `phi(t_q, x_m)`, `t_q = q T / mesh`.
    pub fn phi(&self, m: usize, q: usize) -> &[f64] {
        let start = (m * (self.mesh + 1) + q) * self.size;
        &self.phi[start..start + self.size]
    }

    pub fn nodes(&self) -> usize {
        self.lambda_field.len()
    }
}

fn node_error(m: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { time, .. } => Error::NonFinite { node: m, time },
        Error::PeriodicityDefect { defect, tolerance, .. } => Error::PeriodicityDefect {
            node: m,
            defect,
            tolerance,
        },
        other => other,
    }
}

/// Solves the pointwise problem at every node in parallel. `mesh` must divide `steps`.
pub fn compute_pointwise_field(
    field: &CouplingField,
    grid: &Grid,
    op: &NonlocalOperatorMatrix,
    steps: usize,
    mesh: usize,
) -> Result<PointwiseField> {
    if steps < MIN_STEPS {
        return Err(invalid("steps", format!("need at least {MIN_STEPS}, got {steps}")));
    }
    if mesh == 0 || steps % mesh != 0 {
        return Err(invalid("mesh", format!("{mesh} does not divide {steps} steps")));
    }
    let k = field.size();
    let per_node: Vec<(f64, Vec<Vec<f64>>, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|m| {
            let x = grid.node(m);
            let lattice = CoefficientLattice::new(field, x, steps);
            let u = monodromy_on_lattice(field, &lattice, x).map_err(node_error(m))?;
            let pair = pointwise_eigenpair(&u, field.period()).map_err(node_error(m))?;
            let (traj, defect) =
                trajectory_on_lattice(&lattice, &pair.phi0, pair.lambda_x, steps / mesh).map_err(node_error(m))?;
            Ok((pair.lambda_x, traj, defect))
        })
        .collect::<Result<_>>()?;

    let kernel_mass = op.row_sums();
    let mut lambda_field = Vec::with_capacity(grid.len());
    let mut phi = Vec::with_capacity(grid.len() * (mesh + 1) * k);
    let mut eta = f64::INFINITY;
    let mut eta_tilde = f64::NEG_INFINITY;
    let mut max_defect = 0.0f64;
    for (lambda, traj, defect) in per_node {
        lambda_field.push(lambda);
        max_defect = max_defect.max(defect);
        for sample in &traj {
            for &v in sample {
                eta = eta.min(v);
                eta_tilde = eta_tilde.max(v);
            }
            phi.extend_from_slice(sample);
        }
    }
    let h_field: Vec<f64> = lambda_field
        .iter()
        .zip(&op.diagonal_part)
        .map(|(l, d)| d + l)
        .collect();
    let mut argmax_h = 0;
    for (m, &h) in h_field.iter().enumerate() {
        if h > h_field[argmax_h] {
            argmax_h = m;
        }
    }
    let min_h = h_field.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(PointwiseField {
        steps,
        mesh,
        size: k,
        max_h: h_field[argmax_h],
        min_h,
        lambda_field,
        h_field,
        kernel_mass,
        phi,
        eta,
        eta_tilde,
        argmax_h,
        max_periodicity_defect: max_defect,
        fingerprint: 0,
    })
}
