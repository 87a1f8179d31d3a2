use std::sync::OnceLock;

use rayon::prelude::*;

use crate::coupling::{validate_cooperative, validate_irreducible, CouplingField, HypothesisReport};
use crate::discretization::{assemble_nonlocal, build_grid_axes, build_kernel, Grid, Kernel, NonlocalOperatorMatrix};
use crate::error::{invalid, Error, Result};
use crate::floquet::{compute_pointwise_field, CoefficientLattice, PointwiseField};
use crate::system::SystemSpec;

/// Nodes below this count are processed serially.
const PAR_NODES: usize = 256;

/// The coupled system `u' = K u + d u + A(t, x) u` on the grid, with state
/// stored node-major: `u[m * K + k]`.
#[derive(Debug)]
pub struct SemiDiscreteSystem {
    pub spec: SystemSpec,
    pub kernel: Kernel,
    pub grid: Grid,
    pub operator: NonlocalOperatorMatrix,
    pub coupling: CouplingField,
    lattices: Vec<CoefficientLattice>,
    pointwise: OnceLock<Result<PointwiseField>>,
    fingerprint: u64,
}

/// Coefficients for all nodes at one time.
enum Coefficients {
    Lattice(usize),
    Direct(Vec<f64>),
}

impl SemiDiscreteSystem {
    pub fn build(spec: SystemSpec) -> Result<Self> {
        spec.domain.validate()?;
        spec.numerics.validate()?;
        let dim = spec.domain.dim();
        let resolution = spec.numerics.resolution_for(dim);
        if resolution.len() != dim {
            return Err(invalid(
                "numerics.resolution",
                format!("{} entries for a {dim}-dimensional domain", resolution.len()),
            ));
        }
        let coupling = CouplingField::new(spec.coupling.clone(), &spec.domain)?;
        let nodes: usize = resolution.iter().product();
        let state_dim = nodes * coupling.size();
        if state_dim > spec.numerics.max_state_dim {
            return Err(Error::ResourceCap {
                dim: state_dim,
                cap: spec.numerics.max_state_dim,
            });
        }
        let kernel = build_kernel(spec.kernel.profile, spec.kernel.delta, dim)?;
        let grid = build_grid_axes(&spec.domain, &resolution)?;
        let operator = assemble_nonlocal(&kernel, &grid, &spec.domain)?;
        let steps = spec.numerics.time_steps;
        let lattices = (0..grid.len())
            .into_par_iter()
            .map(|m| CoefficientLattice::new(&coupling, grid.node(m), steps))
            .collect();
        let fingerprint = spec.fingerprint();
        Ok(SemiDiscreteSystem {
            spec,
            kernel,
            grid,
            operator,
            coupling,
            lattices,
            pointwise: OnceLock::new(),
            fingerprint,
        })
    }

    /// Number of components `K`.
    pub fn size(&self) -> usize {
        self.coupling.size()
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn state_dim(&self) -> usize {
        self.nodes() * self.size()
    }

    pub fn period(&self) -> f64 {
        self.coupling.period()
    }

    pub fn steps(&self) -> usize {
        self.spec.numerics.time_steps
    }

    pub fn dt(&self) -> f64 {
        self.period() / self.steps() as f64
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn lattice(&self, m: usize) -> &CoefficientLattice {
        &self.lattices[m]
    }

    /// Floquet data at every node, computed once with trajectories on the
    /// time-step lattice.
    pub fn pointwise(&self) -> Result<&PointwiseField> {
        self.pointwise
            .get_or_init(|| {
                let mut pf =
                    compute_pointwise_field(&self.coupling, &self.grid, &self.operator, self.steps(), self.steps())?;
                pf.fingerprint = self.fingerprint;
                Ok(pf)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn hypotheses(&self) -> HypothesisReport {
        let n = self.spec.numerics.time_samples;
        validate_cooperative(&self.coupling, &self.grid, n).merge(validate_irreducible(&self.coupling, &self.grid, n))
    }

    /// Self-interaction weight `kappa(0) w` at the maximiser of `h`: the
    /// amount by which a node-localised discrete mode can sit above `max h`.
    pub fn grid_tolerance(&self) -> Result<f64> {
        let m = self.pointwise()?.argmax_h;
        Ok(self.operator.self_weight(m))
    }

    fn coefficients(&self, t: f64) -> Coefficients {
        let half_dt = self.dt() / 2.0;
        let h = t / half_dt;
        let j = h.round();
        if (h - j).abs() < 1e-9 {
            let n = 2 * self.steps() as i64;
            return Coefficients::Lattice((j as i64).rem_euclid(n) as usize);
        }
        let kk = self.size() * self.size();
        let mut data = vec![0.0; self.nodes() * kk];
        for (m, chunk) in data.chunks_mut(kk).enumerate() {
            self.coupling.sample_into(t, self.grid.node(m), chunk);
        }
        Coefficients::Direct(data)
    }

    fn node_coefficients<'a>(&'a self, c: &'a Coefficients, m: usize) -> &'a [f64] {
        match c {
            Coefficients::Lattice(j) => self.lattices[m].at(*j),
            Coefficients::Direct(data) => {
                let kk = self.size() * self.size();
                &data[m * kk..(m + 1) * kk]
            }
        }
    }

    fn apply_with(&self, c: &Coefficients, u: &[f64], out: &mut [f64]) {
        let k = self.size();
        let op = &self.operator;
        let node = |(m, chunk): (usize, &mut [f64])| {
            let (cols, vals) = op.row_slices(m);
            if k == 1 {
                chunk[0] = cols.iter().zip(vals).map(|(&n, &w)| w * u[n]).sum();
            } else {
                chunk.iter_mut().for_each(|v| *v = 0.0);
                for (&n, &w) in cols.iter().zip(vals) {
                    let un = &u[n * k..(n + 1) * k];
                    for i in 0..k {
                        chunk[i] += w * un[i];
                    }
                }
            }
            let a = self.node_coefficients(c, m);
            let um = &u[m * k..(m + 1) * k];
            let d = op.diagonal_part[m];
            for i in 0..k {
                let row = &a[i * k..(i + 1) * k];
                chunk[i] += d * um[i] + row.iter().zip(um).map(|(p, q)| p * q).sum::<f64>();
            }
        };
        if self.nodes() >= PAR_NODES {
            out.par_chunks_mut(k).enumerate().for_each(node);
        } else {
            out.chunks_mut(k).enumerate().for_each(node);
        }
    }

    /// `out = L(t) u` for the time-frozen generator.
    pub fn apply_generator(&self, t: f64, u: &[f64], out: &mut [f64]) {
        let c = self.coefficients(t);
        self.apply_with(&c, u, out);
    }

    /// Dense `L(t)`, for small systems and tests.
    pub fn generator_dense(&self, t: f64) -> nalgebra::DMatrix<f64> {
        let n = self.state_dim();
        let mut l = nalgebra::DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_generator(t, &e, &mut col);
            l.set_column(j, &nalgebra::DVector::from_column_slice(&col));
            e[j] = 0.0;
        }
        l
    }

    /// Advances `u` by `steps` RK4 steps of size `dt` from `t0`, calling
    /// `record(step_index, state)` after each step.
    pub(crate) fn evolve<F: FnMut(usize, &[f64])>(
        &self,
        u: &mut [f64],
        t0: f64,
        dt: f64,
        steps: usize,
        mut record: F,
    ) -> Result<()> {
        let n = u.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for s in 0..steps {
            let t = t0 + s as f64 * dt;
            let c0 = self.coefficients(t);
            let c1 = self.coefficients(t + 0.5 * dt);
            let c2 = self.coefficients(t + dt);
            self.apply_with(&c0, u, &mut k1);
            axpy_into(&mut tmp, u, 0.5 * dt, &k1);
            self.apply_with(&c1, &tmp, &mut k2);
            axpy_into(&mut tmp, u, 0.5 * dt, &k2);
            self.apply_with(&c1, &tmp, &mut k3);
            axpy_into(&mut tmp, u, dt, &k3);
            self.apply_with(&c2, &tmp, &mut k4);
            for i in 0..n {
                u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if let Some(i) = u.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    node: i / self.size(),
                    time: t + dt,
                });
            }
            record(s, u);
        }
        Ok(())
    }

    /// `Phi(T, 0) v` on the time-step lattice.
    pub fn period_map(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut u = v.to_vec();
        self.evolve(&mut u, 0.0, self.dt(), self.steps(), |_, _| {})?;
        Ok(u)
    }

    /// Dense `Phi(T, 0)` built column by column.
    pub fn period_map_dense(&self) -> Result<nalgebra::DMatrix<f64>> {
        let n = self.state_dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.period_map(&e)
            })
            .collect::<Result<_>>()?;
        Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }
}

fn axpy_into(out: &mut [f64], y: &[f64], a: f64, x: &[f64]) {
    for i in 0..out.len() {
        out[i] = y[i] + a * x[i];
    }
}

/// RK4 time stepping of the semi-discrete system: returns `Phi(t1, t0) u0`.
pub fn step_evolution(system: &SemiDiscreteSystem, u0: &[f64], t0: f64, t1: f64, dt: f64) -> Result<Vec<f64>> {
    if u0.len() != system.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} entries, system expects {}",
            u0.len(),
            system.state_dim()
        )));
    }
    if !(t1 >= t0) || !(dt > 0.0) {
        return Err(invalid("dt", format!("need t1 >= t0 and dt > 0 (t0 = {t0}, t1 = {t1}, dt = {dt})")));
    }
    let span = t1 - t0;
    let steps = (span / dt).round();
    if (steps * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(invalid("dt", format!("{dt} does not divide the interval length {span}")));
    }
    let mut u = u0.to_vec();
    system.evolve(&mut u, t0, dt, steps as usize, |_, _| {})?;
    Ok(u)
}
