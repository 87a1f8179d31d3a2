use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expr::{BasisPoint, Expr};
use crate::discretization::{BoundaryType, DomainSpec};
use crate::error::{invalid, Error, Result};

/// Declarative description of a `K x K` coefficient matrix field, one
/// expression string per entry (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub period: f64,
    pub matrix: Vec<Vec<String>>,
}

impl CouplingSpec {
    pub fn new<S: AsRef<str>>(period: f64, matrix: &[&[S]]) -> Self {
        CouplingSpec {
            period,
            matrix: matrix
                .iter()
                .map(|row| row.iter().map(|s| s.as_ref().to_string()).collect())
                .collect(),
        }
    }

    /// Constant matrix field.
    pub fn constant(period: f64, a: &[&[f64]]) -> Self {
        CouplingSpec {
            period,
            matrix: a
                .iter()
                .map(|row| row.iter().map(|v| format!("{v:e}")).collect())
                .collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.matrix.len()
    }

    /// The field `A + c I`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for (k, row) in out.matrix.iter_mut().enumerate() {
            row[k] = format!("({}) + {c:e}", row[k]);
        }
        out
    }
}

/// T-periodic matrix field `A(t, x)` compiled from a [`CouplingSpec`].
///
/// Time enters only through `sin_t`/`cos_t` evaluated at `t mod T`, so
/// periodicity in `t` holds exactly. On periodic domains `x` is reduced into
/// the cell before evaluation, which gives exact spatial periodicity.
#[derive(Debug, Clone)]
pub struct CouplingField {
    pub spec: CouplingSpec,
    pub dim: usize,
    entries: Vec<Expr>,
    domain: DomainSpec,
    time_dependent: bool,
}

impl CouplingField {
    pub fn new(spec: CouplingSpec, domain: &DomainSpec) -> Result<Self> {
        domain.validate()?;
        let k = spec.size();
        if k == 0 {
            return Err(invalid("coupling.matrix", "must have at least one row"));
        }
        if let Some(row) = spec.matrix.iter().find(|r| r.len() != k) {
            return Err(invalid(
                "coupling.matrix",
                format!("must be square: {k} rows but a row of length {}", row.len()),
            ));
        }
        if !(spec.period > 0.0) || !spec.period.is_finite() {
            return Err(invalid("coupling.period", format!("must be positive, got {}", spec.period)));
        }
        let dim = domain.dim();
        let mut entries = Vec::with_capacity(k * k);
        for (i, row) in spec.matrix.iter().enumerate() {
            for (j, src) in row.iter().enumerate() {
                let e = Expr::parse(src).map_err(|e| match e {
                    Error::Expression { column, message } => Error::Expression {
                        column,
                        message: format!("entry ({}, {}): {message}", i + 1, j + 1),
                    },
                    other => other,
                })?;
                if let Some(axis) = e.max_axis() {
                    if axis >= dim {
                        return Err(invalid(
                            "coupling.matrix",
                            format!("entry ({}, {}) uses coordinate {} in a {dim}-dimensional domain", i + 1, j + 1, axis + 1),
                        ));
                    }
                }
                entries.push(e);
            }
        }
        let time_dependent = entries.iter().any(Expr::depends_on_time);
        Ok(CouplingField {
            spec,
            dim,
            entries,
            domain: domain.clone(),
            time_dependent,
        })
    }

    pub fn size(&self) -> usize {
        self.spec.size()
    }

    pub fn period(&self) -> f64 {
        self.spec.period
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    fn basis(&self, t: f64, x: &[f64]) -> BasisPoint {
        let period = self.spec.period;
        let phase_t = 2.0 * PI * t.rem_euclid(period) / period;
        let periodic = self.domain.boundary == BoundaryType::Periodic;
        let mut xr = x.to_vec();
        let mut phase_x = Vec::with_capacity(self.dim);
        for l in 0..self.dim {
            let lo = self.domain.lower[l];
            let p = self.domain.upper[l] - lo;
            if periodic {
                xr[l] = lo + (x[l] - lo).rem_euclid(p);
            }
            phase_x.push(2.0 * PI * (xr[l] - lo) / p);
        }
        BasisPoint::new(&xr, phase_t, &phase_x)
    }

    /// Writes `A(t, x)` row-major into `out` (length `K^2`). No domain check.
    pub fn sample_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let b = self.basis(t, x);
        for (o, e) in out.iter_mut().zip(&self.entries) {
            *o = e.eval(&b);
        }
    }

    pub fn sample_row_major(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.entries.len()];
        self.sample_into(t, x, &mut out);
        out
    }
}

/// Evaluates `A(t, x)`; points outside the box are rejected unless the
/// domain is periodic.
pub fn sample_coupling(field: &CouplingField, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
    if x.len() != field.dim {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, field expects {}",
            x.len(),
            field.dim
        )));
    }
    if field.domain.boundary != BoundaryType::Periodic && !field.domain.contains(x) {
        return Err(Error::OutsideDomain { point: x.to_vec() });
    }
    let k = field.size();
    Ok(DMatrix::from_row_slice(k, k, &field.sample_row_major(t, x)))
}
