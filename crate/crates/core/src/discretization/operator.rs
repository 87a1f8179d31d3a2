use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{BoundaryType, DomainSpec, Grid};
use super::kernel::Kernel;
use crate::error::{Error, Result};

/// Rows below this count are applied serially.
const PAR_ROWS: usize = 256;

/// Nystrom discretisation of the nonlocal dispersal operator on a grid.
///
/// `kernel_part` is stored in compressed sparse rows; row `m` holds
/// `kappa(x_n - x_m) w_n` for the nodes `x_n` inside the kernel support.
/// The full operator is `u -> kernel_part u + diagonal_part * u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalOperatorMatrix {
    pub boundary: BoundaryType,
    pub size: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    pub diagonal_part: Vec<f64>,
}

impl NonlocalOperatorMatrix {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(column, value)` pairs of row `m` in storage order.
    pub fn row(&self, m: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[m]..self.row_ptr[m + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    /// Column indices and values of row `m`.
    pub fn row_slices(&self, m: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[m]..self.row_ptr[m + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    /// Quadrature of `int kappa(y - x_m) dy` over the discretised domain.
    pub fn row_sum(&self, m: usize) -> f64 {
        self.row(m).fold(0.0, |acc, (_, v)| acc + v)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.size).map(|m| self.row_sum(m)).collect()
    }

    /// Self-interaction weight `kappa(0) w_m` of node `m`.
    pub fn self_weight(&self, m: usize) -> f64 {
        self.row(m).find(|&(n, _)| n == m).map_or(0.0, |(_, v)| v)
    }

    pub fn kernel_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.size, self.size);
        for m in 0..self.size {
            for (n, v) in self.row(m) {
                d[(m, n)] += v;
            }
        }
        d
    }

    /// Full operator as a dense matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = self.kernel_dense();
        for m in 0..self.size {
            d[(m, m)] += self.diagonal_part[m];
        }
        d
    }

    /// `out = (kernel_part + diag(diagonal_part)) u` for a scalar grid function.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.apply_blocks(u, out, 1, true);
    }

    /// Applies the operator componentwise to a node-major state with
    /// `components` values per node. With `with_diagonal = false` only the
    /// integral part acts.
    pub fn apply_blocks(&self, u: &[f64], out: &mut [f64], components: usize, with_diagonal: bool) {
        debug_assert_eq!(u.len(), self.size * components);
        debug_assert_eq!(out.len(), self.size * components);
        let row = |(m, chunk): (usize, &mut [f64])| {
            let range = self.row_ptr[m]..self.row_ptr[m + 1];
            for c in 0..components {
                let mut acc = 0.0;
                for (&n, &v) in self.cols[range.clone()].iter().zip(&self.vals[range.clone()]) {
                    acc += v * u[n * components + c];
                }
                if with_diagonal {
                    acc += self.diagonal_part[m] * u[m * components + c];
                }
                chunk[c] = acc;
            }
        };
        if self.size >= PAR_ROWS {
            out.par_chunks_mut(components).enumerate().for_each(row);
        } else {
            out.chunks_mut(components).enumerate().for_each(row);
        }
    }
}

/// Assembles the discrete operator for the domain's boundary type.
///
/// Displacements are formed from integer index offsets times the spacing so
/// that the periodic matrix is exactly circulant. The periodic kernel rows are
/// rescaled to unit sum (one common factor for every row).
pub fn assemble_nonlocal(kernel: &Kernel, grid: &Grid, domain: &DomainSpec) -> Result<NonlocalOperatorMatrix> {
    if kernel.dim != domain.dim() || grid.dim != domain.dim() {
        return Err(Error::DimensionMismatch(format!(
            "kernel dim {}, grid dim {}, domain dim {}",
            kernel.dim,
            grid.dim,
            domain.dim()
        )));
    }
    let periodic = domain.boundary == BoundaryType::Periodic;
    if periodic {
        let half = domain.extents().iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
        if kernel.support_radius >= half {
            return Err(Error::KernelTooWide {
                radius: kernel.support_radius,
                half_period: half,
            });
        }
    }
    let dim = grid.dim;
    let reach: Vec<isize> = grid
        .spacing
        .iter()
        .zip(&grid.resolution)
        .map(|(h, &n)| {
            let r = (kernel.support_radius / h).ceil() as isize;
            if periodic {
                r.min((n as isize - 1) / 2)
            } else {
                r.min(n as isize - 1)
            }
        })
        .collect();

    // Offsets inside the support, in a fixed lexicographic order, with the
    // kernel value for each.
    let mut offsets: Vec<(Vec<isize>, f64)> = Vec::new();
    let mut off: Vec<isize> = reach.iter().map(|r| -r).collect();
    'odometer: loop {
        let r2: f64 = off
            .iter()
            .zip(&grid.spacing)
            .map(|(&o, &h)| {
                let d = o as f64 * h;
                d * d
            })
            .sum();
        let k = kernel.eval_sq(r2);
        if k > 0.0 {
            offsets.push((off.clone(), k));
        }
        let mut axis = dim;
        loop {
            if axis == 0 {
                break 'odometer;
            }
            axis -= 1;
            off[axis] += 1;
            if off[axis] <= reach[axis] {
                break;
            }
            off[axis] = -reach[axis];
        }
    }

    let size = grid.len();
    let rows: Vec<Vec<(usize, f64)>> = (0..size)
        .into_par_iter()
        .map(|m| {
            let base = grid.multi_index(m);
            let mut row = Vec::with_capacity(offsets.len());
            let mut target = vec![0usize; dim];
            'next: for (o, k) in &offsets {
                for axis in 0..dim {
                    let n = grid.resolution[axis] as isize;
                    let mut i = base[axis] as isize + o[axis];
                    if periodic {
                        i = i.rem_euclid(n);
                    } else if i < 0 || i >= n {
                        continue 'next;
                    }
                    target[axis] = i as usize;
                }
                let col = grid.flat_index(&target);
                row.push((col, k * grid.weights[col]));
            }
            row
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(size + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for row in &rows {
        for &(c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }

    if periodic {
        let first: f64 = vals[row_ptr[0]..row_ptr[1]].iter().fold(0.0, |a, v| a + v);
        for v in &mut vals {
            *v /= first;
        }
    }

    let mut op = NonlocalOperatorMatrix {
        boundary: domain.boundary,
        size,
        row_ptr,
        cols,
        vals,
        diagonal_part: vec![-1.0; size],
    };
    if domain.boundary == BoundaryType::Neumann {
        op.diagonal_part = (0..size).map(|m| -op.row_sum(m)).collect();
    }
    Ok(op)
}
