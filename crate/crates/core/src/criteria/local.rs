use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::{BoundaryType, DomainSpec, Grid};
use crate::error::{Error, Result};
use crate::floquet::PointwiseField;

/// Nodes per axis on either side of the maximiser used in the polynomial fit.
const FIT_RADIUS_CELLS: usize = 3;
/// Regression neighbourhoods, in units of the largest grid spacing; the
/// smallest admissible one is reported.
const REGRESSION_RADII: [f64; 3] = [6.0, 4.0, 3.0];
/// Nodes closer than this (in spacings) to the refined maximiser are left
/// out of the regression.
const MIN_REGRESSION_RADIUS: f64 = 0.25;
/// A refined maximiser this close to the node (in spacings) snaps back to it.
const SNAP_CELLS: f64 = 0.05;
/// `p >= N - DIVERGENCE_SLACK` counts as divergent.
pub const DIVERGENCE_SLACK: f64 = 0.1;
/// Relative derivative tolerance for the vanishing condition.
pub const DERIVATIVE_TOL: f64 = 1e-3;

pub(crate) fn is_constant(h: &[f64]) -> bool {
    let max = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = h.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min <= 1e-12 * (1.0 + max.abs())
}

fn argmax(h: &[f64]) -> usize {
    let mut best = 0;
    for (m, &v) in h.iter().enumerate() {
        if v > h[best] {
            best = m;
        }
    }
    best
}

/// `x - c`, wrapped to the nearest image on periodic domains.
fn displacement(domain: &DomainSpec, x: &[f64], c: &[f64]) -> Vec<f64> {
    let periods = domain.periods();
    x.iter()
        .zip(c)
        .enumerate()
        .map(|(l, (a, b))| {
            let d = a - b;
            match &periods {
                Some(p) => d - p[l] * (d / p[l]).round(),
                None => d,
            }
        })
        .collect()
}

fn monomials(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, dim: usize, left: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=left {
            prefix.push(e);
            rec(prefix, dim, left - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), dim, degree, &mut out);
    out.sort_by_key(|e| e.iter().sum::<u32>());
    out
}

fn falling(a: u32, b: u32) -> f64 {
    (0..b).map(|i| (a - i) as f64).product()
}

/// Least-squares polynomial in the scaled variable `z = (x - center) / spacing`.
#[derive(Debug, Clone)]
struct LocalPolynomial {
    exps: Vec<Vec<u32>>,
    coeffs: Vec<f64>,
}

impl LocalPolynomial {
    fn derivative(&self, z: &[f64], beta: &[u32]) -> f64 {
        self.exps
            .iter()
            .zip(&self.coeffs)
            .filter(|(a, _)| a.iter().zip(beta).all(|(x, y)| x >= y))
            .map(|(a, c)| {
                c * a
                    .iter()
                    .zip(beta)
                    .zip(z)
                    .map(|((&x, &y), &zl)| falling(x, y) * zl.powi((x - y) as i32))
                    .product::<f64>()
            })
            .sum()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.derivative(z, &vec![0; z.len()])
    }

    fn gradient_hessian(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = z.len();
        let mut g = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut beta = vec![0u32; n];
        for i in 0..n {
            beta[i] += 1;
            g[i] = self.derivative(z, &beta);
            for j in 0..n {
                beta[j] += 1;
                hess[(i, j)] = self.derivative(z, &beta);
                beta[j] -= 1;
            }
            beta[i] -= 1;
        }
        (g, hess)
    }
}

/// Refined location and height of the maximum of a sampled field.
#[derive(Debug, Clone)]
pub(crate) struct LocalMaximum {
    pub x0: Vec<f64>,
    pub alpha: f64,
    /// `(x0 - node) / spacing`.
    z0: Vec<f64>,
    spacing: Vec<f64>,
    poly: LocalPolynomial,
    pub fit_residual: f64,
}

impl LocalMaximum {
    /// `d^beta h (x0)` in physical units.
    pub fn derivative(&self, beta: &[u32]) -> f64 {
        let scale: f64 = beta.iter().zip(&self.spacing).map(|(&b, s)| s.powi(b as i32)).product();
        self.poly.derivative(&self.z0, beta) / scale
    }
}

fn on_outer_layer(grid: &Grid, domain: &DomainSpec, m: usize) -> bool {
    domain.boundary != BoundaryType::Periodic
        && grid
            .multi_index(m)
            .iter()
            .zip(&grid.resolution)
            .any(|(&i, &n)| i == 0 || i + 1 == n)
}

fn grid_search_max(poly: &LocalPolynomial, dim: usize) -> Vec<f64> {
    let g: usize = match dim {
        1 | 2 => 41,
        3 => 21,
        _ => 11,
    };
    let total = g.pow(dim as u32);
    let mut best = vec![0.0; dim];
    let mut best_v = poly.value(&best);
    let mut z = vec![0.0; dim];
    for mut c in 0..total {
        for zl in z.iter_mut() {
            *zl = -1.0 + 2.0 * (c % g) as f64 / (g - 1) as f64;
            c /= g;
        }
        let v = poly.value(&z);
        if v > best_v {
            best_v = v;
            best.copy_from_slice(&z);
        }
    }
    best
}

/// Damped Newton ascent, kept inside `|z|_inf <= 1.5`.
fn polish_max(poly: &LocalPolynomial, mut z: Vec<f64>) -> Vec<f64> {
    let n = z.len();
    let mut v = poly.value(&z);
    for _ in 0..100 {
        let (g, hess) = poly.gradient_hessian(&z);
        let top = hess.clone().symmetric_eigen().eigenvalues.max();
        let mu = top.max(0.0) + 1e-12 * (1.0 + hess.norm());
        let Some(mut step) = (DMatrix::identity(n, n) * mu - &hess).lu().solve(&g) else {
            break;
        };
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let tv = poly.value(&trial);
            if tv >= v && trial.iter().all(|t| t.abs() <= 1.5) {
                z = trial;
                v = tv;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.norm() < 1e-13 {
            break;
        }
    }
    z
}

/// Fits a local polynomial around the largest sample and maximises it.
pub(crate) fn local_maximum(h: &[f64], grid: &Grid, domain: &DomainSpec) -> Result<LocalMaximum> {
    if h.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!("{} samples for {} nodes", h.len(), grid.len())));
    }
    let dim = grid.dim;
    let node = argmax(h);
    if on_outer_layer(grid, domain, node) {
        return Err(Error::StencilOutside(format!(
            "the maximiser {:?} lies on the outermost node layer",
            grid.node(node)
        )));
    }
    let center = grid.node(node).to_vec();
    let spacing = grid.spacing.clone();
    let periodic = domain.boundary == BoundaryType::Periodic;
    let idx0 = grid.multi_index(node);
    let mut zs = Vec::new();
    let mut vals = Vec::new();
    for m in 0..grid.len() {
        let idx = grid.multi_index(m);
        let near = idx.iter().zip(&idx0).zip(&grid.resolution).all(|((&a, &b), &n)| {
            let d = a.abs_diff(b);
            let d = if periodic { d.min(n - d) } else { d };
            d <= FIT_RADIUS_CELLS
        });
        if near {
            let d = displacement(domain, grid.node(m), &center);
            zs.push(d.iter().zip(&spacing).map(|(a, s)| a / s).collect::<Vec<f64>>());
            vals.push(h[m]);
        }
    }
    let distinct = (0..dim)
        .map(|l| {
            let mut c: Vec<i64> = zs.iter().map(|z| z[l].round() as i64).collect();
            c.sort_unstable();
            c.dedup();
            c.len()
        })
        .min()
        .unwrap_or(0);
    let degree = if distinct >= 5 {
        4.max(dim as u32 - 1)
    } else if distinct >= 3 {
        2
    } else {
        return Err(Error::InsufficientNodes(format!(
            "{distinct} distinct coordinates per axis near the maximiser"
        )));
    };
    let exps = monomials(dim, degree);
    if zs.len() <= exps.len() {
        return Err(Error::InsufficientNodes(format!(
            "{} nodes for a {}-term local fit",
            zs.len(),
            exps.len()
        )));
    }
    let design = DMatrix::from_fn(zs.len(), exps.len(), |i, j| {
        exps[j].iter().zip(&zs[i]).map(|(&e, &z)| z.powi(e as i32)).product()
    });
    let rhs = DVector::from_column_slice(&vals);
    let coeffs = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|e| Error::InsufficientNodes(format!("local fit failed: {e}")))?;
    let fit_residual = ((&design * &coeffs - &rhs).norm() / (zs.len() as f64).sqrt())
        / (vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min))
            .max(f64::MIN_POSITIVE);
    let poly = LocalPolynomial {
        exps,
        coeffs: coeffs.iter().cloned().collect(),
    };
    let z = polish_max(&poly, grid_search_max(&poly, dim));
    let (z0, alpha) = if z.iter().all(|v| v.abs() < SNAP_CELLS) {
        (vec![0.0; dim], h[node])
    } else {
        (z.clone(), poly.value(&z).max(h[node]))
    };
    let x0 = center.iter().zip(&z0).zip(&spacing).map(|((c, z), s)| c + z * s).collect();
    Ok(LocalMaximum {
        x0,
        alpha,
        z0,
        spacing,
        poly,
        fit_residual,
    })
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// One log-log regression of `alpha - h` against distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub radius: f64,
    pub samples: usize,
    pub exponent: f64,
    /// RMS residual of the regression in natural-log units.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1DivergenceCheck {
    /// `1 / (alpha - h)` judged non-integrable near the maximiser.
    pub flag: bool,
    /// False when the maximiser sits on the outermost node layer.
    pub resolved: bool,
    pub dim: usize,
    /// Fitted flatness exponent `p` in `alpha - h ~ C |x - x0|^p`.
    pub exponent: Option<f64>,
    pub residual: Option<f64>,
    /// Fits over the shrinking neighbourhoods, largest first.
    pub fits: Vec<PowerFit>,
    pub x0: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub note: Option<String>,
}

/// Log-log power-law fit of the sampled field `h` around its maximum.
pub fn l1_divergence_from_samples(h: &[f64], grid: &Grid, domain: &DomainSpec) -> Result<L1DivergenceCheck> {
    let dim = grid.dim;
    let mut check = L1DivergenceCheck {
        flag: false,
        resolved: true,
        dim,
        exponent: None,
        residual: None,
        fits: Vec::new(),
        x0: None,
        alpha: None,
        note: None,
    };
    if is_constant(h) {
        check.flag = true;
        check.note = Some("h is constant: 1/(alpha - h) is non-integrable on every set as alpha -> max h".into());
        return Ok(check);
    }
    let max = match local_maximum(h, grid, domain) {
        Ok(m) => m,
        Err(Error::StencilOutside(msg)) => {
            check.resolved = false;
            check.note = Some(format!("unresolved: {msg}"));
            return Ok(check);
        }
        Err(e) => return Err(e),
    };
    let s = grid.max_spacing();
    let scale = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - h.iter().cloned().fold(f64::INFINITY, f64::min);
    let samples: Vec<(f64, f64)> = (0..grid.len())
        .filter_map(|m| {
            let r = displacement(domain, grid.node(m), &max.x0).iter().map(|d| d * d).sum::<f64>().sqrt();
            let gap = max.alpha - h[m];
            (r >= MIN_REGRESSION_RADIUS * s && gap > 1e-14 * scale).then_some((r, gap))
        })
        .collect();
    let min_samples = (dim + 3).max(4);
    for radius in REGRESSION_RADII.map(|c| c * s) {
        let inside: Vec<&(f64, f64)> = samples.iter().filter(|(r, _)| *r <= radius).collect();
        let rmin = inside.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let rmax = inside.iter().map(|p| p.0).fold(0.0, f64::max);
        if inside.len() < min_samples || rmax < 1.2 * rmin {
            continue;
        }
        let xs: Vec<f64> = inside.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = inside.iter().map(|p| p.1.ln()).collect();
        let (p, _, rms) = linear_fit(&xs, &ys);
        check.fits.push(PowerFit {
            radius,
            samples: inside.len(),
            exponent: p,
            residual: rms,
        });
    }
    let Some(last) = check.fits.last() else {
        return Err(Error::InsufficientNodes(format!(
            "fewer than {min_samples} usable nodes within {} of the maximiser",
            REGRESSION_RADII[0] * s
        )));
    };
    check.exponent = Some(last.exponent);
    check.residual = Some(last.residual);
    check.flag = last.exponent >= dim as f64 - DIVERGENCE_SLACK;
    check.x0 = Some(max.x0);
    check.alpha = Some(max.alpha);
    Ok(check)
}

/// L1 divergence premise for the field's `h`.
pub fn check_l1_divergence(field: &PointwiseField, grid: &Grid, domain: &DomainSpec) -> Result<L1DivergenceCheck> {
    l1_divergence_from_samples(&field.h_field, grid, domain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub order: u32,
    pub multi_index: Vec<u32>,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingCheck {
    /// Every partial derivative of order `1..=N-1` at the maximiser is below tolerance.
    pub flag: bool,
    pub dim: usize,
    /// Largest `k` such that all derivatives of orders `1..=k` vanish.
    pub vanishing_through: u32,
    pub derivatives: Vec<DerivativeEstimate>,
    pub x0: Option<Vec<f64>>,
    /// RMS misfit of the local polynomial relative to the local range of `h`.
    pub fit_residual: Option<f64>,
    pub note: Option<String>,
}

/// Derivatives of the sampled `h` at its refined maximiser, up to order `N - 1`.
pub fn vanishing_from_samples(h: &[f64], grid: &Grid, domain: &DomainSpec) -> Result<VanishingCheck> {
    let dim = grid.dim;
    let top = dim as u32 - 1;
    if is_constant(h) {
        return Ok(VanishingCheck {
            flag: true,
            dim,
            vanishing_through: top,
            derivatives: Vec::new(),
            x0: None,
            fit_residual: None,
            note: Some("h is constant: every derivative vanishes".into()),
        });
    }
    let max = local_maximum(h, grid, domain)?;
    let scale = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - h.iter().cloned().fold(f64::INFINITY, f64::min);
    let length = domain.extents().iter().cloned().fold(f64::INFINITY, f64::min);
    let mut derivatives = Vec::new();
    let mut vanishing_through = top;
    for beta in monomials(dim, top) {
        let order: u32 = beta.iter().sum();
        if order == 0 {
            continue;
        }
        let value = max.derivative(&beta);
        let tolerance = DERIVATIVE_TOL * scale / length.powi(order as i32);
        if value.abs() >= tolerance {
            vanishing_through = vanishing_through.min(order - 1);
        }
        derivatives.push(DerivativeEstimate {
            order,
            multi_index: beta,
            value,
            tolerance,
        });
    }
    Ok(VanishingCheck {
        flag: vanishing_through == top,
        dim,
        vanishing_through,
        derivatives,
        x0: Some(max.x0),
        fit_residual: Some(max.fit_residual),
        note: (dim == 1).then(|| "one dimension: only maximality is required".to_string()),
    })
}

/// Vanishing-derivative premise for the field's `h`.
pub fn check_vanishing_condition(field: &PointwiseField, grid: &Grid, domain: &DomainSpec) -> Result<VanishingCheck> {
    vanishing_from_samples(&field.h_field, grid, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_grid;

    fn sample(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..grid.len()).map(|m| f(grid.node(m))).collect()
    }

    fn dist(x: &[f64], c: &[f64]) -> f64 {
        x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(1, 4).len(), 5);
        assert_eq!(monomials(2, 4).len(), 15);
        assert_eq!(monomials(3, 4).len(), 35);
        assert_eq!(monomials(3, 0), vec![vec![0, 0, 0]]);
    }

    #[test]
    fn quadratic_in_one_dimension() {
        let d = DomainSpec::unit_interval(BoundaryType::Dirichlet);
        let g = build_grid(&d, 32).unwrap();
        let h = sample(&g, |x| -(x[0] - 0.5).powi(2));
        let c = l1_divergence_from_samples(&h, &g, &d).unwrap();
        assert!(c.flag);
        assert!((c.exponent.unwrap() - 2.0).abs() < 1e-6, "{c:?}");
        assert!((c.x0.unwrap()[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn off_node_quartic_in_two_dimensions() {
        let d = DomainSpec::new(BoundaryType::Neumann, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let g = build_grid(&d, 24).unwrap();
        let c0 = [0.43, 0.57];
        let h = sample(&g, |x| -dist(x, &c0).powi(4));
        let c = l1_divergence_from_samples(&h, &g, &d).unwrap();
        assert!(c.flag);
        assert!((c.exponent.unwrap() - 4.0).abs() < 0.2, "{c:?}");
    }

    #[test]
    fn quadratic_in_three_dimensions_converges() {
        let d = DomainSpec::new(BoundaryType::Dirichlet, vec![0.0; 3], vec![1.0; 3]).unwrap();
        let g = build_grid(&d, 12).unwrap();
        let h = sample(&g, |x| -dist(x, &[0.52, 0.52, 0.52]).powi(2));
        let c = l1_divergence_from_samples(&h, &g, &d).unwrap();
        assert!(!c.flag);
        assert!((c.exponent.unwrap() - 2.0).abs() < 1e-6, "{c:?}");
        let v = vanishing_from_samples(&h, &g, &d).unwrap();
        assert!(!v.flag);
        assert_eq!(v.vanishing_through, 1);
    }

    #[test]
    fn constant_field_is_divergent() {
        let d = DomainSpec::unit_interval(BoundaryType::Neumann);
        let g = build_grid(&d, 8).unwrap();
        let c = l1_divergence_from_samples(&[0.3; 8], &g, &d).unwrap();
        assert!(c.flag && c.exponent.is_none() && c.note.is_some());
        assert!(vanishing_from_samples(&[0.3; 8], &g, &d).unwrap().flag);
    }

    #[test]
    fn boundary_maximum_is_unresolved() {
        let d = DomainSpec::unit_interval(BoundaryType::Dirichlet);
        let g = build_grid(&d, 16).unwrap();
        let h = sample(&g, |x| x[0]);
        let c = l1_divergence_from_samples(&h, &g, &d).unwrap();
        assert!(!c.flag && !c.resolved);
        assert!(matches!(vanishing_from_samples(&h, &g, &d), Err(Error::StencilOutside(_))));
    }

    #[test]
    fn periodic_maximum_across_the_seam() {
        let d = DomainSpec::periodic(vec![1.0]).unwrap();
        let g = build_grid(&d, 32).unwrap();
        let h = sample(&g, |x| (2.0 * std::f64::consts::PI * (x[0] - 0.01)).cos());
        let c = l1_divergence_from_samples(&h, &g, &d).unwrap();
        assert!(c.flag && c.resolved);
        assert!((c.exponent.unwrap() - 2.0).abs() < 0.05, "{c:?}");
    }

    #[test]
    fn too_coarse_grid_reports_insufficient_nodes() {
        let d = DomainSpec::unit_interval(BoundaryType::Neumann);
        let g = build_grid(&d, 3).unwrap();
        let h = sample(&g, |x| -(x[0] - 0.5).powi(2));
        assert!(matches!(l1_divergence_from_samples(&h, &g, &d), Err(Error::InsufficientNodes(_))));
    }

    #[test]
    fn gradient_vanishes_at_smooth_two_dimensional_maximum() {
        let d = DomainSpec::new(BoundaryType::Dirichlet, vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let g = build_grid_axes_helper(&d, &[20, 40]);
        let h = sample(&g, |x| -(x[0] - 0.41).powi(2) - 3.0 * (x[1] - 1.13).powi(2) + 0.5 * (x[0] - 0.41) * (x[1] - 1.13));
        let v = vanishing_from_samples(&h, &g, &d).unwrap();
        assert!(v.flag, "{v:?}");
        assert_eq!(v.derivatives.len(), 2);
        let x0 = v.x0.unwrap();
        assert!((x0[0] - 0.41).abs() < 1e-8 && (x0[1] - 1.13).abs() < 1e-8);
    }

    #[test]
    fn tilted_sample_gradient_is_not_flagged_off_node() {
        let d = DomainSpec::new(BoundaryType::Dirichlet, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let g = build_grid(&d, 20).unwrap();
        let h = sample(&g, |x| -dist(x, &[0.537, 0.461]).powi(2));
        let v = vanishing_from_samples(&h, &g, &d).unwrap();
        assert!(v.flag, "{v:?}");
    }

    fn build_grid_axes_helper(d: &DomainSpec, r: &[usize]) -> Grid {
        crate::discretization::build_grid_axes(d, r).unwrap()
    }
}
