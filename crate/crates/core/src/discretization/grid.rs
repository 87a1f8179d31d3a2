use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// The three nonlocal boundary types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryType {
    /// Mass leaving the closed domain is lost.
    Dirichlet,
    /// Dispersal only redistributes mass inside the domain.
    Neumann,
    /// Spatially periodic problem on the whole space, reduced to one cell.
    Periodic,
}

impl BoundaryType {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryType::Dirichlet => "dirichlet",
            BoundaryType::Neumann => "neumann",
            BoundaryType::Periodic => "periodic",
        }
    }
}

/// Axis-aligned box carrying the boundary type. For the periodic type the
/// box is one periodicity cell and its extents are the periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub boundary: BoundaryType,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainSpec {
    pub fn new(boundary: BoundaryType, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let spec = DomainSpec {
            boundary,
            lower,
            upper,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The cell `[0, p_1] x ... x [0, p_N]`.
    pub fn periodic(periods: Vec<f64>) -> Result<Self> {
        let lower = vec![0.0; periods.len()];
        Self::new(BoundaryType::Periodic, lower, periods)
    }

    pub fn unit_interval(boundary: BoundaryType) -> Self {
        DomainSpec {
            boundary,
            lower: vec![0.0],
            upper: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::DimensionMismatch(format!(
                "box bounds have lengths {} and {}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if !(u - l > 0.0) || !l.is_finite() || !u.is_finite() {
                return Err(invalid("box", format!("degenerate extent [{l}, {u}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn extents(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    /// Periods `p_l`; only meaningful for the periodic type.
    pub fn periods(&self) -> Option<Vec<f64>> {
        (self.boundary == BoundaryType::Periodic).then(|| self.extents())
    }

    pub fn volume(&self) -> f64 {
        self.extents().iter().product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&v, (&l, &u))| {
                let slack = 1e-12 * (u - l);
                v >= l - slack && v <= u + slack
            })
    }
}

/// Tensor midpoint grid: nodes are cell centres, weights cell volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    /// Nodes per axis.
    pub resolution: Vec<usize>,
    pub spacing: Vec<f64>,
    pub lower: Vec<f64>,
    /// Row-major node coordinates, `dim` values per node; the last axis varies fastest.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, m: usize) -> &[f64] {
        &self.nodes[m * self.dim..(m + 1) * self.dim]
    }

    /// Per-axis indices of node `m`.
    pub fn multi_index(&self, mut m: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for axis in (0..self.dim).rev() {
            idx[axis] = m % self.resolution[axis];
            m /= self.resolution[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn build_grid(domain: &DomainSpec, resolution: usize) -> Result<Grid> {
    build_grid_axes(domain, &vec![resolution; domain.dim()])
}

/// Midpoint grid with a separate node count per axis. For the periodic type
/// the nodes tile the cell once, so the wrapped endpoint is never duplicated.
pub fn build_grid_axes(domain: &DomainSpec, resolution: &[usize]) -> Result<Grid> {
    domain.validate()?;
    if resolution.len() != domain.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} resolutions for a {}-dimensional box",
            resolution.len(),
            domain.dim()
        )));
    }
    if let Some(&n) = resolution.iter().find(|&&n| n < 2) {
        return Err(invalid("resolution", format!("need at least 2 nodes per axis, got {n}")));
    }
    let dim = domain.dim();
    let spacing: Vec<f64> = domain
        .extents()
        .iter()
        .zip(resolution)
        .map(|(e, &n)| e / n as f64)
        .collect();
    let count: usize = resolution.iter().product();
    let weight: f64 = spacing.iter().product();
    let mut nodes = Vec::with_capacity(count * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..count {
        for axis in 0..dim {
            nodes.push(domain.lower[axis] + (idx[axis] as f64 + 0.5) * spacing[axis]);
        }
        for axis in (0..dim).rev() {
            idx[axis] += 1;
            if idx[axis] < resolution[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    Ok(Grid {
        dim,
        resolution: resolution.to_vec(),
        spacing,
        lower: domain.lower.clone(),
        nodes,
        weights: vec![weight; count],
    })
}
