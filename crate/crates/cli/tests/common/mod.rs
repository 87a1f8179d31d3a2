#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn config_path(name: &str) -> PathBuf {
    manifest_dir().join("configs").join(format!("{name}.toml"))
}

pub fn fixture_path() -> PathBuf {
    manifest_dir().join("tests/fixtures/dense_oracle_dirichlet_k2.json")
}

/// Runs the `nlpe` binary with `args` followed by `--config` and `--out`.
pub fn nlpe(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlpe"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseOracle {
    pub nodes: usize,
    pub time_steps: usize,
    pub lambda: f64,
    pub radius: f64,
    /// Node-major, unit Euclidean norm, positive.
    pub eigenfunction: Vec<f64>,
}

const NODES: usize = 16;
const STEPS: usize = 128;
const DELTA: f64 = 0.3;

/// Coupling of `configs/dirichlet_k2_16.toml`, written out by hand.
fn coupling(t: f64, x: f64) -> [[f64; 2]; 2] {
    let (s, c) = ((2.0 * PI * t).sin(), (2.0 * PI * t).cos());
    [[x + 0.5 * s, 1.0 + 0.5 * c], [0.5 + x * x, -x]]
}

/// Dense generator at time `t`: midpoint Nystrom matrix of the bump kernel
/// on (0, 1), minus the identity, plus the pointwise coupling.
fn generator(t: f64) -> DMatrix<f64> {
    let h = 1.0 / NODES as f64;
    let x = |i: usize| (i as f64 + 0.5) * h;
    let kernel = |z: f64| {
        let r = z / DELTA;
        if r.abs() < 1.0 {
            35.0 / 32.0 * (1.0 - r * r).powi(3) / DELTA
        } else {
            0.0
        }
    };
    let mut g = DMatrix::zeros(2 * NODES, 2 * NODES);
    for i in 0..NODES {
        for j in 0..NODES {
            let k = kernel(x(j) - x(i)) * h;
            for c in 0..2 {
                g[(2 * i + c, 2 * j + c)] += k;
            }
        }
        let a = coupling(t, x(i));
        for r in 0..2 {
            g[(2 * i + r, 2 * i + r)] -= 1.0;
            for c in 0..2 {
                g[(2 * i + r, 2 * i + c)] += a[r][c];
            }
        }
    }
    g
}

/// Product of classical RK4 step matrices over one period, then the top
/// eigenvalue from the Schur form and its null vector from an SVD.
pub fn dense_oracle() -> DenseOracle {
    let n = 2 * NODES;
    let dt = 1.0 / STEPS as f64;
    let id = DMatrix::<f64>::identity(n, n);
    let mut p = id.clone();
    for s in 0..STEPS {
        let t = s as f64 * dt;
        let (g0, g1, g2) = (generator(t), generator(t + dt / 2.0), generator(t + dt));
        let k1 = &g0;
        let k2 = &g1 * (&id + k1 * (dt / 2.0));
        let k3 = &g1 * (&id + &k2 * (dt / 2.0));
        let k4 = &g2 * (&id + &k3 * dt);
        let step = &id + (k1 + &k2 * 2.0 + &k3 * 2.0 + k4) * (dt / 6.0);
        p = step * p;
    }
    let radius = p
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let svd = (&p - &id * radius).svd(false, true);
    let v_t = svd.v_t.unwrap();
    let (row, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let mut psi: Vec<f64> = v_t.row(row).iter().copied().collect();
    if psi.iter().sum::<f64>() < 0.0 {
        psi.iter_mut().for_each(|v| *v = -*v);
    }
    let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|v| *v /= norm);
    DenseOracle {
        nodes: NODES,
        time_steps: STEPS,
        lambda: radius.ln(),
        radius,
        eigenfunction: psi,
    }
}

pub fn load_fixture() -> DenseOracle {
    serde_json::from_str(&std::fs::read_to_string(fixture_path()).unwrap()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
