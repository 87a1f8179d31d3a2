use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest tolerated deviation of the radial quadrature mass from one.
pub const MASS_TOLERANCE: f64 = 1e-8;

/// Built-in radially symmetric profiles supported on the unit ball.
///
/// Every profile is `c (1 - |z|^2)^p` on `|z| < 1`, normalised to unit mass
/// in the requested dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelProfile {
    /// `p = 3`, continuously differentiable across the support boundary.
    Bump,
    /// `p = 1`, continuous but with a kink at the support boundary.
    Epanechnikov,
    /// General exponent `p >= 1`.
    Polynomial(u32),
}

impl KernelProfile {
    pub fn exponent(self) -> u32 {
        match self {
            KernelProfile::Bump => 3,
            KernelProfile::Epanechnikov => 1,
            KernelProfile::Polynomial(p) => p,
        }
    }

    /// Normalising constant `c_N` such that the profile has unit mass in `dim` dimensions.
    ///
    /// `int_{|z|<1} (1-|z|^2)^p dz = pi^{N/2} Gamma(p+1) / Gamma(N/2 + p + 1)`.
    pub fn normalisation(self, dim: usize) -> f64 {
        let p = self.exponent();
        let mass = PI.powf(dim as f64 / 2.0) * gamma_half(2 * p + 2) / gamma_half(dim as u32 + 2 * p + 2);
        1.0 / mass
    }
}

impl fmt::Display for KernelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelProfile::Bump => f.write_str("bump"),
            KernelProfile::Epanechnikov => f.write_str("epanechnikov"),
            KernelProfile::Polynomial(p) => write!(f, "poly:{p}"),
        }
    }
}

impl FromStr for KernelProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bump" => Ok(KernelProfile::Bump),
            "epanechnikov" => Ok(KernelProfile::Epanechnikov),
            other => {
                if let Some(p) = other.strip_prefix("poly:") {
                    match p.parse::<u32>() {
                        Ok(p) if p >= 1 => Ok(KernelProfile::Polynomial(p)),
                        _ => Err(Error::UnknownProfile(other.to_string())),
                    }
                } else {
                    Err(Error::UnknownProfile(other.to_string()))
                }
            }
        }
    }
}

impl Serialize for KernelProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KernelProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `Gamma(n / 2)` for a positive integer `n`.
fn gamma_half(n: u32) -> f64 {
    debug_assert!(n > 0);
    if n % 2 == 0 {
        (1..n / 2).map(f64::from).product()
    } else {
        // Gamma(1/2) = sqrt(pi), Gamma(x + 1) = x Gamma(x)
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Rescaled dispersal kernel `kappa(z) = delta^{-N} profile(z / delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub profile: KernelProfile,
    pub delta: f64,
    pub dim: usize,
    pub support_radius: f64,
    norm: f64,
    scale: f64,
}

impl Kernel {
    /// Unscaled profile value at `z` (unit support).
    pub fn profile_value(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        self.profile_value_sq(r2)
    }

    fn profile_value_sq(&self, r2: f64) -> f64 {
        if r2 >= 1.0 {
            0.0
        } else {
            self.norm * (1.0 - r2).powi(self.profile.exponent() as i32)
        }
    }

    /// `kappa(z)`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        let scaled: Vec<f64> = z.iter().map(|v| v / self.delta).collect();
        self.profile_value(&scaled) / self.scale
    }

    /// `kappa` as a function of the squared distance, for assembly loops.
    pub fn eval_sq(&self, r2: f64) -> f64 {
        self.profile_value_sq(r2 / (self.delta * self.delta)) / self.scale
    }

    /// `kappa(0)`.
    pub fn peak(&self) -> f64 {
        self.norm / self.scale
    }

    /// Total mass from a Gauss-Legendre rule in the radial variable. The
    /// radial integrand is a polynomial, so the rule is exact up to rounding.
    pub fn quadrature_mass(&self) -> f64 {
        let n = self.dim as i32;
        let sphere = 2.0 * PI.powf(n as f64 / 2.0) / gamma_half(self.dim as u32);
        let (nodes, weights) = gauss_legendre(24);
        let r = self.support_radius;
        let radial: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&s, &w)| {
                let rho = 0.5 * r * (s + 1.0);
                w * self.eval_sq(rho * rho) * rho.powi(n - 1)
            })
            .sum::<f64>()
            * 0.5
            * r;
        sphere * radial
    }
}

/// Builds the kernel `delta^{-N} profile(z / delta)`.
pub fn build_kernel(profile: KernelProfile, delta: f64, dim: usize) -> Result<Kernel> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    if dim == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    let kernel = Kernel {
        profile,
        delta,
        dim,
        support_radius: delta,
        norm: profile.normalisation(dim),
        scale: delta.powi(dim as i32),
    };
    let mass = kernel.quadrature_mass();
    if (mass - 1.0).abs() >= MASS_TOLERANCE {
        return Err(invalid("profile", format!("quadrature mass {mass} is not 1")));
    }
    Ok(kernel)
}

/// Gauss-Legendre nodes and weights on [-1, 1] via Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_bump_constant() {
        assert!((KernelProfile::Bump.normalisation(1) - 35.0 / 32.0).abs() < 1e-14);
        assert!((KernelProfile::Epanechnikov.normalisation(1) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn unit_bump_has_unit_mass() {
        let k = build_kernel(KernelProfile::Bump, 1.0, 1).unwrap();
        assert_eq!(k.support_radius, 1.0);
        assert!((k.quadrature_mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn half_width_doubles_peak() {
        let k1 = build_kernel(KernelProfile::Bump, 1.0, 1).unwrap();
        let k = build_kernel(KernelProfile::Bump, 0.5, 1).unwrap();
        assert_eq!(k.support_radius, 0.5);
        assert_eq!(k.eval(&[0.0]), 2.0 * k1.eval(&[0.0]));
    }

    #[test]
    fn rescaling_is_exact() {
        for dim in 1..=3 {
            let k = build_kernel(KernelProfile::Bump, 0.37, dim).unwrap();
            let z: Vec<f64> = (0..dim).map(|i| 0.05 + 0.07 * i as f64).collect();
            let scaled: Vec<f64> = z.iter().map(|v| v / 0.37).collect();
            assert_eq!(k.eval(&z), k.profile_value(&scaled) / 0.37f64.powi(dim as i32));
        }
    }

    #[test]
    fn symmetric_in_two_dimensions() {
        let k = build_kernel(KernelProfile::Bump, 1.0, 2).unwrap();
        assert_eq!(k.eval(&[0.3, -0.2]), k.eval(&[-0.3, 0.2]));
        assert!(k.eval(&[0.0, 0.0]) > 0.0);
        assert_eq!(k.eval(&[0.8, 0.7]), 0.0);
    }

    #[test]
    fn masses_in_higher_dimensions() {
        for profile in [KernelProfile::Bump, KernelProfile::Epanechnikov, KernelProfile::Polynomial(5)] {
            for dim in 1..=4 {
                let k = build_kernel(profile, 0.8, dim).unwrap();
                assert!((k.quadrature_mass() - 1.0).abs() < 1e-10, "{profile} {dim}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!("gauss".parse::<KernelProfile>(), Err(Error::UnknownProfile(_))));
        assert!("poly:0".parse::<KernelProfile>().is_err());
        assert!(build_kernel(KernelProfile::Bump, 0.0, 1).is_err());
        assert!(build_kernel(KernelProfile::Bump, -1.0, 1).is_err());
    }

    #[test]
    fn profile_names_round_trip() {
        for p in [KernelProfile::Bump, KernelProfile::Epanechnikov, KernelProfile::Polynomial(4)] {
            assert_eq!(p.to_string().parse::<KernelProfile>().unwrap(), p);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((integral - 2.0 / 19.0).abs() < 1e-14);
    }
}
