//! TOML run configuration.

use std::path::{Path, PathBuf};

use nlpe_core::criteria::CriteriaOptions;
use nlpe_core::{BoundaryType, CouplingSpec, DomainSpec, KernelSpec, Numerics, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub boundary: BoundaryType,
    /// Box corners for the dirichlet and neumann types.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    /// Cell lengths for the periodic type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingBlock {
    /// Number of components; checked against the matrix when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    pub period: f64,
    pub matrix: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandBlock {
    /// Run the Birman-Schwinger route next to the monodromy route.
    pub birman_schwinger: bool,
    /// Kernel radii for the small-delta sweep of `criteria`.
    pub deltas: Vec<f64>,
    /// Grow the resolution like `1 / delta` in the sweep.
    pub scale_resolution: bool,
    /// Refinement levels for `convergence`.
    pub levels: usize,
}

impl Default for CommandBlock {
    fn default() -> Self {
        CommandBlock {
            birman_schwinger: true,
            deltas: Vec::new(),
            scale_resolution: true,
            levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: PathBuf::from(".") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainBlock,
    pub kernel: KernelSpec,
    pub coupling: CouplingBlock,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub command: CommandBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

fn config_error(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::config(format!("`{field}` {reason}"))
}

fn positive_list(field: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(config_error(field, "must not be empty"));
    }
    if let Some(x) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(config_error(field, format!("entries must be positive, got {x}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Field-level checks with messages naming the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.domain;
        match d.boundary {
            BoundaryType::Periodic => {
                let p = d.periods.as_ref().ok_or_else(|| config_error("domain.periods", "is required for the periodic type"))?;
                positive_list("domain.periods", p)?;
                if d.lower.is_some() || d.upper.is_some() {
                    return Err(config_error("domain.lower", "is not used for the periodic type; give domain.periods"));
                }
            }
            _ => {
                let upper = d.upper.as_ref().ok_or_else(|| config_error("domain.upper", "is required"))?;
                let lower = d.lower.clone().unwrap_or_else(|| vec![0.0; upper.len()]);
                if upper.is_empty() || lower.len() != upper.len() {
                    return Err(config_error("domain.lower", "must have as many entries as domain.upper"));
                }
                if lower.iter().zip(upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                    return Err(config_error("domain.upper", "must exceed domain.lower in every coordinate"));
                }
                if d.periods.is_some() {
                    return Err(config_error("domain.periods", "is only used for the periodic type"));
                }
            }
        }
        if !(self.kernel.delta > 0.0) || !self.kernel.delta.is_finite() {
            return Err(config_error("kernel.delta", format!("must be positive, got {}", self.kernel.delta)));
        }
        let c = &self.coupling;
        if !(c.period > 0.0) || !c.period.is_finite() {
            return Err(config_error("coupling.period", format!("must be positive, got {}", c.period)));
        }
        let k = c.matrix.len();
        if k == 0 || c.matrix.iter().any(|row| row.len() != k) {
            return Err(config_error("coupling.matrix", "must be a non-empty square array of expressions"));
        }
        if let Some(size) = c.size {
            if size != k {
                return Err(config_error("coupling.size", format!("is {size} but the matrix is {k} x {k}")));
            }
        }
        self.numerics.validate().map_err(|e| match e {
            nlpe_core::Error::InvalidParameter { name, reason } => config_error(name, reason),
            other => CliError::config(other.to_string()),
        })?;
        if self.numerics.resolution.len() != 1 && self.numerics.resolution.len() != self.dim() {
            return Err(config_error("numerics.resolution", "needs one entry or one per axis"));
        }
        if !self.command.deltas.is_empty() {
            positive_list("command.deltas", &self.command.deltas)?;
        }
        if self.command.levels < 2 {
            return Err(config_error("command.levels", "must be at least 2"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.domain.periods {
            Some(p) => p.len(),
            None => self.domain.upper.as_ref().map_or(0, Vec::len),
        }
    }

    pub fn domain_spec(&self) -> Result<DomainSpec, CliError> {
        let d = &self.domain;
        let spec = match d.boundary {
            BoundaryType::Periodic => DomainSpec::periodic(d.periods.clone().unwrap_or_default()),
            b => {
                let upper = d.upper.clone().unwrap_or_default();
                let lower = d.lower.clone().unwrap_or_else(|| vec![0.0; upper.len()]);
                DomainSpec::new(b, lower, upper)
            }
        };
        spec.map_err(CliError::from)
    }

    pub fn system(&self) -> Result<SystemSpec, CliError> {
        Ok(SystemSpec {
            domain: self.domain_spec()?,
            kernel: self.kernel.clone(),
            coupling: CouplingSpec {
                period: self.coupling.period,
                matrix: self.coupling.matrix.clone(),
            },
            numerics: self.numerics.clone(),
        })
    }

    pub fn criteria_options(&self) -> CriteriaOptions {
        CriteriaOptions {
            deltas: self.command.deltas.clone(),
            scale_resolution: self.command.scale_resolution,
            birman_schwinger: self.command.birman_schwinger,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[domain]
boundary = "dirichlet"
upper = [1.0]

[kernel]
profile = "bump"
delta = 0.3

[coupling]
size = 2
period = 1.0
matrix = [["x1", "1"], ["1", "x1 + sin_t"]]

[numerics]
resolution = [24]
time_steps = 128
"#;

    #[test]
    fn round_trip() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.numerics.power_tol, Numerics::default().power_tol);
        assert_eq!(cfg.system().unwrap().domain.lower, vec![0.0]);
    }

    #[test]
    fn negative_period_names_the_field() {
        let bad = SAMPLE.replace("period = 1.0", "period = -1.0");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert_eq!(e.code, 1);
        assert!(e.message.contains("coupling.period"), "{}", e.message);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SAMPLE.replace("time_steps = 128", "time_steps = 128\nspeed = 3");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert!(e.message.contains("speed"), "{}", e.message);
    }

    #[test]
    fn size_must_match_matrix() {
        let bad = SAMPLE.replace("size = 2", "size = 3");
        assert!(RunConfig::parse(&bad).unwrap_err().message.contains("coupling.size"));
    }

    #[test]
    fn numerics_errors_name_the_field() {
        let bad = SAMPLE.replace("time_steps = 128", "time_steps = 128\npower_tol = -1.0");
        assert!(RunConfig::parse(&bad).unwrap_err().message.contains("numerics.power_tol"));
    }

    #[test]
    fn periodic_needs_periods() {
        let bad = SAMPLE.replace("boundary = \"dirichlet\"", "boundary = \"periodic\"");
        assert!(RunConfig::parse(&bad).unwrap_err().message.contains("domain.periods"));
    }
}
