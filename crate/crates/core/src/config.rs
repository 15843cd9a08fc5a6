//! Scenario configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ads::{AdsConfig, Domain};
use crate::controllers::{AnalyticController, Controller, SirenNetwork};
use crate::flow::StepControl;
use crate::scenarios::{CwConfig, CwProblem, EarthMarsConfig, EarthMarsProblem};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioConfig {
    Cw(CwConfig),
    EarthMars(EarthMarsConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSource {
    /// No control (ballistic).
    None,
    Analytic { gains: Vec<Vec<f64>>, bias: Vec<f64>, saturation: f64 },
    /// Weights file, relative to the config file.
    Siren { weights: PathBuf },
    /// Weights embedded in the config.
    SirenInline { network: Value },
}

/// Root box over a subset of state components, physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub components: Vec<usize>,
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub scenario: ScenarioConfig,
    pub controller: ControllerSource,
    pub domain: DomainConfig,
    #[serde(default)]
    pub ads: AdsConfig,
    #[serde(default)]
    pub integrator: StepControl,
    /// Divisors applied to the internal-unit event state before the
    /// truncation-error estimate; all ones when absent.
    #[serde(default)]
    pub error_scales: Option<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// A configured scenario ready to run.
#[derive(Debug, Clone)]
pub enum Scenario {
    Cw(CwProblem),
    EarthMars(EarthMarsProblem),
}

/// Runs `$body` with `$p` bound to the concrete problem.
#[macro_export]
macro_rules! with_problem {
    ($scenario:expr, $p:ident => $body:expr) => {
        match $scenario {
            $crate::config::Scenario::Cw($p) => $body,
            $crate::config::Scenario::EarthMars($p) => $body,
        }
    };
}

impl ScenarioSpec {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let spec: ScenarioSpec = serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads a config and embeds any referenced weights file, so the
    /// result is self-contained.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut spec = Self::from_json_str(&text)?;
        if let ControllerSource::Siren { weights } = &spec.controller {
            let wpath = path.parent().unwrap_or(Path::new(".")).join(weights);
            let net = SirenNetwork::load(&wpath).map_err(|e| ConfigError::Invalid(format!("controller weights: {e}")))?;
            spec.controller = ControllerSource::SirenInline { network: net.to_json() };
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        self.ads.validate().map_err(ConfigError::Invalid)?;
        self.integrator.validate().map_err(ConfigError::Invalid)?;
        let d = &self.domain;
        if d.components.is_empty() || d.components.len() != d.center.len() || d.components.len() != d.half_width.len() {
            return bad("domain components, center and half_width must have equal non-zero length".into());
        }
        let dim = match &self.scenario {
            ScenarioConfig::Cw(_) => 4,
            ScenarioConfig::EarthMars(_) => 7,
        };
        let mut seen = vec![false; dim];
        for &c in &d.components {
            if c >= dim || seen[c] {
                return bad(format!("domain component {c} is out of range or repeated"));
            }
            seen[c] = true;
        }
        Domain::new(d.center.clone(), d.half_width.clone()).map_err(ConfigError::Invalid)?;
        if let Some(s) = &self.error_scales {
            if s.len() != dim || s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad(format!("error_scales needs {dim} positive entries"));
            }
        }
        match &self.scenario {
            ScenarioConfig::Cw(c) => c.validate().map_err(ConfigError::Invalid)?,
            ScenarioConfig::EarthMars(c) => c.validate().map_err(ConfigError::Invalid)?,
        }
        Ok(())
    }

    pub fn root_domain(&self) -> Domain {
        Domain::new(self.domain.center.clone(), self.domain.half_width.clone()).expect("validated")
    }

    pub fn controller(&self) -> Result<Option<Controller>, ConfigError> {
        let err = |e: crate::controllers::ControllerError| ConfigError::Invalid(format!("controller: {e}"));
        Ok(match &self.controller {
            ControllerSource::None => None,
            ControllerSource::Analytic { gains, bias, saturation } => {
                let a = AnalyticController { gains: gains.clone(), bias: bias.clone(), saturation: *saturation };
                a.validate().map_err(err)?;
                Some(Controller::Analytic(a))
            }
            ControllerSource::SirenInline { network } => Some(Controller::Siren(SirenNetwork::from_json(network).map_err(err)?)),
            ControllerSource::Siren { weights } => {
                return Err(ConfigError::Invalid(format!(
                    "weights path {} must be resolved by loading the config from a file",
                    weights.display()
                )))
            }
        })
    }

    pub fn build(&self) -> Result<Scenario, ConfigError> {
        let ctrl = self.controller()?;
        Ok(match &self.scenario {
            ScenarioConfig::Cw(c) => Scenario::Cw(CwProblem::new(c.clone(), ctrl, self.integrator).map_err(ConfigError::Invalid)?),
            ScenarioConfig::EarthMars(c) => {
                Scenario::EarthMars(EarthMarsProblem::new(c.clone(), ctrl, self.integrator).map_err(ConfigError::Invalid)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "scenario": {"kind": "cw", "mean_motion": 7.29e-5, "thrust_accel": 1e-4, "max_tof": 14400,
                     "nominal_state": [500, -500, 0, 0]},
        "controller": {"kind": "none"},
        "domain": {"components": [0, 1], "center": [500, -500], "half_width": [55, 150]}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let spec = ScenarioSpec::from_json_str(MINIMAL).unwrap();
        assert_eq!(spec.ads, AdsConfig::default());
        assert!(matches!(spec.build().unwrap(), Scenario::Cw(_)));
    }

    #[test]
    fn schema_violations_are_rejected() {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        v["domain"]["components"] = serde_json::json!([0, 7]);
        assert!(ScenarioSpec::from_json_str(&v.to_string()).is_err());
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        v["surprise"] = serde_json::json!(1);
        assert!(ScenarioSpec::from_json_str(&v.to_string()).is_err());
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        v["schema_version"] = serde_json::json!(9);
        assert!(ScenarioSpec::from_json_str(&v.to_string()).is_err());
    }
}
