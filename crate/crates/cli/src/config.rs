//! Run configuration: strict TOML with dotted-key overrides.

use std::path::Path;

use percolab::distributions::{MomentCondition, RadiusLaw};
use percolab::experiments::{CheckerConfig, ExperimentConfig, MagnetizationMethod};
use percolab::field::{GhostField, GhostRegion};
use percolab::revealment::EventSpec;
use percolab::FieldConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Event of the revealment and entropic subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventConfig {
    OneArm { r: f64 },
    VolumeAtLeast { y: f64 },
    GhostConnection { rho: f64 },
}

impl EventConfig {
    pub fn to_spec(self, dim: usize, seed: u64) -> EventSpec {
        match self {
            EventConfig::OneArm { r } => EventSpec::OneArm(r),
            EventConfig::VolumeAtLeast { y } => EventSpec::VolumeAtLeast(y),
            EventConfig::GhostConnection { rho } => {
                EventSpec::GhostConnection(GhostField { rho, region: GhostRegion::Unbounded { dim }, seed })
            }
        }
    }
}

/// Everything a subcommand may read. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "defaults::dimension")]
    pub dimension: usize,
    #[serde(default = "defaults::radius_law")]
    pub radius_law: RadiusLaw,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::replicas")]
    pub replicas: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    /// Thinning ceiling shared by coupled runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_ceiling: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<EventConfig>,
    #[serde(default = "defaults::arm_radius")]
    pub arm_radius: f64,
    #[serde(default = "defaults::r_ladder")]
    pub r_ladder: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_grid: Option<Vec<f64>>,
    #[serde(default = "defaults::method")]
    pub method: MagnetizationMethod,
    #[serde(default = "defaults::window_radius")]
    pub window_radius: f64,
    #[serde(default = "defaults::ball_cap")]
    pub ball_cap: usize,
    #[serde(default = "defaults::max_steps")]
    pub max_steps: usize,
    #[serde(default = "defaults::eps_trunc")]
    pub eps_trunc: f64,
    #[serde(default = "defaults::crossing_target")]
    pub crossing_target: f64,
    #[serde(default = "defaults::tolerance")]
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_budget_secs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_c_hat: Option<f64>,
    #[serde(default = "defaults::beta0")]
    pub beta0: f64,
    #[serde(default = "defaults::c0")]
    pub c0: f64,
    #[serde(default)]
    pub c_floor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: String,
}

mod defaults {
    use super::*;

    pub fn dimension() -> usize {
        2
    }
    pub fn radius_law() -> RadiusLaw {
        RadiusLaw::Dirac { r0: 1.0 }
    }
    pub fn seed() -> u64 {
        1
    }
    pub fn replicas() -> usize {
        1000
    }
    pub fn arm_radius() -> f64 {
        8.0
    }
    pub fn r_ladder() -> Vec<f64> {
        vec![8.0, 16.0, 32.0]
    }
    pub fn method() -> MagnetizationMethod {
        MagnetizationMethod::Direct
    }
    pub fn window_radius() -> f64 {
        8.0
    }
    pub fn ball_cap() -> usize {
        50_000
    }
    pub fn max_steps() -> usize {
        200_000
    }
    pub fn eps_trunc() -> f64 {
        1e-6
    }
    pub fn crossing_target() -> f64 {
        0.5
    }
    pub fn tolerance() -> f64 {
        1e-3
    }
    pub fn beta0() -> f64 {
        1.0
    }
    pub fn c0() -> f64 {
        1.0
    }
    pub fn out_dir() -> String {
        "out".into()
    }
}

impl RunConfig {
    /// Parse the file (or the empty document), apply `key=value` overrides
    /// whose values are TOML literals, and deserialize strictly.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::new("io", format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut table: toml::Table = text.parse().map_err(|e| CliError::new("config", format!("{e}")))?;
        for (key, value) in overrides {
            set_path(&mut table, key, value)?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::new("config", e.message().to_string()))
    }

    /// Canonical JSON of the configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    /// Content hash `sha256("blob <len>\0" + canonical JSON)`, ignoring `out_dir`.
    pub fn hash(&self) -> String {
        let body = RunConfig { out_dir: String::new(), ..self.clone() }.canonical_json();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(body.as_bytes());
        hex::encode(h.finalize())
    }

    /// Check the radius law against the moment condition an operation needs.
    pub fn require(&self, condition: MomentCondition) -> Result<(), CliError> {
        self.radius_law.validate().map_err(CliError::from)?;
        self.radius_law.require(self.dimension, condition).map_err(CliError::from)
    }

    pub fn field(&self, lambda: f64) -> Result<FieldConfig, CliError> {
        FieldConfig::new(self.dimension, lambda, self.radius_law, self.seed).map_err(CliError::from)
    }

    pub fn experiment(&self, workers: usize) -> Result<ExperimentConfig, CliError> {
        let field = self.field(self.lambda_ceiling.unwrap_or(0.0))?;
        let cfg = ExperimentConfig {
            field,
            ball_cap: self.ball_cap,
            max_steps: self.max_steps,
            eps_trunc: self.eps_trunc,
            truncation_window: self.window_radius.max(1.0),
            workers,
        };
        cfg.validate().map_err(CliError::from)?;
        Ok(cfg)
    }

    pub fn lambda(&self) -> Result<f64, CliError> {
        self.lambda.ok_or_else(|| CliError::new("config", "missing key `lambda`"))
    }

    /// `lambda_grid`, or the single `lambda`.
    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        match (&self.lambda_grid, self.lambda) {
            (Some(g), _) => Ok(g.clone()),
            (None, Some(l)) => Ok(vec![l]),
            (None, None) => Err(CliError::new("config", "missing key `lambda` or `lambda_grid`")),
        }
    }

    /// `rho_grid`, or the single `rho`.
    pub fn rhos(&self) -> Result<Vec<f64>, CliError> {
        match (&self.rho_grid, self.rho) {
            (Some(g), _) => Ok(g.clone()),
            (None, Some(r)) => Ok(vec![r]),
            (None, None) => Err(CliError::new("config", "missing key `rho` or `rho_grid`")),
        }
    }

    pub fn event(&self) -> Result<EventConfig, CliError> {
        self.event.ok_or_else(|| CliError::new("config", "missing key `event`"))
    }

    pub fn checker(&self, lambda_c_hat: f64) -> CheckerConfig {
        let mut c = CheckerConfig::new(lambda_c_hat);
        c.beta0 = self.beta0;
        c.c0 = self.c0;
        c.c_floor = self.c_floor;
        c.arm_radius = self.arm_radius;
        c.replicas = self.replicas;
        if let Some(g) = &self.lambda_grid {
            c.lambda_grid = g.clone();
        }
        if let Some(g) = &self.y_grid {
            c.y_grid = g.clone();
        }
        if let Some(g) = &self.rho_grid {
            c.rho_grid = g.clone();
        }
        c
    }
}

fn set_path(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), CliError> {
    let value: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::new("config", "empty override key"))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::new("config", format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert_eq!(c.dimension, 2);
        let back: RunConfig = serde_json::from_str(&c.canonical_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn overrides_and_strictness() {
        let o = vec![
            ("lambda".to_string(), "0.5".to_string()),
            ("radius_law".to_string(), "{ kind = \"uniform\", params = { a = 0.5, b = 1.5 } }".to_string()),
            ("event.kind".to_string(), "one_arm".to_string()),
            ("event.r".to_string(), "3".to_string()),
        ];
        let c = RunConfig::load(None, &o).unwrap();
        assert_eq!(c.lambda, Some(0.5));
        assert_eq!(c.event, Some(EventConfig::OneArm { r: 3.0 }));
        assert!(matches!(c.radius_law, RadiusLaw::Uniform { .. }));
        let bad = RunConfig::load(None, &[("lamda".to_string(), "1".to_string())]);
        assert!(bad.is_err());
    }
}
