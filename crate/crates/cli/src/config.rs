//! Versioned run configuration with dotted-key overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use dkg_core::gamma::{GammaSet, InteractionPair};
use dkg_core::picard::{IterationConfig, XNormConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config is not valid: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ConfigError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub half_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Masses {
    pub dirac: f64,
    pub kg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub epsilon: f64,
    pub sigma: f64,
    pub seed: u64,
}

/// A named preset or a JSON file holding `{"f": …, "h": …}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dirac_masses: Vec<f64>,
    pub kg_masses: Vec<f64>,
    /// Decay-fit window.
    pub window: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    pub resolutions: Vec<usize>,
    pub half_length: f64,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub grid: GridConfig,
    pub masses: Masses,
    pub data: DataConfig,
    pub interaction: InteractionConfig,
    pub time: TimeConfig,
    pub x_norm: XNormConfig,
    pub iteration: IterationConfig,
    pub sweep: SweepConfig,
    pub identities: IdentityConfig,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            grid: GridConfig { n: 16, half_length: 8.0 },
            masses: Masses { dirac: 0.5, kg: 0.5 },
            data: DataConfig {
                epsilon: 0.01,
                sigma: 1.0,
                seed: 1,
            },
            interaction: InteractionConfig {
                preset: Some("identity-gamma0".into()),
                file: None,
            },
            time: TimeConfig { t_max: 4.0, dt: 0.25 },
            x_norm: XNormConfig::default(),
            iteration: IterationConfig {
                tol: 1e-7,
                max_iter: 20,
                ball_cap: None,
            },
            sweep: SweepConfig {
                dirac_masses: vec![0.0, 0.25, 0.5, 0.75, 1.0],
                kg_masses: vec![0.0, 0.25, 0.5, 0.75, 1.0],
                window: (2.0, 4.0),
            },
            identities: IdentityConfig {
                resolutions: vec![16, 32],
                half_length: 8.0,
                time: 0.5,
            },
            out: PathBuf::from("out"),
        }
    }
}

/// Parses `key=value`, where the value is JSON when it parses as JSON and a
/// string otherwise.
pub fn parse_override(raw: &str) -> Result<(String, Value), ConfigError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| ConfigError::field(raw, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::field(raw, "empty override key"));
    }
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((key.to_string(), value))
}

/// Sets a dotted key inside `doc`; every segment but the last must exist.
pub fn apply_override(doc: &mut Value, key: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ConfigError::field(parts[..i].join("."), "is not a table"))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*part) {
                return Err(ConfigError::field(key, "unknown key"));
            }
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .get_mut(*part)
            .ok_or_else(|| ConfigError::field(parts[..=i].join("."), "unknown key"))?;
    }
    unreachable!("split yields at least one segment")
}

impl RunConfig {
    /// Defaults, then the file (if any), then the overrides, then validation.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
        let mut doc = serde_json::to_value(RunConfig::default())?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            let file: Value = serde_json::from_str(&text)?;
            merge(&mut doc, file);
        }
        for raw in overrides {
            let (key, value) = parse_override(raw)?;
            apply_override(&mut doc, &key, value)?;
        }
        let cfg: RunConfig = serde_json::from_value(doc)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::field(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.grid.n < 4 || self.grid.n % 2 != 0 {
            return Err(ConfigError::field("grid.n", "must be even and at least 4"));
        }
        if !(self.grid.half_length > 0.0) {
            return Err(ConfigError::field("grid.half_length", "must be positive"));
        }
        for (name, m) in [("masses.dirac", self.masses.dirac), ("masses.kg", self.masses.kg)] {
            if !(0.0..=1.0).contains(&m) {
                return Err(ConfigError::field(name, format!("{m} is outside [0, 1]")));
            }
        }
        for m in self.sweep.dirac_masses.iter().chain(&self.sweep.kg_masses) {
            if !(0.0..=1.0).contains(m) {
                return Err(ConfigError::field("sweep", format!("mass {m} is outside [0, 1]")));
            }
        }
        if !(self.data.epsilon > 0.0 && self.data.epsilon.is_finite()) {
            return Err(ConfigError::field("data.epsilon", "must be positive"));
        }
        if !(self.data.sigma > 0.0) {
            return Err(ConfigError::field("data.sigma", "must be positive"));
        }
        if !(self.time.dt > 0.0) || !(self.time.t_max > 0.0) {
            return Err(ConfigError::field("time", "t_max and dt must be positive"));
        }
        if 4.0 * self.data.sigma + self.time.t_max > self.grid.half_length + 1e-12 {
            return Err(ConfigError::field(
                "time.t_max",
                format!(
                    "4 sigma + t_max = {} exceeds the half length {}; waves would wrap around the box",
                    4.0 * self.data.sigma + self.time.t_max,
                    self.grid.half_length
                ),
            ));
        }
        self.x_norm
            .validate()
            .map_err(|e| ConfigError::field("x_norm", e.to_string()))?;
        if !(self.iteration.tol > 0.0) || self.iteration.max_iter == 0 {
            return Err(ConfigError::field("iteration", "tol must be positive and max_iter nonzero"));
        }
        match (&self.interaction.preset, &self.interaction.file) {
            (Some(p), None) if PRESETS.contains(&p.as_str()) => {}
            (Some(p), None) => {
                return Err(ConfigError::field(
                    "interaction.preset",
                    format!("unknown preset `{p}` (known: {})", PRESETS.join(", ")),
                ))
            }
            (None, Some(_)) => {}
            _ => {
                return Err(ConfigError::field(
                    "interaction",
                    "give exactly one of `preset` and `file`",
                ))
            }
        }
        Ok(())
    }

    pub fn interaction_pair(&self, gamma: &GammaSet) -> Result<InteractionPair, ConfigError> {
        let pair = match (&self.interaction.preset, &self.interaction.file) {
            (Some(p), _) if p == "identity-gamma0" => InteractionPair::identity_gamma0(gamma),
            (Some(p), _) if p == "decoupled" => InteractionPair::decoupled(),
            (_, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| ConfigError::field("interaction.file", e.to_string()))?
            }
            _ => return Err(ConfigError::field("interaction", "no interaction selected")),
        };
        let (f_defect, h_defect) = pair.validate(gamma);
        if f_defect > 1e-12 || h_defect > 1e-12 {
            return Err(ConfigError::field(
                "interaction",
                format!("γ⁰F and H must be Hermitian (defects {f_defect:e}, {h_defect:e})"),
            ));
        }
        Ok(pair)
    }
}

pub const PRESETS: [&str; 2] = ["identity-gamma0", "decoupled"];

/// Recursive merge of `patch` into `base`; tables merge, other values replace.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::load(None, &["grid.n=8".into(), "out=/tmp/x".into(), "x_norm.k=1".into()]).unwrap();
        assert_eq!(cfg.grid.n, 8);
        assert_eq!(cfg.out, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.x_norm.k, 1);
    }

    #[test]
    fn violations_name_the_field() {
        let err = RunConfig::load(None, &["masses.kg=1.5".into()]).unwrap_err();
        assert!(err.to_string().contains("masses.kg"), "{err}");
        let err = RunConfig::load(None, &["time.t_max=6".into()]).unwrap_err();
        assert!(err.to_string().contains("time.t_max"), "{err}");
        let err = RunConfig::load(None, &["grid.bogus=1".into()]).unwrap_err();
        assert!(err.to_string().contains("grid.bogus"), "{err}");
        let err = RunConfig::load(None, &["data.epsilon=0".into()]).unwrap_err();
        assert!(err.to_string().contains("data.epsilon"), "{err}");
    }
}
