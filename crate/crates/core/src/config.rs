//! TOML run configuration with dotted-key overrides.
//!
//! Every table is optional and every omitted key takes its default, so an
//! empty document is a valid configuration. Unknown keys are rejected.
//!
//! ```
//! use pa_mppi::config::RunConfig;
//!
//! let mut cfg = RunConfig::from_toml_str("[mppi]\nsamples = 512\n").unwrap();
//! cfg.set("episode.scene", "cwall:2.0").unwrap();
//! cfg.set("mppi.temperature", "0.1").unwrap();
//! assert_eq!(cfg.mppi.samples, 512);
//! assert_eq!(cfg.episode.scene.size, 2.0);
//! assert!(cfg.set("mppi.no_such_key", "1").is_err());
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::costs::CostParams;
use crate::dynamics::QuadParams;
use crate::error::{Error, Result};
use crate::mppi::MppiConfig;
use crate::reference::TrackingParams;
use crate::simulation::{BatchConfig, Controller, EpisodeConfig, EpisodeSetup};
use crate::world::{CameraIntrinsics, SceneFamily};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub quad: QuadParams,
    pub mppi: MppiConfig,
    pub costs: CostParams,
    pub camera: CameraIntrinsics,
    pub tracking: TrackingParams,
    pub episode: EpisodeConfig,
    pub batch: BatchConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Renders the full configuration, defaults included.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.setup().validate()
    }

    /// The parameter blocks of a single episode.
    pub fn setup(&self) -> EpisodeSetup {
        EpisodeSetup {
            quad: self.quad.clone(),
            mppi: self.mppi.clone(),
            costs: self.costs.clone(),
            camera: self.camera.clone(),
            tracking: self.tracking.clone(),
            episode: self.episode.clone(),
        }
    }

    /// Overrides one key. `key` is a dotted path such as `mppi.samples` and
    /// `value` is a TOML literal; bare words are taken as strings. Two
    /// shorthands are accepted: `controller` for `episode.controller`
    /// and `scene = family:size` (or `episode.scene = family:size`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "controller" => {
                self.episode.controller = value.parse::<Controller>()?;
                return Ok(());
            }
            "scene" | "episode.scene" if value.contains(':') => {
                let (family, size) = value.split_once(':').unwrap_or_default();
                let mut updated = self.clone();
                updated.episode.scene.family = family.parse::<SceneFamily>()?;
                updated.episode.scene.size = size
                    .parse()
                    .map_err(|_| Error::Config(format!("scene size `{size}` is not a number")))?;
                updated.validate()?;
                *self = updated;
                return Ok(());
            }
            _ => {}
        }

        let mut doc = Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut node = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{}` is not a table", parts[..i].join("."))))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), parse_literal(value));
                break;
            }
            node = table
                .get_mut(*part)
                .ok_or_else(|| Error::Config(format!("unknown key `{}`", parts[..=i].join("."))))?;
        }
        let updated: Self = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}: {}", e.message())))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for item in overrides {
            let item = item.as_ref();
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }
}

fn parse_literal(value: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("mppi.samples", "1024").unwrap();
        cfg.set("scene", "hole:1.0").unwrap();
        cfg.set("controller", "tracking-mppi").unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("[mppi]\nsample = 3\n").is_err());
        assert!(RunConfig::from_toml_str("[nope]\n").is_err());
        let mut cfg = RunConfig::default();
        assert!(cfg.set("quad.mas", "1.0").is_err());
        assert!(cfg.set("nope.x", "1").is_err());
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn overrides_are_typed() {
        let mut cfg = RunConfig::default();
        cfg.apply_overrides(&["mppi.sigma=[0.5, 0.5, 0.5, 0.5]", "episode.scene.family=fourwall"]).unwrap();
        assert_eq!(cfg.mppi.sigma, [0.5; 4]);
        assert_eq!(cfg.episode.scene.family, SceneFamily::Fourwall);
        assert!(cfg.set("mppi.samples", "\"many\"").is_err());
        assert!(cfg.set("mppi.samples", "0").is_err());
        assert!(cfg.apply_overrides(&["mppi.samples"]).is_err());
    }

    #[test]
    fn invalid_values_leave_config_unchanged() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("mppi.temperature", "-1.0").is_err());
        assert!(cfg.set("scene", "cwall:wide").is_err());
        assert_eq!(cfg, RunConfig::default());
    }
}
