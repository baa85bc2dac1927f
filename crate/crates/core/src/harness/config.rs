use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::TripParams;
use crate::environment::TransitionTable;
use crate::error::{Error, Result};
use crate::CONFIG_SCHEMA_VERSION;

pub const PAPER_BASELINE: &str = "paper-baseline";
pub const SAFER: &str = "safer";

/// A complete simulation setup. Every field has a default, so a config file
/// only needs the values it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub schema_version: u32,
    pub road_length: usize,
    pub seed: u64,
    pub replications: usize,
    /// Ground-truth road dynamics.
    pub road: TransitionTable,
    /// Values of p(clean -> puddle) visited by a sweep.
    pub sweep_grid: Vec<f64>,
    pub trip: TripParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            road_length: 1000,
            seed: 1,
            replications: 1000,
            road: TransitionTable::baseline(),
            sweep_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            trip: TripParams::default(),
        }
    }
}

impl SimConfig {
    pub fn paper_baseline() -> Self {
        Self::default()
    }

    /// Baseline with q_r = 0.25, q_p = 0.3 and q_d = 0.5.
    pub fn safer() -> Self {
        let mut c = Self::default();
        c.trip.thresholds.q_r = 0.25;
        c.trip.thresholds.q_p = 0.3;
        c.trip.thresholds.q_d = 0.5;
        c
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            PAPER_BASELINE => Some(Self::paper_baseline()),
            SAFER => Some(Self::safer()),
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("", e.to_string()))?;
        let config: SimConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("", e.to_string()))
    }

    /// A built-in profile name or a path to a TOML file.
    pub fn load(source: &str) -> Result<Self> {
        if let Some(c) = Self::builtin(source) {
            return Ok(c);
        }
        let path = Path::new(source);
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (expected {CONFIG_SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.road_length == 0 {
            return Err(Error::config("road_length", "must be >= 1"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be >= 1"));
        }
        for (i, p) in self.sweep_grid.iter().enumerate() {
            self.road
                .with_clean_to_puddle(*p)
                .map_err(|e| Error::config(format!("sweep_grid[{i}]"), e.to_string()))?;
        }
        self.trip.validate("trip.")
    }

    /// Same config with the ground-truth p(clean -> puddle) replaced.
    pub fn with_puddle_rate(&self, p: f64) -> Result<Self> {
        Ok(Self { road: self.road.with_clean_to_puddle(p)?, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_baseline() {
        assert_eq!(SimConfig::from_toml_str("").unwrap(), SimConfig::paper_baseline());
    }

    #[test]
    fn round_trips_through_toml() {
        for c in [SimConfig::paper_baseline(), SimConfig::safer()] {
            let text = c.to_toml_string().unwrap();
            assert_eq!(SimConfig::from_toml_str(&text).unwrap(), c);
        }
    }

    #[test]
    fn partial_override() {
        let c = SimConfig::from_toml_str("road_length = 50\n[trip.thresholds]\nq_d = 0.5\n").unwrap();
        assert_eq!(c.road_length, 50);
        assert_eq!(c.trip.thresholds.q_d, 0.5);
        assert_eq!(c.trip.thresholds.q_p, 0.25);
    }

    #[test]
    fn unknown_field_reports_its_path() {
        let err = SimConfig::from_toml_str("[trip.thresholds]\nq_x = 1.0\n").unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "trip.thresholds.q_x");
                assert!(message.contains("q_x"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn type_error_reports_its_path() {
        match SimConfig::from_toml_str("[trip.thresholds]\nq_p = \"high\"\n").unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "trip.thresholds.q_p"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn validation_reports_its_path() {
        match SimConfig::from_toml_str("[road]\nrock = [0.5, 0.5, 0.5]\npuddle = [0.0, 0.4, 0.6]\nclean = [0.05, 0.05, 0.9]\n").unwrap_err() {
            Error::Config { path, message } => {
                assert_eq!(path, "road");
                assert!(message.contains("rock"), "{message}");
            }
            other => panic!("{other}"),
        }
        match SimConfig::from_toml_str("sweep_grid = [0.1, 0.99]").unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "sweep_grid[1]"),
            other => panic!("{other}"),
        }
        match SimConfig::from_toml_str("schema_version = 7").unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "schema_version"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn builtins() {
        assert!(SimConfig::builtin("nope").is_none());
        let s = SimConfig::load(SAFER).unwrap();
        assert_eq!((s.trip.thresholds.q_r, s.trip.thresholds.q_p, s.trip.thresholds.q_d), (0.25, 0.3, 0.5));
    }
}
