//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! workdir = "out"
//!
//! [simulation]
//! n_participants = 8
//!
//! [filter]
//! low_hz = 0.2
//! high_hz = 35.0
//!
//! [rejection]
//! mode = "target_fraction"
//! value = 0.122
//!
//! [evaluation]
//! n_perm = 1000
//!
//! [stats]
//! channels = ["Fz", "Pz"]
//! ```
//!
//! Every table is optional; omitted fields take their defaults. The seed
//! has no default and must come from the file or the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::neurostats::BinSpec;
use crate::preprocess::{FilterSpec, RejectionPolicy};
use crate::synth::SimulationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub workdir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            workdir: PathBuf::from("brainpref-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub n_perm: usize,
    pub alpha: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            n_perm: 1000,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub bins: BinSpec,
    pub channels: Vec<String>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            bins: BinSpec::default(),
            channels: vec!["Fz".into(), "Pz".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; drives the simulator and the permutation streams.
    pub seed: Option<u64>,
    pub paths: PathsConfig,
    pub simulation: SimulationConfig,
    pub filter: FilterSpec,
    pub rejection: RejectionPolicy,
    pub evaluation: EvaluationConfig,
    pub stats: StatsConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidInput("a seed is required (config `seed` or --seed)".into()))
    }

    /// Simulation settings with the master seed applied.
    pub fn simulation(&self) -> Result<SimulationConfig> {
        Ok(SimulationConfig {
            rng_seed: self.seed()?,
            ..self.simulation.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        self.simulation.validate()?;
        self.filter.validate(self.simulation.sampling_rate_hz)?;
        self.rejection.validate()?;
        self.stats.bins.validate()?;
        if !(self.evaluation.alpha > 0.0 && self.evaluation.alpha < 1.0) {
            return invalid("evaluation.alpha must lie in (0, 1)");
        }
        if self.stats.channels.is_empty() {
            return invalid("stats.channels must name at least one channel");
        }
        for ch in &self.stats.channels {
            if crate::signal::channel_position(ch).is_none() {
                return invalid(format!("unknown channel {ch:?} in stats.channels"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_needs_seed() {
        let c = PipelineConfig::from_toml("").unwrap();
        assert!(c.validate().is_err());
        let c = PipelineConfig::from_toml("seed = 3").unwrap();
        c.validate().unwrap();
        assert_eq!(c.evaluation.n_perm, 1000);
        assert_eq!(c.simulation.sampling_rate_hz, 2000.0);
        assert_eq!(c.stats.channels, vec!["Fz", "Pz"]);
    }

    #[test]
    fn partial_tables_and_round_trip() {
        let text = r#"
seed = 9
[simulation]
n_participants = 4
[rejection]
mode = "fixed_threshold"
value = 80.0
[stats.bins]
lo_ms = 100.0
hi_ms = 300.0
width_ms = 50.0
"#;
        let c = PipelineConfig::from_toml(text).unwrap();
        assert_eq!(c.simulation.n_participants, 4);
        assert_eq!(c.simulation.n_stimuli, 240);
        assert_eq!(c.rejection, RejectionPolicy::FixedThreshold(80.0));
        assert_eq!(c.stats.bins.count(), 4);
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(PipelineConfig::from_toml("seed = 1\nbogus = 2").is_err());
        assert!(PipelineConfig::from_toml("seed = 1\n[filter]\nlow = 2").is_err());
    }
}
