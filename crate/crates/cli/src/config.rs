//! Run configuration: built-in defaults, overridden by a JSON file, overridden
//! by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use nvheat::engine::{DecoherenceSettings, DetuningDistribution, EngineLevels};
use nvheat::nv_model::{CalibrationParams, RateConstants, SpinParams};
use nvheat::uncertainty::ParameterPrior;

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Rabi frequency for single-Ω runs, rad/µs.
    pub omega: f64,
    /// Rabi frequencies of the equivalence figure.
    pub omega_grid: Vec<f64>,
    pub duty: f64,
    /// Thermal rate entering the simplified action, MHz.
    pub gamma_th: f64,
    /// Optical pump rate, MHz.
    pub pump: f64,
    pub fig3_actions: Vec<f64>,
    pub fig4a_actions: Vec<f64>,
    pub levels: EngineLevels,
    pub detuning: DetuningDistribution,
    pub decoherence: DecoherenceSettings,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            omega: 1.6,
            omega_grid: vec![0.8, 1.6, 3.2],
            duty: 1.0 / 3.0,
            gamma_th: 0.41,
            pump: 0.76,
            fig3_actions: vec![1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01],
            fig4a_actions: vec![0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5],
            levels: EngineLevels::default(),
            detuning: DetuningDistribution::default(),
            decoherence: DecoherenceSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KappaConfig {
    pub pumps: Vec<f64>,
    /// Cycle time of the modulation, µs.
    pub tau_cyc: f64,
    pub duty: f64,
    pub intervals: usize,
}

impl Default for KappaConfig {
    fn default() -> Self {
        Self {
            pumps: (1..=9).map(|k| 0.2 * k as f64).collect(),
            tau_cyc: 0.06,
            duty: 1.0 / 3.0,
            intervals: nvheat::fluorescence::DEFAULT_INTERVALS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyConfig {
    /// Samples for single-quantity runs.
    pub samples: usize,
    /// Samples per grid point for σ bands.
    pub band_samples: usize,
    /// Action of the engine point tested against the bound, units of ħ.
    pub action: f64,
    pub prior: ParameterPrior,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self {
            samples: nvheat::uncertainty::DEFAULT_SAMPLES,
            band_samples: 256,
            action: 0.05,
            prior: ParameterPrior::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmulationConfig {
    /// Excited-state share of the start state.
    pub excited_fraction: f64,
    pub pumps: Vec<f64>,
    pub times: Vec<f64>,
    /// Use the conservation-corrected operator instead of the raw reduction.
    pub corrected: bool,
}

impl Default for EmulationConfig {
    fn default() -> Self {
        let mut times: Vec<f64> = (0..20).map(|k| 0.005 * k as f64).collect();
        times.extend((1..=100).map(|k| 0.1 * k as f64));
        Self {
            excited_fraction: 0.005,
            pumps: (1..=20).map(|k| 0.05 * k as f64).collect(),
            times,
            corrected: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaturationConfig {
    /// Laser powers of the synthetic saturation curve, mW.
    pub powers: Vec<f64>,
    /// Counts per unit excited population.
    pub amplitude: f64,
    /// Relative Gaussian noise on each count.
    pub noise: f64,
}

impl Default for SaturationConfig {
    fn default() -> Self {
        Self {
            powers: (1..=20).map(|k| 0.5 * k as f64).collect(),
            amplitude: 1e5,
            noise: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    /// Field magnitudes, T.
    pub fields: Vec<f64>,
    pub pump: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            fields: (0..=100).map(|k| 0.0025 * k as f64).collect(),
            pump: 0.76,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Format,
    pub dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            format: Format::Csv,
            dir: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rates: RateConstants,
    pub spin: SpinParams,
    pub calibration: CalibrationParams,
    pub saturation: SaturationConfig,
    pub field: FieldConfig,
    pub emulation: EmulationConfig,
    pub engine: EngineConfig,
    pub kappa: KappaConfig,
    pub uncertainty: UncertaintyConfig,
    pub output: OutputConfig,
}

/// Prefix of the config line echoed at the top of every CSV file.
pub const CSV_CONFIG_PREFIX: &str = "# config: ";

impl RunConfig {
    /// Read a config file. Output files written by this tool are accepted too:
    /// their embedded config is used.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(UsageError::from)?;
        let json = match text.lines().find_map(|l| l.strip_prefix(CSV_CONFIG_PREFIX)) {
            Some(line) => line.to_string(),
            None => text,
        };
        let value: serde_json::Value = serde_json::from_str(&json)
            .with_context(|| format!("{} is not valid JSON", path.display()))
            .map_err(UsageError::from)?;
        let value = match value {
            serde_json::Value::Object(mut m)
                if m.contains_key("command") && m.contains_key("config") =>
            {
                m.remove("config").unwrap_or_default()
            }
            v => v,
        };
        let cfg: RunConfig = serde_json::from_value(value)
            .with_context(|| format!("invalid config in {}", path.display()))
            .map_err(UsageError::from)?;
        Ok(cfg)
    }
}
