//! Tool configuration: nested-section key=value text (TOML). Every field has
//! a default; unknown keys are rejected so typos cannot silently fall back to
//! defaults. Command-line flags override file values, and the full effective
//! config is echoed into each run manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sweep::{Configuration, SweepBase, SweepGrid};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub bands: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { bands: 40, lambda_min: 450.0, lambda_max: 940.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub correlation_length: f64,
    pub noise_floor: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { rows: 64, cols: 64, rank: 4, correlation_length: 8.0, noise_floor: 1e-3, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub patch_size: usize,
    pub train_patches: usize,
    pub test_patches: usize,
    /// Columns reserved for training; 0 selects the reference proportion
    /// (350 of 440).
    pub train_cols: usize,
    /// "cols" (default) or "rows"; rows are split after transposing.
    pub split_axis: String,
    pub train_spectra: usize,
    pub test_spectra: usize,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            patch_size: 10,
            train_patches: 10_000,
            test_patches: 1_000,
            train_cols: 0,
            split_axis: "cols".into(),
            train_spectra: 100_000,
            test_spectra: 10_000,
            seed: 1,
        }
    }
}

impl DataConfig {
    /// Effective training-column count for a cube of `cols` columns.
    pub fn effective_train_cols(&self, cols: usize) -> usize {
        if self.train_cols > 0 {
            self.train_cols
        } else {
            ((cols as f64 * 350.0 / 440.0).round() as usize).clamp(1, cols.saturating_sub(1).max(1))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    pub steps: usize,
    /// Signal-to-noise ratio; 0 means noiseless.
    pub snr: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self { steps: 4, snr: 100.0 }
    }
}

impl MeasurementConfig {
    pub fn snr_value(&self) -> f64 {
        if self.snr == 0.0 {
            f64::INFINITY
        } else {
            self.snr
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LorentzianSection {
    /// Regularizer weight; these two defaults are toolkit choices exposed
    /// for calibration, not reference values.
    pub alpha_reg: f64,
    /// Well half-width A in scaled units.
    pub amplitude: f64,
}

impl Default for LorentzianSection {
    fn default() -> Self {
        Self { alpha_reg: 1e-3, amplitude: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub l2_weight: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub val_fraction: f64,
    pub early_stop_patience: usize,
    pub lorentzian: LorentzianSection,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: d.learning_rate,
            l2_weight: d.l2_weight,
            epochs: d.epochs,
            batch_size: d.batch_size,
            seed: d.seed,
            val_fraction: d.val_fraction,
            early_stop_patience: d.early_stop_patience,
            lorentzian: LorentzianSection::default(),
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            l2_weight: self.l2_weight,
            lorentzian: None,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            val_fraction: self.val_fraction,
            trainability: crate::train::Trainability::reconstructor_only(),
            early_stop_patience: self.early_stop_patience,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub configurations: Vec<String>,
    pub n_filters: Vec<usize>,
    pub n_steps: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub l2_weights: Vec<f64>,
    pub random_init_runs: usize,
    /// Parallel sweep workers; 0 uses all cores.
    pub workers: usize,
    pub baseline_steps: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        let g = SweepGrid::default();
        Self {
            configurations: g.configurations.iter().map(|c| c.name().to_string()).collect(),
            n_filters: g.n_filters,
            n_steps: g.n_steps,
            learning_rates: g.learning_rates,
            l2_weights: g.l2_weights,
            random_init_runs: g.random_init_runs,
            workers: 0,
            baseline_steps: crate::measurement::BASELINE_STEPS,
        }
    }
}

impl SweepSection {
    pub fn to_grid(&self) -> Result<SweepGrid> {
        let configurations = self
            .configurations
            .iter()
            .map(|name| Configuration::from_name(name))
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepGrid {
            configurations,
            n_filters: self.n_filters.clone(),
            n_steps: self.n_steps.clone(),
            learning_rates: self.learning_rates.clone(),
            l2_weights: self.l2_weights.clone(),
            random_init_runs: self.random_init_runs,
        })
    }

    pub fn to_base(&self, train: &TrainSection) -> SweepBase {
        SweepBase {
            seed: train.seed,
            epochs: train.epochs,
            batch_size: train.batch_size,
            val_fraction: train.val_fraction,
            early_stop_patience: train.early_stop_patience,
            lorentzian_alpha: train.lorentzian.alpha_reg,
            lorentzian_amplitude: train.lorentzian.amplitude,
            baseline_steps: self.baseline_steps,
        }
    }
}

/// The complete tool configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub grid: GridConfig,
    pub synth: SynthConfig,
    pub data: DataConfig,
    pub measurement: MeasurementConfig,
    pub train: TrainSection,
    pub sweep: SweepSection,
}

impl ToolConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    /// Canonical text form, echoed into run manifests.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Apply the global seed override: one flag retargets every seeded
    /// stage so a whole run is reproducible from a single number.
    pub fn override_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.data.seed = seed;
        self.train.seed = seed;
    }

    pub fn wavelength_grid(&self) -> Result<crate::datacube::WavelengthGrid> {
        crate::datacube::WavelengthGrid::uniform(self.grid.bands, self.grid.lambda_min, self.grid.lambda_max)
    }
}
