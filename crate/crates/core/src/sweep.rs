//! Design sweeps over steps × filters × configuration, with the
//! hyperparameter grid per cell and selection by validation loss. Test
//! metrics are only reported, never selected on.

use std::time::Instant;

use ndarray::Array1;
use rayon::prelude::*;

use crate::datacube::{PatchBatch, WavelengthGrid};
use crate::error::{Error, Result};
use crate::layout::{lvf_layout, random_layout, squarish_layout};
use crate::measurement::{compression_ratio, MeasurementSpec, BASELINE_STEPS};
use crate::seeds;
use crate::spectral::{regular_filters, FilterSet, ParamDomain};
use crate::train::{
    evaluate, optimal_filters, train, LorentzianConfig, Model, TrainConfig, TrainData, Trainability,
};

/// The five layout/filter configurations under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Configuration {
    /// Regular filters in a fixed LVF-like layout; only R trains.
    RegularLvf,
    /// Spectral-estimator filters in a fixed LVF-like layout; only R trains.
    BestLvf,
    /// Spectral-estimator filters as snapping targets for a free layout
    /// trained from random initialization.
    BestRandomOptimized,
    /// Regular filters in the fixed squarish lattice; only R trains.
    RegularSquarish,
    /// Squarish lattice with the shared filter set trained jointly with R.
    OptimizedSquarish,
}

impl Configuration {
    pub const ALL: [Configuration; 5] = [
        Configuration::RegularLvf,
        Configuration::BestLvf,
        Configuration::BestRandomOptimized,
        Configuration::RegularSquarish,
        Configuration::OptimizedSquarish,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Configuration::RegularLvf => "regular-lvf",
            Configuration::BestLvf => "best-lvf",
            Configuration::BestRandomOptimized => "best-random-optimized",
            Configuration::RegularSquarish => "regular-squarish",
            Configuration::OptimizedSquarish => "optimized-squarish",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Configuration::ALL
            .iter()
            .find(|c| c.name() == name)
            .copied()
            .ok_or_else(|| {
                let valid: Vec<&str> = Configuration::ALL.iter().map(|c| c.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown configuration '{name}'; valid: {}",
                    valid.join(", ")
                ))
            })
    }

    /// Needs the spectral-only estimator's filter set.
    pub fn needs_best_filters(&self) -> bool {
        matches!(self, Configuration::BestLvf | Configuration::BestRandomOptimized)
    }

    /// Starts from a random layout, so it is rerun with several seeds.
    pub fn random_init(&self) -> bool {
        matches!(self, Configuration::BestRandomOptimized)
    }
}

/// One (configuration, filters, steps) cell of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellSpec {
    pub configuration: Configuration,
    pub n_filters: usize,
    pub n_steps: usize,
}

impl CellSpec {
    pub fn id(&self) -> String {
        format!("{}_{}f_{}s", self.configuration.name(), self.n_filters, self.n_steps)
    }
}

/// The grids a sweep iterates over. The hyperparameter axes default to the
/// standard grid: l2 ∈ {0, 1e-4, 1e-3}, lr ∈ {1e-4, 3e-4, 1e-3}.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub configurations: Vec<Configuration>,
    pub n_filters: Vec<usize>,
    pub n_steps: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub l2_weights: Vec<f64>,
    /// Seeds per random-init configuration; fixed-layout configurations run
    /// once.
    pub random_init_runs: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            configurations: Configuration::ALL.to_vec(),
            n_filters: (2..=19).collect(),
            n_steps: vec![1, 2, 4],
            learning_rates: vec![1e-4, 3e-4, 1e-3],
            l2_weights: vec![0.0, 1e-4, 1e-3],
            random_init_runs: 5,
        }
    }
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for &configuration in &self.configurations {
            for &n_filters in &self.n_filters {
                for &n_steps in &self.n_steps {
                    out.push(CellSpec { configuration, n_filters, n_steps });
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.configurations.is_empty()
            || self.n_filters.is_empty()
            || self.n_steps.is_empty()
            || self.learning_rates.is_empty()
            || self.l2_weights.is_empty()
        {
            return Err(Error::InvalidArgument("empty sweep grid axis".into()));
        }
        if self.random_init_runs == 0 {
            return Err(Error::InvalidArgument("random_init_runs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Data and instrument context shared by every cell.
pub struct SweepData<'a> {
    pub train_patches: &'a PatchBatch,
    pub test_patches: &'a PatchBatch,
    /// Spectra for the spectral-only estimator stage.
    pub train_spectra: &'a [Array1<f64>],
    pub grid: &'a WavelengthGrid,
    pub domain: ParamDomain,
    pub snr: f64,
}

/// Per-run training budget and regularizer defaults for a sweep.
#[derive(Debug, Clone)]
pub struct SweepBase {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub early_stop_patience: usize,
    /// Snapping-regularizer weight for free-layout configurations.
    pub lorentzian_alpha: f64,
    /// Snapping well half-width A, scaled units.
    pub lorentzian_amplitude: f64,
    pub baseline_steps: usize,
}

impl Default for SweepBase {
    fn default() -> Self {
        Self {
            seed: 1,
            epochs: 200,
            batch_size: 32,
            val_fraction: 0.10,
            early_stop_patience: 20,
            lorentzian_alpha: 1e-3,
            lorentzian_amplitude: 0.05,
            baseline_steps: BASELINE_STEPS,
        }
    }
}

/// One trained (cell, lr, l2, seed) combination.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub configuration: Configuration,
    pub n_filters: usize,
    pub n_steps: usize,
    pub learning_rate: f64,
    pub l2_weight: f64,
    pub seed: u64,
    pub val_loss: f64,
    pub test_mse: f64,
    pub test_psnr: f64,
    pub compression_ratio: f64,
    pub wall_time_s: f64,
}

/// Build the untrained model and trainability mask for a cell.
pub fn build_cell_model(
    cell: &CellSpec,
    data: &SweepData<'_>,
    base: &SweepBase,
    best_filters: Option<&FilterSet>,
    init_seed: u64,
) -> Result<(Model, Trainability, Option<LorentzianConfig>)> {
    let rows = data.train_patches.patch_size();
    let cols = rows;
    let measurement = MeasurementSpec::new(cell.n_steps, data.snr, init_seed)?;
    let lambda_lo = data.grid.lambda_min();
    let lambda_hi = data.grid.lambda_max();
    match cell.configuration {
        Configuration::RegularLvf => {
            let filters = regular_filters(cell.n_filters, lambda_lo, lambda_hi)?;
            let layout = lvf_layout(&filters, rows, cols)?;
            let model = Model::new(layout, measurement, data.grid.clone(), data.domain)?;
            Ok((model, Trainability::reconstructor_only(), None))
        }
        Configuration::BestLvf => {
            let filters = best_filters
                .ok_or_else(|| Error::InvalidArgument("best-lvf needs estimator filters".into()))?;
            let layout = lvf_layout(filters, rows, cols)?;
            let model = Model::new(layout, measurement, data.grid.clone(), data.domain)?;
            Ok((model, Trainability::reconstructor_only(), None))
        }
        Configuration::BestRandomOptimized => {
            let targets = best_filters
                .ok_or_else(|| Error::InvalidArgument("best-random-optimized needs estimator filters".into()))?;
            let layout = random_layout(rows, cols, &data.domain, init_seed)?;
            let model = Model::new(layout, measurement, data.grid.clone(), data.domain)?;
            let lorentzian = LorentzianConfig {
                alpha_reg: base.lorentzian_alpha,
                amplitude: base.lorentzian_amplitude,
                targets: targets.clone(),
            };
            Ok((
                model,
                Trainability { filters: false, layout: true, reconstructor: true },
                Some(lorentzian),
            ))
        }
        Configuration::RegularSquarish => {
            let filters = regular_filters(cell.n_filters, lambda_lo, lambda_hi)?;
            let layout = squarish_layout(&filters, rows, cols)?;
            let model = Model::new(layout, measurement, data.grid.clone(), data.domain)?;
            Ok((model, Trainability::reconstructor_only(), None))
        }
        Configuration::OptimizedSquarish => {
            let filters = regular_filters(cell.n_filters, lambda_lo, lambda_hi)?;
            let layout = squarish_layout(&filters, rows, cols)?;
            let model = Model::new(layout, measurement, data.grid.clone(), data.domain)?;
            Ok((
                model,
                Trainability { filters: true, layout: false, reconstructor: true },
                None,
            ))
        }
    }
}

/// Train every hyperparameter combination of one cell and report all rows.
/// Deterministic per (cell, base.seed) regardless of execution order.
pub fn run_cell(
    cell: &CellSpec,
    data: &SweepData<'_>,
    base: &SweepBase,
    grid: &SweepGrid,
) -> Result<(Vec<SweepRow>, Option<Model>)> {
    let best_filters = if cell.configuration.needs_best_filters() {
        let config = TrainConfig {
            learning_rate: 1e-3,
            epochs: base.epochs,
            batch_size: base.batch_size,
            seed: seeds::derive(base.seed, &[0xbe57, cell.n_filters as u64]),
            val_fraction: base.val_fraction,
            early_stop_patience: base.early_stop_patience,
            ..TrainConfig::default()
        };
        let out = optimal_filters(
            data.train_spectra,
            cell.n_filters,
            data.grid,
            &data.domain,
            data.snr,
            &config,
        )?;
        Some(out.filters)
    } else {
        None
    };

    let runs: u64 = if cell.configuration.random_init() { grid.random_init_runs as u64 } else { 1 };
    let mut rows = Vec::new();
    let mut best: Option<(f64, Model)> = None;
    for &lr in &grid.learning_rates {
        for &l2 in &grid.l2_weights {
            for run in 0..runs {
                let run_seed = seeds::derive(
                    base.seed,
                    &[0xce11, cell.n_filters as u64, cell.n_steps as u64, lr.to_bits(), l2.to_bits(), run],
                );
                let started = Instant::now();
                let (model, trainability, lorentzian) =
                    build_cell_model(cell, data, base, best_filters.as_ref(), run_seed)?;
                let config = TrainConfig {
                    learning_rate: lr,
                    l2_weight: l2,
                    lorentzian,
                    epochs: base.epochs,
                    batch_size: base.batch_size,
                    seed: run_seed,
                    val_fraction: base.val_fraction,
                    trainability,
                    early_stop_patience: base.early_stop_patience,
                };
                let outcome = train(&model, TrainData::Patches(data.train_patches), &config)
                    .map_err(|e| Error::InvalidArgument(format!("cell {}: {e}", cell.id())))?;
                let metrics = evaluate(&outcome.model, data.test_patches, seeds::derive(base.seed, &[0x7e57]))?;
                rows.push(SweepRow {
                    configuration: cell.configuration,
                    n_filters: cell.n_filters,
                    n_steps: cell.n_steps,
                    learning_rate: lr,
                    l2_weight: l2,
                    seed: run_seed,
                    val_loss: outcome.best_val_total,
                    test_mse: metrics.mse,
                    test_psnr: metrics.psnr,
                    compression_ratio: compression_ratio(cell.n_steps, base.baseline_steps),
                    wall_time_s: started.elapsed().as_secs_f64(),
                });
                if best.as_ref().map(|(v, _)| outcome.best_val_total < *v).unwrap_or(true) {
                    best = Some((outcome.best_val_total, outcome.model));
                }
            }
        }
    }
    Ok((rows, best.map(|(_, m)| m)))
}

/// Run every cell of the grid, optionally in parallel. Rows come back in
/// deterministic cell order with per-cell hyperparameter sub-rows.
pub fn sweep(
    grid: &SweepGrid,
    data: &SweepData<'_>,
    base: &SweepBase,
    parallel: bool,
) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let cells = grid.cells();
    let results: Vec<Result<Vec<SweepRow>>> = if parallel {
        cells
            .par_iter()
            .map(|cell| run_cell(cell, data, base, grid).map(|(rows, _)| rows))
            .collect()
    } else {
        cells
            .iter()
            .map(|cell| run_cell(cell, data, base, grid).map(|(rows, _)| rows))
            .collect()
    };
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Validation-selected row per (configuration, n_filters, n_steps) cell.
pub fn select_best(rows: &[SweepRow]) -> Vec<&SweepRow> {
    let mut best: Vec<&SweepRow> = Vec::new();
    for row in rows {
        match best.iter_mut().find(|b| {
            b.configuration == row.configuration
                && b.n_filters == row.n_filters
                && b.n_steps == row.n_steps
        }) {
            Some(slot) => {
                if row.val_loss < slot.val_loss {
                    *slot = row;
                }
            }
            None => best.push(row),
        }
    }
    best
}

/// For each (n_filters, n_steps), the configuration whose validation-selected
/// row reaches the highest test PSNR — the steps × filters map.
pub fn best_configuration_map(rows: &[SweepRow]) -> Vec<&SweepRow> {
    let selected = select_best(rows);
    let mut map: Vec<&SweepRow> = Vec::new();
    for row in selected {
        match map
            .iter_mut()
            .find(|b| b.n_filters == row.n_filters && b.n_steps == row.n_steps)
        {
            Some(slot) => {
                if row.test_psnr > slot.test_psnr {
                    *slot = row;
                }
            }
            None => map.push(row),
        }
    }
    map
}
