//! The forward model: a layout applied to a scene patch over S push-broom
//! steps, integrated over wavelength per pixel, with optional Gaussian
//! detector noise. The explicit measurement matrix is materialized only for
//! oracles and tests; the training path is matrix-free.

use ndarray::{Array1, Array2, Array3, ArrayView3};
use rand_distr::{Distribution, StandardNormal};

use crate::datacube::WavelengthGrid;
use crate::error::{Error, Result};
use crate::layout::LayoutPattern;
use crate::seeds;
use crate::spectral::transmission;

/// Acquisition parameters: push-broom step count, detector SNR
/// (`f64::INFINITY` for noiseless), and the noise seed.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementSpec {
    pub steps: usize,
    pub snr: f64,
    pub seed: u64,
}

impl MeasurementSpec {
    pub fn new(steps: usize, snr: f64, seed: u64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be >= 1".into()));
        }
        if !(snr > 0.0) {
            return Err(Error::InvalidArgument(format!("snr must be positive, got {snr}")));
        }
        Ok(Self { steps, snr, seed })
    }

    pub fn noiseless(steps: usize) -> Result<Self> {
        Self::new(steps, f64::INFINITY, 0)
    }
}

/// Detector intensities over (step, row, col). Serialization is step-major,
/// then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    pub values: Array3<f64>,
}

impl Frames {
    pub fn steps(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn rows(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn cols(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn pixel_count(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Serialized vector of length S·M: index s·M + r·cols + c.
    pub fn serialize(&self) -> Array1<f64> {
        Array1::from_iter(self.values.iter().cloned())
    }

    pub fn from_serialized(v: &Array1<f64>, steps: usize, rows: usize, cols: usize) -> Result<Self> {
        if v.len() != steps * rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "serialized frames have {} entries, dims need {}",
                v.len(),
                steps * rows * cols
            )));
        }
        let values = Array3::from_shape_vec((steps, rows, cols), v.to_vec()).unwrap();
        Ok(Self { values })
    }

    pub fn mean_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64
    }
}

/// Pre-noise measurement: y[s, r, c] = Σ_b T(λ_b)·x[r, c, b] with the filter
/// of scene pixel (r, c) at step s taken from the cyclically sliding layout.
/// Band weights are unit (the constant Δλ factor of the wavelength
/// integration is absorbed by the reconstructor).
pub fn forward(patch: ArrayView3<f64>, layout: &LayoutPattern, grid: &WavelengthGrid, steps: usize) -> Result<Frames> {
    let (rows, cols, bands) = patch.dim();
    if rows != layout.rows() || cols != layout.cols() {
        return Err(Error::DimensionMismatch(format!(
            "patch is {rows}x{cols}, layout is {}x{}",
            layout.rows(),
            layout.cols()
        )));
    }
    if bands != grid.band_count() {
        return Err(Error::DimensionMismatch(format!(
            "patch has {bands} bands, grid has {}",
            grid.band_count()
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    let mut values = Array3::<f64>::zeros((steps, rows, cols));
    for s in 0..steps {
        for r in 0..rows {
            for c in 0..cols {
                let f = layout.filter_at(r, c, s)?;
                let t = transmission(f, grid);
                let mut acc = 0.0;
                for b in 0..bands {
                    acc += t[b] * patch[[r, c, b]];
                }
                values[[s, r, c]] = acc;
            }
        }
    }
    Ok(Frames { values })
}

/// Add i.i.d. Gaussian detector noise with σ = mean(|y|)/snr. Infinite SNR
/// returns the input unchanged. Deterministic per seed.
pub fn add_noise(frames: &Frames, snr: f64, seed: u64) -> Frames {
    if snr.is_infinite() {
        return frames.clone();
    }
    let sigma = frames.mean_abs() / snr;
    let mut rng = seeds::rng(seed, &[0x4015e]);
    let mut values = frames.values.clone();
    for v in values.iter_mut() {
        let n: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        *v += sigma * n;
    }
    Frames { values }
}

/// Default cap on dense measurement-matrix entries (f64); larger requests
/// must use the matrix-free forward.
pub const DEFAULT_H_CAP: u128 = 1 << 26;

/// Materialize the explicit measurement matrix of shape (S·M) × (M·B): row
/// (s, m) carries the transmission vector of pixel m's step-s filter in
/// pixel m's band block, zeros elsewhere.
pub fn build_h(layout: &LayoutPattern, grid: &WavelengthGrid, steps: usize, cap: Option<u128>) -> Result<Array2<f64>> {
    let rows = layout.rows();
    let cols = layout.cols();
    let m = rows * cols;
    let b = grid.band_count();
    let entries = steps as u128 * m as u128 * m as u128 * b as u128;
    let cap = cap.unwrap_or(DEFAULT_H_CAP);
    if entries > cap {
        return Err(Error::MatrixTooLarge { entries, cap });
    }
    let mut h = Array2::<f64>::zeros((steps * m, m * b));
    for s in 0..steps {
        for r in 0..rows {
            for c in 0..cols {
                let pix = r * cols + c;
                let f = layout.filter_at(r, c, s)?;
                let t = transmission(f, grid);
                for (band, &tv) in t.iter().enumerate() {
                    h[[s * m + pix, pix * b + band]] = tv;
                }
            }
        }
    }
    Ok(h)
}

/// Serialize a (rows, cols, bands) patch pixel-major with band fastest, the
/// x ordering the measurement matrix expects.
pub fn serialize_patch(patch: ArrayView3<f64>) -> Array1<f64> {
    Array1::from_iter(patch.iter().cloned())
}

/// Compression relative to a dense reference scan: baseline_steps / S.
pub fn compression_ratio(steps: usize, baseline_steps: usize) -> f64 {
    baseline_steps as f64 / steps as f64
}

/// Dense reference scan length of the classic LVF instrument.
pub const BASELINE_STEPS: usize = 40;
