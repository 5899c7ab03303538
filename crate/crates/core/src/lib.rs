//! Design toolkit for compressive pixelated spectral-filter instruments.
//!
//! The toolkit jointly optimizes a per-pixel spectral filter layout and a
//! linear reconstructor for snapshot or push-broom hyperspectral imaging. It
//! simulates the measurement (Gaussian passbands, wavelength integration,
//! detector noise), trains filters/layout/reconstructor by analytic
//! back-propagation with Adam, and evaluates designs by MSE/PSNR over grids
//! of filter counts and scan steps.
//!
//! Modules follow the pipeline:
//!
//! - [`datacube`]: scene cubes, file formats, synthesis, patch sampling
//! - [`spectral`]: Gaussian passbands, parameter scaling, MSE/PSNR
//! - [`layout`]: LVF / squarish / random filter layouts and snapping
//! - [`measurement`]: push-broom forward model, noise, explicit matrix
//! - [`reconstruct`]: the linear reconstructor and its ridge oracle
//! - [`train`]: loss, analytic gradients, Adam, the training loop
//! - [`sweep`]: steps × filters × configuration design sweeps
//! - [`analysis`]: power spectra, pair-PSNR statistics, PCA

pub mod analysis;
pub mod config;
pub mod datacube;
pub mod error;
pub mod layout;
pub mod linalg;
pub mod measurement;
pub mod reconstruct;
pub mod report;
pub mod seeds;
pub mod spectral;
pub mod sweep;
pub mod train;

pub use error::{Error, Result};
