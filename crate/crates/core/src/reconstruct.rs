//! The linear reconstructor: a bias-free dense matrix mapping serialized
//! detector frames to the estimated cube, plus a closed-form ridge-regression
//! oracle used to bound gradient-trained reconstructors.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3};

use crate::datacube::{HyperCube, WavelengthGrid};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measurement::Frames;

/// Dimensions a reconstructor is wired for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconDims {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub steps: usize,
}

impl ReconDims {
    pub fn pixel_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Output length M·B.
    pub fn cube_len(&self) -> usize {
        self.rows * self.cols * self.bands
    }

    /// Input length S·M.
    pub fn frames_len(&self) -> usize {
        self.steps * self.rows * self.cols
    }
}

/// Dense (M·B) × (S·M) weight matrix. There is no bias term, so the output
/// is strictly proportional to the measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReconstructor {
    pub weights: Array2<f64>,
    pub dims: ReconDims,
}

impl LinearReconstructor {
    pub fn new(weights: Array2<f64>, dims: ReconDims) -> Result<Self> {
        if weights.dim() != (dims.cube_len(), dims.frames_len()) {
            return Err(Error::DimensionMismatch(format!(
                "weights are {:?}, dims need ({}, {})",
                weights.dim(),
                dims.cube_len(),
                dims.frames_len()
            )));
        }
        if let Some(v) = weights.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite { location: "reconstructor weights".into(), value: *v });
        }
        Ok(Self { weights, dims })
    }

    /// Zero-initialized reconstructor; maps everything to the zero cube until
    /// trained.
    pub fn init_zero(dims: ReconDims) -> Self {
        Self { weights: Array2::zeros((dims.cube_len(), dims.frames_len())), dims }
    }

    pub fn weight_count(&self) -> usize {
        self.weights.len()
    }

    /// Apply to a serialized measurement vector.
    pub fn apply(&self, y: &Array1<f64>) -> Result<Array1<f64>> {
        if y.len() != self.dims.frames_len() {
            return Err(Error::DimensionMismatch(format!(
                "frames vector has {} entries, reconstructor expects {}",
                y.len(),
                self.dims.frames_len()
            )));
        }
        Ok(self.weights.dot(y))
    }

    /// Reconstruct a cube estimate from detector frames.
    pub fn reconstruct(&self, frames: &Frames, grid: &WavelengthGrid) -> Result<HyperCube> {
        let xhat = self.apply(&frames.serialize())?;
        let data = Array3::from_shape_vec((self.dims.rows, self.dims.cols, self.dims.bands), xhat.to_vec())
            .expect("length checked by apply");
        HyperCube::estimate(data, grid.clone(), crate::spectral::DEFAULT_MAX_VALUE)
    }

    // -- RCON binary format --------------------------------------------------
    //
    // magic "RCON", 4×u32 LE dims (rows, cols, bands, steps), then f64 LE
    // weights row-major. Round-trips bit-exactly.

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(20 + self.weights.len() * 8);
        buf.extend_from_slice(b"RCON");
        for d in [self.dims.rows, self.dims.cols, self.dims.bands, self.dims.steps] {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &w in self.weights.iter() {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::MalformedFile { path: path.to_path_buf(), reason };
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 20 || &bytes[0..4] != b"RCON" {
            return Err(bad("missing RCON magic".into()));
        }
        let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        let dims = ReconDims { rows: u32_at(4), cols: u32_at(8), bands: u32_at(12), steps: u32_at(16) };
        let n = dims.cube_len() * dims.frames_len();
        if bytes.len() != 20 + n * 8 {
            return Err(bad(format!("weight payload mismatch: {} bytes for {n} weights", bytes.len() - 20)));
        }
        let weights: Vec<f64> = (0..n)
            .map(|i| f64::from_le_bytes(bytes[20 + i * 8..28 + i * 8].try_into().unwrap()))
            .collect();
        let weights = Array2::from_shape_vec((dims.cube_len(), dims.frames_len()), weights).unwrap();
        LinearReconstructor::new(weights, dims)
    }
}

/// Closed-form ridge regression over training pairs:
///
/// R = X·Yᵀ·(Y·Yᵀ + ridge_weight·n·I)⁻¹
///
/// where Y stacks measurement vectors column-wise and X stacks serialized
/// cubes. This minimizes Σᵢ‖xᵢ − R·yᵢ‖² + ridge_weight·n·‖R‖²_F, the global
/// optimum of the convex objective a gradient-trained reconstructor descends
/// (with ridge_weight = l2_weight·M·B to match the per-entry loss scale).
/// With ridge_weight = 0 a singular Gram matrix is reported as rank
/// deficiency, never silently regularized.
pub fn closed_form_reconstructor(
    xs: &[Array1<f64>],
    ys: &[Array1<f64>],
    ridge_weight: f64,
    dims: ReconDims,
) -> Result<LinearReconstructor> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "need matching non-empty pair lists, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if ridge_weight < 0.0 {
        return Err(Error::InvalidArgument("negative ridge weight".into()));
    }
    let n = xs.len();
    let xl = dims.cube_len();
    let yl = dims.frames_len();
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        if x.len() != xl || y.len() != yl {
            return Err(Error::DimensionMismatch(format!(
                "pair {i} has lengths ({}, {}), dims need ({xl}, {yl})",
                x.len(),
                y.len()
            )));
        }
    }
    // Gram accumulation in fixed order for determinism.
    let mut yyt = Array2::<f64>::zeros((yl, yl));
    let mut xyt = Array2::<f64>::zeros((xl, yl));
    for (x, y) in xs.iter().zip(ys) {
        for i in 0..yl {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for j in 0..yl {
                yyt[[i, j]] += yi * y[j];
            }
            for j in 0..xl {
                xyt[[j, i]] += x[j] * yi;
            }
        }
    }
    for i in 0..yl {
        yyt[[i, i]] += ridge_weight * n as f64;
    }
    // Solve (Y·Yᵀ + λn·I)·Rᵀ = (X·Yᵀ)ᵀ via SPD factorization.
    let rt = linalg::spd_solve(yyt.view(), xyt.t().as_standard_layout().view(), 1e-12)?;
    LinearReconstructor::new(rt.t().as_standard_layout().to_owned(), dims)
}
