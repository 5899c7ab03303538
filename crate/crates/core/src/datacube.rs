//! Hyperspectral cubes: file formats, synthesis, partitioning, and sampling.
//!
//! A cube is a (row, col, band) radiance array with its wavelength grid
//! attached. Cubes are immutable after construction and safe to share across
//! threads; every sampling operation is a pure function of (input, seed).

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3, ArrayView3, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeds;
use crate::spectral::DEFAULT_MAX_VALUE;

/// Ordered band-center wavelengths in nanometers.
///
/// The wavelength integration in the forward model assumes uniform band
/// spacing, so the constructor enforces it (to 1e-9 relative).
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthGrid {
    bands: Vec<f64>,
}

impl WavelengthGrid {
    pub fn new(bands: Vec<f64>) -> Result<Self> {
        if bands.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "wavelength grid needs at least 2 bands, got {}",
                bands.len()
            )));
        }
        let spacing = bands[1] - bands[0];
        if !(spacing > 0.0) {
            return Err(Error::InvalidArgument("wavelength grid must be strictly increasing".into()));
        }
        for w in bands.windows(2) {
            let d = w[1] - w[0];
            if !(d > 0.0) {
                return Err(Error::InvalidArgument("wavelength grid must be strictly increasing".into()));
            }
            if (d - spacing).abs() > 1e-9 * spacing.abs() {
                return Err(Error::InvalidArgument(format!(
                    "non-uniform band spacing: {d} vs {spacing}"
                )));
            }
        }
        Ok(Self { bands })
    }

    /// Uniform grid of `count` band centers with the first at `first` and the
    /// last at `last`. The 40-band default spans 450-940 nm.
    pub fn uniform(count: usize, first: f64, last: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidArgument(format!("uniform grid needs >= 2 bands, got {count}")));
        }
        if !(first < last) {
            return Err(Error::InvalidArgument(format!("degenerate wavelength span [{first}, {last}]")));
        }
        let step = (last - first) / (count - 1) as f64;
        Self::new((0..count).map(|k| first + k as f64 * step).collect())
    }

    /// The default instrument grid: 40 bands over 450-940 nm.
    pub fn default_40() -> Self {
        Self::uniform(40, 450.0, 940.0).expect("static grid")
    }

    pub fn bands(&self) -> &[f64] {
        &self.bands
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.bands[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.bands.last().unwrap()
    }

    pub fn band_spacing(&self) -> f64 {
        self.bands[1] - self.bands[0]
    }
}

/// A scene: radiance over (row, col, band) plus the grid and dynamic-range
/// ceiling used by PSNR.
#[derive(Debug, Clone)]
pub struct HyperCube {
    data: Array3<f64>,
    grid: WavelengthGrid,
    max_value: f64,
}

impl HyperCube {
    /// Construct a scene cube; values must be finite, non-negative, and
    /// within the dynamic range.
    pub fn new(data: Array3<f64>, grid: WavelengthGrid, max_value: f64) -> Result<Self> {
        if data.shape()[2] != grid.band_count() {
            return Err(Error::DimensionMismatch(format!(
                "cube has {} bands, grid has {}",
                data.shape()[2],
                grid.band_count()
            )));
        }
        for ((r, c, b), &v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { location: format!("({r}, {c}, {b})"), value: v });
            }
            if v < 0.0 || v > max_value {
                return Err(Error::InvalidArgument(format!(
                    "value {v} at ({r}, {c}, {b}) outside [0, {max_value}]"
                )));
            }
        }
        Ok(Self { data, grid, max_value })
    }

    /// Construct a reconstruction estimate. Linear reconstructors can emit
    /// small negative values, so only finiteness is enforced here.
    pub fn estimate(data: Array3<f64>, grid: WavelengthGrid, max_value: f64) -> Result<Self> {
        if data.shape()[2] != grid.band_count() {
            return Err(Error::DimensionMismatch(format!(
                "cube has {} bands, grid has {}",
                data.shape()[2],
                grid.band_count()
            )));
        }
        for ((r, c, b), &v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { location: format!("({r}, {c}, {b})"), value: v });
            }
        }
        Ok(Self { data, grid, max_value })
    }

    pub fn rows(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn cols(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn bands(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView3<'_, f64> {
        self.data.view()
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn spectrum(&self, r: usize, c: usize) -> Array1<f64> {
        self.data.slice(ndarray::s![r, c, ..]).to_owned()
    }

    /// All spectra flattened to (pixel, band), row-major over pixels.
    pub fn spectra_matrix(&self) -> Array2<f64> {
        let (rows, cols, bands) = self.data.dim();
        let flat = self.data.to_shape((rows * cols, bands)).unwrap().to_owned();
        flat
    }

    /// Swap the two spatial axes. Lets callers choose which axis
    /// `split_columns` and the scan direction apply to.
    pub fn transpose_spatial(&self) -> HyperCube {
        let data = self.data.clone().permuted_axes([1, 0, 2]).as_standard_layout().to_owned();
        HyperCube { data, grid: self.grid.clone(), max_value: self.max_value }
    }

    // -- HCUB flat-binary format -------------------------------------------
    //
    // magic "HCUB", 3×u32 LE dims (rows, cols, bands), u32 band_count,
    // band_count×f64 LE wavelengths (nm), rows·cols·bands f32 LE payload in
    // (row, col, band) row-major order.

    pub fn save_hcub(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::with_capacity(20 + self.grid.band_count() * 8 + self.data.len() * 4);
        buf.extend_from_slice(b"HCUB");
        for d in [self.rows(), self.cols(), self.bands()] {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        buf.extend_from_slice(&(self.grid.band_count() as u32).to_le_bytes());
        for &w in self.grid.bands() {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        for &v in self.data.as_slice().expect("standard layout") {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load_hcub(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::MalformedFile { path: path.to_path_buf(), reason };
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 20 || &bytes[0..4] != b"HCUB" {
            return Err(bad("missing HCUB magic".into()));
        }
        let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        let (rows, cols, bands) = (u32_at(4), u32_at(8), u32_at(12));
        let band_count = u32_at(16);
        if band_count != bands {
            return Err(bad(format!("dims say {bands} bands, grid header says {band_count}")));
        }
        let wl_end = 20 + band_count * 8;
        let expected = wl_end + rows * cols * bands * 4;
        if bytes.len() != expected {
            return Err(bad(format!(
                "payload length mismatch: file has {} bytes, dims ({rows}, {cols}, {bands}) need {expected}",
                bytes.len()
            )));
        }
        let wavelengths: Vec<f64> = (0..band_count)
            .map(|k| f64::from_le_bytes(bytes[20 + k * 8..28 + k * 8].try_into().unwrap()))
            .collect();
        let grid = WavelengthGrid::new(wavelengths)
            .map_err(|e| bad(format!("bad wavelength grid: {e}")))?;
        let mut data = Array3::<f64>::zeros((rows, cols, bands));
        let payload = &bytes[wl_end..];
        for (i, v) in data.iter_mut().enumerate() {
            let raw = f32::from_le_bytes(payload[i * 4..i * 4 + 4].try_into().unwrap());
            if !raw.is_finite() {
                let b = i % bands;
                let c = (i / bands) % cols;
                let r = i / (bands * cols);
                return Err(Error::NonFinite { location: format!("({r}, {c}, {b})"), value: raw as f64 });
            }
            *v = raw as f64;
        }
        // Values travel untouched; the dynamic-range ceiling is the 32-bit default.
        HyperCube::new(data, grid, DEFAULT_MAX_VALUE)
    }

    /// CSV spectra: one spectrum per row, comma-separated, no header.
    /// An n-row × B-column file becomes an n×1×B cube on a uniform default
    /// grid spanning 450-940 nm.
    pub fn load_csv_spectra(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::MalformedFile { path: path.to_path_buf(), reason };
        let text = std::fs::read_to_string(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for (col, field) in line.split(',').enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("unparseable value at line {}, column {}", lineno + 1, col + 1)))?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        location: format!("line {}, column {}", lineno + 1, col + 1),
                        value: v,
                    });
                }
                row.push(v);
            }
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(bad(format!(
                        "line {} has {} columns, expected {}",
                        lineno + 1,
                        row.len(),
                        first.len()
                    )));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(bad("no spectra in file".into()));
        }
        let bands = rows[0].len();
        let grid = WavelengthGrid::uniform(bands, 450.0, 940.0)?;
        let mut data = Array3::<f64>::zeros((rows.len(), 1, bands));
        for (r, row) in rows.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                data[[r, 0, b]] = v;
            }
        }
        HyperCube::new(data, grid, DEFAULT_MAX_VALUE)
    }
}

/// Cube file formats understood by `load_cube`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeFormat {
    FlatBinary,
    CsvSpectra,
}

pub fn load_cube(path: &Path, format: CubeFormat) -> Result<HyperCube> {
    match format {
        CubeFormat::FlatBinary => HyperCube::load_hcub(path),
        CubeFormat::CsvSpectra => HyperCube::load_csv_spectra(path),
    }
}

/// Parameters of the synthetic-scene generator.
///
/// The generated cube is a sum of `spectral_rank` separable terms, each a
/// smooth spatial map times a fixed spectrum, plus a white-noise floor:
/// low spectral rank and a controlled spatial correlation length, so the
/// exploratory analyses have known ground truth.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub spectral_rank: usize,
    /// Distance (pixels) at which the pair correlation of the spatial maps
    /// drops to about one half.
    pub spatial_correlation_length: f64,
    /// Relative amplitude of the additive white-noise floor.
    pub noise_floor: f64,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.bands < 2 {
            return Err(Error::InvalidArgument(format!(
                "degenerate synth dims ({}, {}, {})",
                self.rows, self.cols, self.bands
            )));
        }
        if self.spectral_rank == 0 || self.spectral_rank > self.bands {
            return Err(Error::InvalidArgument(format!(
                "spectral_rank {} must be in 1..={}",
                self.spectral_rank, self.bands
            )));
        }
        if self.spatial_correlation_length < 0.0 {
            return Err(Error::InvalidArgument("negative correlation length".into()));
        }
        if self.noise_floor < 0.0 {
            return Err(Error::InvalidArgument("negative noise floor".into()));
        }
        Ok(())
    }
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 64,
            bands: 40,
            spectral_rank: 4,
            spatial_correlation_length: 8.0,
            noise_floor: 1e-3,
            seed: 1,
        }
    }
}

/// Smooth non-negative spatial map: white noise circularly convolved with a
/// Gaussian kernel, then min-max normalized to [0, 1].
fn smooth_map(rows: usize, cols: usize, corr_len: f64, rng: &mut impl Rng) -> Array2<f64> {
    let mut field = Array2::<f64>::zeros((rows, cols));
    for v in field.iter_mut() {
        *v = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    }
    // Pair correlation of a σ-blurred white field is exp(−d²/(4σ²)); it hits
    // 1/2 at d = 2σ√ln2 ≈ 1.665σ, so σ = corr_len / 1.665 puts the half point
    // at corr_len.
    let sigma = corr_len / (2.0 * (2.0_f64.ln()).sqrt());
    if sigma > 1e-9 {
        let radius = (4.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|k| (-(k as f64) * (k as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let ksum: f64 = kernel.iter().sum();
        let kernel: Vec<f64> = kernel.iter().map(|v| v / ksum).collect();
        // Separable circular convolution, rows then columns.
        let mut tmp = Array2::<f64>::zeros((rows, cols));
        for r in 0..rows {
            for c in 0..cols {
                let mut s = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let rr = (r as isize + ki as isize - radius).rem_euclid(rows as isize) as usize;
                    s += k * field[[rr, c]];
                }
                tmp[[r, c]] = s;
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                let mut s = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let cc = (c as isize + ki as isize - radius).rem_euclid(cols as isize) as usize;
                    s += k * tmp[[r, cc]];
                }
                field[[r, c]] = s;
            }
        }
    }
    let min = field.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(1e-12);
    field.mapv_inplace(|v| (v - min) / span);
    field
}

/// Smooth non-negative spectrum: a broad baseline plus a few random Gaussian
/// bumps over the band range.
fn smooth_spectrum(bands: usize, rng: &mut impl Rng) -> Array1<f64> {
    let mut s = Array1::<f64>::from_elem(bands, rng.gen_range(0.05..0.2));
    let n_bumps = rng.gen_range(2..5);
    let max_width = (bands as f64 / 2.0).max(2.5);
    for _ in 0..n_bumps {
        let center = rng.gen_range(0.0..bands as f64);
        let width = rng.gen_range(2.0..max_width);
        let amp = rng.gen_range(0.2..1.0);
        for b in 0..bands {
            let d = (b as f64 - center) / width;
            s[b] += amp * (-0.5 * d * d).exp();
        }
    }
    s
}

/// Generate a synthetic scene cube. Deterministic given the seed.
pub fn synth_cube(spec: &SynthSpec) -> Result<HyperCube> {
    spec.validate()?;
    let mut rng = seeds::rng(spec.seed, &[0x5e_17]);
    let mut data = Array3::<f64>::zeros((spec.rows, spec.cols, spec.bands));
    for _ in 0..spec.spectral_rank {
        let map = smooth_map(spec.rows, spec.cols, spec.spatial_correlation_length, &mut rng);
        let spectrum = smooth_spectrum(spec.bands, &mut rng);
        Zip::indexed(&mut data).for_each(|(r, c, b), v| {
            *v += map[[r, c]] * spectrum[b];
        });
    }
    if spec.noise_floor > 0.0 {
        let scale = spec.noise_floor * data.iter().cloned().fold(0.0_f64, f64::max);
        for v in data.iter_mut() {
            let n: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            *v += scale * n;
        }
    }
    // Every separable term is non-negative; only the noise floor can push a
    // value below zero.
    data.mapv_inplace(|v| v.max(0.0));
    HyperCube::new(data, WavelengthGrid::uniform(spec.bands, 450.0, 940.0)?, DEFAULT_MAX_VALUE)
}

/// Split a cube into (left, right) column ranges: [0, train_cols) and the
/// remainder. The two parts are disjoint and cover the cube.
pub fn split_columns(cube: &HyperCube, train_cols: usize) -> Result<(HyperCube, HyperCube)> {
    if train_cols == 0 || train_cols >= cube.cols() {
        return Err(Error::InvalidArgument(format!(
            "train_cols {} out of range 1..{}",
            train_cols,
            cube.cols()
        )));
    }
    let left = cube.data.slice(ndarray::s![.., ..train_cols, ..]).to_owned();
    let right = cube.data.slice(ndarray::s![.., train_cols.., ..]).to_owned();
    Ok((
        HyperCube { data: left.as_standard_layout().to_owned(), grid: cube.grid.clone(), max_value: cube.max_value },
        HyperCube { data: right.as_standard_layout().to_owned(), grid: cube.grid.clone(), max_value: cube.max_value },
    ))
}

/// Draw `n` spectra uniformly with replacement over pixels.
pub fn sample_spectra(cube: &HyperCube, n: usize, seed: u64) -> Result<Vec<Array1<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample_spectra needs n >= 1".into()));
    }
    if cube.rows() == 0 || cube.cols() == 0 {
        return Err(Error::InvalidArgument("empty cube".into()));
    }
    let mut rng = seeds::rng(seed, &[0x5a]);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.gen_range(0..cube.rows());
        let c = rng.gen_range(0..cube.cols());
        out.push(cube.spectrum(r, c));
    }
    Ok(out)
}

/// One of the eight mirror/rotation variants of a square patch.
///
/// `id` 0..4 are pure quarter-turn rotations; 4..8 mirror first (column
/// flip), then rotate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Augmentation {
    pub id: u8,
}

impl Augmentation {
    pub const IDENTITY: Augmentation = Augmentation { id: 0 };

    pub fn mirrored(self) -> bool {
        self.id >= 4
    }

    pub fn quarter_turns(self) -> u8 {
        self.id % 4
    }

    /// Apply to a square (P, P, B) patch.
    pub fn apply(self, patch: &Array3<f64>) -> Array3<f64> {
        let mut out = patch.clone();
        if self.mirrored() {
            out.invert_axis(Axis(1));
        }
        for _ in 0..self.quarter_turns() {
            out = rot90(&out);
        }
        out.as_standard_layout().to_owned()
    }
}

/// Rotate a square (P, P, B) patch a quarter turn counter-clockwise:
/// out[P−1−c, r] = in[r, c].
fn rot90(patch: &Array3<f64>) -> Array3<f64> {
    let (p, q, bands) = patch.dim();
    debug_assert_eq!(p, q);
    let mut out = Array3::<f64>::zeros((p, p, bands));
    for r in 0..p {
        for c in 0..p {
            for b in 0..bands {
                out[[p - 1 - c, r, b]] = patch[[r, c, b]];
            }
        }
    }
    out
}

/// A batch of square patches sharing one grid, with their sampling
/// provenance.
#[derive(Debug, Clone)]
pub struct PatchBatch {
    pub patches: Vec<Array3<f64>>,
    pub provenance: Vec<(usize, usize, Augmentation)>,
    pub grid: WavelengthGrid,
    pub max_value: f64,
    pub seed: u64,
}

impl PatchBatch {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patch_size(&self) -> usize {
        self.patches.first().map(|p| p.shape()[0]).unwrap_or(0)
    }

    pub fn bands(&self) -> usize {
        self.grid.band_count()
    }
}

/// Sample `n` P×P patches at uniformly random anchors.
///
/// With augmentation each patch independently receives one of the eight
/// mirror×rotation variants. A (anchor, augmentation) pair is never drawn
/// twice; the draw errors out when `n` exceeds the number of distinct pairs.
pub fn sample_patches(
    cube: &HyperCube,
    n: usize,
    size: usize,
    augment: bool,
    seed: u64,
) -> Result<PatchBatch> {
    if size == 0 || size > cube.rows() || size > cube.cols() {
        return Err(Error::InvalidArgument(format!(
            "patch size {size} does not fit a {}x{} cube",
            cube.rows(),
            cube.cols()
        )));
    }
    let anchors_r = cube.rows() - size + 1;
    let anchors_c = cube.cols() - size + 1;
    let variants: u64 = if augment { 8 } else { 1 };
    let combos = anchors_r as u64 * anchors_c as u64 * variants;
    if n as u64 > combos {
        return Err(Error::InvalidArgument(format!(
            "{n} patches requested but only {combos} distinct (anchor, augmentation) pairs exist"
        )));
    }
    let mut rng = seeds::rng(seed, &[0xbadc]);
    let mut taken: HashSet<(usize, usize, u8)> = HashSet::with_capacity(n);
    let mut patches = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    while patches.len() < n {
        let r = rng.gen_range(0..anchors_r);
        let c = rng.gen_range(0..anchors_c);
        let aug = Augmentation { id: if augment { rng.gen_range(0..8) } else { 0 } };
        if !taken.insert((r, c, aug.id)) {
            continue; // exact duplicate: rejected and redrawn
        }
        let raw = cube.data.slice(ndarray::s![r..r + size, c..c + size, ..]).to_owned();
        patches.push(aug.apply(&raw));
        provenance.push((r, c, aug));
    }
    Ok(PatchBatch { patches, provenance, grid: cube.grid.clone(), max_value: cube.max_value, seed })
}

/// Disjoint random split into (train, val) parts.
///
/// The validation part gets `val_fraction` of the items rounded to nearest,
/// with at least one item on each side.
pub fn train_val_split(batch: &PatchBatch, val_fraction: f64, seed: u64) -> Result<(PatchBatch, PatchBatch)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "val_fraction {val_fraction} must be in (0, 1)"
        )));
    }
    let n = batch.len();
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let order = shuffled_indices(n, seed);
    let pick = |idx: &[usize]| PatchBatch {
        patches: idx.iter().map(|&i| batch.patches[i].clone()).collect(),
        provenance: idx.iter().map(|&i| batch.provenance[i]).collect(),
        grid: batch.grid.clone(),
        max_value: batch.max_value,
        seed: batch.seed,
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    Ok((pick(train_idx), pick(val_idx)))
}

/// Split a list of spectra the same way.
pub fn train_val_split_spectra(
    spectra: &[Array1<f64>],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<Array1<f64>>, Vec<Array1<f64>>)> {
    if spectra.is_empty() {
        return Err(Error::InvalidArgument("empty spectra list".into()));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "val_fraction {val_fraction} must be in (0, 1)"
        )));
    }
    let n = spectra.len();
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let order = shuffled_indices(n, seed);
    let (val_idx, train_idx) = order.split_at(n_val);
    Ok((
        train_idx.iter().map(|&i| spectra[i].clone()).collect(),
        val_idx.iter().map(|&i| spectra[i].clone()).collect(),
    ))
}

/// Fisher-Yates permutation of 0..n, deterministic per seed.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeds::rng(seed, &[0x5481]);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
