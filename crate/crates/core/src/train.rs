//! The optimization engine: composite loss (data MSE + L2 + Lorentzian
//! snapping term), analytic back-propagation through the
//! reconstruct ∘ noise ∘ forward chain, Adam updates, trainability masks,
//! and the training loop with validation-based model selection.
//!
//! Filter and layout parameters are optimized in the scaled [−1, +1] space;
//! gradients are chain-ruled through the affine unscale map. The additive
//! noise layer passes gradients through unchanged (its amplitude is treated
//! as constant in the backward pass). Parameters pushed beyond the scaled
//! boundary are clamped in the forward model and receive no gradient
//! component pushing them further out.

use ndarray::{Array1, Array2, Array3};
use rand_distr::{Distribution, StandardNormal};

use crate::datacube::{PatchBatch, WavelengthGrid};
use crate::error::{Error, Result};
use crate::layout::{LayoutKind, LayoutPattern};
use crate::measurement::MeasurementSpec;
use crate::reconstruct::{LinearReconstructor, ReconDims};
use crate::seeds;
use crate::spectral::{transmission, transmission_grad, FilterParams, FilterSet, ParamDomain};

// Seed-stream tags.
const TAG_SPLIT: u64 = 1;
const TAG_SHUFFLE: u64 = 2;
const TAG_NOISE: u64 = 3;
const TAG_VAL_NOISE: u64 = 4;
const TAG_EVAL_NOISE: u64 = 5;

/// Which parameter classes the optimizer may update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trainability {
    /// The shared filter set of an indexed layout.
    pub filters: bool,
    /// The per-pixel parameters of a continuous layout.
    pub layout: bool,
    /// The reconstructor weights.
    pub reconstructor: bool,
}

impl Trainability {
    pub fn reconstructor_only() -> Self {
        Self { filters: false, layout: false, reconstructor: true }
    }
}

/// The filter-snapping regularizer: a sum of inverted 2-D Lorentzians with
/// minima at the target filters, evaluated in scaled parameter space.
#[derive(Debug, Clone)]
pub struct LorentzianConfig {
    pub alpha_reg: f64,
    /// Half-width A of each Lorentzian well, in scaled units.
    pub amplitude: f64,
    pub targets: FilterSet,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_weight: f64,
    pub lorentzian: Option<LorentzianConfig>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub val_fraction: f64,
    pub trainability: Trainability,
    /// Stop after this many epochs without validation improvement.
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            l2_weight: 0.0,
            lorentzian: None,
            epochs: 200,
            batch_size: 32,
            seed: 1,
            val_fraction: 0.10,
            trainability: Trainability::reconstructor_only(),
            early_stop_patience: 20,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if self.l2_weight < 0.0 {
            return Err(Error::InvalidArgument("l2_weight must be non-negative".into()));
        }
        if let Some(l) = &self.lorentzian {
            if l.alpha_reg < 0.0 || !(l.amplitude > 0.0) {
                return Err(Error::InvalidArgument("lorentzian needs alpha_reg >= 0 and A > 0".into()));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidArgument("val_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// The complete instrument model under optimization.
#[derive(Debug, Clone)]
pub struct Model {
    pub layout: LayoutPattern,
    pub reconstructor: LinearReconstructor,
    pub measurement: MeasurementSpec,
    pub grid: WavelengthGrid,
    pub domain: ParamDomain,
}

impl Model {
    /// Wire up a model with a zero-initialized reconstructor.
    pub fn new(
        layout: LayoutPattern,
        measurement: MeasurementSpec,
        grid: WavelengthGrid,
        domain: ParamDomain,
    ) -> Result<Self> {
        let dims = ReconDims {
            rows: layout.rows(),
            cols: layout.cols(),
            bands: grid.band_count(),
            steps: measurement.steps,
        };
        let model = Self {
            layout,
            reconstructor: LinearReconstructor::init_zero(dims),
            measurement,
            grid,
            domain,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.reconstructor.dims;
        if d.rows != self.layout.rows() || d.cols != self.layout.cols() {
            return Err(Error::DimensionMismatch(format!(
                "reconstructor is wired for {}x{}, layout is {}x{}",
                d.rows,
                d.cols,
                self.layout.rows(),
                self.layout.cols()
            )));
        }
        if d.bands != self.grid.band_count() {
            return Err(Error::DimensionMismatch(format!(
                "reconstructor expects {} bands, grid has {}",
                d.bands,
                self.grid.band_count()
            )));
        }
        if d.steps != self.measurement.steps {
            return Err(Error::DimensionMismatch(format!(
                "reconstructor expects {} steps, measurement takes {}",
                d.steps, self.measurement.steps
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> ReconDims {
        self.reconstructor.dims
    }
}

/// Which data split a loss was measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

/// One logged loss measurement; total = data_mse + l2_term + lorentzian_term.
#[derive(Debug, Clone, Copy)]
pub struct LossReport {
    pub epoch: usize,
    pub split: Split,
    pub total: f64,
    pub data_mse: f64,
    pub l2_term: f64,
    pub lorentzian_term: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct LossParts {
    data_mse: f64,
    l2_term: f64,
    lorentzian_term: f64,
}

impl LossParts {
    fn total(&self) -> f64 {
        self.data_mse + self.l2_term + self.lorentzian_term
    }
}

/// Training input: full patches, or bare spectra viewed by a column of
/// virtual pixels (the spectral-only estimator: the filter-stack measurement
/// is the layout measurement with one scene spectrum behind every pixel and
/// a single step).
#[derive(Clone, Copy)]
pub enum TrainData<'a> {
    Patches(&'a PatchBatch),
    Spectra { spectra: &'a [Array1<f64>], virtual_pixels: usize },
}

impl<'a> TrainData<'a> {
    pub fn len(&self) -> usize {
        match self {
            TrainData::Patches(b) => b.len(),
            TrainData::Spectra { spectra, .. } => spectra.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bands(&self) -> usize {
        match self {
            TrainData::Patches(b) => b.bands(),
            TrainData::Spectra { spectra, .. } => spectra.first().map(|s| s.len()).unwrap_or(0),
        }
    }

    /// Stack the selected items into a (P, M, B) batch array.
    fn gather(&self, indices: &[usize], rows: usize, cols: usize) -> Array3<f64> {
        let m = rows * cols;
        let b = self.bands();
        let mut x = Array3::<f64>::zeros((indices.len(), m, b));
        match self {
            TrainData::Patches(batch) => {
                for (slot, &i) in indices.iter().enumerate() {
                    let patch = &batch.patches[i];
                    for r in 0..rows {
                        for c in 0..cols {
                            for band in 0..b {
                                x[[slot, r * cols + c, band]] = patch[[r, c, band]];
                            }
                        }
                    }
                }
            }
            TrainData::Spectra { spectra, .. } => {
                for (slot, &i) in indices.iter().enumerate() {
                    for pix in 0..m {
                        for band in 0..b {
                            x[[slot, pix, band]] = spectra[i][band];
                        }
                    }
                }
            }
        }
        x
    }
}

/// Analytic gradients of the total loss for one batch.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// d(total)/d(reconstructor weights), when the reconstructor is trainable.
    pub reconstructor: Option<Array2<f64>>,
    /// d(total)/d(scaled filter parameters), interleaved
    /// [u_center_0, u_fwhm_0, u_center_1, ...], when filter units are
    /// trainable. For indexed layouts the units are the shared filter set;
    /// for continuous layouts they are the per-pixel parameters in row-major
    /// pixel order.
    pub filter_units: Option<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Mutable optimization state extracted from a model.
struct Engine {
    rows: usize,
    cols: usize,
    bands: usize,
    steps: usize,
    pixel_count: usize,
    grid: WavelengthGrid,
    domain: ParamDomain,
    snr: f64,
    /// layout pixel seen by scene pixel m at step s: shift[s][m].
    shift: Vec<Vec<usize>>,
    /// layout pixel -> filter unit.
    unit_of: Vec<usize>,
    /// Number of (center, fwhm) units: N for indexed, M for continuous.
    units: usize,
    /// For indexed layouts, the pixel index grid (never trained).
    indices: Option<Array2<usize>>,
    /// Scaled parameters, interleaved (center, fwhm) per unit.
    scaled: Vec<f64>,
    r: Array2<f64>,
    train_r: bool,
    train_units: bool,
    l2_weight: f64,
    /// (alpha_reg, A, targets in scaled space).
    lorentzian: Option<(f64, f64, Vec<(f64, f64)>)>,
}

impl Engine {
    fn from_model(model: &Model, config: &TrainConfig) -> Result<Self> {
        model.validate()?;
        let rows = model.layout.rows();
        let cols = model.layout.cols();
        let pixel_count = rows * cols;
        let steps = model.measurement.steps;
        let shift = (0..steps)
            .map(|s| {
                (0..pixel_count)
                    .map(|m| {
                        let (r, c) = (m / cols, m % cols);
                        ((r + s) % rows) * cols + c
                    })
                    .collect()
            })
            .collect();
        let (unit_of, units, indices, scaled, train_units) = match model.layout.kind() {
            LayoutKind::Indexed { indices, filters } => {
                let unit_of: Vec<usize> = indices.iter().cloned().collect();
                let mut scaled = Vec::with_capacity(filters.len() * 2);
                for f in filters.iter() {
                    let u = model.domain.scale(*f);
                    scaled.push(u.u_center);
                    scaled.push(u.u_fwhm);
                }
                (unit_of, filters.len(), Some(indices.clone()), scaled, config.trainability.filters)
            }
            LayoutKind::Continuous { centers, fwhms } => {
                let unit_of: Vec<usize> = (0..pixel_count).collect();
                let mut scaled = Vec::with_capacity(pixel_count * 2);
                for (&c, &w) in centers.iter().zip(fwhms.iter()) {
                    let u = model.domain.scale(FilterParams { center: c, fwhm: w });
                    scaled.push(u.u_center);
                    scaled.push(u.u_fwhm);
                }
                (unit_of, pixel_count, None, scaled, config.trainability.layout)
            }
        };
        let lorentzian = config.lorentzian.as_ref().map(|l| {
            let targets = l
                .targets
                .iter()
                .map(|&f| {
                    let u = model.domain.scale(f);
                    (u.u_center, u.u_fwhm)
                })
                .collect();
            (l.alpha_reg, l.amplitude, targets)
        });
        Ok(Self {
            rows,
            cols,
            bands: model.grid.band_count(),
            steps,
            pixel_count,
            grid: model.grid.clone(),
            domain: model.domain,
            snr: model.measurement.snr,
            shift,
            unit_of,
            units,
            indices,
            scaled,
            r: model.reconstructor.weights.clone(),
            train_r: config.trainability.reconstructor,
            train_units,
            l2_weight: config.l2_weight,
            lorentzian,
        })
    }

    fn unit_params(&self, k: usize) -> FilterParams {
        self.domain.unscale(crate::spectral::ScaledParams {
            u_center: self.scaled[2 * k],
            u_fwhm: self.scaled[2 * k + 1],
        })
    }

    /// Transmission table and its parameter derivatives per unit.
    fn transmissions(&self) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let mut t = Array2::<f64>::zeros((self.units, self.bands));
        let mut dtc = Array2::<f64>::zeros((self.units, self.bands));
        let mut dtw = Array2::<f64>::zeros((self.units, self.bands));
        for k in 0..self.units {
            let f = self.unit_params(k);
            let trow = transmission(f, &self.grid);
            let (dc, dw) = transmission_grad(f, &self.grid);
            for b in 0..self.bands {
                t[[k, b]] = trow[b];
                dtc[[k, b]] = dc[b];
                dtw[[k, b]] = dw[b];
            }
        }
        (t, dtc, dtw)
    }

    /// Pre-noise forward of a stacked batch: (P, S·M).
    fn forward_batch(&self, x: &Array3<f64>, t: &Array2<f64>) -> Array2<f64> {
        let p_count = x.shape()[0];
        let m = self.pixel_count;
        let mut y = Array2::<f64>::zeros((p_count, self.steps * m));
        for s in 0..self.steps {
            let shift_s = &self.shift[s];
            for pix in 0..m {
                let k = self.unit_of[shift_s[pix]];
                for p in 0..p_count {
                    let mut acc = 0.0;
                    for b in 0..self.bands {
                        acc += t[[k, b]] * x[[p, pix, b]];
                    }
                    y[[p, s * m + pix]] = acc;
                }
            }
        }
        y
    }

    /// Add per-patch Gaussian noise (σ = mean|y|/snr per patch).
    fn add_noise_batch(&self, y: &mut Array2<f64>, noise_seeds: &[u64]) {
        if self.snr.is_infinite() {
            return;
        }
        let len = y.shape()[1];
        for (p, &seed) in noise_seeds.iter().enumerate() {
            let mut row = y.row_mut(p);
            let sigma = row.iter().map(|v| v.abs()).sum::<f64>() / len as f64 / self.snr;
            let mut rng = seeds::rng(seed, &[0x4015e]);
            for v in row.iter_mut() {
                let n: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                *v += sigma * n;
            }
        }
    }

    fn lorentzian_parts(&self) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.scaled.len()];
        let Some((alpha, a, targets)) = &self.lorentzian else {
            return (0.0, grad);
        };
        if !self.train_units || *alpha == 0.0 {
            // The snapping term attaches to whichever trainable filter
            // parameters exist in the active configuration.
            return (0.0, grad);
        }
        let a2 = a * a;
        let mut loss = 0.0;
        for k in 0..self.units {
            let uc = self.scaled[2 * k];
            let uw = self.scaled[2 * k + 1];
            for &(tc, tw) in targets {
                let dc = uc - tc;
                let dw = uw - tw;
                let denom = dc * dc + dw * dw + a2;
                loss += 1.0 - a2 / denom;
                let common = alpha * 2.0 * a2 / (denom * denom);
                grad[2 * k] += common * dc;
                grad[2 * k + 1] += common * dw;
            }
        }
        (alpha * loss, grad)
    }

    /// Loss and (optionally) gradients over one stacked batch.
    fn compute_batch(
        &self,
        x: &Array3<f64>,
        noise_seeds: &[u64],
        want_grads: bool,
    ) -> Result<(LossParts, Gradients)> {
        let p_count = x.shape()[0];
        let mb = self.pixel_count * self.bands;
        let (t, dtc, dtw) = self.transmissions();
        let mut yh = self.forward_batch(x, &t);
        self.add_noise_batch(&mut yh, noise_seeds);
        let x_flat = x.to_shape((p_count, mb)).expect("standard layout");
        // x̂ = R·ŷ per patch, batched: (P, SM)·(SM, MB) = (P, MB).
        let xhat = yh.dot(&self.r.t());
        let e = &xhat - &x_flat;
        let norm = 1.0 / (p_count as f64 * mb as f64);
        let data_mse = e.iter().map(|v| v * v).sum::<f64>() * norm;
        let l2_term = self.l2_weight * self.r.iter().map(|v| v * v).sum::<f64>();
        let (lorentzian_term, lor_grad) = self.lorentzian_parts();
        let parts = LossParts { data_mse, l2_term, lorentzian_term };
        if !want_grads {
            return Ok((parts, Gradients { reconstructor: None, filter_units: None }));
        }
        let gr = if self.train_r {
            let mut g = e.t().dot(&yh);
            g.mapv_inplace(|v| v * 2.0 * norm);
            if self.l2_weight > 0.0 {
                g.scaled_add(2.0 * self.l2_weight, &self.r);
            }
            Some(g)
        } else {
            None
        };
        let gu = if self.train_units {
            // dL/dŷ, then accumulate into the per-unit transmission gradient.
            let gy = e.dot(&self.r); // (P, SM)
            let mut gt = Array2::<f64>::zeros((self.units, self.bands));
            for s in 0..self.steps {
                let shift_s = &self.shift[s];
                for pix in 0..self.pixel_count {
                    let k = self.unit_of[shift_s[pix]];
                    for p in 0..p_count {
                        let coef = 2.0 * norm * gy[[p, s * self.pixel_count + pix]];
                        if coef == 0.0 {
                            continue;
                        }
                        for b in 0..self.bands {
                            gt[[k, b]] += coef * x[[p, pix, b]];
                        }
                    }
                }
            }
            let mut g = vec![0.0; self.scaled.len()];
            let c_slope = self.domain.center_slope();
            let w_slope = self.domain.fwhm_slope();
            for k in 0..self.units {
                let mut gc = 0.0;
                let mut gw = 0.0;
                for b in 0..self.bands {
                    gc += gt[[k, b]] * dtc[[k, b]];
                    gw += gt[[k, b]] * dtw[[k, b]];
                }
                g[2 * k] = boundary_rule(self.scaled[2 * k], gc * c_slope) + lor_grad[2 * k];
                g[2 * k + 1] = boundary_rule(self.scaled[2 * k + 1], gw * w_slope) + lor_grad[2 * k + 1];
            }
            Some(g)
        } else {
            None
        };
        Ok((parts, Gradients { reconstructor: gr, filter_units: gu }))
    }

    /// Rebuild the trained layout from the current scaled parameters.
    fn layout(&self) -> LayoutPattern {
        match &self.indices {
            Some(indices) => {
                let filters: Vec<FilterParams> = (0..self.units).map(|k| self.unit_params(k)).collect();
                LayoutPattern::indexed(indices.clone(), FilterSet::new(filters).expect("non-empty"))
                    .expect("indices validated at construction")
            }
            None => {
                let mut centers = Array2::<f64>::zeros((self.rows, self.cols));
                let mut fwhms = Array2::<f64>::zeros((self.rows, self.cols));
                for k in 0..self.units {
                    let f = self.unit_params(k);
                    centers[[k / self.cols, k % self.cols]] = f.center;
                    fwhms[[k / self.cols, k % self.cols]] = f.fwhm;
                }
                LayoutPattern::continuous(centers, fwhms).expect("in-domain params")
            }
        }
    }
}

/// Zero the gradient component that would push a clamped scaled parameter
/// further out of [−1, +1]; gradients pulling it back inside pass through.
fn boundary_rule(u: f64, g: f64) -> f64 {
    if u >= 1.0 {
        g.max(0.0)
    } else if u <= -1.0 {
        g.min(0.0)
    } else {
        g
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Adam moment accumulators for one parameter class.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    /// One bias-corrected Adam update, in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "adam state holds {} moments, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Public loss/gradient entry points
// ---------------------------------------------------------------------------

/// Mean over the batch of mse(x, R(add_noise(forward(x)))).
pub fn data_loss(model: &Model, data: TrainData, noise_seed: u64) -> Result<f64> {
    let config = TrainConfig { l2_weight: 0.0, lorentzian: None, ..TrainConfig::default() };
    let engine = Engine::from_model(model, &config)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let indices: Vec<usize> = (0..data.len()).collect();
    let x = data.gather(&indices, engine.rows, engine.cols);
    let seeds_vec: Vec<u64> = indices
        .iter()
        .map(|&i| seeds::derive(noise_seed, &[TAG_EVAL_NOISE, i as u64]))
        .collect();
    let (parts, _) = engine.compute_batch(&x, &seeds_vec, false)?;
    Ok(parts.data_mse)
}

/// L2 penalty on the reconstructor weights: l2_weight·Σw².
pub fn l2_penalty(reconstructor: &LinearReconstructor, l2_weight: f64) -> f64 {
    l2_weight * reconstructor.weights.iter().map(|v| v * v).sum::<f64>()
}

/// Lorentzian snapping penalty of a continuous layout against a target set,
/// with distances measured in scaled parameter space.
pub fn lorentzian_penalty(
    layout: &LayoutPattern,
    targets: &FilterSet,
    amplitude: f64,
    alpha_reg: f64,
    domain: &ParamDomain,
) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("empty target set".into()));
    }
    if !(amplitude > 0.0) {
        return Err(Error::InvalidArgument("amplitude A must be positive".into()));
    }
    let LayoutKind::Continuous { centers, fwhms } = layout.kind() else {
        return Err(Error::InvalidArgument("lorentzian_penalty expects a continuous layout".into()));
    };
    let scaled_targets: Vec<_> = targets.iter().map(|&f| domain.scale(f)).collect();
    let a2 = amplitude * amplitude;
    let mut loss = 0.0;
    for (&c, &w) in centers.iter().zip(fwhms.iter()) {
        let u = domain.scale(FilterParams { center: c, fwhm: w });
        for t in &scaled_targets {
            let dc = u.u_center - t.u_center;
            let dw = u.u_fwhm - t.u_fwhm;
            loss += 1.0 - a2 / (dc * dc + dw * dw + a2);
        }
    }
    Ok(alpha_reg * loss)
}

/// Analytic gradients of the total loss over a batch, for every parameter
/// class the config marks trainable.
pub fn backward(model: &Model, data: TrainData, noise_seed: u64, config: &TrainConfig) -> Result<Gradients> {
    let engine = Engine::from_model(model, config)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let indices: Vec<usize> = (0..data.len()).collect();
    let x = data.gather(&indices, engine.rows, engine.cols);
    let seeds_vec: Vec<u64> = indices
        .iter()
        .map(|&i| seeds::derive(noise_seed, &[TAG_EVAL_NOISE, i as u64]))
        .collect();
    let (_, grads) = engine.compute_batch(&x, &seeds_vec, true)?;
    Ok(grads)
}

/// Total loss evaluated exactly the way `backward` sees it; the pair forms
/// the finite-difference harness used by the gradient-correctness checks.
pub fn total_loss(model: &Model, data: TrainData, noise_seed: u64, config: &TrainConfig) -> Result<f64> {
    let engine = Engine::from_model(model, config)?;
    let indices: Vec<usize> = (0..data.len()).collect();
    let x = data.gather(&indices, engine.rows, engine.cols);
    let seeds_vec: Vec<u64> = indices
        .iter()
        .map(|&i| seeds::derive(noise_seed, &[TAG_EVAL_NOISE, i as u64]))
        .collect();
    let (parts, _) = engine.compute_batch(&x, &seeds_vec, false)?;
    Ok(parts.total())
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<LossReport>,
    pub best_epoch: usize,
    pub best_val_total: f64,
}

/// Train the model on the data. Fixed components receive no updates; each
/// epoch reshuffles the training batches and resamples detector noise from a
/// per-(epoch, patch) seed stream; validation uses one fixed noise
/// realization per patch so model selection is stable. Returns the parameter
/// state with the best validation total loss.
pub fn train(model: &Model, data: TrainData, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training data".into()));
    }
    if data.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 items to hold out validation".into()));
    }
    let mut engine = Engine::from_model(model, config)?;
    // Validation split on indices: same rounding rule as train_val_split.
    let n = data.len();
    let n_val = ((n as f64 * config.val_fraction).round() as usize).clamp(1, n - 1);
    let order = crate::datacube::shuffled_indices(n, seeds::derive(config.seed, &[TAG_SPLIT]));
    let (val_idx, train_idx) = order.split_at(n_val);
    let x_val = data.gather(val_idx, engine.rows, engine.cols);
    let val_seeds: Vec<u64> = val_idx
        .iter()
        .map(|&i| seeds::derive(config.seed, &[TAG_VAL_NOISE, i as u64]))
        .collect();

    let mut adam_r = AdamState::new(if engine.train_r { engine.r.len() } else { 0 });
    let mut adam_u = AdamState::new(if engine.train_units { engine.scaled.len() } else { 0 });

    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_r = engine.r.clone();
    let mut best_scaled = engine.scaled.clone();

    for epoch in 0..config.epochs {
        // Seeded reshuffle of the training order.
        let perm = crate::datacube::shuffled_indices(
            train_idx.len(),
            seeds::derive(config.seed, &[TAG_SHUFFLE, epoch as u64]),
        );
        let shuffled: Vec<usize> = perm.iter().map(|&i| train_idx[i]).collect();

        let mut train_acc = LossParts::default();
        let mut seen = 0usize;
        for (batch_no, chunk) in shuffled.chunks(config.batch_size).enumerate() {
            let x = data.gather(chunk, engine.rows, engine.cols);
            let noise_seeds: Vec<u64> = chunk
                .iter()
                .map(|&i| seeds::derive(config.seed, &[TAG_NOISE, epoch as u64, i as u64]))
                .collect();
            let (parts, grads) = engine.compute_batch(&x, &noise_seeds, true)?;
            if !parts.total().is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_no });
            }
            let w = chunk.len() as f64;
            train_acc.data_mse += parts.data_mse * w;
            train_acc.l2_term += parts.l2_term * w;
            train_acc.lorentzian_term += parts.lorentzian_term * w;
            seen += chunk.len();
            if let Some(gr) = grads.reconstructor {
                adam_r.step(
                    engine.r.as_slice_mut().expect("standard layout"),
                    gr.as_slice().expect("standard layout"),
                    config.learning_rate,
                )?;
            }
            if let Some(gu) = grads.filter_units {
                adam_u.step(&mut engine.scaled, &gu, config.learning_rate)?;
            }
        }
        let wn = 1.0 / seen.max(1) as f64;
        history.push(LossReport {
            epoch,
            split: Split::Train,
            total: (train_acc.data_mse + train_acc.l2_term + train_acc.lorentzian_term) * wn,
            data_mse: train_acc.data_mse * wn,
            l2_term: train_acc.l2_term * wn,
            lorentzian_term: train_acc.lorentzian_term * wn,
        });

        let (val_parts, _) = engine.compute_batch(&x_val, &val_seeds, false)?;
        if !val_parts.total().is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        history.push(LossReport {
            epoch,
            split: Split::Val,
            total: val_parts.total(),
            data_mse: val_parts.data_mse,
            l2_term: val_parts.l2_term,
            lorentzian_term: val_parts.lorentzian_term,
        });
        if val_parts.total() < best_val {
            best_val = val_parts.total();
            best_epoch = epoch;
            best_r.assign(&engine.r);
            best_scaled.copy_from_slice(&engine.scaled);
        } else if epoch - best_epoch >= config.early_stop_patience {
            break;
        }
    }

    engine.r = best_r;
    engine.scaled = best_scaled;
    let trained = Model {
        layout: if engine.train_units { engine.layout() } else { model.layout.clone() },
        reconstructor: if engine.train_r {
            LinearReconstructor::new(engine.r.clone(), model.reconstructor.dims)?
        } else {
            model.reconstructor.clone()
        },
        measurement: model.measurement,
        grid: model.grid.clone(),
        domain: model.domain,
    };
    Ok(TrainOutcome { model: trained, history, best_epoch, best_val_total: best_val })
}

/// Test-set metrics: one noise pass, pooled MSE over all patches, PSNR from
/// the pooled MSE at the batch's dynamic-range ceiling.
#[derive(Debug, Clone, Copy)]
pub struct EvalMetrics {
    pub mse: f64,
    pub psnr: f64,
}

pub fn evaluate(model: &Model, data: &PatchBatch, noise_seed: u64) -> Result<EvalMetrics> {
    let mse = data_loss(model, TrainData::Patches(data), noise_seed)?;
    Ok(EvalMetrics { mse, psnr: crate::spectral::psnr_from_mse(mse, data.max_value) })
}

/// Result of the spectral-only estimator: the trained passbands, the loss
/// history, and the degenerate-layout model (whose reconstructor maps the N
/// filtered intensities back to a spectrum).
#[derive(Debug, Clone)]
pub struct FiltersOutcome {
    pub filters: FilterSet,
    pub history: Vec<LossReport>,
    pub model: Model,
}

/// The spectral-only estimator: train Gaussian passbands (and a small
/// reconstructor) on bare spectra, independent of spatial arrangement. The
/// measurement is the degenerate layout case — a column of `n_filters`
/// virtual pixels all viewing the same spectrum, one step.
pub fn optimal_filters(
    spectra: &[Array1<f64>],
    n_filters: usize,
    grid: &WavelengthGrid,
    domain: &ParamDomain,
    snr: f64,
    config: &TrainConfig,
) -> Result<FiltersOutcome> {
    if n_filters == 0 {
        return Err(Error::InvalidArgument("n_filters must be >= 1".into()));
    }
    if spectra.is_empty() {
        return Err(Error::InvalidArgument("empty spectra list".into()));
    }
    let bands = spectra[0].len();
    if bands != grid.band_count() {
        return Err(Error::DimensionMismatch(format!(
            "spectra have {bands} bands, grid has {}",
            grid.band_count()
        )));
    }
    // Regular filters as the initial passbands, one per virtual pixel.
    let init = crate::spectral::regular_filters(n_filters, grid.lambda_min(), grid.lambda_max())?;
    let centers = Array2::from_shape_fn((n_filters, 1), |(k, _)| init.get(k).center);
    let fwhms = Array2::from_shape_fn((n_filters, 1), |(k, _)| init.get(k).fwhm);
    let layout = LayoutPattern::continuous(centers, fwhms)?;
    let measurement = MeasurementSpec::new(1, snr, config.seed)?;
    let model = Model::new(layout, measurement, grid.clone(), *domain)?;
    let mut cfg = config.clone();
    cfg.trainability = Trainability { filters: false, layout: true, reconstructor: true };
    let outcome = train(&model, TrainData::Spectra { spectra, virtual_pixels: n_filters }, &cfg)?;
    let LayoutKind::Continuous { centers, fwhms } = outcome.model.layout.kind() else {
        unreachable!("estimator layout stays continuous");
    };
    let filters: Vec<FilterParams> = centers
        .iter()
        .zip(fwhms.iter())
        .map(|(&center, &fwhm)| FilterParams { center, fwhm })
        .collect();
    Ok(FiltersOutcome { filters: FilterSet::new(filters)?, history: outcome.history, model: outcome.model })
}

/// Test metrics of a spectral-only estimator model on held-out spectra.
pub fn evaluate_filters(model: &Model, spectra: &[Array1<f64>], noise_seed: u64, max_value: f64) -> Result<EvalMetrics> {
    let virtual_pixels = model.layout.rows();
    let mse = data_loss(model, TrainData::Spectra { spectra, virtual_pixels }, noise_seed)?;
    Ok(EvalMetrics { mse, psnr: crate::spectral::psnr_from_mse(mse, max_value) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datacube::{sample_patches, synth_cube, SynthSpec};
    use crate::layout::lvf_layout;
    use crate::measurement::MeasurementSpec;
    use crate::reconstruct::closed_form_reconstructor;
    use crate::spectral::regular_filters;
    use approx::assert_relative_eq;
    use ndarray::Array3;
    use rand::Rng;

    fn small_model(snr: f64, steps: usize) -> Model {
        let grid = WavelengthGrid::uniform(8, 450.0, 940.0).unwrap();
        let domain = ParamDomain::for_grid(&grid);
        let filters = regular_filters(3, 450.0, 940.0).unwrap();
        let layout = lvf_layout(&filters, 4, 4).unwrap();
        Model::new(layout, MeasurementSpec::new(steps, snr, 0).unwrap(), grid, domain).unwrap()
    }

    fn small_batch(n: usize, seed: u64) -> PatchBatch {
        let cube = synth_cube(&SynthSpec {
            rows: 12,
            cols: 12,
            bands: 8,
            spectral_rank: 3,
            spatial_correlation_length: 2.0,
            noise_floor: 0.0,
            seed,
        })
        .unwrap();
        sample_patches(&cube, n, 4, true, seed).unwrap()
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut state = AdamState::new(3);
        let mut params = vec![0.0, 1.0, -2.0];
        let grads = vec![0.5, -3.0, 1e-3];
        state.step(&mut params, &grads, 0.01).unwrap();
        for (i, (p, g)) in params.iter().zip(&grads).enumerate() {
            let start = [0.0, 1.0, -2.0][i];
            let delta = p - start;
            assert!((delta.abs() - 0.01).abs() < 0.01 * 1e-5, "param {i}: delta {delta}");
            assert_eq!(delta.signum(), -g.signum());
        }
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let mut state = AdamState::new(2);
        let mut params = vec![1.5, -0.5];
        for _ in 0..50 {
            state.step(&mut params, &[0.0, 0.0], 0.1).unwrap();
        }
        assert_eq!(params, vec![1.5, -0.5]);
    }

    #[test]
    fn adam_is_deterministic() {
        let run = || {
            let mut state = AdamState::new(2);
            let mut params = vec![1.0, 2.0];
            for t in 0..20 {
                let g = vec![(t as f64).sin(), (t as f64).cos()];
                state.step(&mut params, &g, 0.05).unwrap();
            }
            params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn adam_shape_mismatch_rejected() {
        let mut state = AdamState::new(2);
        let mut params = vec![1.0, 2.0, 3.0];
        assert!(state.step(&mut params, &[0.0, 0.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn l2_penalty_hand_values() {
        let dims = ReconDims { rows: 1, cols: 1, bands: 1, steps: 1 };
        let mut r = LinearReconstructor::init_zero(dims);
        assert_eq!(l2_penalty(&r, 0.5), 0.0);
        r.weights[[0, 0]] = 2.0;
        assert_relative_eq!(l2_penalty(&r, 0.001), 0.004, max_relative = 1e-15);
        assert_eq!(l2_penalty(&r, 0.0), 0.0);
    }

    #[test]
    fn lorentzian_zero_at_target_and_half_height() {
        let grid = WavelengthGrid::default_40();
        let domain = ParamDomain::for_grid(&grid);
        let target = FilterSet::new(vec![FilterParams { center: 700.0, fwhm: 100.0 }]).unwrap();
        let at_target = LayoutPattern::continuous(
            Array2::from_elem((1, 1), 700.0),
            Array2::from_elem((1, 1), 100.0),
        )
        .unwrap();
        assert_eq!(lorentzian_penalty(&at_target, &target, 0.05, 2.0, &domain).unwrap(), 0.0);
        // Scaled distance d with d² = A²: move the center by A·(λ span)/2.
        let a = 0.05;
        let off = 700.0 + a * domain.center_slope();
        let half = LayoutPattern::continuous(
            Array2::from_elem((1, 1), off),
            Array2::from_elem((1, 1), 100.0),
        )
        .unwrap();
        let alpha = 3.0;
        let loss = lorentzian_penalty(&half, &target, a, alpha, &domain).unwrap();
        assert_relative_eq!(loss, alpha * 0.5, max_relative = 1e-12);
    }

    #[test]
    fn lorentzian_five_target_landscape() {
        // Pixel sitting exactly on one of five targets: that term is zero,
        // the other four each contribute within (0, 1).
        let domain = ParamDomain::new(450.0, 940.0, 5.0, 490.0).unwrap();
        let targets = [
            (460.0, 10.0),
            (580.0, 50.0),
            (850.0, 34.0),
            (900.0, 29.0),
            (700.0, 67.0),
        ];
        let set = FilterSet::new(
            targets.iter().map(|&(c, w)| FilterParams { center: c, fwhm: w }).collect(),
        )
        .unwrap();
        let pixel = LayoutPattern::continuous(
            Array2::from_elem((1, 1), 460.0),
            Array2::from_elem((1, 1), 10.0),
        )
        .unwrap();
        let a = 0.05;
        let total = lorentzian_penalty(&pixel, &set, a, 1.0, &domain).unwrap();
        let mut per_terms = Vec::new();
        for &(c, w) in &targets {
            let single = FilterSet::new(vec![FilterParams { center: c, fwhm: w }]).unwrap();
            per_terms.push(lorentzian_penalty(&pixel, &single, a, 1.0, &domain).unwrap());
        }
        assert_eq!(per_terms[0], 0.0);
        for t in &per_terms[1..] {
            assert!(*t > 0.0 && *t < 1.0);
        }
        assert_relative_eq!(total, per_terms.iter().sum::<f64>(), max_relative = 1e-12);
    }

    #[test]
    fn data_loss_zero_reconstructor_is_scene_power() {
        let model = small_model(f64::INFINITY, 2);
        let batch = small_batch(6, 3);
        let loss = data_loss(&model, TrainData::Patches(&batch), 0).unwrap();
        let mut want = 0.0;
        for p in &batch.patches {
            want += p.iter().map(|v| v * v).sum::<f64>() / p.len() as f64;
        }
        want /= batch.len() as f64;
        assert_relative_eq!(loss, want, max_relative = 1e-12);
    }

    #[test]
    fn all_zero_batch_has_zero_gradients() {
        let model = small_model(f64::INFINITY, 2);
        let grid = model.grid.clone();
        let zero = PatchBatch {
            patches: vec![Array3::zeros((4, 4, 8)); 3],
            provenance: vec![(0, 0, crate::datacube::Augmentation::IDENTITY); 3],
            grid,
            max_value: crate::spectral::DEFAULT_MAX_VALUE,
            seed: 0,
        };
        let config = TrainConfig {
            trainability: Trainability { filters: true, layout: false, reconstructor: true },
            ..TrainConfig::default()
        };
        let grads = backward(&model, TrainData::Patches(&zero), 0, &config).unwrap();
        assert!(grads.reconstructor.unwrap().iter().all(|&v| v == 0.0));
        assert!(grads.filter_units.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_at_zero_reconstructor_matches_hand_formula() {
        // dL/dR at R = 0 is −(2/(M·B))·mean_p x_p·y_pᵀ (noiseless here).
        let model = small_model(f64::INFINITY, 2);
        let batch = small_batch(4, 9);
        let config = TrainConfig::default();
        let grads = backward(&model, TrainData::Patches(&batch), 0, &config).unwrap();
        let gr = grads.reconstructor.unwrap();
        let mb = 4 * 4 * 8;
        let mut want = Array2::<f64>::zeros(gr.dim());
        for p in &batch.patches {
            let frames = crate::measurement::forward(p.view(), &model.layout, &model.grid, 2).unwrap();
            let y = frames.serialize();
            let x = crate::measurement::serialize_patch(p.view());
            for i in 0..x.len() {
                for j in 0..y.len() {
                    want[[i, j]] += -2.0 / (batch.len() as f64 * mb as f64) * x[i] * y[j];
                }
            }
        }
        for (a, b) in gr.iter().zip(want.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-14);
        }
    }

    #[test]
    fn backward_matches_finite_differences_small() {
        // Compact version of the full acceptance check: indexed layout with
        // trainable shared filters, trainable R, noiseless, Lorentzian on.
        let mut model = small_model(f64::INFINITY, 2);
        let mut rng = crate::seeds::rng(17, &[0]);
        for w in model.reconstructor.weights.iter_mut() {
            *w = rng.gen_range(-0.2..0.2);
        }
        let batch = small_batch(3, 21);
        let config = TrainConfig {
            l2_weight: 1e-3,
            lorentzian: Some(LorentzianConfig {
                alpha_reg: 1e-2,
                amplitude: 0.05,
                targets: regular_filters(3, 450.0, 940.0).unwrap(),
            }),
            trainability: Trainability { filters: true, layout: false, reconstructor: true },
            ..TrainConfig::default()
        };
        let grads = backward(&model, TrainData::Patches(&batch), 5, &config).unwrap();
        let gu = grads.filter_units.unwrap();
        let h = 1e-6;

        // Finite differences on the scaled filter parameters.
        let LayoutKind::Indexed { indices, filters } = model.layout.kind().clone() else {
            unreachable!()
        };
        let scaled: Vec<f64> = filters
            .iter()
            .flat_map(|&f| {
                let u = model.domain.scale(f);
                [u.u_center, u.u_fwhm]
            })
            .collect();
        let rebuild = |scaled: &[f64]| -> Model {
            let fs: Vec<FilterParams> = (0..filters.len())
                .map(|k| {
                    model.domain.unscale(crate::spectral::ScaledParams {
                        u_center: scaled[2 * k],
                        u_fwhm: scaled[2 * k + 1],
                    })
                })
                .collect();
            let layout = LayoutPattern::indexed(indices.clone(), FilterSet::new(fs).unwrap()).unwrap();
            Model { layout, ..model.clone() }
        };
        for i in 0..scaled.len() {
            let mut plus = scaled.clone();
            plus[i] += h;
            let mut minus = scaled.clone();
            minus[i] -= h;
            let lp = total_loss(&rebuild(&plus), TrainData::Patches(&batch), 5, &config).unwrap();
            let lm = total_loss(&rebuild(&minus), TrainData::Patches(&batch), 5, &config).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let denom = fd.abs().max(gu[i].abs()).max(1e-10);
            assert!((fd - gu[i]).abs() / denom < 1e-5, "filter param {i}: analytic {} fd {fd}", gu[i]);
        }

        // Spot-check a few reconstructor weights the same way.
        let gr = grads.reconstructor.unwrap();
        for &(i, j) in &[(0usize, 0usize), (5, 7), (100, 20), (127, 31)] {
            let mut m2 = model.clone();
            m2.reconstructor.weights[[i, j]] += h;
            let lp = total_loss(&m2, TrainData::Patches(&batch), 5, &config).unwrap();
            m2.reconstructor.weights[[i, j]] -= 2.0 * h;
            let lm = total_loss(&m2, TrainData::Patches(&batch), 5, &config).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let denom = fd.abs().max(gr[[i, j]].abs()).max(1e-10);
            assert!((fd - gr[[i, j]]).abs() / denom < 1e-5, "R[{i},{j}]");
        }
    }

    #[test]
    fn trainability_mask_keeps_layout_bit_identical() {
        let model = small_model(100.0, 2);
        let batch = small_batch(10, 2);
        let config = TrainConfig {
            epochs: 3,
            trainability: Trainability::reconstructor_only(),
            ..TrainConfig::default()
        };
        let outcome = train(&model, TrainData::Patches(&batch), &config).unwrap();
        assert_eq!(outcome.model.layout, model.layout);
        // Reconstructor did change.
        assert_ne!(outcome.model.reconstructor.weights, model.reconstructor.weights);
    }

    #[test]
    fn train_loss_reports_decompose() {
        let model = small_model(100.0, 2);
        let batch = small_batch(10, 4);
        let config = TrainConfig { epochs: 4, l2_weight: 1e-4, ..TrainConfig::default() };
        let outcome = train(&model, TrainData::Patches(&batch), &config).unwrap();
        assert!(!outcome.history.is_empty());
        for rep in &outcome.history {
            let sum = rep.data_mse + rep.l2_term + rep.lorentzian_term;
            assert!((rep.total - sum).abs() <= 1e-12 * rep.total.abs().max(1.0));
        }
    }

    #[test]
    fn train_is_deterministic() {
        let model = small_model(100.0, 2);
        let batch = small_batch(12, 8);
        let config = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let a = train(&model, TrainData::Patches(&batch), &config).unwrap();
        let b = train(&model, TrainData::Patches(&batch), &config).unwrap();
        assert_eq!(a.model.reconstructor.weights, b.model.reconstructor.weights);
        assert_eq!(a.best_epoch, b.best_epoch);
        for (x, y) in a.history.iter().zip(b.history.iter()) {
            assert_eq!(x.total.to_bits(), y.total.to_bits());
        }
    }

    #[test]
    fn reconstructor_training_approaches_ridge_oracle() {
        // Noiseless invertible system: N = B = S = 4 on a 4×4 detector;
        // training MSE within 5% of the closed-form optimum (plus a small
        // absolute allowance against the scene power for the exact-recovery
        // regime where the oracle MSE is at round-off).
        let grid = WavelengthGrid::uniform(4, 450.0, 940.0).unwrap();
        let domain = ParamDomain::for_grid(&grid);
        let filters = regular_filters(4, 450.0, 940.0).unwrap();
        let layout = lvf_layout(&filters, 4, 4).unwrap();
        let model = Model::new(layout, MeasurementSpec::noiseless(4).unwrap(), grid, domain).unwrap();
        let cube = synth_cube(&SynthSpec {
            rows: 16,
            cols: 16,
            bands: 4,
            spectral_rank: 2,
            spatial_correlation_length: 3.0,
            noise_floor: 1e-4,
            seed: 6,
        })
        .unwrap();
        let batch = sample_patches(&cube, 60, 4, true, 3).unwrap();
        let config = TrainConfig {
            learning_rate: 2e-3,
            epochs: 400,
            batch_size: 16,
            early_stop_patience: 400,
            ..TrainConfig::default()
        };
        let outcome = train(&model, TrainData::Patches(&batch), &config).unwrap();
        let dims = model.dims();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for p in &batch.patches {
            let frames = crate::measurement::forward(p.view(), &model.layout, &model.grid, 4).unwrap();
            ys.push(frames.serialize());
            xs.push(crate::measurement::serialize_patch(p.view()));
        }
        let oracle = closed_form_reconstructor(&xs, &ys, 1e-10, dims).unwrap();
        let oracle_model = Model { reconstructor: oracle, ..model.clone() };
        let mse_oracle = data_loss(&oracle_model, TrainData::Patches(&batch), 0).unwrap();
        let mse_trained = data_loss(&outcome.model, TrainData::Patches(&batch), 0).unwrap();
        let zero_model = Model { reconstructor: LinearReconstructor::init_zero(dims), ..model.clone() };
        let scene_power = data_loss(&zero_model, TrainData::Patches(&batch), 0).unwrap();
        assert!(
            mse_trained <= 1.05 * mse_oracle + 1e-4 * scene_power,
            "trained {mse_trained:e} vs oracle {mse_oracle:e} (scene {scene_power:e})"
        );
    }

    #[test]
    fn optimal_filters_runs_and_respects_domain() {
        let grid = WavelengthGrid::uniform(8, 450.0, 940.0).unwrap();
        let domain = ParamDomain::for_grid(&grid);
        let cube = synth_cube(&SynthSpec {
            rows: 16,
            cols: 16,
            bands: 8,
            spectral_rank: 2,
            spatial_correlation_length: 3.0,
            noise_floor: 1e-3,
            seed: 10,
        })
        .unwrap();
        let spectra = crate::datacube::sample_spectra(&cube, 200, 4).unwrap();
        let config = TrainConfig { epochs: 8, learning_rate: 1e-3, ..TrainConfig::default() };
        let out = optimal_filters(&spectra, 3, &grid, &domain, 100.0, &config).unwrap();
        assert_eq!(out.filters.len(), 3);
        for f in out.filters.iter() {
            assert!(domain.contains(*f), "filter {f:?} escaped the domain");
        }
        assert!(!out.history.is_empty());
        // The returned model evaluates held-out spectra.
        let test = crate::datacube::sample_spectra(&cube, 50, 9).unwrap();
        let metrics = evaluate_filters(&out.model, &test, 1, crate::spectral::DEFAULT_MAX_VALUE).unwrap();
        assert!(metrics.mse.is_finite() && metrics.psnr.is_finite());
    }

    #[test]
    fn non_finite_loss_aborts_with_location() {
        let mut model = small_model(f64::INFINITY, 2);
        model.reconstructor.weights[[0, 0]] = 1e200;
        // Squaring 1e200-scale outputs overflows the loss to infinity.
        let batch = small_batch(4, 5);
        let config = TrainConfig { epochs: 2, ..TrainConfig::default() };
        match train(&model, TrainData::Patches(&batch), &config) {
            Err(Error::NonFiniteLoss { .. }) => {}
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }
}
