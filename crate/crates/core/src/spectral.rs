//! Gaussian passband model, parameter scaling, and image metrics.
//!
//! A filter is a peak-normalized Gaussian in wavelength described by a
//! central wavelength and a full width at half maximum:
//!
//! ```text
//! T(λ) = exp(−4·ln2·(λ − λc)² / FWHM²)
//! ```
//!
//! so T(λc) = 1 and T(λc ± FWHM/2) = 1/2. Optimization happens on parameters
//! affinely rescaled to [−1, +1] over a configured domain; rescaled values
//! outside that interval are clamped back to the domain edge when converted
//! to physical units, which keeps the forward model total when the optimizer
//! overshoots.

use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::path::Path;

use crate::datacube::WavelengthGrid;
use crate::error::{Error, Result};

/// Physical parameters of one Gaussian passband, in nanometers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub center: f64,
    pub fwhm: f64,
}

/// Filter parameters rescaled to the [−1, +1] training range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParams {
    pub u_center: f64,
    pub u_fwhm: f64,
}

/// Bounds of the optimizable parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDomain {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub fwhm_min: f64,
    pub fwhm_max: f64,
}

impl ParamDomain {
    pub fn new(lambda_min: f64, lambda_max: f64, fwhm_min: f64, fwhm_max: f64) -> Result<Self> {
        if !(lambda_min < lambda_max) || !(fwhm_min < fwhm_max) || fwhm_min <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "degenerate parameter domain: λ [{lambda_min}, {lambda_max}], FWHM [{fwhm_min}, {fwhm_max}]"
            )));
        }
        Ok(Self { lambda_min, lambda_max, fwhm_min, fwhm_max })
    }

    /// Default domain for a grid: centers over the full wavelength range,
    /// FWHM between one band spacing (anything narrower is unmeasurable on
    /// the grid) and the full range.
    pub fn for_grid(grid: &WavelengthGrid) -> Self {
        let lo = grid.lambda_min();
        let hi = grid.lambda_max();
        Self {
            lambda_min: lo,
            lambda_max: hi,
            fwhm_min: grid.band_spacing(),
            fwhm_max: hi - lo,
        }
    }

    pub fn contains(&self, f: FilterParams) -> bool {
        f.center >= self.lambda_min
            && f.center <= self.lambda_max
            && f.fwhm >= self.fwhm_min
            && f.fwhm <= self.fwhm_max
    }

    /// Map physical parameters to the [−1, +1] range.
    pub fn scale(&self, f: FilterParams) -> ScaledParams {
        ScaledParams {
            u_center: affine_to_unit(f.center, self.lambda_min, self.lambda_max),
            u_fwhm: affine_to_unit(f.fwhm, self.fwhm_min, self.fwhm_max),
        }
    }

    /// Map scaled parameters back to physical units, clamping anything
    /// outside [−1, +1] to the domain boundary.
    pub fn unscale(&self, u: ScaledParams) -> FilterParams {
        FilterParams {
            center: affine_from_unit(u.u_center.clamp(-1.0, 1.0), self.lambda_min, self.lambda_max),
            fwhm: affine_from_unit(u.u_fwhm.clamp(-1.0, 1.0), self.fwhm_min, self.fwhm_max),
        }
    }

    /// d(physical)/d(scaled) for the center coordinate.
    pub fn center_slope(&self) -> f64 {
        0.5 * (self.lambda_max - self.lambda_min)
    }

    /// d(physical)/d(scaled) for the FWHM coordinate.
    pub fn fwhm_slope(&self) -> f64 {
        0.5 * (self.fwhm_max - self.fwhm_min)
    }
}

fn affine_to_unit(x: f64, lo: f64, hi: f64) -> f64 {
    (2.0 * x - (lo + hi)) / (hi - lo)
}

fn affine_from_unit(u: f64, lo: f64, hi: f64) -> f64 {
    // Exact at the endpoints so scale/unscale round-trips bit-for-bit there.
    if u == -1.0 {
        lo
    } else if u == 1.0 {
        hi
    } else {
        0.5 * (lo + hi) + 0.5 * u * (hi - lo)
    }
}

/// An ordered set of passbands; row n of the filter-stack matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSet {
    filters: Vec<FilterParams>,
}

impl FilterSet {
    pub fn new(filters: Vec<FilterParams>) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::InvalidArgument("empty filter set".into()));
        }
        for (i, f) in filters.iter().enumerate() {
            if !(f.fwhm > 0.0) || !f.center.is_finite() || !f.fwhm.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "filter {i} has invalid parameters ({}, {})",
                    f.center, f.fwhm
                )));
            }
        }
        Ok(Self { filters })
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn get(&self, n: usize) -> FilterParams {
        self.filters[n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &FilterParams> {
        self.filters.iter()
    }

    pub fn as_slice(&self) -> &[FilterParams] {
        &self.filters
    }

    /// Copy of the set ordered by ascending central wavelength.
    pub fn sorted_by_center(&self) -> FilterSet {
        let mut filters = self.filters.clone();
        filters.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
        FilterSet { filters }
    }

    /// Serialize to the design-file format: one `center_nm fwhm_nm` record
    /// per line with 6 decimal digits.
    pub fn to_design_string(&self) -> String {
        let mut out = String::from("FILTERS v1\n");
        let _ = writeln!(out, "count {}", self.filters.len());
        for f in &self.filters {
            let _ = writeln!(out, "{:.6} {:.6}", f.center, f.fwhm);
        }
        out
    }

    pub fn save_design(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_design_string())?;
        Ok(())
    }

    pub fn from_design_string(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::MalformedFile { path: path.to_path_buf(), reason: reason.into() };
        let mut lines = text.lines();
        if lines.next() != Some("FILTERS v1") {
            return Err(bad("missing FILTERS v1 header"));
        }
        let count_line = lines.next().ok_or_else(|| bad("missing count line"))?;
        let count: usize = count_line
            .strip_prefix("count ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad count line"))?;
        let mut filters = Vec::with_capacity(count);
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let center: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad filter record"))?;
            let fwhm: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad filter record"))?;
            filters.push(FilterParams { center, fwhm });
        }
        if filters.len() != count {
            return Err(bad(&format!("count says {count}, found {} records", filters.len())));
        }
        FilterSet::new(filters)
    }

    pub fn load_design(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_design_string(&text, path)
    }
}

/// Transmittance of a filter at every band of the grid.
pub fn transmission(f: FilterParams, grid: &WavelengthGrid) -> Vec<f64> {
    let inv = 4.0 * LN_2 / (f.fwhm * f.fwhm);
    grid.bands()
        .iter()
        .map(|&lambda| {
            let d = lambda - f.center;
            (-inv * d * d).exp()
        })
        .collect()
}

/// Analytic derivatives of the transmission vector.
///
/// Returns (∂T/∂center, ∂T/∂fwhm) per band.
pub fn transmission_grad(f: FilterParams, grid: &WavelengthGrid) -> (Vec<f64>, Vec<f64>) {
    let c = 8.0 * LN_2;
    let w2 = f.fwhm * f.fwhm;
    let w3 = w2 * f.fwhm;
    let mut d_center = Vec::with_capacity(grid.band_count());
    let mut d_fwhm = Vec::with_capacity(grid.band_count());
    for (&lambda, t) in grid.bands().iter().zip(transmission(f, grid)) {
        let d = lambda - f.center;
        d_center.push(t * c * d / w2);
        d_fwhm.push(t * c * d * d / w3);
    }
    (d_center, d_fwhm)
}

/// Identical Gaussian passbands spaced by their FWHM over [λmin, λmax]:
/// FWHM = range/n, centers at λmin + (k + ½)·FWHM.
pub fn regular_filters(n: usize, lambda_min: f64, lambda_max: f64) -> Result<FilterSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("regular_filters needs n >= 1".into()));
    }
    if !(lambda_min < lambda_max) {
        return Err(Error::InvalidArgument(format!(
            "degenerate wavelength range [{lambda_min}, {lambda_max}]"
        )));
    }
    let fwhm = (lambda_max - lambda_min) / n as f64;
    let filters = (0..n)
        .map(|k| FilterParams { center: lambda_min + (k as f64 + 0.5) * fwhm, fwhm })
        .collect();
    FilterSet::new(filters)
}

/// Mean squared error over two equally shaped value collections.
pub fn mse(y: &[f64], p: &[f64]) -> Result<f64> {
    if y.len() != p.len() {
        return Err(Error::DimensionMismatch(format!(
            "mse inputs have {} and {} entries",
            y.len(),
            p.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("mse of empty arrays".into()));
    }
    let sum: f64 = y.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / y.len() as f64)
}

/// Peak signal-to-noise ratio in dB: 10·log10(max_value² / mse).
///
/// Identical inputs yield the +infinity sentinel.
pub fn psnr(y: &[f64], p: &[f64], max_value: f64) -> Result<f64> {
    if !(max_value > 0.0) {
        return Err(Error::InvalidArgument(format!("max_value must be positive, got {max_value}")));
    }
    let e = mse(y, p)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * ((max_value * max_value) / e).log10())
}

/// PSNR from a precomputed MSE.
pub fn psnr_from_mse(e: f64, max_value: f64) -> f64 {
    if e == 0.0 {
        f64::INFINITY
    } else {
        10.0 * ((max_value * max_value) / e).log10()
    }
}

/// Default dynamic-range ceiling: 2³² − 1, for 32-bit scenes.
pub const DEFAULT_MAX_VALUE: f64 = 4294967295.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datacube::WavelengthGrid;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn grid40() -> WavelengthGrid {
        WavelengthGrid::uniform(40, 450.0, 940.0).unwrap()
    }

    #[test]
    fn transmission_peak_half_and_fwhm_points() {
        let f = FilterParams { center: 700.0, fwhm: 80.0 };
        let grid = WavelengthGrid::new(vec![700.0, 740.0, 780.0, 820.0]).unwrap();
        let t = transmission(f, &grid);
        assert_eq!(t[0], 1.0); // λ = λc
        assert_relative_eq!(t[1], 0.5, max_relative = 1e-12); // λ = λc + FWHM/2
        // λ = λc + FWHM: exp(−4 ln2) = 2⁻⁴, computed independently.
        let oracle = (-4.0_f64 * std::f64::consts::LN_2).exp();
        assert_relative_eq!(t[2], oracle, max_relative = 1e-12);
        assert_relative_eq!(t[2], 0.0625, max_relative = 1e-12);
    }

    #[test]
    fn transmission_reflection_symmetry() {
        let f = FilterParams { center: 650.0, fwhm: 55.0 };
        for d in [1.0, 13.7, 120.0] {
            let grid = WavelengthGrid::new(vec![650.0 - d, 650.0 + d]).unwrap();
            let t = transmission(f, &grid);
            assert_eq!(t[0], t[1]);
        }
    }

    #[test]
    fn transmission_monotone_in_fwhm_off_peak() {
        let grid = WavelengthGrid::new(vec![500.0, 600.0]).unwrap();
        let narrow = transmission(FilterParams { center: 700.0, fwhm: 40.0 }, &grid);
        let wide = transmission(FilterParams { center: 700.0, fwhm: 90.0 }, &grid);
        assert!(wide[0] > narrow[0]);
        assert!(wide[1] > narrow[1]);
    }

    #[test]
    fn gradients_zero_at_peak_and_fwhm_grad_nonnegative() {
        let f = FilterParams { center: 700.0, fwhm: 60.0 };
        let grid = WavelengthGrid::new(vec![500.0, 700.0, 900.0]).unwrap();
        let (dc, dw) = transmission_grad(f, &grid);
        assert_eq!(dc[1], 0.0);
        assert_eq!(dw[1], 0.0);
        for v in dw {
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        // 100 random (filter, band) pairs against an h = 1e-4 nm central
        // difference of the transmission itself.
        let mut rng = crate::seeds::rng(42, &[0]);
        let grid = grid40();
        let h = 1e-4;
        for _ in 0..100 {
            let f = FilterParams {
                center: rng.gen_range(460.0..930.0),
                fwhm: rng.gen_range(15.0..400.0),
            };
            let (dc, dw) = transmission_grad(f, &grid);
            let tc_p = transmission(FilterParams { center: f.center + h, ..f }, &grid);
            let tc_m = transmission(FilterParams { center: f.center - h, ..f }, &grid);
            let tw_p = transmission(FilterParams { fwhm: f.fwhm + h, ..f }, &grid);
            let tw_m = transmission(FilterParams { fwhm: f.fwhm - h, ..f }, &grid);
            // Relative to the gradient vector's scale: deep in the Gaussian
            // tail both sides are ~0 and a per-band ratio is meaningless.
            let scale_c = dc.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-12);
            let scale_w = dw.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-12);
            for b in 0..grid.band_count() {
                let fd_c = (tc_p[b] - tc_m[b]) / (2.0 * h);
                let fd_w = (tw_p[b] - tw_m[b]) / (2.0 * h);
                let denom_c = fd_c.abs().max(dc[b].abs()).max(scale_c);
                let denom_w = fd_w.abs().max(dw[b].abs()).max(scale_w);
                assert!((dc[b] - fd_c).abs() / denom_c < 1e-6, "center grad at band {b}");
                assert!((dw[b] - fd_w).abs() / denom_w < 1e-6, "fwhm grad at band {b}");
            }
        }
    }

    #[test]
    fn scale_endpoints_and_midpoint() {
        let d = ParamDomain::new(450.0, 940.0, 12.0, 490.0).unwrap();
        let lo = d.scale(FilterParams { center: 450.0, fwhm: 12.0 });
        assert_eq!(lo.u_center, -1.0);
        assert_eq!(lo.u_fwhm, -1.0);
        let mid = d.scale(FilterParams { center: 695.0, fwhm: 251.0 });
        assert_relative_eq!(mid.u_center, 0.0, epsilon = 1e-15);
        assert_relative_eq!(mid.u_fwhm, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn unscale_clamps_out_of_range() {
        let d = ParamDomain::new(450.0, 940.0, 12.0, 490.0).unwrap();
        let f = d.unscale(ScaledParams { u_center: 1.7, u_fwhm: -3.0 });
        assert_eq!(f.center, 940.0);
        assert_eq!(f.fwhm, 12.0);
        // Idempotent: clamped values scale back to the boundary exactly.
        let u = d.scale(f);
        assert_eq!(u.u_center, 1.0);
        assert_eq!(u.u_fwhm, -1.0);
    }

    #[test]
    fn scale_unscale_roundtrip_random() {
        let d = ParamDomain::new(450.0, 940.0, 12.564, 490.0).unwrap();
        let mut rng = crate::seeds::rng(9, &[3]);
        for _ in 0..200 {
            let f = FilterParams {
                center: rng.gen_range(450.0..=940.0),
                fwhm: rng.gen_range(12.564..=490.0),
            };
            let back = d.unscale(d.scale(f));
            assert_relative_eq!(back.center, f.center, max_relative = 1e-14);
            assert_relative_eq!(back.fwhm, f.fwhm, max_relative = 1e-14);
        }
    }

    #[test]
    fn degenerate_domain_rejected() {
        assert!(ParamDomain::new(450.0, 450.0, 1.0, 2.0).is_err());
        assert!(ParamDomain::new(450.0, 940.0, 5.0, 5.0).is_err());
    }

    #[test]
    fn regular_two_filters_over_paper_range() {
        let set = regular_filters(2, 450.0, 940.0).unwrap();
        assert_eq!(set.len(), 2);
        assert_relative_eq!(set.get(0).fwhm, 245.0, max_relative = 1e-15);
        assert_relative_eq!(set.get(1).fwhm, 245.0, max_relative = 1e-15);
        assert_relative_eq!(set.get(0).center, 572.5, max_relative = 1e-15);
        assert_relative_eq!(set.get(1).center, 817.5, max_relative = 1e-15);
    }

    #[test]
    fn regular_single_filter_is_midpoint() {
        let set = regular_filters(1, 450.0, 940.0).unwrap();
        assert_eq!(set.len(), 1);
        assert_relative_eq!(set.get(0).center, 695.0, max_relative = 1e-15);
        assert_relative_eq!(set.get(0).fwhm, 490.0, max_relative = 1e-15);
    }

    #[test]
    fn regular_zero_filters_rejected() {
        assert!(regular_filters(0, 450.0, 940.0).is_err());
    }

    #[test]
    fn mse_hand_cases() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[2.0, 0.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mse_matches_two_pass_oracle() {
        let mut rng = crate::seeds::rng(1, &[7]);
        let y: Vec<f64> = (0..40).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let p: Vec<f64> = (0..40).map(|_| rng.gen_range(-5.0..5.0)).collect();
        // Two-pass oracle: form residuals first, then sum.
        let residuals: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a - b).collect();
        let oracle = residuals.iter().map(|r| r * r).sum::<f64>() / 40.0;
        assert_relative_eq!(mse(&y, &p).unwrap(), oracle, max_relative = 1e-12);
    }

    #[test]
    fn psnr_identities() {
        // mse = max² → 0 dB.
        let v = psnr(&[DEFAULT_MAX_VALUE, 0.0], &[0.0, DEFAULT_MAX_VALUE], DEFAULT_MAX_VALUE).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-9);
        // Identical inputs → sentinel.
        assert_eq!(psnr(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap(), f64::INFINITY);
        // Invalid max.
        assert!(psnr(&[1.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn psnr_mse_identity_random() {
        let mut rng = crate::seeds::rng(2, &[8]);
        for _ in 0..1000 {
            let y: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..10.0)).collect();
            let p: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..10.0)).collect();
            let m = mse(&y, &p).unwrap();
            let v = psnr(&y, &p, DEFAULT_MAX_VALUE).unwrap();
            let direct = 10.0 * (DEFAULT_MAX_VALUE * DEFAULT_MAX_VALUE / m).log10();
            assert_relative_eq!(v, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn design_file_roundtrip() {
        let set = regular_filters(5, 450.0, 940.0).unwrap();
        let text = set.to_design_string();
        let back = FilterSet::from_design_string(&text, Path::new("mem")).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in set.iter().zip(back.iter()) {
            assert_relative_eq!(a.center, b.center, epsilon = 1e-6);
            assert_relative_eq!(a.fwhm, b.fwhm, epsilon = 1e-6);
        }
    }
}
