//! Data-exploration suite: tapered 2-D power spectra with azimuthal
//! averaging, pairwise spectral PSNR versus pixel distance, PCA of spectra,
//! and PSNR as a function of retained PCA components.
//!
//! The Fourier convention is the unnormalized forward DFT, so
//! Σ|F|² = N·Σ|f|² (N = pixel count) — the Parseval identity the tests pin.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::datacube::HyperCube;
use crate::error::{Error, Result};
use crate::seeds;
use crate::spectral::psnr;

/// Azimuthally averaged power per integer-rounded frequency radius.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    pub power: Vec<f64>,
    pub counts: Vec<usize>,
}

impl RadialProfile {
    /// Least-squares slope of log10(power) vs log10(radius) over bins with
    /// positive radius and power.
    pub fn loglog_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .radii
            .iter()
            .zip(&self.power)
            .filter(|(r, p)| **r > 0.0 && **p > 0.0)
            .map(|(r, p)| (r.log10(), p.log10()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|(x, _)| x).sum();
        let sy: f64 = pts.iter().map(|(_, y)| y).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
        let denom = n * sxx - sx * sx;
        if denom == 0.0 {
            return None;
        }
        Some((n * sxy - sx * sy) / denom)
    }
}

/// Bartlett-Hann window value at position n of an N-point window
/// (a₀ = 0.62, a₁ = 0.48, a₂ = 0.38).
fn bartlett_hann(n: usize, len: usize) -> f64 {
    if len < 2 {
        return 1.0;
    }
    let u = n as f64 / (len - 1) as f64 - 0.5;
    0.62 - 0.48 * u.abs() + 0.38 * (2.0 * std::f64::consts::PI * u).cos()
}

/// Mean-subtracted, Bartlett-Hann-tapered 2-D power spectrum |DFT|².
///
/// Subtracting the mean first makes the taper fall off towards the image
/// average rather than towards zero radiance.
pub fn power_spectrum(image: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (rows, cols) = image.dim();
    if rows < 4 || cols < 4 {
        return Err(Error::InvalidArgument(format!(
            "power spectrum needs at least 4x4 pixels, got {rows}x{cols}"
        )));
    }
    let mean = image.sum() / (rows * cols) as f64;
    let wr: Vec<f64> = (0..rows).map(|r| bartlett_hann(r, rows)).collect();
    let wc: Vec<f64> = (0..cols).map(|c| bartlett_hann(c, cols)).collect();
    let mut field: Vec<Complex<f64>> = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            field.push(Complex::new((image[[r, c]] - mean) * wr[r] * wc[c], 0.0));
        }
    }
    // Row FFTs, then column FFTs.
    let mut planner = FftPlanner::new();
    let fft_cols = planner.plan_fft_forward(cols);
    for r in 0..rows {
        fft_cols.process(&mut field[r * cols..(r + 1) * cols]);
    }
    let fft_rows = planner.plan_fft_forward(rows);
    let mut column = vec![Complex::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = field[r * cols + c];
        }
        fft_rows.process(&mut column);
        for r in 0..rows {
            field[r * cols + c] = column[r];
        }
    }
    let mut ps = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            ps[[r, c]] = field[r * cols + c].norm_sqr();
        }
    }
    Ok(ps)
}

/// Bin a power array by integer-rounded Euclidean distance from the
/// zero-frequency origin; mean power per bin.
pub fn azimuthal_average(ps: ArrayView2<f64>) -> RadialProfile {
    let (rows, cols) = ps.dim();
    let signed = |k: usize, n: usize| -> f64 {
        let k = k as isize;
        let n = n as isize;
        (if k <= n / 2 { k } else { k - n }) as f64
    };
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let fr = signed(r, rows);
            let fc = signed(c, cols);
            let bin = (fr * fr + fc * fc).sqrt().round() as usize;
            if bin >= sums.len() {
                sums.resize(bin + 1, 0.0);
                counts.resize(bin + 1, 0);
            }
            sums[bin] += ps[[r, c]];
            counts[bin] += 1;
        }
    }
    let mut radii = Vec::new();
    let mut power = Vec::new();
    let mut kept_counts = Vec::new();
    for (bin, (&s, &n)) in sums.iter().zip(&counts).enumerate() {
        if n > 0 {
            radii.push(bin as f64);
            power.push(s / n as f64);
            kept_counts.push(n);
        }
    }
    RadialProfile { radii, power, counts: kept_counts }
}

/// Pairwise spectral PSNR versus pixel distance.
#[derive(Debug, Clone)]
pub struct DistanceProfile {
    /// Integer-rounded pixel distances with at least one finite pair.
    pub distances: Vec<f64>,
    /// Mean PSNR per distance bin, infinite-PSNR pairs excluded.
    pub mean_psnr: Vec<f64>,
    /// Pairs per bin that entered the mean.
    pub counts: Vec<usize>,
    /// Identical-spectrum pairs excluded as +infinity sentinels.
    pub infinite_pairs: usize,
    /// Mean over pixels of psnr(spectrum, global mean spectrum).
    pub baseline_psnr: f64,
    /// First bin whose mean drops below the baseline.
    pub crossover_distance: Option<f64>,
}

/// Sample up to `max_pairs` random distinct pixel pairs and profile their
/// spectral PSNR by distance; the baseline compares every pixel to the global
/// mean spectrum.
pub fn psnr_vs_distance(cube: &HyperCube, max_pairs: usize, seed: u64) -> Result<DistanceProfile> {
    let rows = cube.rows();
    let cols = cube.cols();
    let n_pixels = rows * cols;
    if n_pixels < 2 {
        return Err(Error::InvalidArgument("need at least 2 pixels".into()));
    }
    let spectra = cube.spectra_matrix();
    let max_value = cube.max_value();

    let mean_spectrum = spectra.sum_axis(ndarray::Axis(0)) / n_pixels as f64;
    let mut baseline_sum = 0.0;
    let mut baseline_n = 0usize;
    for i in 0..n_pixels {
        let p = psnr(spectra.row(i).to_slice().unwrap(), mean_spectrum.as_slice().unwrap(), max_value)?;
        if p.is_finite() {
            baseline_sum += p;
            baseline_n += 1;
        }
    }
    let baseline_psnr = if baseline_n > 0 { baseline_sum / baseline_n as f64 } else { f64::INFINITY };

    let mut rng = seeds::rng(seed, &[0xd157]);
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut infinite_pairs = 0usize;
    for _ in 0..max_pairs {
        let a = rng.gen_range(0..n_pixels);
        let b = rng.gen_range(0..n_pixels);
        if a == b {
            continue;
        }
        let (ra, ca) = (a / cols, a % cols);
        let (rb, cb) = (b / cols, b % cols);
        let dr = ra as f64 - rb as f64;
        let dc = ca as f64 - cb as f64;
        let bin = (dr * dr + dc * dc).sqrt().round() as usize;
        let p = psnr(spectra.row(a).to_slice().unwrap(), spectra.row(b).to_slice().unwrap(), max_value)?;
        if !p.is_finite() {
            infinite_pairs += 1;
            continue;
        }
        if bin >= sums.len() {
            sums.resize(bin + 1, 0.0);
            counts.resize(bin + 1, 0);
        }
        sums[bin] += p;
        counts[bin] += 1;
    }
    let mut distances = Vec::new();
    let mut mean_psnr = Vec::new();
    let mut kept = Vec::new();
    for (bin, (&s, &n)) in sums.iter().zip(&counts).enumerate() {
        if n > 0 {
            distances.push(bin as f64);
            mean_psnr.push(s / n as f64);
            kept.push(n);
        }
    }
    let crossover_distance = distances
        .iter()
        .zip(&mean_psnr)
        .find(|(_, p)| **p < baseline_psnr)
        .map(|(d, _)| *d);
    Ok(DistanceProfile {
        distances,
        mean_psnr,
        counts: kept,
        infinite_pairs,
        baseline_psnr,
        crossover_distance,
    })
}

/// Principal components of a spectra collection.
#[derive(Debug, Clone)]
pub struct PcaResult {
    /// Orthonormal spectral vectors, one per column, by descending variance.
    pub components: Array2<f64>,
    /// Eigenvalue fractions, normalized to sum to 1.
    pub variance_ratios: Vec<f64>,
    pub mean_spectrum: Array1<f64>,
}

/// Mean-centered covariance eigendecomposition of (sample, band) spectra.
/// Component signs follow the largest-magnitude-entry-positive convention.
pub fn pca(spectra: ArrayView2<f64>) -> Result<PcaResult> {
    let (n, bands) = spectra.dim();
    if n < 2 || bands < 2 {
        return Err(Error::InvalidArgument(format!(
            "pca needs >= 2 spectra and >= 2 bands, got {n}x{bands}"
        )));
    }
    let mean_spectrum = spectra.sum_axis(ndarray::Axis(0)) / n as f64;
    let mut cov = Array2::<f64>::zeros((bands, bands));
    for row in spectra.rows() {
        let d = &row - &mean_spectrum;
        for i in 0..bands {
            if d[i] == 0.0 {
                continue;
            }
            for j in i..bands {
                cov[[i, j]] += d[i] * d[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..bands {
        for j in i..bands {
            cov[[i, j]] /= denom;
            cov[[j, i]] = cov[[i, j]];
        }
    }
    let (mut vals, mut vecs) = crate::linalg::symmetric_eigen(cov.view())?;
    // Round tiny negative eigenvalues from the factorization up to zero.
    vals.mapv_inplace(|v| v.max(0.0));
    let total: f64 = vals.sum();
    let variance_ratios: Vec<f64> = if total > 0.0 {
        vals.iter().map(|v| v / total).collect()
    } else {
        vals.iter().map(|_| 0.0).collect()
    };
    for k in 0..bands {
        let mut col = vecs.column_mut(k);
        let lead = col
            .iter()
            .cloned()
            .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
            .unwrap_or(1.0);
        if lead < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    Ok(PcaResult { components: vecs, variance_ratios, mean_spectrum })
}

impl PcaResult {
    /// Project a spectrum onto the first k components (plus the mean).
    pub fn approximate(&self, spectrum: &Array1<f64>, k: usize) -> Array1<f64> {
        let mut out = self.mean_spectrum.clone();
        let centered = spectrum - &self.mean_spectrum;
        for j in 0..k {
            let comp = self.components.column(j);
            let coef = centered.dot(&comp);
            out.scaled_add(coef, &comp);
        }
        out
    }
}

/// Mean PSNR between every spectrum and its k-component PCA approximation,
/// for k = 0..=k_max. Infinite-PSNR spectra are excluded from each mean and
/// counted.
#[derive(Debug, Clone)]
pub struct ComponentCurve {
    pub mean_psnr: Vec<f64>,
    pub infinite_counts: Vec<usize>,
}

pub fn psnr_vs_components(cube: &HyperCube, pca_result: &PcaResult, k_max: usize) -> Result<ComponentCurve> {
    let bands = cube.bands();
    if k_max > pca_result.components.ncols() {
        return Err(Error::InvalidArgument(format!(
            "k_max {k_max} exceeds the {} available components",
            pca_result.components.ncols()
        )));
    }
    if pca_result.components.nrows() != bands {
        return Err(Error::DimensionMismatch(format!(
            "pca components have {} bands, cube has {bands}",
            pca_result.components.nrows()
        )));
    }
    let spectra = cube.spectra_matrix();
    let max_value = cube.max_value();
    let mut mean_psnr = Vec::with_capacity(k_max + 1);
    let mut infinite_counts = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let mut sum = 0.0;
        let mut n_finite = 0usize;
        let mut n_inf = 0usize;
        for row in spectra.rows() {
            let s = row.to_owned();
            let approx = pca_result.approximate(&s, k);
            let p = psnr(s.as_slice().unwrap(), approx.as_slice().unwrap(), max_value)?;
            if p.is_finite() {
                sum += p;
                n_finite += 1;
            } else {
                n_inf += 1;
            }
        }
        mean_psnr.push(if n_finite > 0 { sum / n_finite as f64 } else { f64::INFINITY });
        infinite_counts.push(n_inf);
    }
    Ok(ComponentCurve { mean_psnr, infinite_counts })
}

/// Flatness diagnostic for spatial oversampling: radial-profile mean and
/// standard error per bin over `k` independent white-noise images of size
/// n×n, restricted to populated bins below Nyquist. The window taper
/// correlates neighboring frequency bins, so the bin scatter is measured
/// across realizations instead of assumed exponential.
pub fn white_noise_radial_statistics(n: usize, k: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut per_bin: Vec<Vec<f64>> = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    for trial in 0..k {
        let mut rng = seeds::rng(seed, &[7, trial as u64]);
        let img = Array2::from_shape_fn((n, n), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let ps = power_spectrum(img.view()).expect("dims fixed above 4x4");
        let profile = azimuthal_average(ps.view());
        let mut slot = 0usize;
        for ((r, p), count) in profile.radii.iter().zip(&profile.power).zip(&profile.counts) {
            if *r <= 0.0 || *r > (n / 2) as f64 || *count < 8 {
                continue;
            }
            if trial == 0 {
                radii.push(*r);
                per_bin.push(Vec::with_capacity(k));
            }
            per_bin[slot].push(*p);
            slot += 1;
        }
    }
    let mean: Vec<f64> = per_bin.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let sem: Vec<f64> = per_bin
        .iter()
        .zip(&mean)
        .map(|(v, m)| {
            let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
            (var / v.len() as f64).sqrt()
        })
        .collect();
    (mean, sem, radii)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datacube::{synth_cube, SynthSpec, WavelengthGrid};
    use crate::spectral::DEFAULT_MAX_VALUE;
    use approx::assert_relative_eq;
    use ndarray::Array3;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_image_has_zero_spectrum() {
        let img = Array2::from_elem((8, 8), 3.7);
        let ps = power_spectrum(img.view()).unwrap();
        assert!(ps.iter().all(|&v| v.abs() < 1e-20));
    }

    #[test]
    fn sinusoid_concentrates_at_its_frequency() {
        let n = 32;
        let k = 5.0;
        let img = Array2::from_shape_fn((n, n), |(r, _)| {
            (2.0 * std::f64::consts::PI * k * r as f64 / n as f64).sin()
        });
        let ps = power_spectrum(img.view()).unwrap();
        // Dominant power within a window-broadened ring around ±k on the row
        // axis.
        let total: f64 = ps.sum();
        let mut near = 0.0;
        for r in 0..n {
            let fr = if r <= n / 2 { r as f64 } else { r as f64 - n as f64 };
            if (fr.abs() - k).abs() <= 2.0 {
                near += ps.row(r).sum();
            }
        }
        assert!(near / total > 0.95, "{near} of {total}");
    }

    #[test]
    fn parseval_identity_holds() {
        let mut rng = crate::seeds::rng(3, &[1]);
        let (rows, cols) = (12, 16);
        let img = Array2::from_shape_fn((rows, cols), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let ps = power_spectrum(img.view()).unwrap();
        // Recompute the windowed, mean-subtracted field as the oracle side.
        let mean = img.sum() / (rows * cols) as f64;
        let mut windowed_sq = 0.0;
        for r in 0..rows {
            for c in 0..cols {
                let w = bartlett_hann(r, rows) * bartlett_hann(c, cols);
                let v = (img[[r, c]] - mean) * w;
                windowed_sq += v * v;
            }
        }
        let n = (rows * cols) as f64;
        assert_relative_eq!(ps.sum(), n * windowed_sq, max_relative = 1e-9);
    }

    #[test]
    fn azimuthal_average_of_constant_power() {
        let ps = Array2::from_elem((16, 16), 1.0);
        let profile = azimuthal_average(ps.view());
        for p in &profile.power {
            assert_eq!(*p, 1.0);
        }
        // Total power conserved: Σ bin_mean · bin_count = Σ power.
        let total: f64 = profile
            .power
            .iter()
            .zip(&profile.counts)
            .map(|(p, n)| p * *n as f64)
            .sum();
        assert_relative_eq!(total, ps.sum(), max_relative = 1e-12);
    }

    #[test]
    fn azimuthal_average_tracks_radial_function() {
        let n = 64;
        let ps = Array2::from_shape_fn((n, n), |(r, c)| {
            let fr = if r <= n / 2 { r as f64 } else { r as f64 - n as f64 };
            let fc = if c <= n / 2 { c as f64 } else { c as f64 - n as f64 };
            1.0 / (1.0 + fr * fr + fc * fc)
        });
        let profile = azimuthal_average(ps.view());
        for (r, p) in profile.radii.iter().zip(&profile.power) {
            if *r > 0.0 && *r < (n / 2) as f64 {
                let expect = 1.0 / (1.0 + r * r);
                // Binning error only.
                assert!((p - expect).abs() / expect < 0.35, "r={r}: {p} vs {expect}");
            }
        }
    }

    #[test]
    fn synthetic_inverse_square_spectrum_slope() {
        // Power ∝ 1/f² → log-log slope ≈ −2 (binning gives some slack).
        let n = 64;
        let ps = Array2::from_shape_fn((n, n), |(r, c)| {
            let fr = if r <= n / 2 { r as f64 } else { r as f64 - n as f64 };
            let fc = if c <= n / 2 { c as f64 } else { c as f64 - n as f64 };
            let f2 = fr * fr + fc * fc;
            if f2 == 0.0 {
                0.0
            } else {
                1.0 / f2
            }
        });
        let profile = azimuthal_average(ps.view());
        // Restrict to radii below Nyquist where bins are well populated.
        let trimmed = RadialProfile {
            radii: profile.radii.iter().cloned().filter(|r| *r > 0.0 && *r <= 32.0).collect(),
            power: profile
                .radii
                .iter()
                .zip(&profile.power)
                .filter(|(r, _)| **r > 0.0 && **r <= 32.0)
                .map(|(_, p)| *p)
                .collect(),
            counts: vec![],
        };
        let slope = trimmed.loglog_slope().unwrap();
        assert!((slope + 2.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn identical_pixels_give_infinite_pairs() {
        let grid = WavelengthGrid::uniform(4, 450.0, 940.0).unwrap();
        let data = Array3::from_elem((4, 4, 4), 2.0);
        let cube = HyperCube::new(data, grid, DEFAULT_MAX_VALUE).unwrap();
        let profile = psnr_vs_distance(&cube, 500, 1).unwrap();
        assert!(profile.distances.is_empty());
        assert!(profile.infinite_pairs > 0);
        assert_eq!(profile.baseline_psnr, f64::INFINITY);
        assert_eq!(profile.crossover_distance, None);
    }

    #[test]
    fn crossover_tracks_correlation_length() {
        let corr = 6.0;
        let cube = synth_cube(&SynthSpec {
            rows: 64,
            cols: 64,
            bands: 8,
            spectral_rank: 3,
            spatial_correlation_length: corr,
            noise_floor: 1e-4,
            seed: 21,
        })
        .unwrap();
        let profile = psnr_vs_distance(&cube, 200_000, 5).unwrap();
        let crossover = profile.crossover_distance.expect("curve crosses baseline");
        assert!(
            crossover >= corr / 2.0 && crossover <= corr * 2.0,
            "crossover {crossover} vs correlation length {corr}"
        );
    }

    #[test]
    fn pca_rank_one_variance() {
        let base = Array1::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let spectra = Array2::from_shape_fn((32, 4), |(i, j)| (1.0 + i as f64 * 0.1) * base[j]);
        let result = pca(spectra.view()).unwrap();
        assert_relative_eq!(result.variance_ratios[0], 1.0, epsilon = 1e-12);
        for v in &result.variance_ratios[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn pca_orthogonal_mixture_ratios() {
        // Two orthogonal directions with variance ratio 4:1 → ratios 0.8/0.2.
        let n = 4000;
        let mut rng = crate::seeds::rng(9, &[2]);
        let e1 = Array1::from_vec(vec![1.0, 0.0, 0.0]);
        let e2 = Array1::from_vec(vec![0.0, 1.0, 0.0]);
        let mut spectra = Array2::<f64>::zeros((n, 3));
        for i in 0..n {
            let a: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) * 2.0;
            let b: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            for j in 0..3 {
                spectra[[i, j]] = a * e1[j] + b * e2[j];
            }
        }
        let result = pca(spectra.view()).unwrap();
        assert!((result.variance_ratios[0] - 0.8).abs() < 0.02);
        assert!((result.variance_ratios[1] - 0.2).abs() < 0.02);
    }

    #[test]
    fn pca_components_orthonormal_and_ratios_normalized() {
        let cube = synth_cube(&SynthSpec {
            rows: 24,
            cols: 24,
            bands: 10,
            spectral_rank: 4,
            spatial_correlation_length: 3.0,
            noise_floor: 1e-3,
            seed: 2,
        })
        .unwrap();
        let result = pca(cube.spectra_matrix().view()).unwrap();
        let gram = result.components.t().dot(&result.components);
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10, "gram ({i}, {j})");
            }
        }
        let sum: f64 = result.variance_ratios.iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
        for w in result.variance_ratios.windows(2) {
            assert!(w[0] >= w[1] - 1e-15);
        }
    }

    #[test]
    fn pca_full_rank_roundtrip() {
        let mut rng = crate::seeds::rng(12, &[3]);
        let spectra = Array2::from_shape_fn((64, 6), |_| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let result = pca(spectra.view()).unwrap();
        for row in spectra.rows() {
            let s = row.to_owned();
            let back = result.approximate(&s, 6);
            for (a, b) in s.iter().zip(back.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn psnr_vs_components_monotone_and_complete() {
        let cube = synth_cube(&SynthSpec {
            rows: 16,
            cols: 16,
            bands: 8,
            spectral_rank: 3,
            spatial_correlation_length: 3.0,
            noise_floor: 1e-3,
            seed: 8,
        })
        .unwrap();
        let result = pca(cube.spectra_matrix().view()).unwrap();
        let curve = psnr_vs_components(&cube, &result, 8).unwrap();
        assert_eq!(curve.mean_psnr.len(), 9);
        for w in curve.mean_psnr.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "curve not monotone: {w:?}");
        }
        // Complete basis: all spectra recovered beyond 200 dB (or exactly).
        assert!(curve.mean_psnr[8] > 200.0);
        assert!(psnr_vs_components(&cube, &result, 9).is_err());
    }

    #[test]
    fn psnr_vs_components_k0_matches_distance_baseline() {
        let cube = synth_cube(&SynthSpec {
            rows: 16,
            cols: 16,
            bands: 8,
            spectral_rank: 3,
            spatial_correlation_length: 3.0,
            noise_floor: 1e-3,
            seed: 8,
        })
        .unwrap();
        let result = pca(cube.spectra_matrix().view()).unwrap();
        let curve = psnr_vs_components(&cube, &result, 0).unwrap();
        let profile = psnr_vs_distance(&cube, 10, 1).unwrap();
        assert_relative_eq!(curve.mean_psnr[0], profile.baseline_psnr, max_relative = 1e-12);
    }

    #[test]
    fn white_noise_profile_is_flat() {
        // The window taper correlates neighboring frequency bins, so the bin
        // statistics are measured empirically over independent realizations
        // rather than assumed exponential.
        let (mean, sem, radii) = white_noise_radial_statistics(64, 12, 31);
        let global = mean.iter().sum::<f64>() / mean.len() as f64;
        for ((r, m), s) in radii.iter().zip(&mean).zip(&sem) {
            assert!((m - global).abs() < 3.0 * s, "bin r={r}: {m} vs {global} (sem {s})");
        }
    }
}
