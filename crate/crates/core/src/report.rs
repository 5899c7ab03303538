//! Plot-ready CSV emission. Every CSV carries a single header row; floats are
//! printed with 9 significant digits; the +infinity PSNR sentinel prints as
//! `inf` and is excluded from any averaged column upstream.

use std::fmt::Write as _;

use crate::analysis::{ComponentCurve, DistanceProfile, PcaResult, RadialProfile};
use crate::datacube::WavelengthGrid;
use crate::sweep::SweepRow;
use crate::train::LossReport;

/// 9-significant-digit float formatting; sentinels print as inf/-inf/nan.
pub fn fmt_g9(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.8e}")
    }
}

/// Per-run history: epoch, split, total, data_mse, l2_term, lorentzian_term.
pub fn history_csv(history: &[LossReport]) -> String {
    let mut out = String::from("epoch,split,total,data_mse,l2_term,lorentzian_term\n");
    for rep in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            rep.epoch,
            rep.split.name(),
            fmt_g9(rep.total),
            fmt_g9(rep.data_mse),
            fmt_g9(rep.l2_term),
            fmt_g9(rep.lorentzian_term)
        );
    }
    out
}

/// All sweep rows, one per trained hyperparameter combination.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "configuration,n_filters,n_steps,lr,l2,seed,val_loss,test_mse,test_psnr,compression_ratio,wall_time_s\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.configuration.name(),
            r.n_filters,
            r.n_steps,
            fmt_g9(r.learning_rate),
            fmt_g9(r.l2_weight),
            r.seed,
            fmt_g9(r.val_loss),
            fmt_g9(r.test_mse),
            fmt_g9(r.test_psnr),
            fmt_g9(r.compression_ratio),
            fmt_g9(r.wall_time_s)
        );
    }
    out
}

/// The steps × filters map: best configuration per cell by test PSNR among
/// validation-selected rows.
pub fn best_map_csv(map: &[&SweepRow]) -> String {
    let mut out = String::from("n_filters,n_steps,configuration,test_psnr,test_mse,compression_ratio\n");
    for r in map {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n_filters,
            r.n_steps,
            r.configuration.name(),
            fmt_g9(r.test_psnr),
            fmt_g9(r.test_mse),
            fmt_g9(r.compression_ratio)
        );
    }
    out
}

/// Azimuthally averaged power spectrum.
pub fn radial_profile_csv(profile: &RadialProfile) -> String {
    let mut out = String::from("radius,power,count\n");
    for ((r, p), n) in profile.radii.iter().zip(&profile.power).zip(&profile.counts) {
        let _ = writeln!(out, "{},{},{}", fmt_g9(*r), fmt_g9(*p), n);
    }
    out
}

/// Pairwise PSNR vs pixel distance.
pub fn distance_profile_csv(profile: &DistanceProfile) -> String {
    let mut out = String::from("distance,mean_psnr,count\n");
    for ((d, p), n) in profile.distances.iter().zip(&profile.mean_psnr).zip(&profile.counts) {
        let _ = writeln!(out, "{},{},{}", fmt_g9(*d), fmt_g9(*p), n);
    }
    out
}

/// PCA variance ratios per component index.
pub fn pca_variances_csv(result: &PcaResult) -> String {
    let mut out = String::from("component,variance_ratio\n");
    for (k, v) in result.variance_ratios.iter().enumerate() {
        let _ = writeln!(out, "{},{}", k, fmt_g9(*v));
    }
    out
}

/// PCA component vectors as (wavelength, value, series = component index).
pub fn pca_components_csv(result: &PcaResult, grid: &WavelengthGrid, max_components: usize) -> String {
    let mut out = String::from("wavelength_nm,value,component\n");
    let k_max = max_components.min(result.components.ncols());
    for k in 0..k_max {
        for (b, &wl) in grid.bands().iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_g9(wl), fmt_g9(result.components[[b, k]]), k);
        }
    }
    out
}

/// Mean PSNR per retained component count.
pub fn psnr_components_csv(curve: &ComponentCurve) -> String {
    let mut out = String::from("components,mean_psnr,infinite_count\n");
    for (k, (p, n)) in curve.mean_psnr.iter().zip(&curve.infinite_counts).enumerate() {
        let _ = writeln!(out, "{},{},{}", k, fmt_g9(*p), n);
    }
    out
}

/// Evaluation metrics rows: one labeled line per evaluated cube.
pub fn metrics_csv(rows: &[(String, usize, usize, f64, f64, f64)]) -> String {
    let mut out = String::from("label,n_patches,steps,mse,psnr,compression_ratio\n");
    for (label, n, steps, mse, psnr, ratio) in rows {
        let _ = writeln!(
            out,
            "{label},{n},{steps},{},{},{}",
            fmt_g9(*mse),
            fmt_g9(*psnr),
            fmt_g9(*ratio)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::Split;

    #[test]
    fn fmt_g9_digits_and_sentinels() {
        assert_eq!(fmt_g9(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_g9(f64::INFINITY), "inf");
        assert_eq!(fmt_g9(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_g9(0.0), "0.00000000e0");
        assert_eq!(fmt_g9(f64::NAN), "nan");
    }

    #[test]
    fn history_csv_has_header_and_rows() {
        let history = vec![
            LossReport { epoch: 0, split: Split::Train, total: 1.5, data_mse: 1.0, l2_term: 0.5, lorentzian_term: 0.0 },
            LossReport { epoch: 0, split: Split::Val, total: 2.0, data_mse: 2.0, l2_term: 0.0, lorentzian_term: 0.0 },
        ];
        let csv = history_csv(&history);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "epoch,split,total,data_mse,l2_term,lorentzian_term");
        assert!(lines[1].starts_with("0,train,"));
        assert!(lines[2].starts_with("0,val,"));
    }
}
