//! Per-pixel filter assignments: fixed LVF and squarish lattices, random
//! continuous layouts, push-broom shift indexing, and snapping to a discrete
//! filter set.
//!
//! The scan axis is fixed to rows; a column scan is obtained by transposing
//! the inputs. Stepping assumes the physical filter array is periodic and
//! larger than the simulated patch, so the pattern slides cyclically
//! (mod rows) — no missing data appears at patch edges.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeds;
use crate::spectral::{FilterParams, FilterSet, ParamDomain};

/// Pixel-wise filter assignment over a detector.
#[derive(Debug, Clone, PartialEq)]
pub enum LayoutKind {
    /// Every pixel references a filter in an embedded set.
    Indexed { indices: Array2<usize>, filters: FilterSet },
    /// Every pixel carries its own free (center, FWHM) pair.
    Continuous { centers: Array2<f64>, fwhms: Array2<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutPattern {
    kind: LayoutKind,
}

impl LayoutPattern {
    pub fn indexed(indices: Array2<usize>, filters: FilterSet) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty layout".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= filters.len()) {
            return Err(Error::InvalidArgument(format!(
                "filter index {bad} out of range for a set of {}",
                filters.len()
            )));
        }
        Ok(Self { kind: LayoutKind::Indexed { indices, filters } })
    }

    pub fn continuous(centers: Array2<f64>, fwhms: Array2<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("empty layout".into()));
        }
        if centers.dim() != fwhms.dim() {
            return Err(Error::DimensionMismatch(format!(
                "center grid {:?} vs fwhm grid {:?}",
                centers.dim(),
                fwhms.dim()
            )));
        }
        for (&c, &w) in centers.iter().zip(fwhms.iter()) {
            if !c.is_finite() || !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidArgument(format!("invalid pixel filter ({c}, {w})")));
            }
        }
        Ok(Self { kind: LayoutKind::Continuous { centers, fwhms } })
    }

    pub fn rows(&self) -> usize {
        match &self.kind {
            LayoutKind::Indexed { indices, .. } => indices.nrows(),
            LayoutKind::Continuous { centers, .. } => centers.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match &self.kind {
            LayoutKind::Indexed { indices, .. } => indices.ncols(),
            LayoutKind::Continuous { centers, .. } => centers.ncols(),
        }
    }

    pub fn kind(&self) -> &LayoutKind {
        &self.kind
    }

    pub fn kind_mut(&mut self) -> &mut LayoutKind {
        &mut self.kind
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, LayoutKind::Continuous { .. })
    }

    /// Filter index of a pixel, for indexed layouts.
    pub fn index_at(&self, r: usize, c: usize) -> Option<usize> {
        match &self.kind {
            LayoutKind::Indexed { indices, .. } => Some(indices[[r, c]]),
            LayoutKind::Continuous { .. } => None,
        }
    }

    /// The filter seen by scene pixel (r, c) at push-broom step s: the layout
    /// slides one row per step, periodically, so this is the layout entry at
    /// ((r + s) mod rows, c).
    pub fn filter_at(&self, r: usize, c: usize, step: usize) -> Result<FilterParams> {
        if r >= self.rows() || c >= self.cols() {
            return Err(Error::InvalidArgument(format!(
                "pixel ({r}, {c}) outside {}x{} layout",
                self.rows(),
                self.cols()
            )));
        }
        let rr = (r + step) % self.rows();
        Ok(match &self.kind {
            LayoutKind::Indexed { indices, filters } => filters.get(indices[[rr, c]]),
            LayoutKind::Continuous { centers, fwhms } => {
                FilterParams { center: centers[[rr, c]], fwhm: fwhms[[rr, c]] }
            }
        })
    }

    // -- Layout text format --------------------------------------------------
    //
    // Line-based; f64 values use Rust's shortest round-trip formatting, so a
    // save/load cycle is bit-exact.

    pub fn to_text(&self) -> String {
        let mut out = String::from("LAYOUT v1\n");
        let _ = writeln!(out, "rows {}", self.rows());
        let _ = writeln!(out, "cols {}", self.cols());
        out.push_str("scan_axis rows\n");
        match &self.kind {
            LayoutKind::Indexed { indices, filters } => {
                out.push_str("mode indexed\n");
                let _ = writeln!(out, "filters {}", filters.len());
                for f in filters.iter() {
                    let _ = writeln!(out, "filter {} {}", f.center, f.fwhm);
                }
                out.push_str("pixels\n");
                for ((r, c), &i) in indices.indexed_iter() {
                    let _ = writeln!(out, "{r} {c} {i}");
                }
            }
            LayoutKind::Continuous { centers, fwhms } => {
                out.push_str("mode continuous\n");
                out.push_str("pixels\n");
                for ((r, c), &center) in centers.indexed_iter() {
                    let _ = writeln!(out, "{r} {c} {center} {}", fwhms[[r, c]]);
                }
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::MalformedFile { path: path.to_path_buf(), reason: reason.into() };
        let mut lines = text.lines();
        if lines.next() != Some("LAYOUT v1") {
            return Err(bad("missing LAYOUT v1 header"));
        }
        let field = |line: Option<&str>, key: &str| -> Result<String> {
            line.and_then(|l| l.strip_prefix(key))
                .map(|s| s.trim().to_string())
                .ok_or_else(|| bad(&format!("missing {key} line")))
        };
        let rows: usize = field(lines.next(), "rows ")?.parse().map_err(|_| bad("bad rows"))?;
        let cols: usize = field(lines.next(), "cols ")?.parse().map_err(|_| bad("bad cols"))?;
        let axis = field(lines.next(), "scan_axis ")?;
        if axis != "rows" {
            return Err(bad("unsupported scan_axis (only rows)"));
        }
        let mode = field(lines.next(), "mode ")?;
        match mode.as_str() {
            "indexed" => {
                let n: usize = field(lines.next(), "filters ")?.parse().map_err(|_| bad("bad filters count"))?;
                let mut filters = Vec::with_capacity(n);
                for _ in 0..n {
                    let rec = field(lines.next(), "filter ")?;
                    let mut p = rec.split_whitespace();
                    let center: f64 = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad filter record"))?;
                    let fwhm: f64 = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad filter record"))?;
                    filters.push(FilterParams { center, fwhm });
                }
                if lines.next() != Some("pixels") {
                    return Err(bad("missing pixels marker"));
                }
                let mut indices = Array2::<usize>::zeros((rows, cols));
                let mut seen = 0usize;
                for line in lines {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let mut p = line.split_whitespace();
                    let r: usize = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad pixel record"))?;
                    let c: usize = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad pixel record"))?;
                    let i: usize = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad pixel record"))?;
                    if r >= rows || c >= cols {
                        return Err(bad("pixel record out of bounds"));
                    }
                    indices[[r, c]] = i;
                    seen += 1;
                }
                if seen != rows * cols {
                    return Err(bad(&format!("expected {} pixel records, found {seen}", rows * cols)));
                }
                LayoutPattern::indexed(indices, FilterSet::new(filters)?)
            }
            "continuous" => {
                if lines.next() != Some("pixels") {
                    return Err(bad("missing pixels marker"));
                }
                let mut centers = Array2::<f64>::zeros((rows, cols));
                let mut fwhms = Array2::<f64>::zeros((rows, cols));
                let mut seen = 0usize;
                for line in lines {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let mut p = line.split_whitespace();
                    let r: usize = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad pixel record"))?;
                    let c: usize = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad pixel record"))?;
                    let center: f64 = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad pixel record"))?;
                    let fwhm: f64 = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad pixel record"))?;
                    if r >= rows || c >= cols {
                        return Err(bad("pixel record out of bounds"));
                    }
                    centers[[r, c]] = center;
                    fwhms[[r, c]] = fwhm;
                    seen += 1;
                }
                if seen != rows * cols {
                    return Err(bad(&format!("expected {} pixel records, found {seen}", rows * cols)));
                }
                LayoutPattern::continuous(centers, fwhms)
            }
            other => Err(bad(&format!("unknown mode {other}"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, path)
    }
}

/// LVF-like pattern: row r is uniformly filter (r mod N), with the filters
/// pre-sorted by ascending central wavelength so λc increases along the scan
/// direction.
pub fn lvf_layout(filters: &FilterSet, rows: usize, cols: usize) -> Result<LayoutPattern> {
    if filters.is_empty() {
        return Err(Error::InvalidArgument("empty filter set".into()));
    }
    let sorted = filters.sorted_by_center();
    let n = sorted.len();
    let indices = Array2::from_shape_fn((rows, cols), |(r, _)| r % n);
    LayoutPattern::indexed(indices, sorted)
}

/// The repeated motif of a squarish lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitCell {
    pub cell_rows: usize,
    pub cell_cols: usize,
    pub assignment: Array2<usize>,
    /// Cross-scan pixel offset applied per cell repetition in the scan
    /// direction; 1 only when the cell holds each filter exactly once.
    pub skew: usize,
}

/// Unit cell as close to square as the grid allows: cell_cols = ⌈√N⌉
/// (cross-scan filled first), cell_rows = ⌈N / cell_cols⌉. Cells beyond the
/// first N are padded by cycling filters from index 0 again.
pub fn squarish_unit_cell(n_filters: usize) -> Result<UnitCell> {
    if n_filters == 0 {
        return Err(Error::InvalidArgument("squarish cell needs n >= 1".into()));
    }
    let cell_cols = (n_filters as f64).sqrt().ceil() as usize;
    let cell_rows = n_filters.div_ceil(cell_cols);
    let cells = cell_rows * cell_cols;
    let assignment = Array2::from_shape_fn((cell_rows, cell_cols), |(r, c)| {
        let pos = r * cell_cols + c;
        if pos < n_filters {
            pos
        } else {
            (pos - n_filters) % n_filters
        }
    });
    let skew = if cells == n_filters { 1 } else { 0 };
    Ok(UnitCell { cell_rows, cell_cols, assignment, skew })
}

impl UnitCell {
    /// Every filter index must appear at least once.
    pub fn is_complete(&self, n_filters: usize) -> bool {
        let mut seen = vec![false; n_filters];
        for &i in self.assignment.iter() {
            if i < n_filters {
                seen[i] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Tile the squarish unit cell over a detector. Pixel (r, c) gets the cell
/// entry at (r mod cell_rows, (c + skew·⌊r / cell_rows⌋) mod cell_cols), so
/// one primitive translation vector stays perfectly cross-scan while the
/// scan-direction repetition is skewed by one pixel for perfect-rectangle
/// cells.
pub fn squarish_layout(filters: &FilterSet, rows: usize, cols: usize) -> Result<LayoutPattern> {
    let cell = squarish_unit_cell(filters.len())?;
    let indices = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let shift = cell.skew * (r / cell.cell_rows);
        cell.assignment[[r % cell.cell_rows, (c + shift) % cell.cell_cols]]
    });
    LayoutPattern::indexed(indices, filters.clone())
}

/// Independent uniform (center, FWHM) per pixel over the domain.
pub fn random_layout(rows: usize, cols: usize, domain: &ParamDomain, seed: u64) -> Result<LayoutPattern> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("empty layout dims".into()));
    }
    let mut rng = seeds::rng(seed, &[0x1a7]);
    let mut centers = Array2::<f64>::zeros((rows, cols));
    let mut fwhms = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            centers[[r, c]] = rng.gen_range(domain.lambda_min..=domain.lambda_max);
            fwhms[[r, c]] = rng.gen_range(domain.fwhm_min..=domain.fwhm_max);
        }
    }
    LayoutPattern::continuous(centers, fwhms)
}

/// Assign every continuous pixel to its nearest set filter, measured as
/// Euclidean distance in the scaled [−1, 1]² parameter space. Ties break to
/// the lowest filter index.
pub fn snap_layout(layout: &LayoutPattern, filters: &FilterSet, domain: &ParamDomain) -> Result<LayoutPattern> {
    if filters.is_empty() {
        return Err(Error::InvalidArgument("empty filter set".into()));
    }
    let (centers, fwhms) = match layout.kind() {
        LayoutKind::Continuous { centers, fwhms } => (centers, fwhms),
        LayoutKind::Indexed { .. } => {
            return Err(Error::InvalidArgument("snap_layout expects a continuous layout".into()))
        }
    };
    let targets: Vec<_> = filters.iter().map(|&f| domain.scale(f)).collect();
    let indices = Array2::from_shape_fn(centers.dim(), |(r, c)| {
        let u = domain.scale(FilterParams { center: centers[[r, c]], fwhm: fwhms[[r, c]] });
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, t) in targets.iter().enumerate() {
            let d = (u.u_center - t.u_center).powi(2) + (u.u_fwhm - t.u_fwhm).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    });
    LayoutPattern::indexed(indices, filters.clone())
}
