//! Spectral grids, transmission profiles, peak analysis, and the scalar
//! metrics (FSR, peak rejection, MSE, percentage fit) consumed by the
//! synthesis loop and the acceptance suite.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Prominence floor that qualifies a local maximum as a main peak.
pub const MAIN_PEAK_FLOOR: f64 = 0.5;

/// Minimum sample count for a constructed grid.
pub const MIN_GRID_COUNT: usize = 16;

/// Wavelength samples, strictly increasing, uniform in optical frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    wavelengths: Vec<f64>,
}

impl SpectralGrid {
    /// Grid from explicit wavelengths (CSV import, sub-windows).
    pub fn from_wavelengths(wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.len() < 2 {
            return Err(Error::Domain("grid needs at least 2 samples".into()));
        }
        if wavelengths.windows(2).any(|w| !(w[1] > w[0])) || wavelengths[0] <= 0.0 {
            return Err(Error::Domain(
                "grid wavelengths must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self { wavelengths })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    /// Midpoint of the covered span.
    pub fn center(&self) -> f64 {
        0.5 * (self.wavelengths[0] + self.wavelengths[self.len() - 1])
    }

    pub fn span(&self) -> f64 {
        self.wavelengths[self.len() - 1] - self.wavelengths[0]
    }

    /// Mean sample spacing; the resolution quoted for FSR measurements.
    pub fn step(&self) -> f64 {
        self.span() / (self.len() - 1) as f64
    }

    /// Index range of samples inside [lo, hi].
    pub fn window_indices(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.wavelengths.partition_point(|&w| w < lo);
        let end = self.wavelengths.partition_point(|&w| w <= hi);
        start..end
    }
}

/// Uniform-in-frequency grid covering [center - span/2, center + span/2].
pub fn make_grid(center: f64, span: f64, count: usize) -> Result<SpectralGrid> {
    if count < MIN_GRID_COUNT {
        return Err(Error::Domain(format!(
            "grid count must be >= {MIN_GRID_COUNT}, got {count}"
        )));
    }
    if !(span > 0.0) || !(center - span / 2.0 > 0.0) {
        return Err(Error::Domain(format!(
            "degenerate grid: center {center}, span {span}"
        )));
    }
    let nu_hi = SPEED_OF_LIGHT / (center - span / 2.0);
    let nu_lo = SPEED_OF_LIGHT / (center + span / 2.0);
    let wavelengths = (0..count)
        .map(|i| {
            // descending frequency -> ascending wavelength
            let f = i as f64 / (count - 1) as f64;
            SPEED_OF_LIGHT / (nu_hi + (nu_lo - nu_hi) * f)
        })
        .collect();
    SpectralGrid::from_wavelengths(wavelengths)
}

/// Intensity samples over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionProfile {
    grid: SpectralGrid,
    intensity: Vec<f64>,
}

impl TransmissionProfile {
    pub fn new(grid: SpectralGrid, intensity: Vec<f64>) -> Self {
        assert_eq!(grid.len(), intensity.len(), "grid/intensity length mismatch");
        Self { grid, intensity }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn max_intensity(&self) -> f64 {
        self.intensity.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when any sample exceeds unity beyond rounding (estimated models).
    pub fn exceeds_unity(&self) -> bool {
        self.intensity.iter().any(|&v| v > 1.0 + 1e-9)
    }

    /// Rescale so the maximum sample is 1.
    pub fn normalized(&self) -> Self {
        let max = self.max_intensity();
        if !(max > 0.0) {
            return self.clone();
        }
        Self {
            grid: self.grid.clone(),
            intensity: self.intensity.iter().map(|&v| v / max).collect(),
        }
    }

    /// Sub-profile over a sample index range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let grid = SpectralGrid::from_wavelengths(self.grid.wavelengths[range.clone()].to_vec())?;
        Ok(Self { grid, intensity: self.intensity[range].to_vec() })
    }
}

/// One detected peak with the indices of the minima bounding its main lobe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub wavelength: f64,
    pub intensity: f64,
    pub left_min: usize,
    pub right_min: usize,
}

#[derive(Debug, Clone, Default)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Peak whose wavelength is nearest `lambda`; ties go to the shorter
    /// wavelength (peaks are sorted ascending, so the first best wins).
    pub fn nearest(&self, lambda: f64) -> Option<&Peak> {
        self.peaks.iter().min_by(|a, b| {
            (a.wavelength - lambda)
                .abs()
                .total_cmp(&(b.wavelength - lambda).abs())
        })
    }
}

/// Prominence of the local maximum at `i`: height above the higher of the
/// two side minima, where each side extends to the nearest strictly higher
/// sample (or the boundary).
fn prominence(y: &[f64], i: usize) -> f64 {
    let peak = y[i];
    let mut left_base = peak;
    for k in (0..i).rev() {
        if y[k] > peak {
            break;
        }
        left_base = left_base.min(y[k]);
    }
    let mut right_base = peak;
    for k in i + 1..y.len() {
        if y[k] > peak {
            break;
        }
        right_base = right_base.min(y[k]);
    }
    peak - left_base.max(right_base)
}

/// Nearest lobe boundaries around peak `i`: walk outward to the closest
/// local minima whose value drops below half the peak, so shallow saddles
/// inside a split (coupled-cavity doublet) resonance stay inside the lobe.
fn lobe_bounds(y: &[f64], i: usize) -> (usize, usize) {
    let half = 0.5 * y[i];
    let mut l = i;
    while l > 0 {
        if y[l - 1] > y[l] && y[l] < half {
            break;
        }
        l -= 1;
    }
    let mut r = i;
    while r + 1 < y.len() {
        if y[r + 1] > y[r] && y[r] < half {
            break;
        }
        r += 1;
    }
    (l, r)
}

/// Strict local maxima with prominence at least `floor` times the global
/// maximum, each with its flanking lobe minima.
pub fn find_peaks(profile: &TransmissionProfile, prominence_floor: f64) -> PeakSet {
    let y = profile.intensity();
    let n = y.len();
    if n < 3 {
        return PeakSet::default();
    }
    let global_max = profile.max_intensity();
    if !(global_max > 0.0) {
        return PeakSet::default();
    }
    let threshold = prominence_floor * global_max;
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if y[i] > y[i - 1] && y[i] > y[i + 1] && prominence(y, i) >= threshold {
            let (left_min, right_min) = lobe_bounds(y, i);
            peaks.push(Peak {
                index: i,
                wavelength: profile.grid().wavelengths()[i],
                intensity: y[i],
                left_min,
                right_min,
            });
        }
    }
    PeakSet { peaks }
}

/// Mean adjacent spacing of the main peaks (prominence floor 0.5).
/// Uncertainty is one grid step.
pub fn measure_fsr(profile: &TransmissionProfile) -> Result<f64> {
    let peaks = find_peaks(profile, MAIN_PEAK_FLOOR);
    if peaks.len() < 2 {
        return Err(Error::InsufficientPeaks { found: peaks.len(), needed: 2 });
    }
    let first = peaks.peaks.first().unwrap().wavelength;
    let last = peaks.peaks.last().unwrap().wavelength;
    Ok((last - first) / (peaks.len() - 1) as f64)
}

/// Peak stopband rejection over a wavelength window, in dB (<= 0).
///
/// The main peak is the strongest sample in the window; sidebands are all
/// window samples outside its main lobe. No sideband energy at all yields
/// the -inf sentinel.
pub fn peak_rejection(profile: &TransmissionProfile, window: (f64, f64)) -> Result<f64> {
    let range = profile.grid().window_indices(window.0, window.1);
    if range.len() < 3 {
        return Err(Error::Domain(format!(
            "peak-rejection window [{:.6e}, {:.6e}] holds fewer than 3 samples",
            window.0, window.1
        )));
    }
    let y = &profile.intensity()[range.clone()];
    let (peak_rel, &peak_val) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    if !(peak_val > 0.0) {
        return Err(Error::Domain("peak-rejection window is identically zero".into()));
    }
    let (lobe_l, lobe_r) = lobe_bounds(y, peak_rel);
    let max_side = y[..lobe_l]
        .iter()
        .chain(&y[lobe_r + 1..])
        .cloned()
        .fold(0.0f64, f64::max);
    if max_side <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (max_side / peak_val).log10())
}

/// Mean squared intensity difference; both profiles must share a grid.
pub fn mse(a: &TransmissionProfile, b: &TransmissionProfile) -> Result<f64> {
    check_same_grid(a, b)?;
    let n = a.intensity().len() as f64;
    Ok(a.intensity()
        .iter()
        .zip(b.intensity())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Normalized-RMSE fit in percent: 100 (1 - ||y - yhat|| / ||y - mean(y)||).
/// Not symmetric in its arguments.
pub fn fit_percent(measured: &TransmissionProfile, modeled: &TransmissionProfile) -> Result<f64> {
    check_same_grid(measured, modeled)?;
    let y = measured.intensity();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let denom: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>().sqrt();
    if !(denom > 0.0) {
        return Err(Error::Domain(
            "fit_percent is undefined for a constant measured signal".into(),
        ));
    }
    let num: f64 = y
        .iter()
        .zip(modeled.intensity())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * (1.0 - num / denom))
}

fn check_same_grid(a: &TransmissionProfile, b: &TransmissionProfile) -> Result<()> {
    if a.grid().len() != b.grid().len() {
        return Err(Error::GridMismatch);
    }
    let close = a
        .grid()
        .wavelengths()
        .iter()
        .zip(b.grid().wavelengths())
        .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs());
    if !close {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Two-column CSV (wavelength_nm, intensity) with 12 significant digits.
pub fn write_profile_csv<W: Write>(profile: &TransmissionProfile, mut w: W) -> Result<()> {
    writeln!(w, "wavelength_nm,intensity")?;
    for (lambda, i) in profile.grid().wavelengths().iter().zip(profile.intensity()) {
        writeln!(w, "{:.11e},{:.11e}", lambda * 1e9, i)?;
    }
    Ok(())
}

pub fn read_profile_csv<R: BufRead>(r: R) -> Result<TransmissionProfile> {
    let mut wavelengths = Vec::new();
    let mut intensity = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 {
            if line != "wavelength_nm,intensity" {
                return Err(Error::Csv(format!(
                    "unexpected header {line:?}, want \"wavelength_nm,intensity\""
                )));
            }
            continue;
        }
        let mut parts = line.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Csv(format!("line {}: expected 2 columns", lineno + 1)));
        };
        let lambda_nm: f64 = a
            .trim()
            .parse()
            .map_err(|e| Error::Csv(format!("line {}: bad wavelength: {e}", lineno + 1)))?;
        let i: f64 = b
            .trim()
            .parse()
            .map_err(|e| Error::Csv(format!("line {}: bad intensity: {e}", lineno + 1)))?;
        if !lambda_nm.is_finite() || !i.is_finite() || i < 0.0 {
            return Err(Error::Csv(format!("line {}: non-finite or negative value", lineno + 1)));
        }
        wavelengths.push(lambda_nm * 1e-9);
        intensity.push(i);
    }
    let grid = SpectralGrid::from_wavelengths(wavelengths).map_err(|e| Error::Csv(e.to_string()))?;
    Ok(TransmissionProfile::new(grid, intensity))
}
