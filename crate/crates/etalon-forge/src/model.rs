//! Physics core for multistage Fabry-Perot etalons.
//!
//! Two independent routes to the transmission response are provided:
//! a brute-force cascade of per-interface 2x2 matrices, and a closed-form
//! sparse denominator built from the power set of cavity subsets. The
//! cascade is the oracle; the sparse form is what the synthesis machinery
//! consumes.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{SpectralGrid, TransmissionProfile};
use crate::sysid::EstimatedModel;

/// Hard cap on cavity count; the closed form enumerates 2^n subsets.
pub const MAX_CAVITIES: usize = 24;

/// e^{-j 2 pi (k * cycles mod 1)}.
///
/// `k * cycles` can reach 1e7 cycles, where a naive `sin`/`cos` of the raw
/// angle loses ~1e-9 rad. The product is split with an fma so both the
/// cascade and the closed form reduce phases identically to ~1e-15 rad.
pub(crate) fn unit_root(k: f64, cycles: f64) -> Complex64 {
    let hi = k * cycles;
    let lo = f64::mul_add(k, cycles, -hi);
    let frac = (hi - hi.floor()) + lo;
    Complex64::from_polar(1.0, -2.0 * PI * frac)
}

/// Lossless reflector: amplitude pair (r, t) derived from power reflectivity
/// under the Stokes relations, so r^2 + t^2 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflector {
    power_reflectivity: f64,
    amplitude_r: f64,
    amplitude_t: f64,
}

impl Reflector {
    pub fn from_power_reflectivity(big_r: f64) -> Result<Self> {
        if !big_r.is_finite() || big_r <= 0.0 || big_r >= 1.0 {
            return Err(Error::Domain(format!(
                "power reflectivity must lie strictly in (0, 1), got {big_r}"
            )));
        }
        Ok(Self {
            power_reflectivity: big_r,
            amplitude_r: big_r.sqrt(),
            amplitude_t: (1.0 - big_r).sqrt(),
        })
    }

    pub fn power_reflectivity(&self) -> f64 {
        self.power_reflectivity
    }

    pub fn amplitude_r(&self) -> f64 {
        self.amplitude_r
    }

    pub fn amplitude_t(&self) -> f64 {
        self.amplitude_t
    }
}

/// Ordered reflector stack plus integer cavity lengths in units of a base
/// optical-path quantum (1 cm of one-way optical path by default).
#[derive(Debug, Clone)]
pub struct EtalonConfig {
    reflectors: Vec<Reflector>,
    x: Vec<u64>,
    unit_length: f64,
    lambda0: f64,
    group_index: f64,
}

/// Default optical-path quantum: 1 cm.
pub const DEFAULT_UNIT_LENGTH: f64 = 0.01;

impl EtalonConfig {
    pub fn new(
        reflectors: Vec<Reflector>,
        x: Vec<u64>,
        unit_length: f64,
        lambda0: f64,
        group_index: f64,
    ) -> Result<Self> {
        if reflectors.len() != x.len() + 1 {
            return Err(Error::Domain(format!(
                "need exactly one more reflector than cavities: got {} reflectors for {} cavities",
                reflectors.len(),
                x.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::Domain("at least one cavity is required".into()));
        }
        if x.len() > MAX_CAVITIES {
            return Err(Error::Domain(format!(
                "cavity count {} exceeds the supported maximum of {MAX_CAVITIES}",
                x.len()
            )));
        }
        if x.iter().any(|&xm| xm == 0) {
            return Err(Error::Domain("every cavity length x_m must be >= 1".into()));
        }
        if !(unit_length > 0.0) || !unit_length.is_finite() {
            return Err(Error::Domain(format!("unit_length must be positive, got {unit_length}")));
        }
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(Error::Domain(format!("lambda0 must be positive, got {lambda0}")));
        }
        if !(group_index > 0.0) || !group_index.is_finite() {
            return Err(Error::Domain(format!("group_index must be positive, got {group_index}")));
        }
        Ok(Self { reflectors, x, unit_length, lambda0, group_index })
    }

    pub fn cavity_count(&self) -> usize {
        self.x.len()
    }

    pub fn reflectors(&self) -> &[Reflector] {
        &self.reflectors
    }

    pub fn x(&self) -> &[u64] {
        &self.x
    }

    pub fn unit_length(&self) -> f64 {
        self.unit_length
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn group_index(&self) -> f64 {
        self.group_index
    }

    /// Sum of cavity lengths in units (the numerator delay exponent).
    pub fn total_x(&self) -> u64 {
        self.x.iter().sum()
    }

    /// Product of all amplitude transmission coefficients.
    pub fn transmission_product(&self) -> f64 {
        self.reflectors.iter().map(Reflector::amplitude_t).product()
    }

    /// Stack reversed end to end (reciprocity checks).
    pub fn reversed(&self) -> Self {
        let mut reflectors = self.reflectors.clone();
        let mut x = self.x.clone();
        reflectors.reverse();
        x.reverse();
        Self { reflectors, x, ..*self }
    }
}

/// Polynomial in z^-1 stored as strictly increasing (exponent, coefficient)
/// terms. Duplicate exponents from subset-sum collisions are summed at
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePoly {
    terms: Vec<(u64, f64)>,
}

impl SparsePoly {
    pub fn from_terms(mut raw: Vec<(u64, f64)>) -> Self {
        raw.sort_by_key(|&(e, _)| e);
        let mut terms: Vec<(u64, f64)> = Vec::with_capacity(raw.len());
        for (e, c) in raw {
            match terms.last_mut() {
                Some(last) if last.0 == e => last.1 += c,
                _ => terms.push((e, c)),
            }
        }
        terms.retain(|&(_, c)| c != 0.0);
        Self { terms }
    }

    pub fn terms(&self) -> &[(u64, f64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u64 {
        self.terms.last().map_or(0, |&(e, _)| e)
    }

    pub fn coefficient(&self, exponent: u64) -> f64 {
        self.terms
            .binary_search_by_key(&exponent, |&(e, _)| e)
            .map_or(0.0, |i| self.terms[i].1)
    }

    /// Evaluate at z^-1 = e^{-j 2 pi cycles} using the shared phase reduction.
    pub fn eval_cycles(&self, cycles: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(e, c)| c * unit_root(e as f64, cycles))
            .sum()
    }

    /// Evaluate at an arbitrary z^-1 (test and small-case use).
    pub fn eval_zinv(&self, zinv: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(e, c)| c * zinv.powu(e as u32))
            .sum()
    }
}

/// Rational transfer function in z^-1.
///
/// Structured models come from the closed form and keep the sparse
/// exponent/coefficient view; estimated models come from identification and
/// live in pole/residue form on a recentered unit-circle arc.
#[derive(Debug, Clone)]
pub enum RationalTF {
    Structured {
        numerator: SparsePoly,
        denominator: SparsePoly,
        unit_length: f64,
    },
    Estimated(EstimatedModel),
}

impl RationalTF {
    /// Intensity |t(z(lambda))|^2 at a single wavelength.
    pub fn intensity_at(&self, lambda: f64) -> f64 {
        match self {
            RationalTF::Structured { numerator, denominator, unit_length } => {
                let cycles = unit_length / lambda;
                let num = numerator.eval_cycles(cycles);
                let den = denominator.eval_cycles(cycles);
                (num.norm() / den.norm()).powi(2)
            }
            RationalTF::Estimated(model) => model.intensity_at(lambda),
        }
    }

    /// Sample the intensity response over a spectral grid.
    ///
    /// Structured lossless models stay in [0, 1]; estimated models may
    /// exceed unity and are flagged by `TransmissionProfile::exceeds_unity`,
    /// never clamped.
    pub fn intensity_profile(&self, grid: &SpectralGrid) -> TransmissionProfile {
        let intensity = grid.wavelengths().iter().map(|&l| self.intensity_at(l)).collect();
        TransmissionProfile::new(grid.clone(), intensity)
    }
}

/// Cascade-matrix factorization: `field_out = prefactor * matrix * field_in`.
#[derive(Debug, Clone, Copy)]
pub struct Cascade {
    pub matrix: [[Complex64; 2]; 2],
    pub prefactor: Complex64,
}

fn mat_mul(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Brute-force matrix cascade: one factor per reflector, phase factors
/// e^{-j 2 phi_m} per cavity, prefactor e^{j sum phi} / prod t_i.
pub fn cascade_matrix(config: &EtalonConfig, lambda: f64) -> Cascade {
    let cycles = config.unit_length / lambda;
    let one = Complex64::new(1.0, 0.0);
    let r0 = Complex64::new(config.reflectors[0].amplitude_r(), 0.0);
    let mut m = [[one, r0], [r0, one]];
    for (idx, &xm) in config.x.iter().enumerate() {
        let r = config.reflectors[idx + 1].amplitude_r();
        let q = unit_root(2.0 * xm as f64, cycles); // e^{-j 2 phi_m}
        let factor = [[one, r * q], [Complex64::new(r, 0.0), q]];
        m = mat_mul(factor, m);
    }
    let prefactor = unit_root(config.total_x() as f64, cycles).conj()
        / config.transmission_product();
    Cascade { matrix: m, prefactor }
}

/// Transmission amplitude t_n = e^{-j sum phi} prod t_i / a_n, with a_n the
/// (1,1) cascade entry. |t_n| <= 1 for any lossless stack.
pub fn transmission_amplitude(config: &EtalonConfig, lambda: f64) -> Complex64 {
    let cascade = cascade_matrix(config, lambda);
    let cycles = config.unit_length / lambda;
    unit_root(config.total_x() as f64, cycles) * config.transmission_product()
        / cascade.matrix[0][0]
}

/// Closed-form denominator: one term per subset of cavities.
///
/// The empty set contributes (0, 1). A subset decomposes into maximal runs
/// of consecutive cavity indices; a run spanning cavities i..=j contributes
/// the factor r_{i-1} * r_j. Terms with colliding exponent sums are merged
/// by coefficient addition.
pub fn denominator_terms(config: &EtalonConfig) -> SparsePoly {
    let n = config.cavity_count();
    let mut raw = Vec::with_capacity(1 << n);
    raw.push((0u64, 1.0f64));
    for mask in 1u32..(1u32 << n) {
        let mut exponent = 0u64;
        let mut coeff = 1.0f64;
        let mut i = 0usize;
        while i < n {
            if mask & (1 << i) != 0 {
                let run_start = i; // cavity run_start+1 .. i (1-based)
                while i < n && mask & (1 << i) != 0 {
                    exponent += 2 * config.x[i];
                    i += 1;
                }
                coeff *= config.reflectors[run_start].amplitude_r()
                    * config.reflectors[i].amplitude_r();
            } else {
                i += 1;
            }
        }
        raw.push((exponent, coeff));
    }
    SparsePoly::from_terms(raw)
}

/// Closed-form z-domain transfer function: single-delay numerator over the
/// power-set denominator.
pub fn z_transfer_function(config: &EtalonConfig) -> RationalTF {
    let numerator =
        SparsePoly::from_terms(vec![(config.total_x(), config.transmission_product())]);
    RationalTF::Structured {
        numerator,
        denominator: denominator_terms(config),
        unit_length: config.unit_length,
    }
}

/// Closed-form intensity profile of a config over a grid.
pub fn transmission_profile(config: &EtalonConfig, grid: &SpectralGrid) -> TransmissionProfile {
    z_transfer_function(config).intensity_profile(grid)
}

/// Stopband envelope: the product of each cavity's standalone Airy
/// transmission, every factor normalized to unit peak.
///
/// The shared reflectors couple adjacent cavities, and near-coincident
/// resonances of the coupled response split into narrow multiplets whose
/// outer members straddle the comb positions. A rejection figure read off
/// the full coupled profile therefore reports those split members of the
/// retained peak as if they were spurious sidebands. The per-cavity product
/// instead tracks how far each suppressed comb peak is pushed down by the
/// other cavities, which is the quantity all peak-rejection figures in this
/// crate are measured on.
pub fn cavity_envelope_profile(
    config: &EtalonConfig,
    grid: &SpectralGrid,
) -> TransmissionProfile {
    let rs = config.reflectors();
    let intensity: Vec<f64> = grid
        .wavelengths()
        .iter()
        .map(|&lambda| {
            let cycles = config.unit_length() / lambda;
            let mut acc = 1.0;
            for (m, &xm) in config.x().iter().enumerate() {
                let rr = rs[m].amplitude_r() * rs[m + 1].amplitude_r();
                let denom = (1.0 + rr * unit_root(2.0 * xm as f64, cycles)).norm_sqr();
                acc *= (1.0 - rr) * (1.0 - rr) / denom;
            }
            acc
        })
        .collect();
    TransmissionProfile::new(grid.clone(), intensity).normalized()
}
