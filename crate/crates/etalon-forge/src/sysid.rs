//! Discrete rational system identification on a unit-circle arc.
//!
//! The target intensity profile is complexified with a minimum-phase
//! reconstruction, then fit by iterative pole relocation: residues of a
//! scaling function are solved by linear least squares, its zeros become the
//! next pole set, and the loop stops when poles settle. The arc coordinate
//! is recentred on the window midpoint so the huge absolute z-phase of a
//! narrow optical band never enters the numerics.

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigVals, Solve};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectral::TransmissionProfile;

/// Amplitude floor applied before taking logs.
pub const AMPLITUDE_FLOOR: f64 = 1e-8;

/// Complex response samples on a recentred unit-circle arc.
///
/// `delta_theta[k]` is the phase offset of sample k from the reference
/// wavelength: 2 pi * unit_length * (1/lambda_k - 1/lambda_ref). The arc
/// point is zeta_k = exp(j delta_theta_k).
#[derive(Debug, Clone)]
pub struct ComplexResponse {
    delta_theta: Vec<f64>,
    samples: Vec<Complex64>,
    unit_length: f64,
    lambda_ref: f64,
}

impl ComplexResponse {
    pub fn new(
        delta_theta: Vec<f64>,
        samples: Vec<Complex64>,
        unit_length: f64,
        lambda_ref: f64,
    ) -> Self {
        assert_eq!(delta_theta.len(), samples.len());
        Self { delta_theta, samples, unit_length, lambda_ref }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn delta_theta(&self) -> &[f64] {
        &self.delta_theta
    }

    pub fn unit_length(&self) -> f64 {
        self.unit_length
    }

    pub fn lambda_ref(&self) -> f64 {
        self.lambda_ref
    }

    /// Arc points zeta_k = exp(j delta_theta_k). The coordinate is a rotated
    /// copy of z itself, so physically stable poles stay strictly inside the
    /// unit circle in zeta as well.
    pub fn zeta(&self) -> Vec<Complex64> {
        self.delta_theta
            .iter()
            .map(|&d| Complex64::from_polar(1.0, d))
            .collect()
    }

    /// Arc offset for a wavelength relative to the stored reference.
    pub fn arc_offset(unit_length: f64, lambda_ref: f64, lambda: f64) -> f64 {
        2.0 * std::f64::consts::PI * unit_length * (lambda_ref - lambda) / (lambda * lambda_ref)
    }
}

/// Pair an intensity-only target with a minimum-phase reconstruction.
pub fn complexify_target(profile: &TransmissionProfile, unit_length: f64) -> ComplexResponse {
    let lambda_ref = profile.grid().center();
    let delta_theta: Vec<f64> = profile
        .grid()
        .wavelengths()
        .iter()
        .map(|&l| ComplexResponse::arc_offset(unit_length, lambda_ref, l))
        .collect();
    let amplitude: Vec<f64> = profile
        .intensity()
        .iter()
        .map(|&i| i.max(0.0).sqrt().max(AMPLITUDE_FLOOR))
        .collect();
    // the cepstral reconstruction works on an ascending arc-frequency axis,
    // which is descending wavelength order
    let log_amp: Vec<f64> = amplitude.iter().rev().map(|a| a.ln()).collect();
    let mut phase = minimum_phase(&log_amp);
    phase.reverse();
    let samples = amplitude
        .iter()
        .zip(&phase)
        .map(|(&a, &p)| Complex64::from_polar(a, p))
        .collect();
    ComplexResponse::new(delta_theta, samples, unit_length, lambda_ref)
}

/// Minimum phase of a log-magnitude sequence via the folded real cepstrum,
/// treating the window as one period. Edges of the log-magnitude are tapered
/// toward the straight line between the endpoints to soften the derivative
/// jump introduced by the even mirroring.
fn minimum_phase(log_amp: &[f64]) -> Vec<f64> {
    let n = log_amp.len();
    if n < 4 {
        return vec![0.0; n];
    }
    let taper = (n / 20).max(2).min(n / 2);
    let l0 = log_amp[0];
    let l1 = log_amp[n - 1];
    let tapered: Vec<f64> = log_amp
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let lin = l0 + (l1 - l0) * k as f64 / (n - 1) as f64;
            let edge = k.min(n - 1 - k);
            let w = if edge >= taper {
                1.0
            } else {
                0.5 * (1.0 - (std::f64::consts::PI * edge as f64 / taper as f64).cos())
            };
            lin + w * (v - lin)
        })
        .collect();

    let m = 2 * n - 2;
    let mut buf: Vec<Complex64> = (0..m)
        .map(|k| {
            let idx = if k < n { k } else { m - k };
            Complex64::new(tapered[idx], 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    // fold the cepstrum onto its causal part
    let mut folded = vec![Complex64::new(0.0, 0.0); m];
    folded[0] = buf[0] * scale;
    for k in 1..n - 1 {
        folded[k] = buf[k] * (2.0 * scale);
    }
    folded[n - 1] = buf[n - 1] * scale;
    planner.plan_fft_forward(m).process(&mut folded);
    folded.iter().take(n).map(|c| c.im).collect()
}

/// Identification settings. Defaults match the bundled pipeline.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub pole_tolerance: f64,
    pub initial_radius: f64,
    /// Mirror the samples across the real axis and keep poles in exact
    /// conjugate pairs (real-coefficient constraint).
    pub enforce_conjugate: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 30,
            pole_tolerance: 1e-6,
            initial_radius: 0.98,
            enforce_conjugate: false,
        }
    }
}

/// Pole/residue model on the recentred arc:
/// f(zeta) = direct + sum_i residues[i] / (zeta - poles[i]).
#[derive(Debug, Clone)]
pub struct EstimatedModel {
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
    pub direct: Complex64,
    pub unit_length: f64,
    pub lambda_ref: f64,
    pub converged: bool,
}

impl EstimatedModel {
    pub fn order(&self) -> usize {
        self.poles.len()
    }

    pub fn response_at_zeta(&self, zeta: Complex64) -> Complex64 {
        self.direct
            + self
                .poles
                .iter()
                .zip(&self.residues)
                .map(|(&p, &r)| r / (zeta - p))
                .sum::<Complex64>()
    }

    pub fn intensity_at(&self, lambda: f64) -> f64 {
        let d = ComplexResponse::arc_offset(self.unit_length, self.lambda_ref, lambda);
        self.response_at_zeta(Complex64::from_polar(1.0, d)).norm_sqr()
    }

    pub fn max_pole_modulus(&self) -> f64 {
        self.poles.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// Per-order identification result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub order: usize,
    pub fit_percent: f64,
    pub mse: f64,
    pub iterations: usize,
    pub stabilized_pole_count: usize,
}

/// Fit a rational model of the given order by iterative pole relocation.
pub fn fit_rational(
    response: &ComplexResponse,
    order: usize,
    options: &FitOptions,
) -> Result<(EstimatedModel, FitReport)> {
    if order < 1 {
        return Err(Error::Domain("fit order must be >= 1".into()));
    }
    let m = response.len();
    if m < 4 * order {
        return Err(Error::Domain(format!(
            "need at least {} samples for order {order}, got {m}",
            4 * order
        )));
    }

    let mut zeta = response.zeta();
    let mut samples = response.samples().to_vec();
    if options.enforce_conjugate {
        // mirror across the real axis so the data set is conjugate-symmetric
        let mirrored_z: Vec<Complex64> = zeta.iter().map(|z| z.conj()).collect();
        let mirrored_f: Vec<Complex64> = samples.iter().map(|f| f.conj()).collect();
        zeta.extend(mirrored_z);
        samples.extend(mirrored_f);
    }

    let angles: Vec<f64> = zeta.iter().map(|z| z.arg()).collect();
    let amin = angles.iter().cloned().fold(f64::INFINITY, f64::min);
    let amax = angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut poles: Vec<Complex64> = (0..order)
        .map(|i| {
            let t = (i as f64 + 0.5) / order as f64;
            Complex64::from_polar(options.initial_radius, amin + t * (amax - amin))
        })
        .collect();
    if options.enforce_conjugate {
        poles = symmetrize_conjugate(poles);
    }

    let mut converged = false;
    let mut iterations = 0;
    let mut stabilized = 0;
    for iteration in 1..=options.max_iterations {
        iterations = iteration;
        let sigma_residues = relocation_stage(&zeta, &samples, &poles, iteration)?;
        let mut new_poles = sigma_zeros(&poles, &sigma_residues)?;
        stabilized = 0;
        for p in new_poles.iter_mut() {
            let norm = p.norm();
            if norm >= 1.0 {
                let target = (1.0 / norm).min(0.999_99);
                *p *= target / norm;
                stabilized += 1;
            }
        }
        if options.enforce_conjugate {
            new_poles = symmetrize_conjugate(new_poles);
        }
        new_poles.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let movement = new_poles
            .iter()
            .map(|p| {
                poles
                    .iter()
                    .map(|q| (p - q).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max);
        poles = new_poles;
        if movement < options.pole_tolerance {
            converged = true;
            break;
        }
    }

    let (residues, direct) = residue_stage(&zeta, &samples, &poles, iterations + 1)?;
    let model = EstimatedModel {
        poles,
        residues,
        direct,
        unit_length: response.unit_length(),
        lambda_ref: response.lambda_ref(),
        converged,
    };

    // score against |response|^2 on the original (unmirrored) samples
    let measured: Vec<f64> = response.samples().iter().map(|f| f.norm_sqr()).collect();
    let modeled: Vec<f64> = response
        .zeta()
        .iter()
        .map(|&z| model.response_at_zeta(z).norm_sqr())
        .collect();
    let (fit, mse) = intensity_fit(&measured, &modeled);
    let report = FitReport {
        order,
        fit_percent: fit,
        mse,
        iterations,
        stabilized_pole_count: stabilized,
    };
    Ok((model, report))
}

fn intensity_fit(measured: &[f64], modeled: &[f64]) -> (f64, f64) {
    let n = measured.len() as f64;
    let mse = measured
        .iter()
        .zip(modeled)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    let mean = measured.iter().sum::<f64>() / n;
    let denom: f64 = measured.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>().sqrt();
    let num: f64 = measured
        .iter()
        .zip(modeled)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale = measured.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    // a denominator at rounding-noise level means the signal is constant
    let fit = if denom > 1e-12 * scale {
        100.0 * (1.0 - num / denom)
    } else if num <= 1e-6 * scale {
        // constant target reproduced to least-squares accuracy
        100.0
    } else {
        0.0
    };
    (fit, mse)
}

/// Solve the relocation least squares for the scaling-function residues.
fn relocation_stage(
    zeta: &[Complex64],
    samples: &[Complex64],
    poles: &[Complex64],
    iteration: usize,
) -> Result<Vec<Complex64>> {
    let n = poles.len();
    let m = zeta.len();
    let mut a = Array2::<Complex64>::zeros((m, 2 * n + 1));
    let mut b = Array1::<Complex64>::zeros(m);
    for (k, (&z, &f)) in zeta.iter().zip(samples).enumerate() {
        for (i, &p) in poles.iter().enumerate() {
            let basis = Complex64::new(1.0, 0.0) / (z - p);
            a[[k, i]] = basis;
            a[[k, n + 1 + i]] = -f * basis;
        }
        a[[k, n]] = Complex64::new(1.0, 0.0);
        b[k] = f;
    }
    let x = scaled_normal_solve(a, b, iteration)?;
    Ok(x.iter().skip(n + 1).cloned().collect())
}

/// Final residue fit with the poles fixed.
fn residue_stage(
    zeta: &[Complex64],
    samples: &[Complex64],
    poles: &[Complex64],
    iteration: usize,
) -> Result<(Vec<Complex64>, Complex64)> {
    let n = poles.len();
    let m = zeta.len();
    let mut a = Array2::<Complex64>::zeros((m, n + 1));
    let mut b = Array1::<Complex64>::zeros(m);
    for (k, (&z, &f)) in zeta.iter().zip(samples).enumerate() {
        for (i, &p) in poles.iter().enumerate() {
            a[[k, i]] = Complex64::new(1.0, 0.0) / (z - p);
        }
        a[[k, n]] = Complex64::new(1.0, 0.0);
        b[k] = f;
    }
    let x = scaled_normal_solve(a, b, iteration)?;
    let residues = x.iter().take(n).cloned().collect();
    Ok((residues, x[n]))
}

/// Column-scaled normal-equation solve of an overdetermined system.
fn scaled_normal_solve(
    mut a: Array2<Complex64>,
    b: Array1<Complex64>,
    iteration: usize,
) -> Result<Array1<Complex64>> {
    let cols = a.ncols();
    let mut scales = vec![0.0f64; cols];
    for (j, col) in a.columns().into_iter().enumerate() {
        let norm = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::RankDeficient { iteration });
        }
        scales[j] = norm;
    }
    for (j, mut col) in a.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| v / scales[j]);
    }
    let ah = a.t().map(|v| v.conj());
    let gram = ah.dot(&a);
    let rhs = ah.dot(&b);
    let x = gram
        .solve_into(rhs)
        .map_err(|_| Error::RankDeficient { iteration })?;
    Ok(Array1::from_iter(
        x.iter().zip(&scales).map(|(v, s)| v / *s),
    ))
}

/// Zeros of sigma(zeta) = 1 + sum_i c_i / (zeta - p_i): eigenvalues of
/// diag(p) - 1 c^T.
fn sigma_zeros(poles: &[Complex64], sigma_residues: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = poles.len();
    let mut h = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            h[[i, j]] = -sigma_residues[j];
            if i == j {
                h[[i, j]] += poles[i];
            }
        }
    }
    let eigs = h
        .eigvals()
        .map_err(|e| Error::Domain(format!("eigenvalue solve failed: {e}")))?;
    Ok(eigs.to_vec())
}

/// Project a pole set onto exact conjugate pairs (nearly-real poles become
/// real). Pairing is greedy on conjugate distance.
fn symmetrize_conjugate(poles: Vec<Complex64>) -> Vec<Complex64> {
    let mut rest: Vec<Complex64> = poles;
    rest.sort_by(|a, b| b.im.abs().total_cmp(&a.im.abs()));
    let mut out = Vec::with_capacity(rest.len());
    while let Some(p) = rest.first().cloned() {
        rest.remove(0);
        if p.im.abs() < 1e-12 {
            out.push(Complex64::new(p.re, 0.0));
            continue;
        }
        let (best, _) = rest
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - p.conj()).norm().total_cmp(&(b.1 - p.conj()).norm()))
            .map(|(i, &q)| (Some(i), q))
            .unwrap_or((None, p));
        match best {
            Some(i) => {
                let q = rest.remove(i);
                let w = 0.5 * (p + q.conj());
                out.push(w);
                out.push(w.conj());
            }
            None => out.push(Complex64::new(p.re, 0.0)),
        }
    }
    out
}

/// Outcome of fitting one order within a sweep.
#[derive(Debug)]
pub struct OrderOutcome {
    pub order: usize,
    pub result: Result<(EstimatedModel, FitReport)>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub outcomes: Vec<OrderOutcome>,
    /// Smallest order whose fit percentage is within 0.01 points of the best.
    pub selected: Option<usize>,
}

impl SweepOutcome {
    pub fn report(&self, order: usize) -> Option<&FitReport> {
        self.outcomes.iter().find_map(|o| match &o.result {
            Ok((_, r)) if o.order == order => Some(r),
            _ => None,
        })
    }

    pub fn model(&self, order: usize) -> Option<&EstimatedModel> {
        self.outcomes.iter().find_map(|o| match &o.result {
            Ok((m, _)) if o.order == order => Some(m),
            _ => None,
        })
    }
}

/// Fit every order in ascending sequence, continuing past per-order errors.
pub fn order_sweep(
    response: &ComplexResponse,
    orders: &[usize],
    options: &FitOptions,
) -> Result<SweepOutcome> {
    if orders.is_empty() {
        return Err(Error::Domain("order sweep needs at least one order".into()));
    }
    if orders.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("sweep orders must be strictly ascending".into()));
    }
    let outcomes: Vec<OrderOutcome> = orders
        .iter()
        .map(|&order| OrderOutcome { order, result: fit_rational(response, order, options) })
        .collect();
    let best = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().map(|(_, r)| r.fit_percent))
        .fold(f64::NEG_INFINITY, f64::max);
    let selected = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().map(|(_, r)| (o.order, r.fit_percent)))
        .find(|&(_, fit)| fit >= best - 0.01)
        .map(|(order, _)| order);
    Ok(SweepOutcome { outcomes, selected })
}

/// Sample the exact complex response of an etalon on a grid (round-trip
/// checks and oracle fits; production targets go through
/// [`complexify_target`]).
pub fn response_from_config(
    config: &crate::model::EtalonConfig,
    grid: &crate::spectral::SpectralGrid,
) -> ComplexResponse {
    let lambda_ref = grid.center();
    let u = config.unit_length();
    let delta_theta: Vec<f64> = grid
        .wavelengths()
        .iter()
        .map(|&l| ComplexResponse::arc_offset(u, lambda_ref, l))
        .collect();
    // remove the common reference phase so samples live on the recentred arc
    let samples: Vec<Complex64> = grid
        .wavelengths()
        .iter()
        .map(|&l| crate::model::transmission_amplitude(config, l))
        .collect();
    ComplexResponse::new(delta_theta, samples, u, lambda_ref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EtalonConfig, Reflector};
    use crate::spectral::{make_grid, SpectralGrid, TransmissionProfile};

    fn arc_response(
        poles: &[Complex64],
        residues: &[Complex64],
        direct: Complex64,
        count: usize,
    ) -> ComplexResponse {
        let delta: Vec<f64> = (0..count)
            .map(|k| -0.3 + 0.6 * k as f64 / (count - 1) as f64)
            .collect();
        let samples: Vec<Complex64> = delta
            .iter()
            .map(|&d| {
                let z = Complex64::from_polar(1.0, d);
                direct
                    + poles
                        .iter()
                        .zip(residues)
                        .map(|(&p, &r)| r / (z - p))
                        .sum::<Complex64>()
            })
            .collect();
        ComplexResponse::new(delta, samples, 0.01, 1.55e-6)
    }

    #[test]
    fn constant_intensity_complexifies_to_unit_zero_phase() {
        let grid = make_grid(1.55e-6, 10e-12, 64).unwrap();
        let profile = TransmissionProfile::new(grid, vec![1.0; 64]);
        let resp = complexify_target(&profile, 0.01);
        for s in resp.samples() {
            assert!((s.norm() - 1.0).abs() < 1e-12);
            assert!(s.arg().abs() < 1e-9);
        }
    }

    #[test]
    fn complexify_preserves_magnitude_exactly() {
        let grid = make_grid(1.55e-6, 10e-12, 256).unwrap();
        let y: Vec<f64> = (0..256).map(|i| 0.5 + 0.4 * (i as f64 * 0.1).sin()).collect();
        let profile = TransmissionProfile::new(grid, y.clone());
        let resp = complexify_target(&profile, 0.01);
        for (s, i) in resp.samples().iter().zip(&y) {
            assert!((s.norm() - i.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn min_phase_matches_true_phase_up_to_linear_term() {
        // One exact profile period of a low-finesse single cavity; the true
        // response is delay * minimum-phase, so the reconstruction should
        // agree after removing a fitted linear phase.
        let r = Reflector::from_power_reflectivity(0.3).unwrap();
        let u = 0.04;
        let config = EtalonConfig::new(vec![r, r], vec![1], u, 1.55e-6, 1.45).unwrap();
        let lambda0 = 1.55e-6;
        let dnu = crate::spectral::SPEED_OF_LIGHT / (2.0 * u);
        let nu0 = crate::spectral::SPEED_OF_LIGHT / lambda0;
        let n = 512usize;
        let wavelengths: Vec<f64> = (0..n)
            .rev()
            .map(|k| {
                crate::spectral::SPEED_OF_LIGHT / (nu0 + dnu * k as f64 / n as f64)
            })
            .collect();
        let grid = SpectralGrid::from_wavelengths(wavelengths).unwrap();
        let exact = response_from_config(&config, &grid);
        let intensity: Vec<f64> = exact.samples().iter().map(|s| s.norm_sqr()).collect();
        let profile = TransmissionProfile::new(grid, intensity);
        let reconstructed = complexify_target(&profile, u);

        // phase difference, unwrapped, interior samples only
        let mut diff: Vec<f64> = Vec::new();
        for (a, b) in exact.samples().iter().zip(reconstructed.samples()) {
            diff.push((a / b).arg());
        }
        let mut unwrapped = vec![diff[0]];
        for k in 1..diff.len() {
            let mut d = diff[k] - diff[k - 1];
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            unwrapped.push(unwrapped[k - 1] + d);
        }
        let lo = n / 10;
        let hi = n - n / 10;
        let xs: Vec<f64> = (lo..hi).map(|k| k as f64).collect();
        let ys = &unwrapped[lo..hi];
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let slope = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (x - xm) * (y - ym))
            .sum::<f64>()
            / xs.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();
        let rms = (xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let fit = ym + slope * (x - xm);
                (y - fit) * (y - fit)
            })
            .sum::<f64>()
            / xs.len() as f64)
            .sqrt();
        assert!(rms < 0.05, "nonlinear phase residual {rms} rad");
    }

    #[test]
    fn exact_order_recovery() {
        let poles = [
            Complex64::from_polar(0.9, 0.1),
            Complex64::from_polar(0.85, -0.2),
            Complex64::new(0.7, 0.0),
            Complex64::from_polar(0.8, 0.5),
        ];
        let residues = [
            Complex64::new(0.2, 0.1),
            Complex64::new(-0.3, 0.05),
            Complex64::new(0.15, 0.0),
            Complex64::new(0.1, -0.2),
        ];
        let resp = arc_response(&poles, &residues, Complex64::new(0.3, 0.0), 240);
        let (model, report) = fit_rational(&resp, 4, &FitOptions::default()).unwrap();
        assert!(report.fit_percent >= 99.99, "fit {}", report.fit_percent);
        assert!(model.converged);
        for (z, f) in resp.zeta().iter().zip(resp.samples()) {
            assert!((model.response_at_zeta(*z) - f).norm() < 1e-6);
        }
    }

    #[test]
    fn underparameterized_fit_is_worse() {
        let poles = [Complex64::from_polar(0.95, 0.15), Complex64::from_polar(0.95, -0.15)];
        let residues = [Complex64::new(0.05, 0.0), Complex64::new(0.05, 0.0)];
        let resp = arc_response(&poles, &residues, Complex64::new(0.0, 0.0), 200);
        let opts = FitOptions::default();
        let (_, low) = fit_rational(&resp, 1, &opts).unwrap();
        let (_, high) = fit_rational(&resp, 4, &opts).unwrap();
        assert!(
            low.fit_percent < high.fit_percent - 1.0,
            "order 1 fit {} should trail order 4 fit {}",
            low.fit_percent,
            high.fit_percent
        );
    }

    #[test]
    fn poles_are_stable_and_runs_deterministic() {
        let poles = [Complex64::from_polar(0.97, 0.05), Complex64::from_polar(0.9, -0.3)];
        let residues = [Complex64::new(0.1, 0.02), Complex64::new(0.2, -0.1)];
        let resp = arc_response(&poles, &residues, Complex64::new(0.1, 0.0), 160);
        let opts = FitOptions::default();
        let (m1, r1) = fit_rational(&resp, 6, &opts).unwrap();
        let (m2, r2) = fit_rational(&resp, 6, &opts).unwrap();
        assert!(m1.max_pole_modulus() < 1.0);
        assert_eq!(r1, r2);
        for (a, b) in m1.poles.iter().zip(&m2.poles) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn conjugate_constraint_pairs_poles() {
        let poles = [Complex64::from_polar(0.9, 0.2), Complex64::from_polar(0.9, -0.2)];
        let residues = [Complex64::new(0.1, 0.05), Complex64::new(0.1, -0.05)];
        let resp = arc_response(&poles, &residues, Complex64::new(0.2, 0.0), 160);
        let opts = FitOptions { enforce_conjugate: true, ..FitOptions::default() };
        let (model, _) = fit_rational(&resp, 4, &opts).unwrap();
        let mut remaining = model.poles.clone();
        while let Some(p) = remaining.pop() {
            if p.im.abs() < 1e-12 {
                continue;
            }
            let idx = remaining
                .iter()
                .position(|q| (q - p.conj()).norm() < 1e-9)
                .expect("every complex pole must have a conjugate partner");
            remaining.remove(idx);
        }
    }

    #[test]
    fn round_trip_through_structured_model() {
        // sample the exact response of a structured etalon, fit at the full
        // z-domain order, compare magnitudes on the grid
        let rs: Vec<Reflector> = [0.6, 0.8, 0.7]
            .iter()
            .map(|&r| Reflector::from_power_reflectivity(r).unwrap())
            .collect();
        let config = EtalonConfig::new(rs, vec![5, 8], 0.01, 1.55e-6, 1.45).unwrap();
        // span one full profile period: exponent gcd 2 -> period u/1 in 1/lambda
        let lambda0 = 1.55e-6;
        // theta span of ~0.75 rad
        let span = 0.75 / (2.0 * std::f64::consts::PI) * lambda0 * lambda0 / 0.01;
        let grid = make_grid(lambda0, span, 512).unwrap();
        let resp = response_from_config(&config, &grid);
        let order = 2 * (5 + 8);
        let (model, report) = fit_rational(&resp, order, &FitOptions::default()).unwrap();
        let mut sq_sum = 0.0;
        for (z, f) in resp.zeta().iter().zip(resp.samples()) {
            let d = model.response_at_zeta(*z).norm() - f.norm();
            sq_sum += d * d;
        }
        let rms = (sq_sum / resp.len() as f64).sqrt();
        assert!(rms < 1e-6, "magnitude rms {rms}, fit {}", report.fit_percent);
    }

    #[test]
    fn sweep_selects_true_order() {
        let poles = [
            Complex64::from_polar(0.9, 0.1),
            Complex64::from_polar(0.9, -0.1),
            Complex64::from_polar(0.8, 0.4),
            Complex64::from_polar(0.8, -0.4),
        ];
        let residues = [
            Complex64::new(0.1, 0.0),
            Complex64::new(0.1, 0.0),
            Complex64::new(0.05, 0.02),
            Complex64::new(0.05, -0.02),
        ];
        let resp = arc_response(&poles, &residues, Complex64::new(0.3, 0.0), 260);
        let sweep = order_sweep(&resp, &[2, 4, 8], &FitOptions::default()).unwrap();
        assert_eq!(sweep.selected, Some(4));
    }

    #[test]
    fn sweep_handles_constant_response() {
        let delta: Vec<f64> = (0..64).map(|k| -0.2 + 0.4 * k as f64 / 63.0).collect();
        let samples = vec![Complex64::new(0.8, 0.0); 64];
        let resp = ComplexResponse::new(delta, samples, 0.01, 1.55e-6);
        let sweep = order_sweep(&resp, &[1], &FitOptions::default()).unwrap();
        let report = sweep.report(1).expect("order-1 fit should succeed");
        assert!((report.fit_percent - 100.0).abs() < 1e-6);
    }

    #[test]
    fn sweep_validates_order_list() {
        let resp = arc_response(
            &[Complex64::new(0.5, 0.0)],
            &[Complex64::new(0.1, 0.0)],
            Complex64::new(0.0, 0.0),
            64,
        );
        assert!(order_sweep(&resp, &[], &FitOptions::default()).is_err());
        assert!(order_sweep(&resp, &[4, 2], &FitOptions::default()).is_err());
    }
}
