//! Length-space synthesis: build structured candidate transfer functions from
//! fixed reflectivities and trial integer cavity lengths, score them against
//! the desired and estimated responses, scan the (tied) length grid, and
//! escalate the cavity count when the rejection goal is out of reach.

use rayon::prelude::*;
use std::cmp::Ordering;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{self, EtalonConfig, RationalTF, Reflector};
use crate::spectral::{self, TransmissionProfile};

/// Hard ceiling on the number of candidates a scan may enumerate.
pub const MAX_CANDIDATES: u128 = 10_000_000;

/// One scored length vector: a Tables 1-3 style row.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisCandidate {
    pub x: Vec<u64>,
    pub mse_vs_estimate: f64,
    pub mse_vs_target: f64,
    pub pr_db: f64,
    pub physical_lengths_cm: Vec<f64>,
    pub converged: bool,
}

/// Inclusive integer scan range for one cavity axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisRange {
    pub min: u64,
    pub max: u64,
    pub step: u64,
}

impl AxisRange {
    pub fn new(min: u64, max: u64, step: u64) -> Result<Self> {
        if min < 1 || step < 1 || max < min {
            return Err(Error::Domain(format!(
                "invalid axis range ({min}, {max}, {step}): need 1 <= min <= max and step >= 1"
            )));
        }
        Ok(Self { min, max, step })
    }

    pub fn count(&self) -> u128 {
        ((self.max - self.min) / self.step) as u128 + 1
    }

    pub fn values(&self) -> Vec<u64> {
        (self.min..=self.max).step_by(self.step as usize).collect()
    }
}

/// Candidate ordering for the ranked output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankingKey {
    /// Smallest MSE vs the estimate, then most negative PR, then
    /// lexicographic x.
    #[default]
    MseFirst,
    /// Most negative PR, then smallest MSE vs the estimate, then
    /// lexicographic x.
    PrFirst,
}

/// Length-scan description: per-axis ranges, tie pattern, ranking key.
///
/// The tie pattern is a partition of the axes; every axis in a class takes
/// the value of the class representative, so tied classes collapse the scan
/// dimension (the Tables 2-3 structure, e.g. x3 = x4).
#[derive(Debug, Clone)]
pub struct SearchSpec {
    pub ranges: Vec<AxisRange>,
    pub ties: Vec<Vec<usize>>,
    pub ranking: RankingKey,
}

impl SearchSpec {
    /// Untied scan over the given ranges with the default ranking.
    pub fn full(ranges: Vec<AxisRange>) -> Self {
        let ties = (0..ranges.len()).map(|i| vec![i]).collect();
        Self { ranges, ties, ranking: RankingKey::default() }
    }

    /// Tie classes, validated as a partition with per-class equal ranges.
    fn classes(&self) -> Result<Vec<Vec<usize>>> {
        let n = self.ranges.len();
        if n == 0 {
            return Err(Error::Domain("search spec has no axes".into()));
        }
        let mut classes = if self.ties.is_empty() {
            (0..n).map(|i| vec![i]).collect::<Vec<_>>()
        } else {
            self.ties.clone()
        };
        for class in classes.iter_mut() {
            class.sort_unstable();
        }
        classes.sort_by_key(|c| c.first().copied());
        let mut seen = vec![false; n];
        for class in &classes {
            if class.is_empty() {
                return Err(Error::Domain("tie pattern contains an empty class".into()));
            }
            for &axis in class {
                if axis >= n || seen[axis] {
                    return Err(Error::Domain(format!(
                        "tie pattern is not a partition of the {n} axes"
                    )));
                }
                seen[axis] = true;
                if self.ranges[axis] != self.ranges[class[0]] {
                    return Err(Error::Domain(format!(
                        "tied axes {} and {} have different scan ranges",
                        class[0], axis
                    )));
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Domain("tie pattern leaves axes uncovered".into()));
        }
        Ok(classes)
    }

    /// Candidate count after tie reduction.
    pub fn candidate_count(&self) -> Result<u128> {
        let classes = self.classes()?;
        let mut total: u128 = 1;
        for class in &classes {
            total = total.saturating_mul(self.ranges[class[0]].count());
        }
        Ok(total)
    }
}

/// Shared inputs for candidate scoring.
#[derive(Debug, Clone, Copy)]
pub struct SynthContext<'a> {
    pub reflectors: &'a [Reflector],
    pub target: &'a TransmissionProfile,
    pub estimate: &'a TransmissionProfile,
    pub unit_length: f64,
    pub lambda0: f64,
    pub group_index: f64,
    /// Wavelength window for the PR measurement.
    pub pr_window: (f64, f64),
}

/// The constrained structured transfer function for a trial length vector.
///
/// All denominator coefficients are fixed by the reflectivities: in a dense
/// coefficient vector only the power-set exponents are nonzero, and the
/// numerator is the single product-of-transmissions delay term. The result
/// does not depend on wavelength bookkeeping, only on reflectivities, x, and
/// the unit length.
pub fn structured_tf(reflectors: &[Reflector], x: &[u64], unit_length: f64) -> Result<RationalTF> {
    let config = EtalonConfig::new(
        reflectors.to_vec(),
        x.to_vec(),
        unit_length,
        1.55e-6,
        1.45,
    )?;
    Ok(model::z_transfer_function(&config))
}

/// Physical one-way cavity lengths in centimeters: l_m = x_m u / n_group.
pub fn lengths_from_x(x: &[u64], unit_length: f64, group_index: f64) -> Vec<f64> {
    x.iter()
        .map(|&xi| xi as f64 * unit_length / group_index * 100.0)
        .collect()
}

/// Score one trial length vector against the target and estimate profiles.
pub fn score_candidate(x: &[u64], ctx: &SynthContext) -> Result<SynthesisCandidate> {
    let config = EtalonConfig::new(
        ctx.reflectors.to_vec(),
        x.to_vec(),
        ctx.unit_length,
        ctx.lambda0,
        ctx.group_index,
    )?;
    let tf = model::z_transfer_function(&config);
    let profile = tf.intensity_profile(ctx.target.grid()).normalized();
    let mse_vs_target = spectral::mse(&profile, ctx.target)?;
    let mse_vs_estimate = spectral::mse(&profile, ctx.estimate)?;
    // Rejection is read off the stopband envelope rather than the coupled
    // profile; see model::cavity_envelope_profile for why.
    let envelope = model::cavity_envelope_profile(&config, ctx.target.grid());
    let pr_db = spectral::peak_rejection(&envelope, ctx.pr_window)?;
    Ok(SynthesisCandidate {
        x: x.to_vec(),
        mse_vs_estimate,
        mse_vs_target,
        pr_db,
        physical_lengths_cm: lengths_from_x(x, ctx.unit_length, ctx.group_index),
        converged: true,
    })
}

fn rank_cmp(a: &SynthesisCandidate, b: &SynthesisCandidate, key: RankingKey) -> Ordering {
    match key {
        RankingKey::MseFirst => a
            .mse_vs_estimate
            .total_cmp(&b.mse_vs_estimate)
            .then_with(|| a.pr_db.total_cmp(&b.pr_db))
            .then_with(|| a.x.cmp(&b.x)),
        RankingKey::PrFirst => a
            .pr_db
            .total_cmp(&b.pr_db)
            .then_with(|| a.mse_vs_estimate.total_cmp(&b.mse_vs_estimate))
            .then_with(|| a.x.cmp(&b.x)),
    }
}

/// Exhaustively score the tie-reduced length grid and return candidates in
/// rank order. Scoring is a pure function mapped in parallel with an ordered
/// reduction, so the output is identical for any thread count.
pub fn search_lengths(spec: &SearchSpec, ctx: &SynthContext) -> Result<Vec<SynthesisCandidate>> {
    if spec.ranges.len() + 1 != ctx.reflectors.len() {
        return Err(Error::Domain(format!(
            "scan has {} axes but the stack has {} reflectors (need axes + 1)",
            spec.ranges.len(),
            ctx.reflectors.len()
        )));
    }
    let classes = spec.classes()?;
    let total = spec.candidate_count()?;
    if total > MAX_CANDIDATES {
        return Err(Error::SearchSpaceTooLarge { candidates: total, limit: MAX_CANDIDATES });
    }
    let class_values: Vec<Vec<u64>> = classes
        .iter()
        .map(|c| spec.ranges[c[0]].values())
        .collect();
    let n = spec.ranges.len();

    let mut candidates: Vec<SynthesisCandidate> = (0..total as usize)
        .into_par_iter()
        .map(|linear| {
            let mut k = linear;
            let mut x = vec![0u64; n];
            for (class, values) in classes.iter().zip(&class_values).rev() {
                let v = values[k % values.len()];
                k /= values.len();
                for &axis in class {
                    x[axis] = v;
                }
            }
            score_candidate(&x, ctx)
        })
        .collect::<Result<_>>()?;
    candidates.sort_by(|a, b| rank_cmp(a, b, spec.ranking));
    Ok(candidates)
}

/// Add one cavity: insert the next inventory reflector at the middle of the
/// stack. Returns the new stack and the remaining inventory.
pub fn escalate(
    reflectors: &[Reflector],
    inventory: &[Reflector],
) -> Result<(Vec<Reflector>, Vec<Reflector>)> {
    let Some((next, rest)) = inventory.split_first() else {
        return Err(Error::OutOfReflectors);
    };
    let mut stack = reflectors.to_vec();
    let middle = (stack.len() + 1) / 2;
    stack.insert(middle, *next);
    Ok((stack, rest.to_vec()))
}

/// Serialize ranked candidates in the Tables 1-3 column layout:
/// x_1..x_n, mse_vs_estimate, mse_vs_target, l_1..l_n (cm, 2 decimals), PR.
pub fn write_candidates_csv<W: Write>(
    candidates: &[SynthesisCandidate],
    mut w: W,
) -> Result<()> {
    let n = candidates.first().map_or(0, |c| c.x.len());
    for i in 1..=n {
        write!(w, "x{i},")?;
    }
    write!(w, "mse_vs_estimate,mse_vs_target,")?;
    for i in 1..=n {
        write!(w, "l{i}_cm,")?;
    }
    writeln!(w, "pr_db")?;
    for c in candidates {
        for xi in &c.x {
            write!(w, "{xi},")?;
        }
        write!(w, "{:.11e},{:.11e},", c.mse_vs_estimate, c.mse_vs_target)?;
        for l in &c.physical_lengths_cm {
            write!(w, "{l:.2},")?;
        }
        if c.pr_db == f64::NEG_INFINITY {
            writeln!(w, "-inf")?;
        } else {
            writeln!(w, "{:.4}", c.pr_db)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    fn reflectors(rs: &[f64]) -> Vec<Reflector> {
        rs.iter()
            .map(|&r| Reflector::from_power_reflectivity(r).unwrap())
            .collect()
    }

    #[test]
    fn structured_tf_appendix_coefficients() {
        let rs = reflectors(&[0.87, 0.99, 0.91]);
        let tf = structured_tf(&rs, &[90, 1], 0.01).unwrap();
        let RationalTF::Structured { numerator, denominator, .. } = tf else {
            panic!("expected a structured transfer function");
        };
        let r0 = 0.87f64.sqrt();
        let r1 = 0.99f64.sqrt();
        let r2 = 0.91f64.sqrt();
        let exps: Vec<u64> = denominator.terms().iter().map(|t| t.0).collect();
        assert_eq!(exps, vec![0, 2, 180, 182]);
        assert!((denominator.coefficient(0) - 1.0).abs() < 1e-12);
        assert!((denominator.coefficient(2) - r1 * r2).abs() < 1e-12);
        assert!((denominator.coefficient(180) - r0 * r1).abs() < 1e-12);
        assert!((denominator.coefficient(182) - r0 * r2).abs() < 1e-12);
        assert_eq!(numerator.terms().len(), 1);
        assert_eq!(numerator.terms()[0].0, 91);
    }

    #[test]
    fn structured_tf_single_cavity_and_degree() {
        let rs = reflectors(&[0.5, 0.5]);
        let tf = structured_tf(&rs, &[1], 0.01).unwrap();
        let RationalTF::Structured { denominator, .. } = tf else {
            panic!("expected structured");
        };
        let exps: Vec<u64> = denominator.terms().iter().map(|t| t.0).collect();
        assert_eq!(exps, vec![0, 2]);

        let rs = reflectors(&[0.87, 0.99, 0.91]);
        let tf = structured_tf(&rs, &[90, 66], 0.01).unwrap();
        let RationalTF::Structured { denominator, .. } = tf else {
            panic!("expected structured");
        };
        assert_eq!(denominator.degree(), 312);
    }

    #[test]
    fn physical_length_table_values() {
        let round2 = |v: f64| (v * 100.0).round() / 100.0;
        let l = lengths_from_x(&[90, 66], 0.01, 1.45);
        assert_eq!(round2(l[0]), 62.07);
        assert_eq!(round2(l[1]), 45.52);
        let l = lengths_from_x(&[90], 0.01, 1.445);
        assert_eq!(round2(l[0]), 62.28);
    }

    #[test]
    fn escalate_inserts_in_the_middle() {
        let base = reflectors(&[0.87, 0.99, 0.91]);
        let inv = reflectors(&[0.99, 0.99]);
        let (three, rest) = escalate(&base, &inv).unwrap();
        let rs: Vec<f64> = three.iter().map(|r| r.power_reflectivity()).collect();
        assert_eq!(rs, vec![0.87, 0.99, 0.99, 0.91]);
        assert_eq!(rest.len(), 1);
        let (four, rest) = escalate(&three, &rest).unwrap();
        assert_eq!(four.len(), 5);
        assert_eq!(four[2].power_reflectivity(), 0.99);
        assert!(rest.is_empty());
        assert!(matches!(escalate(&four, &rest), Err(Error::OutOfReflectors)));
    }

    fn planted_context<'a>(
        rs: &'a [Reflector],
        target: &'a TransmissionProfile,
    ) -> SynthContext<'a> {
        let lo = target.grid().wavelengths()[0];
        let hi = *target.grid().wavelengths().last().unwrap();
        SynthContext {
            reflectors: rs,
            target,
            estimate: target,
            unit_length: 0.01,
            lambda0: 1.55e-6,
            group_index: 1.45,
            pr_window: (lo, hi),
        }
    }

    #[test]
    fn degenerate_range_yields_single_candidate() {
        let rs = reflectors(&[0.87, 0.99, 0.91]);
        let grid = make_grid(1.55e-6, 20e-12, 512).unwrap();
        let config =
            EtalonConfig::new(rs.clone(), vec![90, 66], 0.01, 1.55e-6, 1.45).unwrap();
        let target = model::transmission_profile(&config, &grid).normalized();
        let ctx = planted_context(&rs, &target);
        let spec = SearchSpec::full(vec![
            AxisRange::new(90, 90, 1).unwrap(),
            AxisRange::new(66, 66, 1).unwrap(),
        ]);
        let ranked = search_lengths(&spec, &ctx).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].x, vec![90, 66]);
        assert!(ranked[0].mse_vs_estimate < 1e-20);
    }

    #[test]
    fn plant_and_recover_two_cavities() {
        let rs = reflectors(&[0.6, 0.8, 0.7]);
        let grid = make_grid(1.55e-6, 20e-12, 1024).unwrap();
        let config = EtalonConfig::new(rs.clone(), vec![40, 23], 0.01, 1.55e-6, 1.45).unwrap();
        let target = model::transmission_profile(&config, &grid).normalized();
        let ctx = planted_context(&rs, &target);
        let spec = SearchSpec::full(vec![
            AxisRange::new(30, 50, 1).unwrap(),
            AxisRange::new(15, 30, 1).unwrap(),
        ]);
        let ranked = search_lengths(&spec, &ctx).unwrap();
        assert_eq!(ranked[0].x, vec![40, 23]);
        assert!(ranked[0].mse_vs_estimate < ranked[1].mse_vs_estimate);
    }

    #[test]
    fn tie_pattern_collapses_axes() {
        let rs = reflectors(&[0.6, 0.8, 0.8, 0.7]);
        let grid = make_grid(1.55e-6, 20e-12, 256).unwrap();
        let config =
            EtalonConfig::new(rs.clone(), vec![2, 3, 3], 0.01, 1.55e-6, 1.45).unwrap();
        let target = model::transmission_profile(&config, &grid).normalized();
        let ctx = planted_context(&rs, &target);
        let spec = SearchSpec {
            ranges: vec![
                AxisRange::new(1, 3, 1).unwrap(),
                AxisRange::new(1, 3, 1).unwrap(),
                AxisRange::new(1, 3, 1).unwrap(),
            ],
            ties: vec![vec![0], vec![1, 2]],
            ranking: RankingKey::MseFirst,
        };
        assert_eq!(spec.candidate_count().unwrap(), 9);
        let ranked = search_lengths(&spec, &ctx).unwrap();
        assert_eq!(ranked.len(), 9);
        assert!(ranked.iter().all(|c| c.x[1] == c.x[2]));
        assert_eq!(ranked[0].x, vec![2, 3, 3]);
    }

    #[test]
    fn search_is_thread_count_invariant() {
        let rs = reflectors(&[0.6, 0.8, 0.7]);
        let grid = make_grid(1.55e-6, 20e-12, 256).unwrap();
        let config = EtalonConfig::new(rs.clone(), vec![7, 5], 0.01, 1.55e-6, 1.45).unwrap();
        let target = model::transmission_profile(&config, &grid).normalized();
        let ctx = planted_context(&rs, &target);
        let spec = SearchSpec::full(vec![
            AxisRange::new(1, 12, 1).unwrap(),
            AxisRange::new(1, 12, 1).unwrap(),
        ]);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| search_lengths(&spec, &ctx).unwrap())
        };
        let single = run(1);
        let multi = run(4);
        assert_eq!(single.len(), multi.len());
        for (a, b) in single.iter().zip(&multi) {
            assert_eq!(a, b);
        }
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_candidates_csv(&single, &mut buf_a).unwrap();
        write_candidates_csv(&multi, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn oversize_scan_is_rejected() {
        let rs = reflectors(&[0.6, 0.8, 0.8, 0.8, 0.7]);
        let grid = make_grid(1.55e-6, 20e-12, 256).unwrap();
        let config =
            EtalonConfig::new(rs.clone(), vec![1, 1, 1, 1], 0.01, 1.55e-6, 1.45).unwrap();
        let target = model::transmission_profile(&config, &grid).normalized();
        let ctx = planted_context(&rs, &target);
        let spec = SearchSpec::full(vec![AxisRange::new(1, 100, 1).unwrap(); 4]);
        match search_lengths(&spec, &ctx) {
            Err(Error::SearchSpaceTooLarge { candidates, limit }) => {
                assert_eq!(candidates, 100_000_000);
                assert_eq!(limit, MAX_CANDIDATES);
            }
            other => panic!("expected SearchSpaceTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn invalid_tie_patterns_are_rejected() {
        let ranges = vec![AxisRange::new(1, 5, 1).unwrap(), AxisRange::new(1, 9, 1).unwrap()];
        let overlapping = SearchSpec {
            ranges: ranges.clone(),
            ties: vec![vec![0, 1], vec![1]],
            ranking: RankingKey::MseFirst,
        };
        assert!(overlapping.candidate_count().is_err());
        let mismatched = SearchSpec {
            ranges,
            ties: vec![vec![0, 1]],
            ranking: RankingKey::MseFirst,
        };
        assert!(mismatched.candidate_count().is_err());
    }
}
