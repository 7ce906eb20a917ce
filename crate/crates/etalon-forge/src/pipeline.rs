//! Command pipelines behind the CLI: simulate, target, estimate, synthesize,
//! verify. Each command is deterministic; identical config and inputs give
//! byte-identical artifacts.

use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{self, EtalonConfig, Reflector};
use crate::plot;
use crate::spectral::{self, TransmissionProfile};
use crate::synth::{self, SynthContext, SynthesisCandidate};
use crate::sysid;
use crate::target;

/// Terminal state of a command that can finish without meeting its goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandOutcome {
    Done,
    /// Synthesis exhausted its reflector inventory or stage list with the
    /// best PR still above the goal; best-effort artifacts were written.
    GoalUnmet,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_csv(path: &Path, profile: &TransmissionProfile) -> Result<()> {
    let file = File::create(path)?;
    spectral::write_profile_csv(profile, BufWriter::new(file))
}

fn maybe_plot(path: &Path, profile: &TransmissionProfile, title: &str, plot: bool) -> Result<()> {
    if plot {
        let file = File::create(path)?;
        plot::write_profile_svg(profile, title, BufWriter::new(file))?;
    }
    Ok(())
}

fn base_profile(cfg: &RunConfig) -> Result<TransmissionProfile> {
    let base = cfg.base_config()?;
    let grid = cfg.make_grid()?;
    Ok(model::transmission_profile(&base, &grid))
}

fn target_profile(cfg: &RunConfig) -> Result<TransmissionProfile> {
    let base = base_profile(cfg)?;
    target::enhance_fsr_target(&base, cfg.target.factor, cfg.target.mask_floor_db)
}

/// Simulate the configured etalon and write its raw transmission profile.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path, plot: bool) -> Result<()> {
    ensure_dir(out)?;
    let profile = base_profile(cfg)?;
    write_csv(&out.join("profile.csv"), &profile)?;
    maybe_plot(&out.join("profile.svg"), &profile, "transmission profile", plot)?;
    Ok(())
}

/// Build and write the desired FSR-enhanced profile T_d.
pub fn cmd_target(cfg: &RunConfig, out: &Path, plot: bool) -> Result<()> {
    ensure_dir(out)?;
    let td = target_profile(cfg)?;
    write_csv(&out.join("target.csv"), &td)?;
    maybe_plot(&out.join("target.svg"), &td, "desired profile", plot)?;
    Ok(())
}

fn load_or_build_target(cfg: &RunConfig, out: &Path) -> Result<TransmissionProfile> {
    let path = out.join("target.csv");
    if path.exists() {
        let file = File::open(&path)?;
        spectral::read_profile_csv(BufReader::new(file))
    } else {
        let td = target_profile(cfg)?;
        write_csv(&path, &td)?;
        Ok(td)
    }
}

/// Run the identification order sweep against the target profile and write
/// the (order, fit_percent, mse) curve.
pub fn cmd_estimate(cfg: &RunConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let td = load_or_build_target(cfg, out)?;
    if td.max_intensity() - td.intensity().iter().cloned().fold(f64::INFINITY, f64::min) <= 0.0 {
        return Err(Error::Domain("target profile is constant; nothing to identify".into()));
    }
    let response = sysid::complexify_target(&td, cfg.unit_length());
    let sweep = sysid::order_sweep(&response, &cfg.sysid.orders, &cfg.sysid.fit_options())?;
    let file = File::create(out.join("estimate.csv"))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "order,fit_percent,mse")?;
    let mut wrote = 0usize;
    let mut first_error = None;
    for outcome in &sweep.outcomes {
        match &outcome.result {
            Ok((_, report)) => {
                writeln!(
                    w,
                    "{},{:.6},{:.11e}",
                    report.order, report.fit_percent, report.mse
                )?;
                wrote += 1;
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(format!("order {}: {e}", outcome.order));
                }
            }
        }
    }
    w.flush()?;
    if wrote == 0 {
        return Err(Error::Domain(
            first_error.unwrap_or_else(|| "every sweep order failed".into()),
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct StageSummary {
    cavities: usize,
    reflectivities: Vec<f64>,
    candidates: usize,
    best_x: Vec<u64>,
    best_pr_db: f64,
    best_mse_vs_estimate: f64,
    best_mse_vs_target: f64,
}

#[derive(Debug, Serialize)]
struct SynthesisSummary {
    goal_met: bool,
    pr_goal_db: f64,
    estimate_order: usize,
    stages: Vec<StageSummary>,
}

/// The Fig.-2 style loop: scan lengths per stage, escalate the cavity count
/// while the best PR misses the goal and reflectors remain.
pub fn cmd_synthesize(cfg: &RunConfig, out: &Path, plot: bool) -> Result<CommandOutcome> {
    let synth_cfg = cfg
        .synth
        .as_ref()
        .ok_or_else(|| Error::Config("cmd synthesize requires a [synth] section".into()))?;
    if synth_cfg.stages.is_empty() {
        return Err(Error::Config("synth needs at least one [[synth.stage]]".into()));
    }
    ensure_dir(out)?;
    let ranking = cfg.ranking_key()?;
    let td = target_profile(cfg)?;
    write_csv(&out.join("target.csv"), &td)?;

    let estimate = if synth_cfg.estimate_order > 0 {
        let response = sysid::complexify_target(&td, cfg.unit_length());
        let (model, _) =
            sysid::fit_rational(&response, synth_cfg.estimate_order, &cfg.sysid.fit_options())?;
        let intensity: Vec<f64> = td
            .grid()
            .wavelengths()
            .iter()
            .map(|&l| model.intensity_at(l))
            .collect();
        TransmissionProfile::new(td.grid().clone(), intensity).normalized()
    } else {
        td.clone()
    };

    let center = td.grid().center();
    let pr_window = match synth_cfg.pr_window_pm {
        Some(pm) => (center - 0.5 * pm * 1e-12, center + 0.5 * pm * 1e-12),
        None => (
            td.grid().wavelengths()[0],
            *td.grid().wavelengths().last().unwrap(),
        ),
    };

    let mut stack = cfg.reflectors()?;
    let mut inventory = cfg.inventory()?;
    let mut stages: Vec<StageSummary> = Vec::new();
    let mut goal_met = false;
    let mut best_overall: Option<SynthesisCandidate> = None;

    for (idx, stage) in synth_cfg.stages.iter().enumerate() {
        let spec = stage.to_spec(ranking)?;
        if spec.ranges.len() + 1 != stack.len() {
            return Err(Error::Config(format!(
                "synth.stage {} scans {} cavities but the current stack has {} reflectors",
                idx + 1,
                spec.ranges.len(),
                stack.len()
            )));
        }
        let ctx = SynthContext {
            reflectors: &stack,
            target: &td,
            estimate: &estimate,
            unit_length: cfg.unit_length(),
            lambda0: cfg.lambda0(),
            group_index: cfg.etalon.group_index,
            pr_window,
        };
        let ranked = synth::search_lengths(&spec, &ctx)?;
        let file = File::create(out.join(format!("candidates_stage{}.csv", idx + 1)))?;
        synth::write_candidates_csv(&ranked, BufWriter::new(file))?;
        let best = ranked
            .first()
            .ok_or_else(|| Error::Config("stage scan produced no candidates".into()))?
            .clone();
        stages.push(StageSummary {
            cavities: spec.ranges.len(),
            reflectivities: stack.iter().map(Reflector::power_reflectivity).collect(),
            candidates: ranked.len(),
            best_x: best.x.clone(),
            best_pr_db: best.pr_db,
            best_mse_vs_estimate: best.mse_vs_estimate,
            best_mse_vs_target: best.mse_vs_target,
        });
        let improved = best_overall
            .as_ref()
            .map_or(true, |cur| best.pr_db < cur.pr_db);
        if improved {
            best_overall = Some(best.clone());
        }
        if best.pr_db <= synth_cfg.pr_goal_db {
            goal_met = true;
            break;
        }
        if idx + 1 < synth_cfg.stages.len() {
            let (next_stack, rest) = synth::escalate(&stack, &inventory)?;
            stack = next_stack;
            inventory = rest;
        }
    }

    if let Some(best) = &best_overall {
        let design = EtalonConfig::new(
            stages
                .iter()
                .rev()
                .find(|s| s.best_x == best.x)
                .map(|s| {
                    s.reflectivities
                        .iter()
                        .map(|&r| Reflector::from_power_reflectivity(r).unwrap())
                        .collect::<Vec<_>>()
                })
                .unwrap_or_else(|| stack.clone()),
            best.x.clone(),
            cfg.unit_length(),
            cfg.lambda0(),
            cfg.etalon.group_index,
        )?;
        let profile = model::transmission_profile(&design, td.grid()).normalized();
        write_csv(&out.join("design.csv"), &profile)?;
        maybe_plot(&out.join("design.svg"), &profile, "synthesized design", plot)?;
    }

    let summary = SynthesisSummary {
        goal_met,
        pr_goal_db: synth_cfg.pr_goal_db,
        estimate_order: synth_cfg.estimate_order,
        stages,
    };
    let file = File::create(out.join("summary.json"))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &summary)
        .map_err(|e| Error::Domain(format!("summary serialization failed: {e}")))?;
    writeln!(w)?;
    w.flush()?;

    Ok(if goal_met { CommandOutcome::Done } else { CommandOutcome::GoalUnmet })
}

/// Metrics reported by `cmd_verify`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyMetrics {
    pub fsr_pm: f64,
    pub pr_db: f64,
    pub peaks: usize,
    pub mse_vs_target: f64,
}

fn design_x_from_csv(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read design csv {}: {e}", path.display())))?;
    design_x_from_text(&text)
}

/// Parse the length vector from the top row of a ranked-candidates CSV:
/// the leading `x1..xn` header columns name the fields to read.
pub fn design_x_from_text(text: &str) -> Result<Vec<u64>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Csv("design csv is empty".into()))?;
    let n = header
        .split(',')
        .take_while(|col| {
            col.starts_with('x') && col[1..].chars().all(|c| c.is_ascii_digit())
        })
        .count();
    if n == 0 {
        return Err(Error::Csv("design csv header has no x columns".into()));
    }
    let row = lines
        .next()
        .ok_or_else(|| Error::Csv("design csv has no data rows".into()))?;
    row.split(',')
        .take(n)
        .map(|v| {
            v.trim()
                .parse::<u64>()
                .map_err(|e| Error::Csv(format!("bad length value {v:?}: {e}")))
        })
        .collect()
}

/// Simulate a design over three enhancement windows and report FSR, PR,
/// retained peak count, and MSE against the desired profile.
pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<VerifyMetrics> {
    ensure_dir(out)?;
    let verify = cfg.verify.as_ref();
    let design_x = if let Some(x) = verify.and_then(|v| v.x.clone()) {
        x
    } else if let Some(path) = verify.and_then(|v| v.design_csv.clone()) {
        design_x_from_csv(Path::new(&path))?
    } else {
        cfg.etalon
            .x
            .clone()
            .ok_or_else(|| Error::Config("verify needs verify.x, verify.design_csv, or etalon.x".into()))?
    };
    let design_reflectors = match verify.and_then(|v| v.reflectivities.clone()) {
        Some(rs) => rs
            .iter()
            .map(|&r| {
                Reflector::from_power_reflectivity(r).map_err(|e| Error::Config(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?,
        None => {
            let rs = cfg.reflectors()?;
            if rs.len() != design_x.len() + 1 {
                return Err(Error::Config(format!(
                    "design has {} cavities but etalon.reflectivities has {} entries; \
                     set verify.reflectivities",
                    design_x.len(),
                    rs.len()
                )));
            }
            rs
        }
    };
    let design = EtalonConfig::new(
        design_reflectors,
        design_x,
        cfg.unit_length(),
        cfg.lambda0(),
        cfg.etalon.group_index,
    )
    .map_err(|e| Error::Config(e.to_string()))?;

    let base = base_profile(cfg)?.normalized();
    let base_fsr = spectral::measure_fsr(&base)?;
    let window_span = cfg.target.factor as f64 * base_fsr;
    let td = target::enhance_fsr_target(&base, cfg.target.factor, cfg.target.mask_floor_db)?;

    let wide_grid = spectral::make_grid(cfg.lambda0(), 3.0 * window_span, 3 * cfg.grid.count)?;
    let wide = model::transmission_profile(&design, &wide_grid).normalized();
    let peaks = spectral::find_peaks(&wide, spectral::MAIN_PEAK_FLOOR);
    let fsr = spectral::measure_fsr(&wide)?;
    let center = wide.grid().center();
    let envelope = model::cavity_envelope_profile(&design, &wide_grid);
    let pr = spectral::peak_rejection(
        &envelope,
        (center - 0.5 * window_span, center + 0.5 * window_span),
    )?;
    let on_target_grid = model::transmission_profile(&design, td.grid()).normalized();
    let mse = spectral::mse(&on_target_grid, &td)?;

    let metrics = VerifyMetrics { fsr_pm: fsr * 1e12, pr_db: pr, peaks: peaks.len(), mse_vs_target: mse };
    let file = File::create(out.join("metrics.json"))?;
    let mut w = BufWriter::new(file);
    write_metrics_json(&metrics, &mut w)?;
    w.flush()?;
    Ok(metrics)
}

/// Fixed-key JSON with an explicit "-inf" encoding for the PR sentinel.
pub fn write_metrics_json<W: Write>(metrics: &VerifyMetrics, mut w: W) -> Result<()> {
    writeln!(w, "{{")?;
    writeln!(w, "  \"fsr_pm\": {:.6},", metrics.fsr_pm)?;
    if metrics.pr_db == f64::NEG_INFINITY {
        writeln!(w, "  \"pr_db\": \"-inf\",")?;
    } else {
        writeln!(w, "  \"pr_db\": {:.4},", metrics.pr_db)?;
    }
    writeln!(w, "  \"peaks\": {},", metrics.peaks)?;
    writeln!(w, "  \"mse_vs_target\": {:.11e}", metrics.mse_vs_target)?;
    writeln!(w, "}}")?;
    Ok(())
}

/// Output directory for a run: CLI override, else the config's output.dir
/// resolved next to nothing in particular (relative to the working dir).
pub fn resolve_out_dir(cfg: &RunConfig, cli_out: Option<&Path>) -> PathBuf {
    match cli_out {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(&cfg.output.dir),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    const BASE: &str = r#"
[etalon]
reflectivities = [0.87, 0.99, 0.91]
x = [90, 90]

[grid]
span_pm = 33.6
count = 4096
"#;

    #[test]
    fn simulate_writes_profile_csv() {
        let cfg = RunConfig::from_str(BASE).unwrap();
        let dir = tempdir().unwrap();
        cmd_simulate(&cfg, dir.path(), true).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
        assert!(csv.starts_with("wavelength_nm,intensity"));
        assert_eq!(csv.lines().count(), 4097);
        assert!(dir.path().join("profile.svg").exists());
    }

    #[test]
    fn target_then_estimate_reuses_csv() {
        let mut text = String::from(BASE);
        text.push_str("\n[grid]\n");
        // shrink the run for test speed
        let cfg = RunConfig::from_str(BASE).unwrap();
        let dir = tempdir().unwrap();
        cmd_target(&cfg, dir.path(), false).unwrap();
        assert!(dir.path().join("target.csv").exists());
        let mut small = cfg.clone();
        small.sysid.orders = vec![4, 8];
        cmd_estimate(&small, dir.path()).unwrap();
        let est = std::fs::read_to_string(dir.path().join("estimate.csv")).unwrap();
        assert!(est.starts_with("order,fit_percent,mse"));
        assert_eq!(est.lines().count(), 3);
        drop(text);
    }

    #[test]
    fn verify_reports_base_comb_fsr() {
        let cfg = RunConfig::from_str(BASE).unwrap();
        let dir = tempdir().unwrap();
        let metrics = cmd_verify(&cfg, dir.path()).unwrap();
        // base comb verified against itself: retained spacing = base FSR
        assert!((metrics.fsr_pm - 1.344).abs() < 0.05, "fsr {}", metrics.fsr_pm);
        assert!(metrics.peaks >= 40);
        assert!(dir.path().join("metrics.json").exists());
    }

    #[test]
    fn synthesize_requires_synth_section() {
        let cfg = RunConfig::from_str(BASE).unwrap();
        let dir = tempdir().unwrap();
        assert!(matches!(
            cmd_synthesize(&cfg, dir.path(), false),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn design_csv_top_row_parsing() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("design.csv");
        std::fs::write(
            &path,
            "x1,x2,mse_vs_estimate,mse_vs_target,l1_cm,l2_cm,pr_db\n\
             90,66,1.0e-7,2.0e-7,62.07,45.52,-17.75\n",
        )
        .unwrap();
        assert_eq!(design_x_from_csv(&path).unwrap(), vec![90, 66]);
    }
}
