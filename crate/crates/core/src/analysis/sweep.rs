//! Simulated interference sweeps: one run per (basis, angle) setting.

use crate::analysis::report::{experiment_report, BasisCurve, ExperimentReport};
use crate::analysis::visibility::fit_visibility;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::physics::{AnalyzerSetting, Basis, CoincidenceResult};
use crate::sim::simulate;
use crate::tagproc::{count_coincidences_with, CoincidenceOptions};

#[derive(Debug, Clone)]
pub struct CurvePoints {
    pub basis: Basis,
    pub angles_deg: Vec<f64>,
    pub results: Vec<CoincidenceResult>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub curves: Vec<CurvePoints>,
    pub fits: Vec<BasisCurve>,
    /// Present when the sweep includes the H and D curves.
    pub report: Option<ExperimentReport>,
}

/// Angles `0, step, ..., 180`.
pub fn angle_grid(step_deg: f64) -> Result<Vec<f64>> {
    let n = 180.0 / step_deg;
    if !(step_deg > 0.0) || (n - n.round()).abs() > 1e-9 {
        return Err(Error::invalid(
            "step_deg",
            format!("{step_deg} must divide 180"),
        ));
    }
    Ok((0..=n.round() as usize)
        .map(|k| k as f64 * step_deg)
        .collect())
}

/// Fixes the signal analyzer in each basis, rotates the idler analyzer
/// through `angles_deg`, simulates and counts each setting, fits each curve
/// and summarizes. Run `k` uses seed `cfg.seed + k`.
pub fn visibility_sweep(
    cfg: &ExperimentConfig,
    bases: &[Basis],
    angles_deg: &[f64],
    exec: Execution,
) -> Result<SweepResult> {
    let delay = cfg.expected_delay_ps();
    let opts = CoincidenceOptions {
        accidental_offsets: vec![cfg.accidental_offset()],
        integration_s: Some(cfg.duration_s),
        exec,
    };
    let mut curves = Vec::new();
    let mut fits = Vec::new();
    let mut run = 0u64;
    for &basis in bases {
        let mut results = Vec::with_capacity(angles_deg.len());
        for &angle in angles_deg {
            let mut c = cfg.clone();
            c.analyzers.signal = AnalyzerSetting::basis(basis);
            c.analyzers.idler = AnalyzerSetting::free(angle);
            c.seed = cfg.seed.wrapping_add(run);
            run += 1;
            let out = simulate(&c, exec)?;
            results.push(count_coincidences_with(
                &out.signal,
                &out.idler,
                delay,
                c.window_ps,
                &opts,
            )?);
        }
        let counts: Vec<f64> = results.iter().map(|r| r.coincidences as f64).collect();
        fits.push(BasisCurve {
            basis,
            fit: fit_visibility(angles_deg, &counts)?,
            integration_s: cfg.duration_s,
        });
        curves.push(CurvePoints {
            basis,
            angles_deg: angles_deg.to_vec(),
            results,
        });
    }
    let best = curves
        .iter()
        .flat_map(|c| c.results.iter())
        .max_by_key(|r| r.coincidences)
        .cloned();
    let has = |b: Basis| fits.iter().any(|f| f.basis == b);
    let report = if has(Basis::H) && has(Basis::D) {
        Some(experiment_report(&fits, best.as_ref())?)
    } else {
        None
    };
    Ok(SweepResult {
        curves,
        fits,
        report,
    })
}

/// Fig. 2-style plot data: one row per angle, one column per basis.
pub fn write_curves_csv<W: std::io::Write>(
    mut out: W,
    curves: &[CurvePoints],
) -> std::io::Result<()> {
    write!(out, "angle_deg")?;
    for c in curves {
        write!(out, ",{}", c.basis)?;
    }
    writeln!(out)?;
    let Some(first) = curves.first() else {
        return Ok(());
    };
    for (k, a) in first.angles_deg.iter().enumerate() {
        write!(out, "{a}")?;
        for c in curves {
            write!(out, ",{}", c.results[k].coincidences)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
