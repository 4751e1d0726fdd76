use serde::Serialize;

use crate::analysis::visibility::VisibilityFit;
use crate::error::{Error, Result};
use crate::physics::{car_to_fidelity, fidelity_from_visibilities, Basis, CoincidenceResult};

/// One fitted interference curve with the signal analyzer fixed in `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCurve {
    pub basis: Basis,
    pub fit: VisibilityFit,
    /// Integration time of each angle setting, s.
    pub integration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub bases: Vec<String>,
    /// Detected pairs/s, twice the mean fitted peak coincidence rate.
    pub pair_rate_cps: f64,
    pub pair_rate_se: f64,
    pub v_hv: f64,
    pub v_da: f64,
    pub fidelity_visibility: f64,
    pub fidelity_visibility_se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub car: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub car_lower_bound: Option<bool>,
    /// `CAR / (CAR + 1)`; a separate estimator, never combined with the
    /// visibility-based fidelity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_car_bound: Option<f64>,
}

fn mean_se(fits: &[&BasisCurve], f: impl Fn(&BasisCurve) -> (f64, f64)) -> (f64, f64) {
    let n = fits.len() as f64;
    let (s, v) = fits.iter().fold((0.0, 0.0), |(s, v), c| {
        let (x, e) = f(c);
        (s + x, v + e * e)
    });
    (s / n, v.sqrt() / n)
}

pub fn experiment_report(
    curves: &[BasisCurve],
    car: Option<&CoincidenceResult>,
) -> Result<ExperimentReport> {
    let pick = |a: Basis, b: Basis| {
        curves
            .iter()
            .filter(|c| c.basis == a || c.basis == b)
            .collect::<Vec<_>>()
    };
    let hv = pick(Basis::H, Basis::V);
    let da = pick(Basis::D, Basis::A);
    if !curves.iter().any(|c| c.basis == Basis::H) {
        return Err(Error::InsufficientBases("H"));
    }
    if !curves.iter().any(|c| c.basis == Basis::D) {
        return Err(Error::InsufficientBases("D"));
    }
    let (v_hv, se_hv) = mean_se(&hv, |c| (c.fit.visibility, c.fit.visibility_se));
    let (v_da, se_da) = mean_se(&da, |c| (c.fit.visibility, c.fit.visibility_se));
    let all: Vec<&BasisCurve> = curves.iter().collect();
    let (peak_rate, peak_se) = mean_se(&all, |c| {
        (
            c.fit.peak() / c.integration_s,
            c.fit.peak_se() / c.integration_s,
        )
    });
    let fidelity = fidelity_from_visibilities(v_hv, v_da)?;
    // dF/dv_hv = dF/dv_da = 3/8
    let fidelity_se = 0.375 * (se_hv * se_hv + se_da * se_da).sqrt();
    let bound = car.map(|r| car_to_fidelity(r.car)).transpose()?;
    Ok(ExperimentReport {
        bases: curves.iter().map(|c| c.basis.to_string()).collect(),
        pair_rate_cps: 2.0 * peak_rate,
        pair_rate_se: 2.0 * peak_se,
        v_hv,
        v_da,
        fidelity_visibility: fidelity,
        fidelity_visibility_se: fidelity_se,
        car: car.map(|r| r.car),
        car_lower_bound: car.map(|r| r.car_lower_bound),
        fidelity_car_bound: bound,
    })
}
