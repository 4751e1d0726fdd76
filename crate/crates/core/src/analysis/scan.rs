use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonneg, ensure_unit, Error, Result};
use crate::physics::{db_to_transmission, expected_accidentals};

/// Wavelength-channel selection model: a phase-matching envelope competing
/// with pump leakage through the channel filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanModel {
    /// Generated pairs/s at vanishing detuning.
    pub pair_rate_peak: f64,
    /// Gaussian envelope sigma in nm of detuning.
    pub envelope_width_nm: f64,
    pub filter_transmission: f64,
    /// Collection and detection efficiency per arm.
    pub detection_efficiency: f64,
    pub dark_cps: f64,
    /// Pump photons/s reaching each channel filter.
    pub leakage_photons_per_s: f64,
    /// Filter extinction at zero detuning, dB.
    pub extinction_near_db: f64,
    /// Extinction approached far from the pump, dB.
    pub extinction_far_db: f64,
    /// Detuning over which extinction rises, nm.
    pub extinction_scale_nm: f64,
    pub window_ps: f64,
}

impl Default for ScanModel {
    fn default() -> Self {
        Self {
            pair_rate_peak: 1e4,
            envelope_width_nm: 10.0,
            filter_transmission: 0.9,
            detection_efficiency: 0.1,
            dark_cps: 1000.0,
            leakage_photons_per_s: 1e14,
            extinction_near_db: 80.0,
            extinction_far_db: 100.0,
            extinction_scale_nm: 4.0,
            window_ps: 200.0,
        }
    }
}

impl ScanModel {
    pub fn validate(&self) -> Result<()> {
        ensure_nonneg("pair_rate_peak", self.pair_rate_peak)?;
        if !(self.envelope_width_nm > 0.0) {
            return Err(Error::invalid("envelope_width_nm", "must be positive"));
        }
        ensure_unit("filter_transmission", self.filter_transmission)?;
        ensure_unit("detection_efficiency", self.detection_efficiency)?;
        ensure_nonneg("dark_cps", self.dark_cps)?;
        ensure_nonneg("leakage_photons_per_s", self.leakage_photons_per_s)?;
        if self.extinction_near_db.is_nan() || self.extinction_far_db.is_nan() {
            return Err(Error::invalid("extinction_db", "is NaN"));
        }
        ensure_nonneg("extinction_scale_nm", self.extinction_scale_nm)?;
        if !(self.window_ps > 0.0) {
            return Err(Error::invalid("window_ps", "must be positive"));
        }
        Ok(())
    }

    pub fn extinction_db(&self, detuning_nm: f64) -> f64 {
        if self.extinction_near_db.is_infinite() || self.extinction_far_db.is_infinite() {
            return f64::INFINITY;
        }
        let rise = if self.extinction_scale_nm > 0.0 {
            1.0 - (-detuning_nm / self.extinction_scale_nm).exp()
        } else {
            1.0
        };
        self.extinction_near_db + (self.extinction_far_db - self.extinction_near_db) * rise
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelScanRow {
    pub detuning_nm: f64,
    /// Detected pair (coincidence) rate, counts/s.
    pub pair_rate: f64,
    /// Leakage plus dark counts per arm, counts/s.
    pub noise_singles: f64,
    /// Total singles per arm, counts/s.
    pub singles: f64,
    pub car: f64,
}

pub fn scan_wavelength_channels(
    model: &ScanModel,
    detunings_nm: &[f64],
) -> Result<Vec<ChannelScanRow>> {
    model.validate()?;
    if detunings_nm.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::invalid("detuning_nm", "must be positive"));
    }
    if detunings_nm.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("detuning_nm", "must be ascending"));
    }
    let eta = model.filter_transmission * model.detection_efficiency;
    Ok(detunings_nm
        .iter()
        .map(|&d| {
            let generated =
                model.pair_rate_peak * (-d * d / (2.0 * model.envelope_width_nm.powi(2))).exp();
            let pair_rate = generated * eta * eta;
            let leak = model.leakage_photons_per_s
                * db_to_transmission(model.extinction_db(d))
                * model.detection_efficiency;
            let noise_singles = leak + model.dark_cps;
            let singles = generated * eta + noise_singles;
            let acc = expected_accidentals(singles, singles, model.window_ps);
            let car = if acc > 0.0 {
                pair_rate / acc
            } else {
                f64::INFINITY
            };
            ChannelScanRow {
                detuning_nm: d,
                pair_rate,
                noise_singles,
                singles,
                car,
            }
        })
        .collect())
}

/// Inclusive grid from `start` to `stop` in steps of `step`.
pub fn detuning_grid(start_nm: f64, stop_nm: f64, step_nm: f64) -> Result<Vec<f64>> {
    if !(start_nm >= 1.0 && stop_nm <= 30.0 && start_nm <= stop_nm) {
        return Err(Error::invalid(
            "detuning range",
            format!("[{start_nm}, {stop_nm}] must lie within 1-30 nm"),
        ));
    }
    if !(step_nm > 0.0) {
        return Err(Error::invalid("step_nm", "must be positive"));
    }
    let n = ((stop_nm - start_nm) / step_nm + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start_nm + k as f64 * step_nm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argmax(rows: &[ChannelScanRow]) -> f64 {
        rows.iter()
            .max_by(|a, b| a.car.total_cmp(&b.car))
            .unwrap()
            .detuning_nm
    }

    #[test]
    fn default_peaks_near_ten_nm() {
        let grid = detuning_grid(1.0, 30.0, 0.5).unwrap();
        let rows = scan_wavelength_channels(&ScanModel::default(), &grid).unwrap();
        let best = argmax(&rows);
        assert!((5.0..=15.0).contains(&best), "{best}");
        for r in &rows {
            let acc = expected_accidentals(r.singles, r.singles, 200.0);
            assert!((r.car - r.pair_rate / acc).abs() <= 1e-9 * r.car);
            assert!(r.car >= 0.0);
        }
    }

    #[test]
    fn zero_leakage_is_rate_limited() {
        let m = ScanModel {
            leakage_photons_per_s: 0.0,
            ..Default::default()
        };
        let grid = detuning_grid(1.0, 30.0, 1.0).unwrap();
        let rows = scan_wavelength_channels(&m, &grid).unwrap();
        assert!(rows.windows(2).all(|w| w[1].car < w[0].car));
        assert_eq!(argmax(&rows), 1.0);
    }

    #[test]
    fn infinite_extinction_leaves_darks() {
        let m = ScanModel {
            extinction_near_db: f64::INFINITY,
            ..Default::default()
        };
        let rows = scan_wavelength_channels(&m, &[3.0, 9.0]).unwrap();
        assert!(rows.iter().all(|r| r.noise_singles == m.dark_cps));
        assert_eq!(detuning_grid(7.0, 7.0, 1.0).unwrap(), vec![7.0]);
        assert!(detuning_grid(0.5, 10.0, 1.0).is_err());
    }
}
