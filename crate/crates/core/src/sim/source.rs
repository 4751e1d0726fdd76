//! SFWM pair source.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonneg, ensure_unit, Error, Result};
use crate::physics::conjugate_wavelength;
use crate::sim::rng::stream_rng;
use crate::sim::{poisson, shard_plan, PS_PER_S};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub pump_power_mw: f64,
    /// Pairs per second per mW^2 of pump.
    pub brightness_coefficient: f64,
    pub pump_wavelength_nm: f64,
    pub signal_center_nm: f64,
    pub idler_center_nm: f64,
    pub filter_bandwidth_nm: f64,
    pub intrinsic_visibility: f64,
    /// Lumped Raman and pump-leakage photons per arm, counts/s at the chip.
    #[serde(default)]
    pub noise_floor_cps: f64,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_nonneg("pump_power_mw", self.pump_power_mw)?;
        ensure_nonneg("brightness_coefficient", self.brightness_coefficient)?;
        ensure_nonneg("filter_bandwidth_nm", self.filter_bandwidth_nm)?;
        ensure_unit("intrinsic_visibility", self.intrinsic_visibility)?;
        ensure_nonneg("noise_floor_cps", self.noise_floor_cps)?;
        for (name, v) in [
            ("pump_wavelength_nm", self.pump_wavelength_nm),
            ("signal_center_nm", self.signal_center_nm),
            ("idler_center_nm", self.idler_center_nm),
        ] {
            ensure_nonneg(name, v)?;
            if v == 0.0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        let conj = conjugate_wavelength(self.pump_wavelength_nm, self.signal_center_nm);
        if (conj - self.idler_center_nm).abs() > 0.1 {
            return Err(Error::invalid(
                "idler_center_nm",
                format!(
                    "{} nm violates energy conservation (conjugate of signal is {conj:.3} nm)",
                    self.idler_center_nm
                ),
            ));
        }
        Ok(())
    }

    /// Idler wavelength paired with the signal band center.
    pub fn conjugate_idler_nm(&self) -> f64 {
        conjugate_wavelength(self.pump_wavelength_nm, self.signal_center_nm)
    }

    /// Draws one in-band signal wavelength and its energy-conserving idler.
    pub fn sample_wavelengths<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let u: f64 = rng.random();
        let s = self.signal_center_nm + (u - 0.5) * self.filter_bandwidth_nm;
        (s, conjugate_wavelength(self.pump_wavelength_nm, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEvent {
    pub emit_time_ps: f64,
    pub signal_nm: f64,
    pub idler_nm: f64,
}

pub fn pair_rate(spec: &SourceSpec) -> f64 {
    spec.brightness_coefficient * spec.pump_power_mw * spec.pump_power_mw
}

/// Mean number of additional pairs inside one coincidence window.
pub fn multipair_mean(spec: &SourceSpec, window_ps: f64) -> f64 {
    pair_rate(spec) * window_ps * 1e-12
}

/// `V0 / (1 + mu)`, the multi-pair-degraded visibility.
pub fn effective_visibility(spec: &SourceSpec, window_ps: f64) -> f64 {
    spec.intrinsic_visibility / (1.0 + multipair_mean(spec, window_ps))
}

/// Poisson pair emission over `duration_s`, sorted by emission time.
pub fn generate_pairs(spec: &SourceSpec, duration_s: f64, seed: u64) -> Result<Vec<PairEvent>> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::invalid(
            "duration_s",
            format!("{duration_s} must be positive"),
        ));
    }
    spec.validate()?;
    let rate = pair_rate(spec);
    let mut out = Vec::new();
    for shard in shard_plan(duration_s, 1.0) {
        let mut rng = stream_rng(seed, "emission", shard.index);
        let n = poisson(&mut rng, rate * shard.len_ps / PS_PER_S);
        let start = out.len();
        for _ in 0..n {
            let t = shard.start_ps + rng.random::<f64>() * shard.len_ps;
            let (s, i) = spec.sample_wavelengths(&mut rng);
            out.push(PairEvent {
                emit_time_ps: t,
                signal_nm: s,
                idler_nm: i,
            });
        }
        out[start..].sort_unstable_by(|a, b| a.emit_time_ps.total_cmp(&b.emit_time_ps));
    }
    Ok(out)
}
