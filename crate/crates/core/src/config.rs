//! Experiment configuration documents and bundled presets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure_nonneg, ensure_unit, Error, Result};
use crate::physics::{AnalyzerSetting, Arm, DcmSpec, DetectorSpec, FiberSpec};
use crate::sim::source::SourceSpec;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcmConfig {
    pub arm: Arm,
    pub total_dispersion_ps_per_nm: f64,
    pub insertion_loss_db: f64,
}

impl DcmConfig {
    pub fn spec(&self) -> DcmSpec {
        DcmSpec {
            total_dispersion_ps_per_nm: self.total_dispersion_ps_per_nm,
            insertion_loss_db: self.insertion_loss_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorPair {
    pub signal: DetectorSpec,
    pub idler: DetectorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerPair {
    pub signal: AnalyzerSetting,
    pub idler: AnalyzerSetting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub duration_s: f64,
    pub seed: u64,
    pub window_ps: u64,
    /// Shift of the accidental-estimation window; defaults to
    /// `max(100 * window, 10 ns)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accidental_offset_ps: Option<i64>,
    /// Extra depolarization applied on top of the multi-pair model.
    #[serde(default = "one")]
    pub pmd_visibility_factor: f64,
    /// Hours of polarization drift already accumulated at t = 0.
    #[serde(default)]
    pub drift_start_h: f64,
    #[serde(default = "one")]
    pub shard_s: f64,
    pub source: SourceSpec,
    pub signal_fiber: FiberSpec,
    pub idler_fiber: FiberSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcm: Option<DcmConfig>,
    pub detectors: DetectorPair,
    pub analyzers: AnalyzerPair,
}

pub const PRESET_NAMES: &[&str] = &[
    "ideal",
    "local-8k",
    "local-460k",
    "93km",
    "93km-eff49",
    "155km",
];

fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "ideal" => include_str!("../presets/ideal.toml"),
        "local-8k" => include_str!("../presets/local-8k.toml"),
        "local-460k" | "local" => include_str!("../presets/local-460k.toml"),
        "93km" => include_str!("../presets/93km.toml"),
        "93km-eff49" => include_str!("../presets/93km-eff49.toml"),
        "155km" => include_str!("../presets/155km.toml"),
        _ => return None,
    })
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = preset_text(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown preset {name:?} (available: {})",
                PRESET_NAMES.join(", ")
            ))
        })?;
        Self::from_toml_str(text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid(
                "duration_s",
                format!("{} must be positive", self.duration_s),
            ));
        }
        if !(self.shard_s > 0.0 && self.shard_s.is_finite()) {
            return Err(Error::invalid("shard_s", "must be positive"));
        }
        if self.window_ps == 0 {
            return Err(Error::invalid("window_ps", "must be positive"));
        }
        if let Some(off) = self.accidental_offset_ps {
            if off.unsigned_abs() <= self.window_ps {
                return Err(Error::invalid(
                    "accidental_offset_ps",
                    "must exceed the coincidence window",
                ));
            }
        }
        ensure_unit("pmd_visibility_factor", self.pmd_visibility_factor)?;
        ensure_nonneg("drift_start_h", self.drift_start_h)?;
        self.source.validate()?;
        self.signal_fiber.validate()?;
        self.idler_fiber.validate()?;
        if let Some(d) = &self.dcm {
            d.spec().validate()?;
        }
        self.detectors.signal.validate()?;
        self.detectors.idler.validate()?;
        if self.detectors.signal.channel == self.detectors.idler.channel {
            return Err(Error::ChannelConflict(self.detectors.signal.channel));
        }
        self.analyzers.signal.validate()?;
        self.analyzers.idler.validate()?;
        for a in [&self.analyzers.signal, &self.analyzers.idler] {
            if a.qwp_deg != 0.0 {
                return Err(Error::invalid(
                    "qwp_deg",
                    "only a zero quarter-wave plate is modeled",
                ));
            }
        }
        Ok(())
    }

    pub fn fiber(&self, arm: Arm) -> &FiberSpec {
        match arm {
            Arm::Signal => &self.signal_fiber,
            Arm::Idler => &self.idler_fiber,
        }
    }

    pub fn detector(&self, arm: Arm) -> &DetectorSpec {
        match arm {
            Arm::Signal => &self.detectors.signal,
            Arm::Idler => &self.detectors.idler,
        }
    }

    pub fn analyzer(&self, arm: Arm) -> &AnalyzerSetting {
        match arm {
            Arm::Signal => &self.analyzers.signal,
            Arm::Idler => &self.analyzers.idler,
        }
    }

    pub fn dcm_on(&self, arm: Arm) -> Option<DcmSpec> {
        self.dcm
            .as_ref()
            .filter(|d| d.arm == arm)
            .map(DcmConfig::spec)
    }

    /// Transmission from the chip to the detector surface.
    pub fn path_transmission(&self, arm: Arm) -> f64 {
        self.fiber(arm).transmission() * self.dcm_on(arm).map_or(1.0, |d| d.transmission())
    }

    /// Transmission from the end of the span to the detector surface.
    pub fn downstream_transmission(&self, arm: Arm) -> f64 {
        let f = self.fiber(arm);
        crate::physics::db_to_transmission(f.insertion_loss_db)
            * self.dcm_on(arm).map_or(1.0, |d| d.transmission())
    }

    /// Idler-minus-signal arrival offset of a pair at the band centers.
    pub fn expected_delay_ps(&self) -> i64 {
        (self.idler_fiber.base_delay_ps - self.signal_fiber.base_delay_ps).round() as i64
    }

    pub fn accidental_offset(&self) -> i64 {
        self.accidental_offset_ps
            .unwrap_or_else(|| crate::tagproc::default_accidental_offset(self.window_ps))
    }
}
