//! Fiber, dispersion compensation and polarization drift acting on photons.

use rand::Rng;

use crate::physics::{Arm, DcmSpec, FiberSpec};
use crate::sim::rng::stream_rng;
use crate::sim::source::PairEvent;
use crate::sim::PS_PER_H;

/// One photon travelling down one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPhoton {
    /// Index of the parent pair in the emission sequence.
    pub pair: u64,
    pub time_ps: f64,
    pub wavelength_nm: f64,
}

pub fn split_arms(pairs: &[PairEvent]) -> (Vec<ArmPhoton>, Vec<ArmPhoton>) {
    let mut signal = Vec::with_capacity(pairs.len());
    let mut idler = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        signal.push(ArmPhoton {
            pair: i as u64,
            time_ps: p.emit_time_ps,
            wavelength_nm: p.signal_nm,
        });
        idler.push(ArmPhoton {
            pair: i as u64,
            time_ps: p.emit_time_ps,
            wavelength_nm: p.idler_nm,
        });
    }
    (signal, idler)
}

/// Loss thinning plus wavelength-dependent transit delay.
pub fn apply_fiber(events: &[ArmPhoton], arm: Arm, fiber: &FiberSpec, seed: u64) -> Vec<ArmPhoton> {
    let survive = fiber.transmission();
    let mut rng = stream_rng(seed, &format!("fiber-{arm}"), 0);
    events
        .iter()
        .filter(|_| survive >= 1.0 || rng.random::<f64>() < survive)
        .map(|e| ArmPhoton {
            time_ps: e.time_ps + fiber.transit_delay_ps(e.wavelength_nm),
            ..*e
        })
        .collect()
}

/// Lumped compensator; `reference_nm` is the wavelength of zero added delay.
pub fn apply_dcm(
    events: &[ArmPhoton],
    arm: Arm,
    dcm: &DcmSpec,
    reference_nm: f64,
    seed: u64,
) -> Vec<ArmPhoton> {
    let survive = dcm.transmission();
    let mut rng = stream_rng(seed, &format!("dcm-{arm}"), 0);
    events
        .iter()
        .filter(|_| survive >= 1.0 || rng.random::<f64>() < survive)
        .map(|e| ArmPhoton {
            time_ps: e.time_ps + dcm.delay_ps(e.wavelength_nm, reference_nm),
            ..*e
        })
        .collect()
}

/// Maps event times onto hours of wall-clock time since the drift started.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftClock {
    pub start_h: f64,
}

impl DriftClock {
    pub fn hours_at(&self, time_ps: f64) -> f64 {
        self.start_h + time_ps / PS_PER_H
    }
}

/// Extra analyzer rotation in degrees seen by each event.
pub fn apply_polarization_drift(
    events: &[ArmPhoton],
    fiber: &FiberSpec,
    clock: DriftClock,
) -> Vec<f64> {
    events
        .iter()
        .map(|e| fiber.drift_deg(clock.hours_at(e.time_ps)))
        .collect()
}
