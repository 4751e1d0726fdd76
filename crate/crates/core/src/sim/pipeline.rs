//! End-to-end, sharded generation of both arms' tag streams.
//!
//! Rather than following every emitted pair through each lossy element, the
//! run draws the Poisson number of pairs that reach *both* detectors, reach
//! only one, and so on, directly from the thinned rates. Independent
//! thinning of a Poisson process is again Poisson, so the output has the
//! same law as the element-by-element chain in [`crate::sim::channel`] and
//! [`crate::sim::detect`], at a cost proportional to detected events.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::par::{self, Execution};
use crate::physics::{coincidence_probability, joint_outcome_distribution, Arm, WernerState};
use crate::sim::channel::DriftClock;
use crate::sim::rng::stream_rng;
use crate::sim::source::{effective_visibility, pair_rate};
use crate::sim::{apply_dead_time, poisson_arrivals, quantize, shard_plan, Shard};
use crate::tags::TagStream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutput {
    pub signal: TagStream,
    pub idler: TagStream,
}

impl SimOutput {
    pub fn arm(&self, arm: Arm) -> &TagStream {
        match arm {
            Arm::Signal => &self.signal,
            Arm::Idler => &self.idler,
        }
    }
}

/// Mean detector rates implied by a configuration at its analyzer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmRates {
    /// Probability that a photon emitted into this arm is detected, before
    /// the analyzer.
    pub detection_probability: f64,
    pub pair_singles_cps: f64,
    pub source_noise_cps: f64,
    pub background_cps: f64,
    pub dark_cps: f64,
}

impl ArmRates {
    pub fn singles_cps(&self) -> f64 {
        self.pair_singles_cps + self.source_noise_cps + self.background_cps + self.dark_cps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    pub pair_rate: f64,
    pub visibility: f64,
    pub signal: ArmRates,
    pub idler: ArmRates,
    /// True coincidences per second at the configured analyzer angles,
    /// neglecting drift.
    pub coincidence_cps: f64,
    pub accidental_cps: f64,
}

pub fn expected_rates(cfg: &ExperimentConfig) -> Result<ExpectedRates> {
    let r = pair_rate(&cfg.source);
    let v = effective_visibility(&cfg.source, cfg.window_ps as f64) * cfg.pmd_visibility_factor;
    let arm = |a: Arm| {
        let det = cfg.detector(a);
        let p = cfg.path_transmission(a) * det.efficiency;
        ArmRates {
            detection_probability: p,
            pair_singles_cps: r * p * 0.5,
            source_noise_cps: cfg.source.noise_floor_cps * p * 0.5,
            background_cps: cfg.fiber(a).background_rate_cps
                * cfg.downstream_transmission(a)
                * det.efficiency,
            dark_cps: det.dark_rate_cps,
        }
    };
    let (s, i) = (arm(Arm::Signal), arm(Arm::Idler));
    let pc = coincidence_probability(
        &WernerState::new(v)?,
        &cfg.analyzers.signal,
        &cfg.analyzers.idler,
    )?;
    Ok(ExpectedRates {
        pair_rate: r,
        visibility: v,
        signal: s,
        idler: i,
        coincidence_cps: r * s.detection_probability * i.detection_probability * pc,
        accidental_cps: crate::physics::expected_accidentals(
            s.singles_cps(),
            i.singles_cps(),
            cfg.window_ps as f64,
        ),
    })
}

struct ArmModel {
    arm: Arm,
    base_delay_ps: f64,
    /// Delay per nm of detuning from the arm's reference, fiber plus DCM.
    slope_ps_per_nm: f64,
    reference_nm: f64,
    drift_deg_per_h: f64,
    jitter_ps: f64,
    resolution_ps: u64,
}

impl ArmModel {
    fn new(cfg: &ExperimentConfig, arm: Arm) -> Self {
        let f = cfg.fiber(arm);
        let dcm = cfg
            .dcm_on(arm)
            .map_or(0.0, |d| d.total_dispersion_ps_per_nm);
        let det = cfg.detector(arm);
        Self {
            arm,
            base_delay_ps: f.base_delay_ps,
            slope_ps_per_nm: f.accumulated_dispersion() + dcm,
            reference_nm: f.reference_wavelength_nm,
            drift_deg_per_h: f.drift_rate_deg_per_h,
            jitter_ps: det.jitter_sigma_ps,
            resolution_ps: det.resolution_ps,
        }
    }

    fn arrival(&self, emit_ps: f64, nm: f64) -> f64 {
        emit_ps + self.base_delay_ps + self.slope_ps_per_nm * (nm - self.reference_nm)
    }

    fn stamp(&self, t: f64, rng: &mut ChaCha8Rng, out: &mut Vec<u64>) -> Result<()> {
        let j = if self.jitter_ps > 0.0 {
            self.jitter_ps * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        out.push(quantize(t + j, self.resolution_ps)?);
        Ok(())
    }
}

fn run_shard(
    cfg: &ExperimentConfig,
    rates: &ExpectedRates,
    shard: Shard,
) -> Result<(Vec<u64>, Vec<u64>)> {
    let seed = cfg.seed;
    let k = shard.index;
    let models = [
        ArmModel::new(cfg, Arm::Signal),
        ArmModel::new(cfg, Arm::Idler),
    ];
    let [ms, mi] = &models;
    let clock = DriftClock {
        start_h: cfg.drift_start_h,
    };
    let state = WernerState::new(rates.visibility)?;
    let (ps, pi) = (
        rates.signal.detection_probability,
        rates.idler.detection_probability,
    );
    let r = rates.pair_rate;

    let mut out_s = Vec::new();
    let mut out_i = Vec::new();
    let mut jit_s = stream_rng(seed, "jitter-signal", k);
    let mut jit_i = stream_rng(seed, "jitter-idler", k);

    // Pairs with both photons at the analyzers.
    {
        let mut rng = stream_rng(seed, "pairs-both", k);
        let mut outcome = stream_rng(seed, "outcome", k);
        let fixed =
            joint_outcome_distribution(&state, &cfg.analyzers.signal, &cfg.analyzers.idler)?;
        let drifting = ms.drift_deg_per_h != 0.0 || mi.drift_deg_per_h != 0.0;
        poisson_arrivals(&mut rng, r * ps * pi, shard.len_ps, |rng, offset| {
            let t = shard.start_ps + offset;
            let (ls, li) = cfg.source.sample_wavelengths(rng);
            let (ts, ti) = (ms.arrival(t, ls), mi.arrival(t, li));
            let j = if drifting {
                let a = cfg
                    .analyzers
                    .signal
                    .rotated(ms.drift_deg_per_h * clock.hours_at(ts));
                let b = cfg
                    .analyzers
                    .idler
                    .rotated(mi.drift_deg_per_h * clock.hours_at(ti));
                joint_outcome_distribution(&state, &a, &b)?
            } else {
                fixed
            };
            let u: f64 = outcome.random();
            let (sp, ip) = if u < j.pass_pass {
                (true, true)
            } else if u < j.pass_pass + j.pass_fail {
                (true, false)
            } else if u < j.pass_pass + j.pass_fail + j.fail_pass {
                (false, true)
            } else {
                (false, false)
            };
            if sp {
                ms.stamp(ts, &mut jit_s, &mut out_s)?;
            }
            if ip {
                mi.stamp(ti, &mut jit_i, &mut out_i)?;
            }
            Ok(())
        })?;
    }
    settle(&mut out_s);
    settle(&mut out_i);

    // Pairs whose partner was lost, plus in-band source noise; both pass the
    // analyzer with probability one half.
    for (m, jit, out, lone_rate) in [
        (ms, &mut jit_s, &mut out_s, r * ps * (1.0 - pi) * 0.5),
        (mi, &mut jit_i, &mut out_i, r * (1.0 - ps) * pi * 0.5),
    ] {
        let arm = m.arm;
        let rates_arm = if arm == Arm::Signal {
            &rates.signal
        } else {
            &rates.idler
        };
        let mut rng = stream_rng(seed, &format!("pairs-{arm}"), k);
        let lone = lone_rate + rates_arm.source_noise_cps;
        let start = out.len();
        poisson_arrivals(&mut rng, lone, shard.len_ps, |rng, offset| {
            let (ls, li) = cfg.source.sample_wavelengths(rng);
            let nm = if arm == Arm::Signal { ls } else { li };
            m.stamp(m.arrival(shard.start_ps + offset, nm), jit, out)
        })?;
        settle(&mut out[start..]);
        // Uncorrelated counts over the interval in which this arm sees light.
        let mut bg = stream_rng(seed, &format!("background-{arm}"), k);
        let origin = shard.start_ps + m.base_delay_ps;
        poisson_arrivals(
            &mut bg,
            rates_arm.background_cps,
            shard.len_ps,
            |_, offset| {
                out.push(quantize(origin + offset, m.resolution_ps)?);
                Ok(())
            },
        )?;
        let mut dk = stream_rng(seed, &format!("darks-{arm}"), k);
        poisson_arrivals(&mut dk, rates_arm.dark_cps, shard.len_ps, |_, offset| {
            out.push(quantize(origin + offset, m.resolution_ps)?);
            Ok(())
        })?;
    }
    // Each buffer is now one sorted run per source.
    out_s.sort();
    out_i.sort();
    Ok((out_s, out_i))
}

/// Sorts tags generated in emission order. Dispersion and jitter only move a
/// tag past a few neighbours, so an insertion pass is linear in practice;
/// anything more disordered falls back to a full sort.
fn settle(v: &mut [u64]) {
    let mut budget = v.len();
    for i in 1..v.len() {
        let x = v[i];
        let mut j = i;
        while j > 0 && v[j - 1] > x {
            if budget == 0 {
                v[j] = x;
                v.sort_unstable();
                return;
            }
            budget -= 1;
            v[j] = v[j - 1];
            j -= 1;
        }
        v[j] = x;
    }
}

/// Generates both arms' streams. Output is a pure function of the
/// configuration; `exec` only changes scheduling.
pub fn simulate(cfg: &ExperimentConfig, exec: Execution) -> Result<SimOutput> {
    cfg.validate()?;
    let rates = expected_rates(cfg)?;
    let shards = shard_plan(cfg.duration_s, cfg.shard_s);
    let parts = par::map(exec, shards, |s| run_shard(cfg, &rates, s));
    let mut sig = Vec::new();
    let mut idl = Vec::new();
    for p in parts {
        let (s, i) = p?;
        sig.extend_from_slice(&s);
        idl.extend_from_slice(&i);
    }
    // Shards overlap slightly at their edges after delays and jitter.
    par::sort_runs(exec, &mut sig);
    par::sort_runs(exec, &mut idl);
    let build = |tags: Vec<u64>, arm: Arm| {
        let det = cfg.detector(arm);
        let tags = apply_dead_time(tags, det.dead_time_ps);
        let n = tags.len();
        TagStream::from_parts_unchecked(tags, vec![det.channel; n], det.resolution_ps)
    };
    Ok(SimOutput {
        signal: build(sig, Arm::Signal),
        idler: build(idl, Arm::Idler),
    })
}
