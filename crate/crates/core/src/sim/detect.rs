//! Analyzer projection, detection and timestamping.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::physics::{joint_outcome_distribution, AnalyzerSetting, Arm, DetectorSpec, WernerState};
use crate::sim::channel::{ArmPhoton, DriftClock};
use crate::sim::rng::stream_rng;
use crate::sim::{apply_dead_time, poisson, quantize, PS_PER_S};
use crate::tags::TagStream;

/// Everything reaching one arm's analyzer.
#[derive(Debug, Clone, Copy)]
pub struct ArmDetection<'a> {
    /// Photons from pairs, ordered by pair index.
    pub photons: &'a [ArmPhoton],
    /// Arrival times of uncorrelated fiber background photons. These are
    /// counted after the analyzer and are thinned only by the efficiency.
    pub background_ps: &'a [f64],
    pub analyzer: AnalyzerSetting,
    pub drift_deg_per_h: f64,
    pub detector: &'a DetectorSpec,
}

impl ArmDetection<'_> {
    fn angle_at(&self, clock: DriftClock, t_ps: f64) -> AnalyzerSetting {
        if self.drift_deg_per_h == 0.0 {
            self.analyzer
        } else {
            self.analyzer
                .rotated(self.drift_deg_per_h * clock.hours_at(t_ps))
        }
    }
}

struct ArmOut<'a> {
    arm: Arm,
    det: &'a DetectorSpec,
    times: Vec<f64>,
}

/// Samples PBS outcomes for pairs with both photons present (one joint
/// draw per pair), passes lone photons with probability one half, thins by
/// efficiency, adds jitter, merges darks and background, and applies dead
/// time.
pub fn detect(
    signal: ArmDetection<'_>,
    idler: ArmDetection<'_>,
    state: &WernerState,
    clock: DriftClock,
    duration_s: f64,
    seed: u64,
) -> Result<(TagStream, TagStream)> {
    if signal.detector.channel == idler.detector.channel {
        return Err(Error::ChannelConflict(signal.detector.channel));
    }
    signal.detector.validate()?;
    idler.detector.validate()?;
    signal.analyzer.validate()?;
    idler.analyzer.validate()?;

    let mut outcome_rng = stream_rng(seed, "outcome", 0);
    let mut s_out = ArmOut {
        arm: Arm::Signal,
        det: signal.detector,
        times: Vec::new(),
    };
    let mut i_out = ArmOut {
        arm: Arm::Idler,
        det: idler.detector,
        times: Vec::new(),
    };

    let (sp, ip) = (signal.photons, idler.photons);
    let (mut a, mut b) = (0, 0);
    while a < sp.len() || b < ip.len() {
        let pa = sp.get(a).map_or(u64::MAX, |p| p.pair);
        let pb = ip.get(b).map_or(u64::MAX, |p| p.pair);
        if pa == pb {
            let (s, i) = (&sp[a], &ip[b]);
            let j = joint_outcome_distribution(
                state,
                &signal.angle_at(clock, s.time_ps),
                &idler.angle_at(clock, i.time_ps),
            )?;
            let u: f64 = outcome_rng.random();
            let (s_pass, i_pass) = if u < j.pass_pass {
                (true, true)
            } else if u < j.pass_pass + j.pass_fail {
                (true, false)
            } else if u < j.pass_pass + j.pass_fail + j.fail_pass {
                (false, true)
            } else {
                (false, false)
            };
            if s_pass {
                s_out.times.push(s.time_ps);
            }
            if i_pass {
                i_out.times.push(i.time_ps);
            }
            a += 1;
            b += 1;
        } else if pa < pb {
            if outcome_rng.random::<bool>() {
                s_out.times.push(sp[a].time_ps);
            }
            a += 1;
        } else {
            if outcome_rng.random::<bool>() {
                i_out.times.push(ip[b].time_ps);
            }
            b += 1;
        }
    }

    let s_stream = finish(s_out, signal.background_ps, duration_s, seed)?;
    let i_stream = finish(i_out, idler.background_ps, duration_s, seed)?;
    Ok((s_stream, i_stream))
}

fn finish(out: ArmOut<'_>, background: &[f64], duration_s: f64, seed: u64) -> Result<TagStream> {
    let det = out.det;
    let mut eff_rng = stream_rng(seed, &format!("efficiency-{}", out.arm), 0);
    let mut jit_rng = stream_rng(seed, &format!("jitter-{}", out.arm), 0);
    let mut dark_rng = stream_rng(seed, &format!("darks-{}", out.arm), 0);
    let mut tags = Vec::with_capacity(out.times.len());
    for &t in out.times.iter().chain(background) {
        if det.efficiency < 1.0 && eff_rng.random::<f64>() >= det.efficiency {
            continue;
        }
        let jitter = if det.jitter_sigma_ps > 0.0 {
            det.jitter_sigma_ps * jit_rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        tags.push(quantize(t + jitter, det.resolution_ps)?);
    }
    let span = duration_s * PS_PER_S;
    for _ in 0..poisson(&mut dark_rng, det.dark_rate_cps * duration_s) {
        tags.push(quantize(
            dark_rng.random::<f64>() * span,
            det.resolution_ps,
        )?);
    }
    tags.sort_unstable();
    let tags = apply_dead_time(tags, det.dead_time_ps);
    let n = tags.len();
    Ok(TagStream::from_parts_unchecked(
        tags,
        vec![det.channel; n],
        det.resolution_ps,
    ))
}
