//! Monte Carlo generation of detector time-tag streams.

pub mod channel;
pub mod detect;
pub mod pipeline;
pub mod rng;
pub mod source;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{Error, Result};

pub use channel::{
    apply_dcm, apply_fiber, apply_polarization_drift, split_arms, ArmPhoton, DriftClock,
};
pub use detect::{detect, ArmDetection};
pub use pipeline::{expected_rates, simulate, ArmRates, ExpectedRates, SimOutput};
pub use source::{
    effective_visibility, generate_pairs, multipair_mean, pair_rate, PairEvent, SourceSpec,
};

pub const PS_PER_S: f64 = 1e12;
pub const PS_PER_H: f64 = 3.6e15;

pub(crate) fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .map(|d| d.sample(rng) as u64)
        .unwrap_or(0)
}

/// Calls `f` with each event offset in `[0, len_ps)` of a Poisson process at
/// `rate_cps`, in increasing order.
pub(crate) fn poisson_arrivals<R: Rng>(
    rng: &mut R,
    rate_cps: f64,
    len_ps: f64,
    mut f: impl FnMut(&mut R, f64) -> Result<()>,
) -> Result<()> {
    if !(rate_cps > 0.0) {
        return Ok(());
    }
    let mean_gap_ps = PS_PER_S / rate_cps;
    let mut t = 0.0;
    loop {
        t += mean_gap_ps * rng.sample::<f64, _>(Exp1);
        if t >= len_ps {
            return Ok(());
        }
        f(rng, t)?;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Shard {
    pub index: u64,
    pub start_ps: f64,
    pub len_ps: f64,
}

/// Fixed wall-clock slices of the run; the last one may be shorter.
pub(crate) fn shard_plan(duration_s: f64, shard_s: f64) -> Vec<Shard> {
    let n = (duration_s / shard_s).ceil().max(1.0) as u64;
    (0..n)
        .map(|index| {
            let start = index as f64 * shard_s;
            let end = ((index + 1) as f64 * shard_s).min(duration_s);
            Shard {
                index,
                start_ps: start * PS_PER_S,
                len_ps: (end - start).max(0.0) * PS_PER_S,
            }
        })
        .collect()
}

/// Rounds a continuous arrival time onto the tagger grid. Events that jitter
/// before the time origin are clamped to zero.
pub(crate) fn quantize(t_ps: f64, resolution_ps: u64) -> Result<u64> {
    let res = resolution_ps as f64;
    let q = (t_ps.max(0.0) / res).round() * res;
    if !(q < u64::MAX as f64) {
        return Err(Error::TimestampOverflow(t_ps));
    }
    Ok(q as u64)
}

/// Drops tags that arrive within `dead_time_ps` of the last accepted tag.
pub(crate) fn apply_dead_time(sorted: Vec<u64>, dead_time_ps: u64) -> Vec<u64> {
    if dead_time_ps == 0 {
        return sorted;
    }
    let mut out = Vec::with_capacity(sorted.len());
    let mut last: Option<u64> = None;
    for t in sorted {
        match last {
            Some(l) if t - l < dead_time_ps => {}
            _ => {
                out.push(t);
                last = Some(t);
            }
        }
    }
    out
}
