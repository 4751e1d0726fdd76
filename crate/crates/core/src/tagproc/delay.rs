use crate::error::{Error, Result};
use crate::par::Execution;
use crate::tagproc::histogram::{cross_correlate_with, Histogram};
use crate::tags::TagStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelaySearchSpec {
    pub min_delay_ps: i64,
    pub max_delay_ps: i64,
    pub coarse_bin_ps: u64,
    pub refine_factor: u32,
    pub final_bin_ps: u64,
}

impl Default for DelaySearchSpec {
    fn default() -> Self {
        Self::over(-1_000_000_000, 1_000_000_000)
    }
}

impl DelaySearchSpec {
    /// Default binning (1 us coarse, x16 refinement, 1 ps final) over a range.
    pub fn over(min_delay_ps: i64, max_delay_ps: i64) -> Self {
        Self {
            min_delay_ps,
            max_delay_ps,
            coarse_bin_ps: 1_000_000,
            refine_factor: 16,
            final_bin_ps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_delay_ps > self.max_delay_ps {
            return Err(Error::invalid("min_delay_ps", "exceeds max_delay_ps"));
        }
        if self.refine_factor < 2 {
            return Err(Error::invalid("refine_factor", "must be at least 2"));
        }
        if self.final_bin_ps == 0 || self.final_bin_ps > self.coarse_bin_ps {
            return Err(Error::invalid(
                "final_bin_ps",
                "must be in [1, coarse_bin_ps]",
            ));
        }
        Ok(())
    }
}

const SIGMAS: f64 = 5.0;

/// Integer-ps position represented by bin `k`.
fn bin_pos(h: &Histogram, k: usize) -> f64 {
    h.bin_start(k) as f64 + (h.bin_width_ps as f64 - 1.0) / 2.0
}

pub fn find_delay(a: &TagStream, b: &TagStream, spec: &DelaySearchSpec) -> Result<i64> {
    find_delay_with(a, b, spec, Execution::default())
}

/// Delay `d` maximizing coincidences of `t_b - t_a = d`.
///
/// Coarse-to-fine: histogram the whole range, zoom around the tallest bin at
/// a finer bin width, and repeat. Once the peak spans several bins its
/// shape is resolved, and the estimate switches to a background-subtracted
/// centroid at the final bin width, which is far less noisy than the argmax
/// of a sparsely filled fine histogram.
pub fn find_delay_with(
    a: &TagStream,
    b: &TagStream,
    spec: &DelaySearchSpec,
    exec: Execution,
) -> Result<i64> {
    spec.validate()?;
    let span = (spec.max_delay_ps as i128 - spec.min_delay_ps as i128) as u64;
    let center = spec.min_delay_ps + (span / 2) as i64;
    let half = (span / 2 + spec.coarse_bin_ps.div_ceil(2)).max(spec.coarse_bin_ps);
    let mut bin = spec.coarse_bin_ps;
    let (mut h, floor) = coarse_stage(a, b, center, half, bin, exec)?;
    let mut k = h.argmax();
    // Refinement runs over all of `a`; the floor was measured on a prefix.
    let floor_per_ps = floor / bin as f64;

    loop {
        let level_floor = floor_per_ps * bin as f64;
        let peak = h.counts[k] as f64 - level_floor;
        let above = h
            .counts
            .iter()
            .filter(|&&c| c as f64 - level_floor >= peak / 2.0)
            .count();
        if above >= 3 && peak >= SIGMAS * level_floor.max(1.0).sqrt() {
            let fwhm = above as f64 * bin as f64;
            return centroid(a, b, bin_pos(&h, k), fwhm, spec.final_bin_ps, exec);
        }
        if bin == spec.final_bin_ps {
            return Ok(bin_pos(&h, k).round() as i64);
        }
        let c = bin_pos(&h, k).round() as i64;
        let next = bin
            .div_ceil(spec.refine_factor as u64)
            .max(spec.final_bin_ps);
        h = cross_correlate_with(a, b, c, 2 * bin, next, exec)?;
        bin = next;
        k = h.argmax();
    }
}

/// Pair visits allowed before the coarse stage falls back to a prefix of `a`.
const COARSE_PAIR_BUDGET: f64 = 3e7;

/// Coarse histogram with its significance test. Over a wide range at high
/// rates the full correlation visits billions of pairs, so it starts from a
/// prefix of `a` sized to a fixed budget and doubles it until the peak is
/// significant or the whole stream is in use.
fn coarse_stage(
    a: &TagStream,
    b: &TagStream,
    center: i64,
    half: u64,
    bin: u64,
    exec: Execution,
) -> Result<(Histogram, f64)> {
    let partners = if b.span_ps() > 0 {
        b.len() as f64 * (2 * half) as f64 / b.span_ps() as f64
    } else {
        b.len() as f64
    };
    // Tags of `a` whose whole lag range falls inside `b`; near the ends of
    // `b` the floor ramps and the argmax drifts onto the ramp.
    let ta = a.timestamps();
    let (mut lo, mut hi) = (0, ta.len());
    if let (Some(b0), Some(b1)) = (b.first_ps(), b.last_ps()) {
        let first = b0 as i128 - (center as i128 - half as i128);
        let last = b1 as i128 - (center as i128 + half as i128);
        let l = ta.partition_point(|&t| (t as i128) < first);
        let h = ta.partition_point(|&t| (t as i128) <= last);
        if h > l && 2 * (h - l) >= ta.len() {
            (lo, hi) = (l, h);
        }
    }
    let mut n = ((COARSE_PAIR_BUDGET / partners.max(1.0)) as usize).max(4096);
    loop {
        let full = n >= hi - lo;
        let end = if full { hi } else { lo + n };
        let sub;
        let part = if lo == 0 && end == ta.len() {
            a
        } else {
            sub = TagStream::from_parts_unchecked(
                ta[lo..end].to_vec(),
                a.channels()[lo..end].to_vec(),
                a.resolution_ps(),
            );
            &sub
        };
        let h = cross_correlate_with(part, b, center, half, bin, exec)?;
        let k = h.argmax();
        let max = h.counts[k];
        let off_peak: Vec<u64> = h
            .counts
            .iter()
            .enumerate()
            .filter(|(i, _)| i.abs_diff(k) > 2)
            .map(|(_, &c)| c)
            .collect();
        let floor = if off_peak.is_empty() {
            0.0
        } else {
            off_peak.iter().sum::<u64>() as f64 / off_peak.len() as f64
        };
        if (max as f64 - floor) >= SIGMAS * floor.max(1.0).sqrt() {
            return Ok((h, floor * a.len() as f64 / part.len() as f64));
        }
        if full {
            return Err(Error::NoSignificantPeak { max, floor });
        }
        n = n.saturating_mul(2);
    }
}

fn centroid(
    a: &TagStream,
    b: &TagStream,
    mut c: f64,
    fwhm: f64,
    bin: u64,
    exec: Execution,
) -> Result<i64> {
    let region = 2.0 * fwhm + bin as f64;
    let half = (3.0 * region).ceil() as u64;
    for _ in 0..3 {
        let h = cross_correlate_with(a, b, c.round() as i64, half.max(bin), bin, exec)?;
        let (mut side, mut side_n) = (0.0, 0usize);
        for k in 0..h.counts.len() {
            if (bin_pos(&h, k) - c).abs() > region {
                side += h.counts[k] as f64;
                side_n += 1;
            }
        }
        let bg = if side_n > 0 {
            side / side_n as f64
        } else {
            0.0
        };
        let (mut s, mut m) = (0.0, 0.0);
        for k in 0..h.counts.len() {
            let x = bin_pos(&h, k);
            if (x - c).abs() <= region {
                let w = h.counts[k] as f64 - bg;
                s += w;
                m += w * x;
            }
        }
        if s <= 0.0 {
            break;
        }
        c = m / s;
    }
    Ok(c.round() as i64)
}
