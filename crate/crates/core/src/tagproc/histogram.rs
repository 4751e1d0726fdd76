use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::tags::TagStream;

/// Cross-correlation counts. Bin `k` holds pairs whose delay `t_b - t_a`
/// lies in `[offset + k * bin_width, offset + (k + 1) * bin_width)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub offset_ps: i64,
    pub bin_width_ps: u64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn zeros(offset_ps: i64, bin_width_ps: u64, bins: usize) -> Self {
        Self {
            offset_ps,
            bin_width_ps,
            counts: vec![0; bins.max(1)],
        }
    }

    pub fn bin_start(&self, k: usize) -> i64 {
        self.offset_ps + k as i64 * self.bin_width_ps as i64
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.bin_start(k) as f64 + self.bin_width_ps as f64 / 2.0
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// First bin holding the maximum count.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = k;
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "delay_ps,counts")?;
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{}", self.bin_start(k), c)?;
        }
        Ok(())
    }

    fn add(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

pub fn cross_correlate(
    a: &TagStream,
    b: &TagStream,
    center_delay_ps: i64,
    half_range_ps: u64,
    bin_width_ps: u64,
) -> Result<Histogram> {
    cross_correlate_with(
        a,
        b,
        center_delay_ps,
        half_range_ps,
        bin_width_ps,
        Execution::default(),
    )
}

/// Histogram of `t_b - t_a` over `[center - half_range, center + half_range)`.
///
/// One forward pass over `a` with a sliding lower bound into `b`; cost is
/// linear in tags plus pairs falling inside the range.
pub fn cross_correlate_with(
    a: &TagStream,
    b: &TagStream,
    center_delay_ps: i64,
    half_range_ps: u64,
    bin_width_ps: u64,
    exec: Execution,
) -> Result<Histogram> {
    if bin_width_ps == 0 {
        return Err(Error::invalid("bin_width_ps", "must be at least 1 ps"));
    }
    if half_range_ps < bin_width_ps {
        return Err(Error::invalid("half_range_ps", "must be at least one bin"));
    }
    a.validate()?;
    b.validate()?;
    let bins = (2 * half_range_ps).div_ceil(bin_width_ps) as usize;
    let offset = center_delay_ps - half_range_ps as i64;
    let lo = offset as i128;
    let hi = lo + (bins as i128) * bin_width_ps as i128;

    let ta = a.timestamps();
    let tb = b.timestamps();
    let pieces = exec.pieces().min(ta.len().max(1));
    let chunk = ta.len().div_ceil(pieces).max(1);
    let ranges: Vec<(usize, usize)> = (0..ta.len())
        .step_by(chunk)
        .map(|s| (s, (s + chunk).min(ta.len())))
        .collect();
    let parts = par::map(exec, ranges, |(s, e)| {
        let mut h = Histogram::zeros(offset, bin_width_ps, bins);
        let slice = &ta[s..e];
        let Some(&first) = slice.first() else {
            return h;
        };
        let mut j0 = tb.partition_point(|&t| (t as i128) - (first as i128) < lo);
        let w = bin_width_ps as i128;
        for &x in slice {
            let x = x as i128;
            while j0 < tb.len() && (tb[j0] as i128) - x < lo {
                j0 += 1;
            }
            let mut j = j0;
            while j < tb.len() {
                let d = tb[j] as i128 - x;
                if d >= hi {
                    break;
                }
                h.counts[((d - lo) / w) as usize] += 1;
                j += 1;
            }
        }
        h
    });
    let mut out = Histogram::zeros(offset, bin_width_ps, bins);
    for p in &parts {
        out.add(p);
    }
    Ok(out)
}

/// Width between the linearly interpolated half-maximum crossings on either
/// side of the global peak.
pub fn histogram_fwhm(h: &Histogram) -> Result<f64> {
    let c = &h.counts;
    let max = *c.iter().max().unwrap_or(&0);
    let min = *c.iter().min().unwrap_or(&0);
    if max == 0 || (max == min && c.len() > 1) {
        return Err(Error::NoPeak);
    }
    let k = h.argmax();
    let half = max as f64 / 2.0;
    let w = h.bin_width_ps as f64;
    // Positions are bin centers in units of bins.
    let mut left = -0.5;
    for i in (0..k).rev() {
        if (c[i] as f64) < half {
            let (y0, y1) = (c[i] as f64, c[i + 1] as f64);
            left = i as f64 + (half - y0) / (y1 - y0);
            break;
        }
    }
    let mut right = c.len() as f64 - 0.5;
    for i in k + 1..c.len() {
        if (c[i] as f64) < half {
            let (y0, y1) = (c[i - 1] as f64, c[i] as f64);
            right = (i - 1) as f64 + (y0 - half) / (y0 - y1);
            break;
        }
    }
    // A lone bin has no interior crossing; its support is one bin wide.
    let width = if right - left < 1.0 {
        1.0
    } else {
        right - left
    };
    Ok(width * w)
}
