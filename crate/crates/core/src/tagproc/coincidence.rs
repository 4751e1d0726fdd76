use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::physics::CoincidenceResult;
use crate::tags::TagStream;

pub fn default_accidental_offset(window_ps: u64) -> i64 {
    (100 * window_ps).max(10_000) as i64
}

#[derive(Debug, Clone, Default)]
pub struct CoincidenceOptions {
    /// Offsets at which accidentals are counted and averaged; empty means the
    /// single default offset.
    pub accidental_offsets: Vec<i64>,
    /// Overrides the integration time inferred from the stream spans.
    pub integration_s: Option<f64>,
    pub exec: Execution,
}

#[inline]
fn step(da: i128, window2: i128) -> std::cmp::Ordering {
    // da = 2 (t_b - t_a - delay); within the window when |da| <= window.
    if da < -window2 {
        std::cmp::Ordering::Less
    } else if da > window2 {
        std::cmp::Ordering::Greater
    } else {
        std::cmp::Ordering::Equal
    }
}

/// Greedy earliest-first matching on slices. Calls `hit(i, j)` per pair.
fn greedy<F: FnMut(usize, usize)>(ta: &[u64], tb: &[u64], delay: i64, window: u64, mut hit: F) {
    let (mut i, mut j) = (0, 0);
    let w2 = window as i128;
    let delay = delay as i128;
    while i < ta.len() && j < tb.len() {
        let da = 2 * (tb[j] as i128 - ta[i] as i128 - delay);
        match step(da, w2) {
            std::cmp::Ordering::Less => j += 1,
            std::cmp::Ordering::Greater => i += 1,
            std::cmp::Ordering::Equal => {
                hit(i, j);
                i += 1;
                j += 1;
            }
        }
    }
}

/// Index pairs `(i, j)` matched by the greedy policy.
pub fn matched_pairs(
    a: &TagStream,
    b: &TagStream,
    delay_ps: i64,
    window_ps: u64,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    greedy(
        a.timestamps(),
        b.timestamps(),
        delay_ps,
        window_ps,
        |i, j| out.push((i, j)),
    );
    out
}

/// Splits `ta` where consecutive tags are more than one window apart. No `b`
/// tag can be within reach of tags on both sides of such a gap, so the
/// pieces match independently and their counts add up exactly.
fn independent_pieces(ta: &[u64], window: u64, pieces: usize) -> Vec<(usize, usize)> {
    if pieces <= 1 || ta.len() < 2 * pieces {
        return vec![(0, ta.len())];
    }
    let target = ta.len() / pieces;
    let mut out = Vec::with_capacity(pieces);
    let mut start = 0;
    let mut k = target;
    while k < ta.len() {
        while k < ta.len() && ta[k] - ta[k - 1] <= window {
            k += 1;
        }
        if k >= ta.len() {
            break;
        }
        out.push((start, k));
        start = k;
        k += target;
    }
    out.push((start, ta.len()));
    out
}

/// Number of greedy matches between `a` and `b` shifted back by `delay_ps`.
pub fn match_count(
    a: &TagStream,
    b: &TagStream,
    delay_ps: i64,
    window_ps: u64,
    exec: Execution,
) -> u64 {
    let ta = a.timestamps();
    let tb = b.timestamps();
    let pieces = independent_pieces(ta, window_ps, exec.pieces());
    if pieces.len() == 1 {
        let mut n = 0;
        greedy(ta, tb, delay_ps, window_ps, |_, _| n += 1);
        return n;
    }
    let w2 = window_ps as i128;
    let counts = par::map(exec, pieces, |(s, e)| {
        let first = ta[s] as i128 + delay_ps as i128;
        let last = ta[e - 1] as i128 + delay_ps as i128;
        let j0 = tb.partition_point(|&t| 2 * (t as i128 - first) < -w2);
        let j1 = tb.partition_point(|&t| 2 * (t as i128 - last) <= w2);
        let mut n = 0u64;
        greedy(
            &ta[s..e],
            &tb[j0..j1.max(j0)],
            delay_ps,
            window_ps,
            |_, _| n += 1,
        );
        n
    });
    counts.into_iter().sum()
}

pub fn count_coincidences(
    a: &TagStream,
    b: &TagStream,
    delay_ps: i64,
    window_ps: u64,
    accidental_offset_ps: i64,
) -> Result<CoincidenceResult> {
    let opts = CoincidenceOptions {
        accidental_offsets: vec![accidental_offset_ps],
        ..Default::default()
    };
    count_coincidences_with(a, b, delay_ps, window_ps, &opts)
}

/// Coincidences at `delay_ps` with tags paired when
/// `|t_b - t_a - delay| <= window / 2`; accidentals are counted the same way
/// at each shifted delay and averaged.
pub fn count_coincidences_with(
    a: &TagStream,
    b: &TagStream,
    delay_ps: i64,
    window_ps: u64,
    opts: &CoincidenceOptions,
) -> Result<CoincidenceResult> {
    if window_ps == 0 {
        return Err(Error::invalid("window_ps", "must be positive"));
    }
    let default = [default_accidental_offset(window_ps)];
    let offsets: &[i64] = if opts.accidental_offsets.is_empty() {
        &default
    } else {
        &opts.accidental_offsets
    };
    for &off in offsets {
        if off.unsigned_abs() <= window_ps {
            return Err(Error::invalid(
                "accidental_offset_ps",
                format!("{off} ps must exceed the {window_ps} ps window"),
            ));
        }
    }
    a.validate()?;
    b.validate()?;
    let coincidences = match_count(a, b, delay_ps, window_ps, opts.exec);
    let acc_total: u64 = offsets
        .iter()
        .map(|&off| match_count(a, b, delay_ps + off, window_ps, opts.exec))
        .sum();
    let accidentals = acc_total as f64 / offsets.len() as f64;
    let integration_s = opts
        .integration_s
        .unwrap_or_else(|| a.span_ps().max(b.span_ps()) as f64 * 1e-12);
    Ok(CoincidenceResult::new(
        coincidences,
        accidentals,
        window_ps,
        delay_ps,
        integration_s,
    ))
}

/// One coincidence evaluation per window.
pub fn car_vs_window(
    a: &TagStream,
    b: &TagStream,
    delay_ps: i64,
    windows_ps: &[u64],
    opts: &CoincidenceOptions,
) -> Result<Vec<(u64, CoincidenceResult)>> {
    if windows_ps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("windows", "must be strictly ascending"));
    }
    windows_ps
        .iter()
        .map(|&w| count_coincidences_with(a, b, delay_ps, w, opts).map(|r| (w, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(ts: &[u64]) -> TagStream {
        TagStream::from_timestamps(ts.to_vec(), 0).unwrap()
    }

    #[test]
    fn worked_example() {
        let a = stream(&[0, 100, 10_000]);
        let b = stream(&[10, 130, 50_000]);
        // 100 -> 130 is 30 ps apart: outside a 50 ps window (+-25 ps) but
        // inside a 60 ps one.
        assert_eq!(
            count_coincidences(&a, &b, 0, 50, 1000)
                .unwrap()
                .coincidences,
            1
        );
        assert_eq!(
            count_coincidences(&a, &b, 0, 60, 1000)
                .unwrap()
                .coincidences,
            2
        );
        assert_eq!(matched_pairs(&a, &b, 0, 60), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn rejects_overlapping_accidental_window() {
        let a = stream(&[0]);
        assert!(count_coincidences(&a, &a, 0, 60, 60).is_err());
        assert!(count_coincidences(&a, &a, 0, 60, -30).is_err());
        assert!(count_coincidences(&a, &a, 0, 0, 1000).is_err());
    }

    #[test]
    fn earlier_candidate_wins() {
        let a = stream(&[100]);
        let b = stream(&[90, 110]);
        assert_eq!(matched_pairs(&a, &b, 0, 40), vec![(0, 0)]);
    }

    #[test]
    fn empty_streams_floor_car() {
        let e = stream(&[]);
        let r = count_coincidences(&e, &e, 0, 60, 10_000).unwrap();
        assert_eq!(r.coincidences, 0);
        assert!(r.car_lower_bound);
    }

    #[test]
    fn pieces_split_only_at_gaps() {
        let ta: Vec<u64> = (0..100)
            .map(|k| k * 10 + if k >= 50 { 1000 } else { 0 })
            .collect();
        let p = independent_pieces(&ta, 20, 4);
        for &(s, _) in &p[1..] {
            assert!(ta[s] - ta[s - 1] > 20);
        }
        assert_eq!(p.last().unwrap().1, 100);
    }
}
