//! Brute-force references and stream generators shared by the test targets.
#![allow(dead_code)]

use entlink_core::tagproc::Histogram;
use entlink_core::TagStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn within(ta: u64, tb: u64, delay: i64, window: u64) -> bool {
    2 * (tb as i128 - ta as i128 - delay as i128).unsigned_abs() <= window as u128
}

/// Each `a` tag, in order, takes the earliest unused `b` tag inside the
/// window. Quadratic.
pub fn brute_count(a: &TagStream, b: &TagStream, delay: i64, window: u64) -> u64 {
    let mut used = vec![false; b.len()];
    let mut n = 0;
    for &x in a.timestamps() {
        let hit = b
            .timestamps()
            .iter()
            .enumerate()
            .find(|&(j, &y)| !used[j] && within(x, y, delay, window));
        if let Some((j, _)) = hit {
            used[j] = true;
            n += 1;
        }
    }
    n
}

/// Size of a maximum one-to-one matching between `a` and `b` tags that lie
/// within the window (augmenting paths).
pub fn max_matching(a: &TagStream, b: &TagStream, delay: i64, window: u64) -> u64 {
    let adj: Vec<Vec<usize>> = a
        .timestamps()
        .iter()
        .map(|&x| {
            (0..b.len())
                .filter(|&j| within(x, b.timestamps()[j], delay, window))
                .collect()
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; b.len()];
    fn augment(
        i: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none() || augment(owner[j].unwrap(), adj, seen, owner) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let mut n = 0;
    for i in 0..a.len() {
        let mut seen = vec![false; b.len()];
        if augment(i, &adj, &mut seen, &mut owner) {
            n += 1;
        }
    }
    n
}

/// Every pair difference binned directly.
pub fn brute_histogram(
    a: &TagStream,
    b: &TagStream,
    center: i64,
    half_range: u64,
    bin: u64,
) -> Vec<u64> {
    let bins = (2 * half_range).div_ceil(bin) as usize;
    let lo = center as i128 - half_range as i128;
    let mut counts = vec![0u64; bins];
    for &x in a.timestamps() {
        for &y in b.timestamps() {
            let d = y as i128 - x as i128 - lo;
            if d >= 0 && d < bins as i128 * bin as i128 {
                counts[(d / bin as i128) as usize] += 1;
            }
        }
    }
    counts
}

pub fn histogram_matches(
    h: &Histogram,
    center: i64,
    half_range: u64,
    bin: u64,
    reference: &[u64],
) -> bool {
    h.offset_ps == center - half_range as i64 && h.bin_width_ps == bin && h.counts == reference
}

/// A pair of streams with a correlated component at `delay`, uncorrelated
/// extras, repeated timestamps and a couple of channels.
pub fn correlated_streams(
    seed: u64,
    max_tags: usize,
    span: u64,
    delay: i64,
    spread: u64,
) -> (TagStream, TagStream) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=max_tags / 2);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let base = delay.unsigned_abs() + spread + 1;
    for _ in 0..n {
        let t = base + rng.random_range(0..span);
        let ch = rng.random_range(0..2u32);
        a.push((t, ch));
        if rng.random_bool(0.6) {
            let jitter = rng.random_range(0..=2 * spread) as i64 - spread as i64;
            b.push(((t as i64 + delay + jitter) as u64, 2 + ch));
        }
        if rng.random_bool(0.1) {
            a.push((t, 1 - ch));
        }
    }
    let extra = rng.random_range(0..=max_tags / 4);
    for _ in 0..extra {
        b.push((base + rng.random_range(0..span), rng.random_range(2..4u32)));
    }
    let build = |mut v: Vec<(u64, u32)>| {
        v.truncate(max_tags);
        v.sort_unstable();
        let (ts, ch) = v.into_iter().unzip();
        TagStream::from_parts(ts, ch, 1).unwrap()
    };
    (build(a), build(b))
}

/// Homogeneous Poisson arrivals over `[0, duration_ps)`.
pub fn poisson_stream(
    rng: &mut ChaCha8Rng,
    rate_cps: f64,
    duration_ps: u64,
    channel: u32,
) -> TagStream {
    let mut t = 0.0f64;
    let mut ts = Vec::new();
    let mean_gap = 1e12 / rate_cps;
    loop {
        let u: f64 = rng.random();
        t += -mean_gap * (1.0 - u).ln();
        if t >= duration_ps as f64 {
            break;
        }
        ts.push(t as u64);
    }
    TagStream::from_timestamps(ts, channel).unwrap()
}
