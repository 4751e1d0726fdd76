//! Picosecond time-tag streams.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    pub timestamp_ps: u64,
    pub channel: u32,
}

/// Time-ordered detector events, stored column-wise.
///
/// Tags are ordered by timestamp, and by channel id among equal timestamps.
/// Every timestamp is a multiple of `resolution_ps`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagStream {
    timestamps: Vec<u64>,
    channels: Vec<u32>,
    resolution_ps: u64,
}

impl Default for TagStream {
    fn default() -> Self {
        Self::empty(1)
    }
}

impl TagStream {
    pub fn empty(resolution_ps: u64) -> Self {
        Self {
            timestamps: Vec::new(),
            channels: Vec::new(),
            resolution_ps: resolution_ps.max(1),
        }
    }

    /// Builds a stream and runs the validator over it.
    pub fn from_parts(
        timestamps: Vec<u64>,
        channels: Vec<u32>,
        resolution_ps: u64,
    ) -> Result<Self> {
        if timestamps.len() != channels.len() {
            return Err(Error::invalid(
                "channels",
                format!(
                    "{} channels for {} timestamps",
                    channels.len(),
                    timestamps.len()
                ),
            ));
        }
        let s = Self {
            timestamps,
            channels,
            resolution_ps,
        };
        s.validate()?;
        Ok(s)
    }

    /// Single-channel stream from already sorted timestamps at 1 ps resolution.
    pub fn from_timestamps(timestamps: Vec<u64>, channel: u32) -> Result<Self> {
        let channels = vec![channel; timestamps.len()];
        Self::from_parts(timestamps, channels, 1)
    }

    /// Sorts arbitrary tags into a valid stream.
    pub fn from_unsorted(mut tags: Vec<TimeTag>, resolution_ps: u64) -> Result<Self> {
        tags.sort_unstable();
        let timestamps = tags.iter().map(|t| t.timestamp_ps).collect();
        let channels = tags.iter().map(|t| t.channel).collect();
        Self::from_parts(timestamps, channels, resolution_ps)
    }

    /// Skips validation; callers guarantee the ordering and quantization.
    pub(crate) fn from_parts_unchecked(
        timestamps: Vec<u64>,
        channels: Vec<u32>,
        resolution_ps: u64,
    ) -> Self {
        debug_assert_eq!(timestamps.len(), channels.len());
        Self {
            timestamps,
            channels,
            resolution_ps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution_ps < 1 {
            return Err(Error::invalid("resolution_ps", "must be at least 1 ps"));
        }
        for (i, w) in self.timestamps.windows(2).enumerate() {
            let out_of_order =
                w[0] > w[1] || (w[0] == w[1] && self.channels[i] > self.channels[i + 1]);
            if out_of_order {
                return Err(Error::Unsorted {
                    index: i,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        if self.resolution_ps > 1 {
            if let Some(t) = self
                .timestamps
                .iter()
                .find(|&&t| t % self.resolution_ps != 0)
            {
                return Err(Error::invalid(
                    "timestamp",
                    format!(
                        "{t} ps is not a multiple of the {} ps resolution",
                        self.resolution_ps
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[u64] {
        &self.timestamps
    }

    pub fn channels(&self) -> &[u32] {
        &self.channels
    }

    pub fn resolution_ps(&self) -> u64 {
        self.resolution_ps
    }

    pub fn get(&self, i: usize) -> Option<TimeTag> {
        Some(TimeTag {
            timestamp_ps: *self.timestamps.get(i)?,
            channel: self.channels[i],
        })
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = TimeTag> + '_ {
        self.timestamps
            .iter()
            .zip(&self.channels)
            .map(|(&timestamp_ps, &channel)| TimeTag {
                timestamp_ps,
                channel,
            })
    }

    pub fn first_ps(&self) -> Option<u64> {
        self.timestamps.first().copied()
    }

    pub fn last_ps(&self) -> Option<u64> {
        self.timestamps.last().copied()
    }

    /// Time from the first to the last tag.
    pub fn span_ps(&self) -> u64 {
        match (self.first_ps(), self.last_ps()) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        }
    }

    /// Sorted set of channel ids present in the stream.
    pub fn channel_set(&self) -> Vec<u32> {
        let mut set = self.channels.clone();
        set.sort_unstable();
        set.dedup();
        set
    }

    /// Copy with every timestamp moved by `delta_ps`.
    pub fn shifted(&self, delta_ps: i64) -> Result<Self> {
        let mut ts = Vec::with_capacity(self.len());
        for &t in &self.timestamps {
            let moved = t as i128 + delta_ps as i128;
            if moved < 0 || moved > u64::MAX as i128 {
                return Err(Error::TimestampOverflow(moved as f64));
            }
            ts.push(moved as u64);
        }
        let s = Self {
            timestamps: ts,
            channels: self.channels.clone(),
            resolution_ps: self.resolution_ps,
        };
        if self.resolution_ps > 1 && !delta_ps.unsigned_abs().is_multiple_of(self.resolution_ps) {
            return Ok(Self {
                resolution_ps: 1,
                ..s
            });
        }
        Ok(s)
    }

    /// Tags on a single channel.
    pub fn filter_channel(&self, channel: u32) -> Self {
        let mut timestamps = Vec::new();
        for (t, c) in self.iter().map(|t| (t.timestamp_ps, t.channel)) {
            if c == channel {
                timestamps.push(t);
            }
        }
        let n = timestamps.len();
        Self::from_parts_unchecked(timestamps, vec![channel; n], self.resolution_ps)
    }

    /// Time-ordered merge of several streams. The result's resolution is the
    /// largest common quantum, which is always at least 1 ps.
    pub fn merge(streams: &[&TagStream]) -> Self {
        let mut tags: Vec<TimeTag> = streams.iter().flat_map(|s| s.iter()).collect();
        tags.sort_unstable();
        let resolution = streams
            .iter()
            .map(|s| s.resolution_ps)
            .reduce(gcd)
            .unwrap_or(1);
        Self::from_parts_unchecked(
            tags.iter().map(|t| t.timestamp_ps).collect(),
            tags.iter().map(|t| t.channel).collect(),
            resolution.max(1),
        )
    }

    pub fn into_parts(self) -> (Vec<u64>, Vec<u32>, u64) {
        (self.timestamps, self.channels, self.resolution_ps)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
