use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument or configuration field violates its invariant.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tag stream is not sorted: index {index} ({prev} ps) precedes {index_next} ({next} ps)", index_next = index + 1)]
    Unsorted { index: usize, prev: u64, next: u64 },

    #[error("channel id {0} is used by both arms")]
    ChannelConflict(u32),

    #[error("timestamp overflow: {0} ps does not fit in 64 bits")]
    TimestampOverflow(f64),

    #[error("no significant peak: max bin {max} vs floor {floor:.2} (needs 5 sigma)")]
    NoSignificantPeak { max: u64, floor: f64 },

    #[error("histogram has no peak (all bins equal)")]
    NoPeak,

    #[error("fit is underdetermined: {distinct} distinct angles (need at least 4)")]
    Underdetermined { distinct: usize },

    #[error("fit is nonphysical: {0}")]
    Nonphysical(String),

    #[error("insufficient bases: missing {0}")]
    InsufficientBases(&'static str),

    #[error("corrupt QTAG data at byte {offset}: {reason}")]
    Qtag { offset: u64, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{value} is not finite")))
    }
}

pub(crate) fn ensure_nonneg(name: &'static str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if value < 0.0 {
        return Err(Error::invalid(name, format!("{value} is negative")));
    }
    Ok(())
}

pub(crate) fn ensure_unit(name: &'static str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(name, format!("{value} is outside [0, 1]")));
    }
    Ok(())
}
