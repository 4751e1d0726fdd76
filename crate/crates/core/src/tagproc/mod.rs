//! Time-tag correlation: histograms, coincidence counting, delay search.

pub mod coincidence;
pub mod delay;
pub mod histogram;

pub use coincidence::{
    car_vs_window, count_coincidences, count_coincidences_with, default_accidental_offset,
    match_count, matched_pairs, CoincidenceOptions,
};
pub use delay::{find_delay, find_delay_with, DelaySearchSpec};
pub use histogram::{cross_correlate, cross_correlate_with, histogram_fwhm, Histogram};
