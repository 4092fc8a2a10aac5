//! Signal conditioning and feature extraction.

mod epoch;
mod filter;
mod spectral;

pub use epoch::*;
pub use filter::*;
pub use spectral::*;

use crate::error::Result;
use crate::paradigm::FlashEvent;
use crate::synth::ContinuousRecording;

/// Runs every channel of `recording` through the recorder's filter chain and
/// stores the result back at single precision.
pub fn acquire(mut recording: ContinuousRecording) -> Result<ContinuousRecording> {
    let filters = acquisition_filters(recording.sample_rate_hz)?;
    for row in &mut recording.data {
        *row = filter_row(&filters, row)?;
    }
    Ok(recording)
}

/// One single-precision channel through a filter chain, computed in double precision.
pub fn filter_row(filters: &[FilterCoefficients], row: &[f32]) -> Result<Vec<f32>> {
    let x: Vec<f64> = row.iter().map(|v| *v as f64).collect();
    Ok(apply_chain(filters, &x)?.into_iter().map(|v| v as f32).collect())
}

/// Analysis-filtered copy of every channel, in double precision.
pub fn analysis_filtered(recording: &ContinuousRecording) -> Result<Vec<Vec<f64>>> {
    let filter = analysis_filter(recording.sample_rate_hz)?;
    recording
        .data
        .iter()
        .map(|row| {
            let x: Vec<f64> = row.iter().map(|v| *v as f64).collect();
            apply_filter(&filter, &x)
        })
        .collect()
}

/// Feature vectors for `events` of a recording: analysis filter, epochs, baseline, decimation.
pub fn recording_features(
    recording: &ContinuousRecording,
    events: &[FlashEvent],
) -> Result<Vec<FeatureVector>> {
    let filtered = analysis_filtered(recording)?;
    feature_vectors(&filtered, events)
}
