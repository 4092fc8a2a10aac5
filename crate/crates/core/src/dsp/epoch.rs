use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::paradigm::{FlashEvent, SAMPLE_RATE_HZ};
use crate::synth::N_CHANNELS;

pub const PRE_STIMULUS_MS: f64 = 100.0;
pub const POST_STIMULUS_MS: f64 = 800.0;
/// 100 ms at 256 Hz, rounded.
pub const PRE_SAMPLES: usize = 26;
/// 800 ms at 256 Hz, rounded.
pub const POST_SAMPLES: usize = 205;
pub const EPOCH_SAMPLES: usize = PRE_SAMPLES + POST_SAMPLES;
pub const DECIMATION: usize = 7;
pub const SAMPLES_PER_CHANNEL: usize = POST_SAMPLES.div_ceil(DECIMATION);
pub const FEATURE_LEN: usize = N_CHANNELS * SAMPLES_PER_CHANNEL;

pub fn ms_to_samples(ms: f64) -> usize {
    (ms * SAMPLE_RATE_HZ / 1000.0).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    /// Channels x samples, prestimulus samples first.
    pub data: Vec<Vec<f64>>,
    pub pre_samples: usize,
    pub onset_sample: usize,
    pub is_target: bool,
    pub block_index: usize,
    pub trial_index: usize,
    pub group_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// +1 for target flashes, -1 otherwise.
    pub label: f64,
}

impl FeatureVector {
    /// Values followed by the constant bias input.
    pub fn with_bias(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.push(1.0);
        v
    }
}

fn cut(data: &[Vec<f64>], event: &FlashEvent, index: usize, pre: usize, post: usize) -> Result<Epoch> {
    let len = data.first().map_or(0, Vec::len);
    let start = event.onset_sample as i64 - pre as i64;
    let end = (event.onset_sample + post) as i64;
    if start < 0 || end as usize > len {
        return Err(Error::EpochOutOfBounds { index, start, end, len });
    }
    let (s, e) = (start as usize, end as usize);
    Ok(Epoch {
        data: data.iter().map(|row| row[s..e].to_vec()).collect(),
        pre_samples: pre,
        onset_sample: event.onset_sample,
        is_target: event.is_target,
        block_index: event.block_index,
        trial_index: event.trial_index,
        group_id: event.group_id,
    })
}

/// One epoch per event covering `[onset - pre_ms, onset + post_ms)`.
pub fn extract_epochs(
    data: &[Vec<f64>],
    events: &[FlashEvent],
    pre_ms: f64,
    post_ms: f64,
) -> Result<Vec<Epoch>> {
    let (pre, post) = (ms_to_samples(pre_ms), ms_to_samples(post_ms));
    events
        .iter()
        .enumerate()
        .map(|(i, ev)| cut(data, ev, i, pre, post))
        .collect()
}

/// Subtracts each channel's prestimulus mean.
pub fn baseline_correct(epoch: &Epoch) -> Epoch {
    let pre = epoch.pre_samples;
    let data = epoch
        .data
        .iter()
        .map(|row| {
            let mean = if pre == 0 { 0.0 } else { row[..pre].iter().sum::<f64>() / pre as f64 };
            row.iter().map(|v| v - mean).collect()
        })
        .collect();
    Epoch { data, ..epoch.clone() }
}

/// Every seventh post-stimulus sample (indices 0, 7, ..., 203) of each
/// channel, channels concatenated in montage order.
pub fn features(epoch: &Epoch) -> Result<FeatureVector> {
    if epoch.data.len() != N_CHANNELS {
        return Err(invalid(format!("epoch has {} channels, expected {N_CHANNELS}", epoch.data.len())));
    }
    if epoch.pre_samples != PRE_SAMPLES || epoch.data.iter().any(|r| r.len() != EPOCH_SAMPLES) {
        return Err(invalid(format!(
            "epoch must hold {PRE_SAMPLES} + {POST_SAMPLES} samples per channel"
        )));
    }
    let values: Vec<f64> = epoch
        .data
        .iter()
        .flat_map(|row| row[PRE_SAMPLES..].iter().step_by(DECIMATION).copied())
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite feature value"));
    }
    debug_assert_eq!(values.len(), FEATURE_LEN);
    Ok(FeatureVector {
        values,
        label: if epoch.is_target { 1.0 } else { -1.0 },
    })
}

/// Epoch, baseline-correct and decimate every event of an analysis-filtered recording.
pub fn feature_vectors(data: &[Vec<f64>], events: &[FlashEvent]) -> Result<Vec<FeatureVector>> {
    events
        .iter()
        .enumerate()
        .map(|(i, ev)| {
            let epoch = cut(data, ev, i, PRE_SAMPLES, POST_SAMPLES)?;
            features(&baseline_correct(&epoch))
        })
        .collect()
}
