//! Synthetic EEG for a scheduled speller session.
//!
//! Each channel is the sum of three parts:
//!
//! * **Background**: white Gaussian noise through the one-pole filter
//!   `y[n] = rho * y[n-1] + sqrt(1 - rho^2) * e[n]` with `rho = 0.9` (corner near
//!   4.3 Hz, slope ~1/f^2 above it, flat below), started from its stationary
//!   distribution and scaled so the RMS is `noise_rms_uv`.
//! * **Alpha**: on posterior channels, a 10 Hz narrow-band process (AR(2)
//!   resonator, 2 Hz bandwidth, unit variance) scaled by `sqrt(2) * a(t)` with
//!   `a(t) = alpha_base_uv * (1 + alpha_drift_rate * (offset + t / T))`, so its RMS
//!   equals that of a sine of amplitude `a(t)`. The phase wanders; a fixed-phase
//!   sine would lock to the 200 ms SOA and cancel out of the discriminant.
//! * **ERPs**: every flash adds a Gaussian bump per component,
//!   `amplitude * gain[ch] * exp(-(t - latency)^2 / (2 (width / 2.355)^2))` over the
//!   1 s after onset, at full scale for target flashes and scaled by
//!   `nontarget_gain` otherwise. Overlapping responses add linearly.
//!
//! Channels draw from independent ChaCha streams keyed by (recording stream,
//! channel, component), so synthesizing a subset of channels reproduces those
//! channels exactly.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::paradigm::{FlashCode, FlashEvent, SAMPLE_RATE_HZ};

/// Recording montage, in storage order.
pub const CHANNELS: [&str; 16] = [
    "F3", "Fz", "F4", "FC1", "FC2", "C3", "Cz", "C4", "P7", "P3", "Pz", "P4", "P8", "O1", "Oz", "O2",
];
pub const N_CHANNELS: usize = CHANNELS.len();

/// Channels carrying the alpha rhythm.
pub const ALPHA_CHANNELS: [&str; 8] = ["P7", "P3", "Pz", "P4", "P8", "O1", "Oz", "O2"];

pub const PINK_POLE: f64 = 0.9;
pub const ALPHA_FREQ_HZ: f64 = 10.0;
pub const ALPHA_BANDWIDTH_HZ: f64 = 2.0;
/// Length of the ERP response added after each onset.
pub const TEMPLATE_SAMPLES: usize = 256;

const FWHM_TO_SIGMA: f64 = 2.355;
const ALPHA_BURN_IN: usize = 512;

pub fn channel_index(name: &str) -> Option<usize> {
    CHANNELS.iter().position(|c| *c == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErpKind {
    N200,
    P300,
    N400,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErpComponent {
    pub name: ErpKind,
    pub latency_ms: f64,
    /// Full width at half maximum.
    pub width_ms: f64,
    pub amplitude_uv: f64,
    /// Per-channel gain in [0, 1]; channels not listed get 0.
    pub channel_gain: BTreeMap<String, f64>,
}

impl ErpComponent {
    fn gain(&self, channel: &str) -> f64 {
        self.channel_gain.get(channel).copied().unwrap_or(0.0)
    }

    /// Value of the bump `t_ms` after onset on a channel of unit gain.
    pub fn value_at(&self, t_ms: f64) -> f64 {
        let sigma = self.width_ms / FWHM_TO_SIGMA;
        let z = (t_ms - self.latency_ms) / sigma;
        self.amplitude_uv * (-0.5 * z * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub erp_components: Vec<ErpComponent>,
    pub nontarget_gain: f64,
    pub noise_rms_uv: f64,
    pub alpha_base_uv: f64,
    /// Relative alpha increase over one full session.
    pub alpha_drift_rate: f64,
    pub seed: u64,
}

fn gains(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(c, g)| (c.to_string(), *g)).collect()
}

impl SubjectProfile {
    /// Default subject: templates of the three components and a background
    /// level calibrated for 80-90 % online accuracy.
    pub fn calibrated(seed: u64) -> Self {
        let n200 = ErpComponent {
            name: ErpKind::N200,
            latency_ms: 200.0,
            width_ms: 80.0,
            amplitude_uv: -3.0,
            channel_gain: gains(&[
                ("P7", 0.8), ("P3", 0.6), ("Pz", 0.6), ("P4", 0.6), ("P8", 0.8),
                ("O1", 1.0), ("Oz", 1.0), ("O2", 1.0), ("C3", 0.2), ("Cz", 0.2), ("C4", 0.2),
            ]),
        };
        let p300 = ErpComponent {
            name: ErpKind::P300,
            latency_ms: 350.0,
            width_ms: 150.0,
            amplitude_uv: 6.0,
            channel_gain: gains(&[
                ("F3", 0.4), ("Fz", 0.5), ("F4", 0.4), ("FC1", 0.6), ("FC2", 0.6),
                ("C3", 0.7), ("Cz", 0.9), ("C4", 0.7), ("P7", 0.5), ("P3", 0.8),
                ("Pz", 1.0), ("P4", 0.8), ("P8", 0.5), ("O1", 0.5), ("Oz", 0.5), ("O2", 0.5),
            ]),
        };
        let n400 = ErpComponent {
            name: ErpKind::N400,
            latency_ms: 450.0,
            width_ms: 120.0,
            amplitude_uv: -3.0,
            channel_gain: gains(&[
                ("F3", 0.8), ("Fz", 1.0), ("F4", 0.8), ("FC1", 1.0), ("FC2", 1.0),
                ("C3", 0.6), ("Cz", 0.9), ("C4", 0.6), ("P3", 0.3), ("Pz", 0.4), ("P4", 0.3),
            ]),
        };
        Self {
            erp_components: vec![n200, p300, n400],
            nontarget_gain: 0.1,
            noise_rms_uv: 7.0,
            alpha_base_uv: 6.0,
            alpha_drift_rate: 2.0,
            seed,
        }
    }

    /// Same subject with every ERP amplitude multiplied by `factor`.
    pub fn with_erp_scale(mut self, factor: f64) -> Self {
        for c in &mut self.erp_components {
            c.amplitude_uv *= factor;
        }
        self
    }

    pub fn component(&self, kind: ErpKind) -> Option<&ErpComponent> {
        self.erp_components.iter().find(|c| c.name == kind)
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.erp_components {
            if !(c.width_ms.is_finite() && c.width_ms > 0.0) {
                return Err(invalid(format!("{:?} width_ms must be positive", c.name)));
            }
            if !(c.latency_ms.is_finite() && c.amplitude_uv.is_finite()) {
                return Err(invalid(format!("{:?} parameters must be finite", c.name)));
            }
            let sign_ok = match c.name {
                ErpKind::P300 => c.amplitude_uv >= 0.0,
                ErpKind::N200 | ErpKind::N400 => c.amplitude_uv <= 0.0,
            };
            if !sign_ok {
                return Err(invalid(format!("{:?} amplitude has the wrong polarity", c.name)));
            }
            for (ch, g) in &c.channel_gain {
                if channel_index(ch).is_none() {
                    return Err(invalid(format!("unknown channel '{ch}' in {:?} gains", c.name)));
                }
                if !(0.0..=1.0).contains(g) {
                    return Err(invalid(format!("{:?} gain on {ch} outside [0, 1]", c.name)));
                }
            }
        }
        if !(0.0..1.0).contains(&self.nontarget_gain) {
            return Err(invalid("nontarget_gain must lie in [0, 1)"));
        }
        if !(self.noise_rms_uv.is_finite() && self.noise_rms_uv >= 0.0) {
            return Err(invalid("noise_rms_uv must be non-negative"));
        }
        if !(self.alpha_base_uv.is_finite() && self.alpha_base_uv >= 0.0) {
            return Err(invalid("alpha_base_uv must be non-negative"));
        }
        if !self.alpha_drift_rate.is_finite() || self.alpha_drift_rate < -1.0 {
            return Err(invalid("alpha_drift_rate must be finite and >= -1"));
        }
        Ok(())
    }

    /// Response to a target flash on `channel`, sampled at 256 Hz from onset.
    pub fn template(&self, channel: &str) -> Vec<f64> {
        (0..TEMPLATE_SAMPLES)
            .map(|k| {
                let t_ms = k as f64 * 1000.0 / SAMPLE_RATE_HZ;
                self.erp_components
                    .iter()
                    .map(|c| c.gain(channel) * c.value_at(t_ms))
                    .sum()
            })
            .collect()
    }
}

/// P300 amplitude over background RMS; infinite for a noiseless subject.
pub fn target_snr(profile: &SubjectProfile) -> f64 {
    if profile.noise_rms_uv == 0.0 {
        return f64::INFINITY;
    }
    let amplitude = profile.component(ErpKind::P300).map_or(0.0, |c| c.amplitude_uv.abs());
    amplitude / profile.noise_rms_uv
}

/// Flash events laid out on a recording timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub events: Vec<FlashEvent>,
    pub block_targets: Vec<usize>,
    pub n_samples: usize,
    /// Selects the noise streams; two recordings of one subject use different streams.
    pub stream: u64,
    /// Session fraction already on the fatigue clock when the recording starts.
    pub fatigue_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRecording {
    pub sample_rate_hz: f64,
    pub channels: Vec<String>,
    /// One row of microvolts per channel.
    pub data: Vec<Vec<f32>>,
    pub events: Vec<FlashEvent>,
    pub block_targets: Vec<usize>,
}

impl ContinuousRecording {
    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }

    pub fn channel(&self, name: &str) -> Option<&[f32]> {
        self.channels
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz != SAMPLE_RATE_HZ {
            return Err(invalid(format!("sample rate must be 256 Hz, got {}", self.sample_rate_hz)));
        }
        if self.channels.len() != N_CHANNELS || self.data.len() != N_CHANNELS {
            return Err(invalid(format!(
                "montage requires {N_CHANNELS} channels, got {}",
                self.channels.len()
            )));
        }
        if self.channels.iter().zip(CHANNELS).any(|(a, b)| a != b) {
            return Err(invalid("channel names differ from the montage order"));
        }
        let n = self.n_samples();
        if self.data.iter().any(|row| row.len() != n) {
            return Err(invalid("channel rows have different lengths"));
        }
        check_events(&self.events, &self.block_targets, n)
    }
}

/// Samples after onset that an epoch needs (800 ms at 256 Hz).
pub(crate) const POST_STIMULUS_SAMPLES: usize = 205;

fn check_events(events: &[FlashEvent], block_targets: &[usize], n_samples: usize) -> Result<()> {
    for (i, ev) in events.iter().enumerate() {
        if i > 0 && ev.onset_sample <= events[i - 1].onset_sample {
            return Err(invalid(format!("event {i} is not after event {}", i - 1)));
        }
        if ev.onset_sample + POST_STIMULUS_SAMPLES > n_samples {
            return Err(invalid(format!(
                "event {i} at sample {} overruns the recording of {n_samples} samples",
                ev.onset_sample
            )));
        }
        if ev.block_index >= block_targets.len() {
            return Err(invalid(format!("event {i} refers to missing block {}", ev.block_index)));
        }
        if ev.group_id >= crate::paradigm::N_GROUPS {
            return Err(invalid(format!("event {i} has group {}", ev.group_id)));
        }
    }
    Ok(())
}

fn stream_id(recording_stream: u64, channel: usize, component: u64) -> u64 {
    (recording_stream << 16) | ((channel as u64) << 4) | component
}

fn channel_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn pink_noise(rng: &mut ChaCha8Rng, n: usize, rms: f64) -> Vec<f64> {
    let drive = (1.0 - PINK_POLE * PINK_POLE).sqrt();
    let mut y: f64 = rng.sample(StandardNormal);
    (0..n)
        .map(|i| {
            if i > 0 {
                let e: f64 = rng.sample(StandardNormal);
                y = PINK_POLE * y + drive * e;
            }
            rms * y
        })
        .collect()
}

/// Unit-variance narrow-band process centered on the alpha frequency.
fn alpha_process(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let r = (-PI * ALPHA_BANDWIDTH_HZ / SAMPLE_RATE_HZ).exp();
    let a1 = 2.0 * r * (2.0 * PI * ALPHA_FREQ_HZ / SAMPLE_RATE_HZ).cos();
    let a2 = -r * r;
    // stationary variance of x[n] = a1 x[n-1] + a2 x[n-2] + e[n]
    let var = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2).powi(2) - a1 * a1));
    let scale = var.sqrt().recip();
    let (mut x1, mut x2) = (0.0f64, 0.0f64);
    let mut out = Vec::with_capacity(n);
    for i in 0..n + ALPHA_BURN_IN {
        let e: f64 = rng.sample(StandardNormal);
        let x = a1 * x1 + a2 * x2 + e;
        x2 = x1;
        x1 = x;
        if i >= ALPHA_BURN_IN {
            out.push(x * scale);
        }
    }
    out
}

/// Synthesizes only the listed channels (montage indices), in the given order.
pub fn synthesize_channels(
    profile: &SubjectProfile,
    schedule: &Schedule,
    flash_code: &FlashCode,
    channels: &[usize],
) -> Result<Vec<Vec<f32>>> {
    profile.validate()?;
    if schedule.events.is_empty() {
        return Err(invalid("schedule has no events"));
    }
    check_events(&schedule.events, &schedule.block_targets, schedule.n_samples)?;
    for (i, ev) in schedule.events.iter().enumerate() {
        let target = schedule.block_targets[ev.block_index];
        if target >= flash_code.n_items() {
            return Err(invalid(format!("block {} target {target} is not an item", ev.block_index)));
        }
        if flash_code.contains(ev.group_id, target) != ev.is_target {
            return Err(invalid(format!("event {i} target flag disagrees with the flash code")));
        }
    }

    let n = schedule.n_samples;
    channels
        .iter()
        .map(|&ch| {
            let name = *CHANNELS
                .get(ch)
                .ok_or_else(|| invalid(format!("channel index {ch} outside the montage")))?;
            let mut signal = if profile.noise_rms_uv > 0.0 {
                let mut rng = channel_rng(profile.seed, stream_id(schedule.stream, ch, 0));
                pink_noise(&mut rng, n, profile.noise_rms_uv)
            } else {
                vec![0.0; n]
            };

            if profile.alpha_base_uv > 0.0 && ALPHA_CHANNELS.contains(&name) {
                let mut rng = channel_rng(profile.seed, stream_id(schedule.stream, ch, 1));
                let carrier = alpha_process(&mut rng, n);
                for (i, (s, u)) in signal.iter_mut().zip(carrier).enumerate() {
                    let clock = schedule.fatigue_offset + i as f64 / n as f64;
                    let amp = profile.alpha_base_uv * (1.0 + profile.alpha_drift_rate * clock);
                    *s += SQRT_2 * amp * u;
                }
            }

            let template = profile.template(name);
            if template.iter().any(|v| *v != 0.0) {
                for ev in &schedule.events {
                    let scale = if ev.is_target { 1.0 } else { profile.nontarget_gain };
                    if scale == 0.0 {
                        continue;
                    }
                    let end = (ev.onset_sample + TEMPLATE_SAMPLES).min(n);
                    for (s, t) in signal[ev.onset_sample..end].iter_mut().zip(&template) {
                        *s += scale * t;
                    }
                }
            }
            Ok(signal.into_iter().map(|v| v as f32).collect())
        })
        .collect()
}

pub fn synthesize_recording(
    profile: &SubjectProfile,
    schedule: &Schedule,
    flash_code: &FlashCode,
) -> Result<ContinuousRecording> {
    let all: Vec<usize> = (0..N_CHANNELS).collect();
    let data = synthesize_channels(profile, schedule, flash_code, &all)?;
    Ok(ContinuousRecording {
        sample_rate_hz: SAMPLE_RATE_HZ,
        channels: CHANNELS.iter().map(|c| c.to_string()).collect(),
        data,
        events: schedule.events.clone(),
        block_targets: schedule.block_targets.clone(),
    })
}
