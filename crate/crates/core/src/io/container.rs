//! On-disk session container.
//!
//! A container is a directory of four files:
//!
//! - `meta.json`: format version, sample rate, channel names, paradigm, display
//!   geometry, protocol, subject profile and seed.
//! - `eeg.f32le`: little-endian f32 samples, frame-interleaved (all 16 channels
//!   of sample 0, then sample 1, ...). Its length is `4 * 16 * n_samples` bytes.
//! - `events.csv`: `sample_index,group_id,block_index,trial_index,is_target`,
//!   one flash per line, `is_target` written as 0 or 1.
//! - `targets.csv`: `block_index,target_item`.
//!
//! For two samples of a 16-channel recording the payload is 128 bytes; bytes
//! 0..4 hold F3 at sample 0 and bytes 64..68 hold F3 at sample 1.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::paradigm::{DisplayGeometry, FlashEvent, ParadigmId};
use crate::session::ProtocolConfig;
use crate::synth::{ContinuousRecording, SubjectProfile, CHANNELS, N_CHANNELS};

pub const FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const EEG_FILE: &str = "eeg.f32le";
pub const EVENTS_FILE: &str = "events.csv";
pub const TARGETS_FILE: &str = "targets.csv";

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed meta.json: {0}")]
    MalformedMeta(String),
    #[error("unsupported format_version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("montage requires {N_CHANNELS} channels in the standard order: {0}")]
    Montage(String),
    #[error("payload size mismatch: {file} has {actual} bytes, expected {expected}")]
    PayloadSize { file: String, actual: u64, expected: u64 },
    #[error("{file}: {message}")]
    CsvSchema { file: String, message: String },
    #[error("inconsistent container: {0}")]
    Inconsistent(String),
}

impl ContainerError {
    /// Stable numeric code for each failure class.
    pub fn code(&self) -> u8 {
        match self {
            Self::Io { .. } => 10,
            Self::MalformedMeta(_) => 11,
            Self::VersionMismatch { .. } => 12,
            Self::Montage(_) => 13,
            Self::PayloadSize { .. } => 14,
            Self::CsvSchema { .. } => 15,
            Self::Inconsistent(_) => 16,
        }
    }
}

type Result<T> = std::result::Result<T, ContainerError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionMeta {
    pub format_version: u32,
    pub sample_rate_hz: f64,
    pub channels: Vec<String>,
    pub n_samples: usize,
    pub paradigm_id: ParadigmId,
    pub geometry: DisplayGeometry,
    pub protocol: ProtocolConfig,
    pub subject_profile: SubjectProfile,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionContainer {
    pub meta: SessionMeta,
    pub recording: ContinuousRecording,
}

impl SessionContainer {
    pub fn new(recording: ContinuousRecording, protocol: ProtocolConfig, profile: SubjectProfile) -> Self {
        let meta = SessionMeta {
            format_version: FORMAT_VERSION,
            sample_rate_hz: recording.sample_rate_hz,
            channels: recording.channels.clone(),
            n_samples: recording.n_samples(),
            paradigm_id: protocol.paradigm_id,
            geometry: DisplayGeometry::default_for(protocol.paradigm_id),
            seed: profile.seed,
            protocol,
            subject_profile: profile,
        };
        Self { meta, recording }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    sample_index: usize,
    group_id: usize,
    block_index: usize,
    trial_index: usize,
    is_target: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct TargetRow {
    block_index: usize,
    target_item: usize,
}

const EVENT_HEADER: [&str; 5] = ["sample_index", "group_id", "block_index", "trial_index", "is_target"];
const TARGET_HEADER: [&str; 2] = ["block_index", "target_item"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ContainerError + '_ {
    move |source| ContainerError::Io { path: path.to_path_buf(), source }
}

fn csv_err(file: &str, e: impl std::fmt::Display) -> ContainerError {
    ContainerError::CsvSchema { file: file.to_string(), message: e.to_string() }
}

fn check_montage(channels: &[String]) -> Result<()> {
    if channels.len() != N_CHANNELS || channels.iter().zip(CHANNELS).any(|(a, b)| a != b) {
        return Err(ContainerError::Montage(format!("got {} names: {}", channels.len(), channels.join(","))));
    }
    Ok(())
}

pub fn save_session(dir: &Path, container: &SessionContainer) -> Result<()> {
    let rec = &container.recording;
    check_montage(&rec.channels)?;
    if container.meta.channels != rec.channels || container.meta.n_samples != rec.n_samples() {
        return Err(ContainerError::Inconsistent("meta does not describe the recording".into()));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let meta_path = dir.join(META_FILE);
    let meta = serde_json::to_string_pretty(&container.meta).map_err(|e| ContainerError::MalformedMeta(e.to_string()))?;
    fs::write(&meta_path, meta + "\n").map_err(io_err(&meta_path))?;

    let n = rec.n_samples();
    let mut payload = Vec::with_capacity(4 * N_CHANNELS * n);
    for i in 0..n {
        for row in &rec.data {
            payload.extend_from_slice(&row[i].to_le_bytes());
        }
    }
    let eeg_path = dir.join(EEG_FILE);
    fs::write(&eeg_path, payload).map_err(io_err(&eeg_path))?;

    let mut w = csv::Writer::from_path(dir.join(EVENTS_FILE)).map_err(|e| csv_err(EVENTS_FILE, e))?;
    for ev in &rec.events {
        w.serialize(EventRow {
            sample_index: ev.onset_sample,
            group_id: ev.group_id,
            block_index: ev.block_index,
            trial_index: ev.trial_index,
            is_target: ev.is_target as u8,
        })
        .map_err(|e| csv_err(EVENTS_FILE, e))?;
    }
    if rec.events.is_empty() {
        w.write_record(EVENT_HEADER).map_err(|e| csv_err(EVENTS_FILE, e))?;
    }
    w.flush().map_err(io_err(&dir.join(EVENTS_FILE)))?;

    let mut w = csv::Writer::from_path(dir.join(TARGETS_FILE)).map_err(|e| csv_err(TARGETS_FILE, e))?;
    for (block_index, &target_item) in rec.block_targets.iter().enumerate() {
        w.serialize(TargetRow { block_index, target_item }).map_err(|e| csv_err(TARGETS_FILE, e))?;
    }
    if rec.block_targets.is_empty() {
        w.write_record(TARGET_HEADER).map_err(|e| csv_err(TARGETS_FILE, e))?;
    }
    w.flush().map_err(io_err(&dir.join(TARGETS_FILE)))?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, file: &str, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => ContainerError::Io { path: path.to_path_buf(), source },
        other => csv_err(file, format!("{other:?}")),
    })?;
    let found = r.headers().map_err(|e| csv_err(file, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(csv_err(file, format!("header {:?}, expected {:?}", found.iter().collect::<Vec<_>>(), header)));
    }
    r.deserialize().map(|row| row.map_err(|e| csv_err(file, e))).collect()
}

pub fn load_session(dir: &Path) -> Result<SessionContainer> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ContainerError::MalformedMeta(e.to_string()))?;
    // check the version first so older layouts get a clear message
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(ContainerError::VersionMismatch { found: v as u32, expected: FORMAT_VERSION })
        }
        None => return Err(ContainerError::MalformedMeta("missing format_version".into())),
    }
    if let Some(names) = value.get("channels").and_then(|v| v.as_array()) {
        let names: Vec<String> = names.iter().map(|n| n.as_str().unwrap_or_default().to_string()).collect();
        check_montage(&names)?;
    }
    let meta: SessionMeta = serde_json::from_value(value).map_err(|e| ContainerError::MalformedMeta(e.to_string()))?;

    let eeg_path = dir.join(EEG_FILE);
    let payload = fs::read(&eeg_path).map_err(io_err(&eeg_path))?;
    let expected = 4 * N_CHANNELS as u64 * meta.n_samples as u64;
    if payload.len() as u64 != expected {
        return Err(ContainerError::PayloadSize {
            file: EEG_FILE.into(),
            actual: payload.len() as u64,
            expected,
        });
    }
    let mut data = vec![Vec::with_capacity(meta.n_samples); N_CHANNELS];
    for frame in payload.chunks_exact(4 * N_CHANNELS) {
        for (row, bytes) in data.iter_mut().zip(frame.chunks_exact(4)) {
            row.push(f32::from_le_bytes(bytes.try_into().expect("4-byte chunk")));
        }
    }

    let events: Vec<EventRow> = read_csv(&dir.join(EVENTS_FILE), EVENTS_FILE, &EVENT_HEADER)?;
    let events = events
        .into_iter()
        .map(|e| {
            let is_target = match e.is_target {
                0 => false,
                1 => true,
                v => return Err(csv_err(EVENTS_FILE, format!("is_target must be 0 or 1, got {v}"))),
            };
            Ok(FlashEvent {
                onset_sample: e.sample_index,
                group_id: e.group_id,
                block_index: e.block_index,
                trial_index: e.trial_index,
                is_target,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let targets: Vec<TargetRow> = read_csv(&dir.join(TARGETS_FILE), TARGETS_FILE, &TARGET_HEADER)?;
    if targets.iter().enumerate().any(|(i, t)| t.block_index != i) {
        return Err(csv_err(TARGETS_FILE, "block_index must run 0, 1, 2, ..."));
    }

    let recording = ContinuousRecording {
        sample_rate_hz: meta.sample_rate_hz,
        channels: meta.channels.clone(),
        data,
        events,
        block_targets: targets.into_iter().map(|t| t.target_item).collect(),
    };
    recording.validate().map_err(|e| ContainerError::Inconsistent(e.to_string()))?;
    Ok(SessionContainer { meta, recording })
}
