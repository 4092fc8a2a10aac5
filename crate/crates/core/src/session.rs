//! Offline calibration and online copy-spelling runs over synthetic or loaded recordings.
//!
//! Every trial block opens with a 4 s cue/feedback period, followed by its
//! trials back to back. Offline runs are recorded one after another; the
//! breaks between them are not part of the recording.
//!
//! An online recording always holds `max_trials` trials per block. Decoding
//! replays it trial by trial and stops each block by the adaptive rule, so the
//! same recording can be decoded again from disk. Session time is counted
//! from the trials actually used plus the feedback periods.

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::blda::{self, BldaConfig, BldaModel};
use crate::decoder::{StopStatus, StoppingState, DEFAULT_MAX_TRIALS, DEFAULT_MIN_TRIALS};
use crate::dsp::{self, FeatureVector, FEATURE_LEN, POST_SAMPLES};
use crate::error::{invalid, Result};
use crate::paradigm::{
    build_flash_code, flash_offset_samples, schedule_trial, FlashCode, FlashEvent, ParadigmId,
    N_GROUPS, N_ITEMS, SAMPLE_RATE_HZ,
};
use crate::synth::{self, ContinuousRecording, Schedule, SubjectProfile};

const COPY_TARGET_SEED: u64 = 0x5eed_42;
const OFFLINE_TARGET_SEED: u64 = 0x5eed_15;
const LEAD_OUT_S: f64 = 1.0;
const SCHEDULE_STREAM: u64 = 0xffff;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineProtocol {
    pub runs: usize,
    pub blocks_per_run: usize,
    pub trials_per_block: usize,
    pub inter_run_break_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineProtocol {
    pub blocks: usize,
    pub feedback_s: f64,
    pub min_trials: usize,
    pub max_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub soa_ms: f64,
    pub trial_s: f64,
    pub offline: OfflineProtocol,
    pub online: OnlineProtocol,
    pub paradigm_id: ParadigmId,
    /// Target item of each online block.
    pub copy_targets: Vec<usize>,
    /// Target item of each offline block.
    pub offline_targets: Vec<usize>,
    /// Session fraction already on the fatigue clock when the online run starts.
    #[serde(default)]
    pub fatigue_offset: f64,
}

/// `n` items drawn from repeated shuffles of all 42, so every item appears
/// once before any repeats.
fn covering_sequence(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut round: Vec<usize> = (0..N_ITEMS).collect();
        round.shuffle(&mut rng);
        out.extend(round.into_iter().take(n - out.len()));
    }
    out
}

pub fn default_copy_targets(blocks: usize) -> Vec<usize> {
    covering_sequence(blocks, COPY_TARGET_SEED)
}

impl ProtocolConfig {
    pub fn standard(paradigm_id: ParadigmId) -> Self {
        let offline = OfflineProtocol {
            runs: 3,
            blocks_per_run: 5,
            trials_per_block: 16,
            inter_run_break_s: 180.0,
        };
        let online = OnlineProtocol {
            blocks: 42,
            feedback_s: 4.0,
            min_trials: DEFAULT_MIN_TRIALS,
            max_trials: DEFAULT_MAX_TRIALS,
        };
        Self {
            soa_ms: 200.0,
            trial_s: 2.4,
            offline_targets: covering_sequence(offline.runs * offline.blocks_per_run, OFFLINE_TARGET_SEED),
            copy_targets: default_copy_targets(online.blocks),
            offline,
            online,
            paradigm_id,
            fatigue_offset: 0.0,
        }
    }

    pub fn offline_blocks(&self) -> usize {
        self.offline.runs * self.offline.blocks_per_run
    }

    pub fn validate(&self) -> Result<()> {
        if (self.trial_s - N_GROUPS as f64 * self.soa_ms / 1000.0).abs() > 1e-9 {
            return Err(invalid(format!(
                "trial_s {} differs from 12 x SOA {} ms",
                self.trial_s, self.soa_ms
            )));
        }
        if (self.soa_ms - 200.0).abs() > 1e-9 {
            return Err(invalid("the flash scheduler runs at a 200 ms SOA"));
        }
        if self.copy_targets.len() != self.online.blocks {
            return Err(invalid(format!(
                "{} copy targets for {} online blocks",
                self.copy_targets.len(),
                self.online.blocks
            )));
        }
        if self.offline_targets.len() != self.offline_blocks() {
            return Err(invalid(format!(
                "{} offline targets for {} offline blocks",
                self.offline_targets.len(),
                self.offline_blocks()
            )));
        }
        if self.copy_targets.iter().chain(&self.offline_targets).any(|t| *t >= N_ITEMS) {
            return Err(invalid("target index outside the 42 items"));
        }
        if self.online.min_trials < 2 || self.online.max_trials < self.online.min_trials {
            return Err(invalid("online trial limits must satisfy 2 <= min <= max"));
        }
        if self.offline.trials_per_block == 0 || self.online.blocks == 0 || self.offline_blocks() == 0 {
            return Err(invalid("protocol needs at least one block and trial"));
        }
        if !(self.online.feedback_s >= 0.0 && self.offline.inter_run_break_s >= 0.0) {
            return Err(invalid("durations must be non-negative"));
        }
        if !(self.fatigue_offset.is_finite() && self.fatigue_offset >= 0.0) {
            return Err(invalid("fatigue_offset must be non-negative"));
        }
        Ok(())
    }
}

/// Which recording of a subject a schedule belongs to; selects its noise streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordingKind {
    Offline,
    Online,
}

pub fn recording_stream(paradigm: ParadigmId, kind: RecordingKind) -> u64 {
    let p = match paradigm {
        ParadigmId::MsP => 0,
        ParadigmId::LsP => 1,
    };
    let k = match kind {
        RecordingKind::Offline => 1,
        RecordingKind::Online => 2,
    };
    p * 4 + k
}

/// Lays out `trials_per_block` randomized trials for each target, each block
/// preceded by `cue_s` seconds without flashes.
pub fn build_schedule(
    targets: &[usize],
    trials_per_block: usize,
    cue_s: f64,
    code: &FlashCode,
    seed: u64,
    stream: u64,
) -> Schedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 16) | SCHEDULE_STREAM);
    let cue = (cue_s * SAMPLE_RATE_HZ).round() as usize;
    let block_flashes = trials_per_block * N_GROUPS;
    let mut events = Vec::with_capacity(targets.len() * block_flashes);
    let mut block_start = 0;
    for (block, &target) in targets.iter().enumerate() {
        let first_onset = block_start + cue;
        for trial in 0..trials_per_block {
            for (slot, group) in schedule_trial(&mut rng).into_iter().enumerate() {
                events.push(FlashEvent {
                    onset_sample: first_onset + flash_offset_samples(trial * N_GROUPS + slot),
                    group_id: group,
                    block_index: block,
                    trial_index: trial,
                    is_target: code.contains(group, target),
                });
            }
        }
        block_start = first_onset + flash_offset_samples(block_flashes);
    }
    let lead_out = (LEAD_OUT_S * SAMPLE_RATE_HZ).round() as usize;
    let n_samples = (block_start + lead_out).max(events.last().map_or(0, |e| e.onset_sample + POST_SAMPLES));
    Schedule {
        events,
        block_targets: targets.to_vec(),
        n_samples,
        stream,
        fatigue_offset: 0.0,
    }
}

pub fn offline_schedule(profile: &SubjectProfile, config: &ProtocolConfig, code: &FlashCode) -> Schedule {
    build_schedule(
        &config.offline_targets,
        config.offline.trials_per_block,
        config.online.feedback_s,
        code,
        profile.seed,
        recording_stream(config.paradigm_id, RecordingKind::Offline),
    )
}

pub fn online_schedule(profile: &SubjectProfile, config: &ProtocolConfig, code: &FlashCode) -> Schedule {
    let mut schedule = build_schedule(
        &config.copy_targets,
        config.online.max_trials,
        config.online.feedback_s,
        code,
        profile.seed,
        recording_stream(config.paradigm_id, RecordingKind::Online),
    );
    schedule.fatigue_offset = config.fatigue_offset;
    schedule
}

/// Synthesizes the scalp signal for `schedule` and passes it through the recorder's filters.
pub fn record(profile: &SubjectProfile, schedule: &Schedule, code: &FlashCode) -> Result<ContinuousRecording> {
    dsp::acquire(synth::synthesize_recording(profile, schedule, code)?)
}

#[derive(Debug, Clone)]
pub struct OfflineOutcome {
    pub features: Vec<FeatureVector>,
    pub model: BldaModel,
}

/// Extracts labeled features from every flash of a calibration recording and trains BLDA.
pub fn train_on_recording(recording: &ContinuousRecording, cfg: &BldaConfig) -> Result<OfflineOutcome> {
    recording.validate()?;
    let features = dsp::recording_features(recording, &recording.events)?;
    let design = blda::design_matrix(features.iter().map(|f| f.values.as_slice()), FEATURE_LEN)?;
    let labels: Vec<f64> = features.iter().map(|f| f.label).collect();
    let model = blda::train(&design, &labels, cfg)?;
    Ok(OfflineOutcome { features, model })
}

pub fn offline_recording(profile: &SubjectProfile, config: &ProtocolConfig) -> Result<ContinuousRecording> {
    config.validate()?;
    let code = build_flash_code();
    record(profile, &offline_schedule(profile, config, &code), &code)
}

pub fn online_recording(profile: &SubjectProfile, config: &ProtocolConfig) -> Result<ContinuousRecording> {
    config.validate()?;
    let code = build_flash_code();
    record(profile, &online_schedule(profile, config, &code), &code)
}

/// Online recording restricted to the named channels, for band-power work that
/// needs only a few of them. Each channel matches the full recording's.
pub fn online_channels(profile: &SubjectProfile, config: &ProtocolConfig, names: &[&str]) -> Result<ContinuousRecording> {
    config.validate()?;
    let code = build_flash_code();
    let schedule = online_schedule(profile, config, &code);
    let index: Vec<usize> = names
        .iter()
        .map(|n| synth::channel_index(n).ok_or_else(|| invalid(format!("unknown channel '{n}'"))))
        .collect::<Result<_>>()?;
    let raw = synth::synthesize_channels(profile, &schedule, &code, &index)?;
    let filters = dsp::acquisition_filters(SAMPLE_RATE_HZ)?;
    let data = raw.iter().map(|row| dsp::filter_row(&filters, row)).collect::<Result<_>>()?;
    Ok(ContinuousRecording {
        sample_rate_hz: SAMPLE_RATE_HZ,
        channels: names.iter().map(|n| n.to_string()).collect(),
        data,
        events: schedule.events,
        block_targets: schedule.block_targets,
    })
}

pub fn run_offline(profile: &SubjectProfile, config: &ProtocolConfig) -> Result<OfflineOutcome> {
    train_on_recording(&offline_recording(profile, config)?, &BldaConfig::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockResult {
    pub block_index: usize,
    pub target: usize,
    pub predicted: usize,
    pub trials_used: usize,
    /// Start of the block's feedback period on the session clock.
    pub start_time_s: f64,
}

impl BlockResult {
    pub fn correct(&self) -> bool {
        self.target == self.predicted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTotals {
    pub correct: usize,
    pub blocks: usize,
    pub accuracy_pct: f64,
    pub trials_total: usize,
    pub bit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub paradigm_id: ParadigmId,
    pub seed: u64,
    pub blocks: Vec<BlockResult>,
    pub totals: SessionTotals,
}

impl SessionResult {
    pub fn from_blocks(paradigm_id: ParadigmId, seed: u64, blocks: Vec<BlockResult>, trial_s: f64) -> Self {
        let correct = blocks.iter().filter(|b| b.correct()).count();
        let trials_total = blocks.iter().map(|b| b.trials_used).sum();
        let n = blocks.len();
        let fraction = if n == 0 { 0.0 } else { correct as f64 / n as f64 };
        let bit_rate = if trials_total == 0 {
            0.0
        } else {
            analysis::bit_rate_for_selections(fraction, N_ITEMS, trials_total as f64, n, trial_s)
        };
        Self {
            paradigm_id,
            seed,
            totals: SessionTotals {
                correct,
                blocks: n,
                accuracy_pct: 100.0 * fraction,
                trials_total,
                bit_rate,
            },
            blocks,
        }
    }
}

/// Replays an online recording through the classifier and the stopping rule.
pub fn decode_online(
    model: &BldaModel,
    recording: &ContinuousRecording,
    config: &ProtocolConfig,
    seed: u64,
) -> Result<SessionResult> {
    recording.validate()?;
    model.validate()?;
    if model.n_features() != FEATURE_LEN {
        return Err(invalid(format!("model has {} features, expected {FEATURE_LEN}", model.n_features())));
    }
    let code = build_flash_code();
    let features = dsp::recording_features(recording, &recording.events)?;
    let scores: Vec<f64> = features
        .iter()
        .map(|f| model.score_features(&f.values))
        .collect::<Result<_>>()?;

    // scores[block][trial][group]
    let n_blocks = recording.block_targets.len();
    let mut grid: Vec<Vec<[Option<f64>; N_GROUPS]>> = vec![Vec::new(); n_blocks];
    for (ev, s) in recording.events.iter().zip(&scores) {
        let trials = &mut grid[ev.block_index];
        if trials.len() <= ev.trial_index {
            trials.resize(ev.trial_index + 1, [None; N_GROUPS]);
        }
        if trials[ev.trial_index][ev.group_id].replace(*s).is_some() {
            return Err(invalid(format!(
                "block {} trial {} flashes group {} twice",
                ev.block_index, ev.trial_index, ev.group_id
            )));
        }
    }

    let mut blocks = Vec::with_capacity(n_blocks);
    let mut clock = 0.0;
    for (b, trials) in grid.iter().enumerate() {
        let mut state = StoppingState::new(config.online.min_trials, config.online.max_trials)?;
        for (t, trial) in trials.iter().enumerate() {
            let complete: Option<Vec<f64>> = trial.iter().copied().collect();
            let complete = complete.ok_or_else(|| {
                invalid(format!("block {b} trial {t} does not flash all {N_GROUPS} groups"))
            })?;
            let trial_scores: [f64; N_GROUPS] = std::array::from_fn(|g| complete[g]);
            state.accumulate_trial(&trial_scores, &code)?;
            if state.stopping_step().status == StopStatus::Stop {
                break;
            }
        }
        // a recording with fewer trials than the cap ends the block early
        let predicted = state
            .current_prediction()
            .ok_or_else(|| invalid(format!("block {b} has no trials")))?;
        blocks.push(BlockResult {
            block_index: b,
            target: recording.block_targets[b],
            predicted,
            trials_used: state.trials_seen,
            start_time_s: clock,
        });
        clock += state.trials_seen as f64 * config.trial_s + config.online.feedback_s;
    }
    Ok(SessionResult::from_blocks(config.paradigm_id, seed, blocks, config.trial_s))
}

/// Synthesizes the online run for `profile` and decodes it; returns the recording as well.
pub fn online_session(
    model: &BldaModel,
    profile: &SubjectProfile,
    config: &ProtocolConfig,
) -> Result<(SessionResult, ContinuousRecording)> {
    let recording = online_recording(profile, config)?;
    let result = decode_online(model, &recording, config, profile.seed)?;
    Ok((result, recording))
}

pub fn run_online(model: &BldaModel, profile: &SubjectProfile, config: &ProtocolConfig) -> Result<SessionResult> {
    online_session(model, profile, config).map(|(r, _)| r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTiming {
    pub start_s: f64,
    pub flashing_s: f64,
    pub feedback_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub blocks: Vec<BlockTiming>,
    pub flashing_s: f64,
    pub total_s: f64,
}

pub fn session_timeline(result: &SessionResult, config: &ProtocolConfig) -> Timeline {
    let mut clock = 0.0;
    let blocks: Vec<BlockTiming> = result
        .blocks
        .iter()
        .map(|b| {
            let t = BlockTiming {
                start_s: clock,
                flashing_s: b.trials_used as f64 * config.trial_s,
                feedback_s: config.online.feedback_s,
            };
            clock += t.flashing_s + t.feedback_s;
            t
        })
        .collect();
    let trials: usize = result.blocks.iter().map(|b| b.trials_used).sum();
    Timeline {
        blocks,
        flashing_s: trials as f64 * config.trial_s,
        total_s: clock,
    }
}

/// Flashing and total seconds for a (possibly averaged) trial count over `blocks` blocks.
pub fn timeline_for_trials(trials_total: f64, blocks: usize, config: &ProtocolConfig) -> (f64, f64) {
    let flashing = trials_total * config.trial_s;
    (flashing, flashing + blocks as f64 * config.online.feedback_s)
}

/// Cohort-level settings: how subjects vary and how conditions are ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortConfig {
    pub subjects: usize,
    pub base_seed: u64,
    pub paradigms: Vec<ParadigmId>,
    pub profile: SubjectProfile,
    /// Subject ERP amplitudes are scaled by a factor drawn uniformly from `1 ± spread`.
    pub amplitude_spread: f64,
    /// Alternate which paradigm runs first across subjects.
    pub counterbalance: bool,
    /// Fatigue-clock offset of a subject's second online run.
    pub fatigue_carryover: f64,
    pub min_trials: usize,
    pub max_trials: usize,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            subjects: 18,
            base_seed: 1,
            paradigms: ParadigmId::ALL.to_vec(),
            profile: SubjectProfile::calibrated(0),
            amplitude_spread: 0.35,
            counterbalance: true,
            fatigue_carryover: 0.25,
            min_trials: DEFAULT_MIN_TRIALS,
            max_trials: DEFAULT_MAX_TRIALS,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 || self.paradigms.is_empty() {
            return Err(invalid("cohort needs at least one subject and one paradigm"));
        }
        if !(0.0..1.0).contains(&self.amplitude_spread) {
            return Err(invalid("amplitude_spread must lie in [0, 1)"));
        }
        if !(self.fatigue_carryover.is_finite() && self.fatigue_carryover >= 0.0) {
            return Err(invalid("fatigue_carryover must be non-negative"));
        }
        self.profile.validate()
    }

    pub fn subject_seed(&self, subject: usize) -> u64 {
        self.base_seed.wrapping_mul(1_000_003).wrapping_add(subject as u64)
    }

    /// The profile of one cohort member: base profile, its own seed, its own ERP scale.
    pub fn subject_profile(&self, subject: usize) -> SubjectProfile {
        let seed = self.subject_seed(subject);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let u: f64 = rng.random_range(-1.0..=1.0);
        SubjectProfile {
            seed,
            ..self.profile.clone()
        }
        .with_erp_scale(1.0 + self.amplitude_spread * u)
    }

    /// Paradigms in the order subject `subject` runs them.
    pub fn order_for(&self, subject: usize) -> Vec<ParadigmId> {
        let mut order = self.paradigms.clone();
        if self.counterbalance && subject % 2 == 1 {
            order.reverse();
        }
        order
    }

    pub fn protocol(&self, paradigm: ParadigmId, position: usize) -> ProtocolConfig {
        let mut cfg = ProtocolConfig::standard(paradigm);
        cfg.online.min_trials = self.min_trials;
        cfg.online.max_trials = self.max_trials;
        cfg.fatigue_offset = position as f64 * self.fatigue_carryover;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSession {
    pub subject: usize,
    /// 0 for the subject's first online run, 1 for the second.
    pub order_position: usize,
    pub result: SessionResult,
    pub band_power: analysis::SubjectBandPower,
}

/// Offline calibration plus online run for every paradigm of one subject.
pub fn run_subject(cohort: &CohortConfig, subject: usize) -> Result<Vec<CohortSession>> {
    let profile = cohort.subject_profile(subject);
    cohort
        .order_for(subject)
        .into_iter()
        .enumerate()
        .map(|(position, paradigm)| {
            let protocol = cohort.protocol(paradigm, position);
            let offline = run_offline(&profile, &protocol)?;
            let (result, recording) = online_session(&offline.model, &profile, &protocol)?;
            let band_power = analysis::subject_band_power(&recording, &Default::default())?;
            Ok(CohortSession {
                subject,
                order_position: position,
                result,
                band_power,
            })
        })
        .collect()
}

pub fn run_cohort(cohort: &CohortConfig) -> Result<Vec<CohortSession>> {
    cohort.validate()?;
    let mut out = Vec::new();
    for subject in 0..cohort.subjects {
        out.extend(run_subject(cohort, subject)?);
    }
    Ok(out)
}
