//! Session metrics and cohort statistics: accuracy, bit rate, first/second-half
//! comparisons, character-order and visual-angle correlations, and the
//! theta/alpha fatigue report.

mod cohort;
pub mod stats;

pub use cohort::*;
pub use stats::{average_ranks, ks_normality, paired_t_test, pearson, spearman, StatResult, TestId};

use serde::{Deserialize, Serialize};

use crate::dsp::{band_power, Band, WelchConfig, ALPHA, THETA};
use crate::error::{invalid, Result};
use crate::paradigm::{SpellerLayout, N_ITEMS, TRIAL_S};
use crate::session::SessionResult;
use crate::synth::ContinuousRecording;

/// Selections in one online run.
pub const ONLINE_SELECTIONS: usize = 42;
pub const ACCURACY_THRESHOLD_PCT: f64 = 80.0;
pub const BIT_RATE_THRESHOLD: f64 = 30.0;

pub fn feedback_accuracy(result: &SessionResult) -> f64 {
    if result.blocks.is_empty() {
        return 0.0;
    }
    100.0 * result.totals.correct as f64 / result.blocks.len() as f64
}

/// Wolpaw bits per selection among `n_items` equiprobable choices.
pub fn bits_per_selection(p: f64, n_items: usize) -> f64 {
    let n = n_items as f64;
    let p = p.clamp(0.0, 1.0);
    let mut b = n.log2();
    if p > 0.0 {
        b += p * p.log2();
    }
    if p < 1.0 {
        b += (1.0 - p) * ((1.0 - p) / (n - 1.0)).log2();
    }
    b
}

/// Bits per minute for `selections` choices that took `trials_total` trials
/// of `trial_s` seconds; pauses between selections are not counted.
pub fn bit_rate_for_selections(p: f64, n_items: usize, trials_total: f64, selections: usize, trial_s: f64) -> f64 {
    let trials_per_selection = trials_total / selections as f64;
    bits_per_selection(p, n_items) * 60.0 / (trials_per_selection * trial_s)
}

/// Bit rate of a 42-selection online run.
pub fn bit_rate(p: f64, n_items: usize, trials_total: f64, trial_s: f64) -> f64 {
    bit_rate_for_selections(p, n_items, trials_total, ONLINE_SELECTIONS, trial_s)
}

/// Accuracy and trial statistics of one character position across sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterStats {
    pub position: usize,
    pub correct: usize,
    pub sessions: usize,
    pub accuracy_pct: f64,
    pub mean_trials: f64,
    pub bit_rate: f64,
}

/// Per-position statistics pooled over sessions that spelled the same number of characters.
pub fn character_stats(results: &[&SessionResult]) -> Result<Vec<CharacterStats>> {
    let first = results.first().ok_or_else(|| invalid("no sessions to analyze"))?;
    let n = first.blocks.len();
    if n == 0 || results.iter().any(|r| r.blocks.len() != n) {
        return Err(invalid("sessions must share a non-zero block count"));
    }
    Ok((0..n)
        .map(|pos| {
            let correct = results.iter().filter(|r| r.blocks[pos].correct()).count();
            let trials: usize = results.iter().map(|r| r.blocks[pos].trials_used).sum();
            let sessions = results.len();
            let p = correct as f64 / sessions as f64;
            let mean_trials = trials as f64 / sessions as f64;
            CharacterStats {
                position: pos,
                correct,
                sessions,
                accuracy_pct: 100.0 * p,
                mean_trials,
                bit_rate: bit_rate_for_selections(p, N_ITEMS, mean_trials, 1, TRIAL_S),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSummary {
    pub correct: usize,
    pub blocks: usize,
    pub accuracy_pct: f64,
    pub trials_total: usize,
    pub bit_rate: f64,
    /// Mean and sample SD of the per-session accuracy in this half.
    pub session_accuracy_mean: f64,
    pub session_accuracy_sd: f64,
    pub chars_below_accuracy: usize,
    pub chars_below_bit_rate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvesReport {
    pub first: HalfSummary,
    pub last: HalfSummary,
    /// Paired t-test of per-session accuracy, last half minus first half.
    pub accuracy_test: Option<StatResult>,
}

fn half_summary(results: &[&SessionResult], chars: &[CharacterStats], range: std::ops::Range<usize>) -> HalfSummary {
    let blocks_per_session = range.len();
    let per_session: Vec<f64> = results
        .iter()
        .map(|r| {
            let c = r.blocks[range.clone()].iter().filter(|b| b.correct()).count();
            100.0 * c as f64 / blocks_per_session as f64
        })
        .collect();
    let correct: usize = results
        .iter()
        .map(|r| r.blocks[range.clone()].iter().filter(|b| b.correct()).count())
        .sum();
    let trials_total: usize = results
        .iter()
        .flat_map(|r| r.blocks[range.clone()].iter().map(|b| b.trials_used))
        .sum();
    let blocks = blocks_per_session * results.len();
    let p = correct as f64 / blocks as f64;
    let m = per_session.iter().sum::<f64>() / per_session.len() as f64;
    let sd = if per_session.len() > 1 {
        (per_session.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (per_session.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let chars = &chars[range];
    HalfSummary {
        correct,
        blocks,
        accuracy_pct: 100.0 * p,
        trials_total,
        bit_rate: bit_rate_for_selections(p, N_ITEMS, trials_total as f64, blocks, TRIAL_S),
        session_accuracy_mean: m,
        session_accuracy_sd: sd,
        chars_below_accuracy: chars.iter().filter(|c| c.accuracy_pct < ACCURACY_THRESHOLD_PCT).count(),
        chars_below_bit_rate: chars.iter().filter(|c| c.bit_rate < BIT_RATE_THRESHOLD).count(),
    }
}

/// Splits the character sequence of each session into its first and second
/// half in spelling order and summarizes both.
pub fn halves_comparison(results: &[&SessionResult]) -> Result<HalvesReport> {
    let chars = character_stats(results)?;
    let n = chars.len();
    if n < 2 || n % 2 != 0 {
        return Err(invalid(format!("halves need an even block count, got {n}")));
    }
    let first = half_summary(results, &chars, 0..n / 2);
    let last = half_summary(results, &chars, n / 2..n);
    let accuracy_test = if results.len() >= 2 {
        let acc = |range: std::ops::Range<usize>| -> Vec<f64> {
            results
                .iter()
                .map(|r| r.blocks[range.clone()].iter().filter(|b| b.correct()).count() as f64)
                .collect()
        };
        Some(paired_t_test(&acc(n / 2..n), &acc(0..n / 2))?)
    } else {
        None
    };
    Ok(HalvesReport { first, last, accuracy_test })
}

/// Pearson correlation between per-character accuracy and spelling position (1-based).
pub fn order_correlation(results: &[&SessionResult]) -> Result<StatResult> {
    let chars = character_stats(results)?;
    let order: Vec<f64> = chars.iter().map(|c| (c.position + 1) as f64).collect();
    let acc: Vec<f64> = chars.iter().map(|c| c.accuracy_pct).collect();
    pearson(&acc, &order)
}

/// Spearman correlation between each target's visual angle and its accuracy
/// across sessions. Positions are mapped to items through the sessions' targets.
pub fn angle_correlation(layout: &SpellerLayout, results: &[&SessionResult]) -> Result<StatResult> {
    let chars = character_stats(results)?;
    let first = results[0];
    let mut angle = Vec::with_capacity(chars.len());
    for (c, block) in chars.iter().zip(&first.blocks) {
        if results.iter().any(|r| r.blocks[c.position].target != block.target) {
            return Err(invalid("sessions spell different target sequences"));
        }
        let item = layout
            .items
            .get(block.target)
            .ok_or_else(|| invalid(format!("target {} not in layout", block.target)))?;
        angle.push(item.visual_angle_deg);
    }
    let acc: Vec<f64> = chars.iter().map(|c| c.accuracy_pct).collect();
    spearman(&angle, &acc)
}

/// Band powers of one online recording, over the first and second half of its blocks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SubjectBandPower {
    pub theta_fz_first: f64,
    pub theta_fz_last: f64,
    pub alpha_pz_first: f64,
    pub alpha_pz_last: f64,
}

fn channel_f64(recording: &ContinuousRecording, name: &str) -> Result<Vec<f64>> {
    recording
        .channel(name)
        .map(|c| c.iter().map(|v| *v as f64).collect())
        .ok_or_else(|| invalid(format!("recording has no {name} channel")))
}

/// Sample at which the second half of the blocks begins: the first flash of block `n/2`.
fn halfway_sample(recording: &ContinuousRecording) -> Result<usize> {
    let n_blocks = recording.block_targets.len();
    if n_blocks < 2 || n_blocks % 2 != 0 {
        return Err(invalid(format!("fatigue halves need an even block count, got {n_blocks}")));
    }
    recording
        .events
        .iter()
        .find(|e| e.block_index == n_blocks / 2)
        .map(|e| e.onset_sample)
        .ok_or_else(|| invalid("no flashes in the second half of the recording"))
}

/// Welch power of one channel in `band` before and after the halfway block.
pub fn half_band_power(recording: &ContinuousRecording, channel: &str, band: Band, welch: &WelchConfig) -> Result<(f64, f64)> {
    let split = halfway_sample(recording)?;
    let fs = recording.sample_rate_hz;
    let x = channel_f64(recording, channel)?;
    Ok((band_power(&x[..split], fs, band, welch)?, band_power(&x[split..], fs, band, welch)?))
}

/// Theta power at Fz and alpha power at Pz (in uV^2/Hz) over the two halves of a recording.
pub fn subject_band_power(recording: &ContinuousRecording, welch: &WelchConfig) -> Result<SubjectBandPower> {
    let (theta_fz_first, theta_fz_last) = half_band_power(recording, "Fz", THETA, welch)?;
    let (alpha_pz_first, alpha_pz_last) = half_band_power(recording, "Pz", ALPHA, welch)?;
    Ok(SubjectBandPower {
        theta_fz_first,
        theta_fz_last,
        alpha_pz_first,
        alpha_pz_last,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPowerReport {
    pub subjects: Vec<SubjectBandPower>,
    /// Paired tests of last-half minus first-half power.
    pub theta_fz: StatResult,
    pub alpha_pz: StatResult,
}

pub fn fatigue_report(subjects: &[SubjectBandPower]) -> Result<BandPowerReport> {
    let col = |f: fn(&SubjectBandPower) -> f64| subjects.iter().map(f).collect::<Vec<_>>();
    Ok(BandPowerReport {
        theta_fz: paired_t_test(&col(|s| s.theta_fz_last), &col(|s| s.theta_fz_first))?,
        alpha_pz: paired_t_test(&col(|s| s.alpha_pz_last), &col(|s| s.alpha_pz_first))?,
        subjects: subjects.to_vec(),
    })
}

/// Paired comparison of one metric between two paradigms, with normality checks on each column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub mean_a: f64,
    pub mean_b: f64,
    pub normality_a: Option<StatResult>,
    pub normality_b: Option<StatResult>,
    pub paired: StatResult,
}

pub fn compare_paired(a: &[f64], b: &[f64]) -> Result<PairedComparison> {
    let paired = paired_t_test(a, b)?;
    Ok(PairedComparison {
        mean_a: a.iter().sum::<f64>() / a.len() as f64,
        mean_b: b.iter().sum::<f64>() / b.len() as f64,
        normality_a: ks_normality(a).ok(),
        normality_b: ks_normality(b).ok(),
        paired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paradigm::ParadigmId;
    use crate::session::BlockResult;

    fn session(correct: &[bool], trials: usize) -> SessionResult {
        let blocks = correct
            .iter()
            .enumerate()
            .map(|(i, ok)| BlockResult {
                block_index: i,
                target: i % 42,
                predicted: if *ok { i % 42 } else { (i + 1) % 42 },
                trials_used: trials,
                start_time_s: 0.0,
            })
            .collect();
        SessionResult::from_blocks(ParadigmId::MsP, 0, blocks, 2.4)
    }

    #[test]
    fn accuracy_examples() {
        let mut c = vec![true; 42];
        for v in c.iter_mut().take(5) {
            *v = false;
        }
        assert!((feedback_accuracy(&session(&c, 2)) - 88.095).abs() < 1e-3);
        assert_eq!(feedback_accuracy(&session(&[true; 42], 2)), 100.0);
        assert_eq!(feedback_accuracy(&session(&[false; 42], 2)), 0.0);
    }

    #[test]
    fn bits_per_selection_limits() {
        assert!((bits_per_selection(1.0, 42) - 42f64.log2()).abs() < 1e-12);
        assert!(bits_per_selection(1.0 / 42.0, 42).abs() < 1e-12);
        let near = bits_per_selection(1.0 - 1e-12, 42);
        assert!((near - 42f64.log2()).abs() < 1e-9);
    }

    #[test]
    fn bit_rate_examples() {
        assert!((bit_rate(1.0, 42, 94.0, 2.4) - 60.2).abs() < 0.1);
        assert!((bit_rate(0.881, 42, 112.0, 2.4) - 39.6).abs() < 0.1);
        assert!((bit_rate(1.0, 42, 84.0, 2.4) - 67.4).abs() < 0.1);
    }

    #[test]
    fn all_correct_halves() {
        let s = session(&[true; 42], 3);
        let h = halves_comparison(&[&s]).unwrap();
        for half in [&h.first, &h.last] {
            assert_eq!(half.accuracy_pct, 100.0);
            assert_eq!(half.chars_below_accuracy, 0);
            assert_eq!(half.chars_below_bit_rate, 0);
        }
        assert!(h.accuracy_test.is_none());
    }

    #[test]
    fn halves_recombine() {
        let c: Vec<bool> = (0..42).map(|i| i % 3 != 0 && i < 30).collect();
        let s = session(&c, 4);
        let h = halves_comparison(&[&s, &s]).unwrap();
        assert_eq!(h.first.correct + h.last.correct, 2 * s.totals.correct);
        assert_eq!(h.first.blocks + h.last.blocks, 84);
        assert_eq!(h.first.trials_total + h.last.trials_total, 2 * s.totals.trials_total);
    }

    #[test]
    fn declining_accuracy_correlates_negatively() {
        let sessions: Vec<SessionResult> = (0..10)
            .map(|k| session(&(0..42).map(|i| i < 42 - 3 * k - 1).collect::<Vec<_>>(), 2))
            .collect();
        let refs: Vec<&SessionResult> = sessions.iter().collect();
        let r = order_correlation(&refs).unwrap();
        assert!(r.statistic < -0.5 && r.p_value < 0.05);
    }

    #[test]
    fn fatigue_report_direction() {
        let subjects: Vec<SubjectBandPower> = (0..6)
            .map(|i| SubjectBandPower {
                theta_fz_first: 1.0,
                theta_fz_last: 1.0 + 0.01 * i as f64,
                alpha_pz_first: 2.0 + i as f64,
                alpha_pz_last: 3.0 + i as f64 * 1.1,
            })
            .collect();
        let r = fatigue_report(&subjects).unwrap();
        assert!(r.alpha_pz.statistic > 0.0 && r.alpha_pz.p_value < 0.01);
    }
}
