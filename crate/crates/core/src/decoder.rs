//! Character decoding from flash-group scores and the adaptive stopping rule.
//!
//! A trial gives one classifier score per flash group. Scores are summed over
//! the trials of a block, each item is rated by the sum of its two groups, and
//! the block stops as soon as two consecutive trials yield the same item, or
//! when the trial cap is reached.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::paradigm::{FlashCode, N_GROUPS};

pub const DEFAULT_MIN_TRIALS: usize = 2;
pub const DEFAULT_MAX_TRIALS: usize = 16;

/// Item with the largest pair-sum; ties go to the lowest item index.
pub fn predict_character(group_scores: &[f64; N_GROUPS], code: &FlashCode) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (item, &[a, b]) in code.item_to_pair.iter().enumerate() {
        let s = group_scores[a] + group_scores[b];
        if s > best_score {
            best = item;
            best_score = s;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopStatus {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDecision {
    pub status: StopStatus,
    pub predicted_item: Option<usize>,
    pub trials_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingState {
    pub cumulative_group_scores: [f64; N_GROUPS],
    pub trials_seen: usize,
    pub prediction_history: Vec<usize>,
    pub min_trials: usize,
    pub max_trials: usize,
}

impl StoppingState {
    pub fn new(min_trials: usize, max_trials: usize) -> Result<Self> {
        if min_trials < 2 || max_trials < min_trials {
            return Err(invalid(format!(
                "trial limits must satisfy 2 <= min ({min_trials}) <= max ({max_trials})"
            )));
        }
        Ok(Self {
            cumulative_group_scores: [0.0; N_GROUPS],
            trials_seen: 0,
            prediction_history: Vec::new(),
            min_trials,
            max_trials,
        })
    }

    /// Adds one trial's group scores and records the resulting prediction.
    pub fn accumulate_trial(&mut self, trial_scores: &[f64; N_GROUPS], code: &FlashCode) -> Result<()> {
        if self.trials_seen > 0 && self.stopping_step().status == StopStatus::Stop {
            return Err(Error::BlockStopped { trials: self.trials_seen });
        }
        if trial_scores.iter().any(|s| !s.is_finite()) {
            return Err(invalid("trial scores must be finite"));
        }
        for (c, s) in self.cumulative_group_scores.iter_mut().zip(trial_scores) {
            *c += s;
        }
        self.trials_seen += 1;
        self.prediction_history
            .push(predict_character(&self.cumulative_group_scores, code));
        Ok(())
    }

    pub fn current_prediction(&self) -> Option<usize> {
        self.prediction_history.last().copied()
    }

    pub fn stopping_step(&self) -> BlockDecision {
        let n = self.trials_seen;
        let h = &self.prediction_history;
        let agreed = n >= self.min_trials && n >= 2 && h[n - 1] == h[n - 2];
        if agreed || n >= self.max_trials {
            BlockDecision {
                status: StopStatus::Stop,
                predicted_item: h.last().copied(),
                trials_used: n,
            }
        } else {
            BlockDecision {
                status: StopStatus::Continue,
                predicted_item: None,
                trials_used: n,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paradigm::build_flash_code;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn with_history(history: &[usize], max: usize) -> StoppingState {
        let mut s = StoppingState::new(2, max).unwrap();
        s.prediction_history = history.to_vec();
        s.trials_seen = history.len();
        s
    }

    #[test]
    fn one_hot_decodes_pair() {
        let code = build_flash_code();
        let mut scores = [0.0; 12];
        scores[3] = 1.0;
        scores[9] = 1.0;
        assert_eq!(Some(predict_character(&scores, &code)), code.item_for_pair(3, 9));
    }

    #[test]
    fn ties_go_to_lowest_item() {
        let code = build_flash_code();
        assert_eq!(predict_character(&[0.7; 12], &code), 0);
    }

    #[test]
    fn argmax_matches_brute_force() {
        let code = build_flash_code();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let scores: [f64; 12] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let item = predict_character(&scores, &code);
            let [a, b] = code.pair(item);
            for other in 0..42 {
                let [c, d] = code.pair(other);
                assert!(scores[a] + scores[b] >= scores[c] + scores[d]);
            }
            let shifted: [f64; 12] = std::array::from_fn(|g| scores[g] + 3.25);
            assert_eq!(predict_character(&shifted, &code), item);
        }
    }

    #[test]
    fn stopping_rule_examples() {
        let d = with_history(&[5, 5], 16).stopping_step();
        assert_eq!((d.status, d.predicted_item, d.trials_used), (StopStatus::Stop, Some(5), 2));
        let d = with_history(&[5, 9, 9], 16).stopping_step();
        assert_eq!((d.status, d.predicted_item, d.trials_used), (StopStatus::Stop, Some(9), 3));
        let d = with_history(&[5, 9, 5], 16).stopping_step();
        assert_eq!(d.status, StopStatus::Continue);
        let d = with_history(&[5], 16).stopping_step();
        assert_eq!(d.status, StopStatus::Continue);
        let distinct: Vec<usize> = (0..16).collect();
        let d = with_history(&distinct, 16).stopping_step();
        assert_eq!((d.status, d.predicted_item, d.trials_used), (StopStatus::Stop, Some(15), 16));
    }

    #[test]
    fn accumulation_adds_and_rejects_after_stop() {
        let code = build_flash_code();
        let s: [f64; 12] = std::array::from_fn(|g| g as f64 * 0.1 - 0.3);
        let mut state = StoppingState::new(2, 16).unwrap();
        state.accumulate_trial(&s, &code).unwrap();
        state.accumulate_trial(&s, &code).unwrap();
        for g in 0..12 {
            assert!((state.cumulative_group_scores[g] - 2.0 * s[g]).abs() < 1e-15);
        }
        // identical trials agree immediately
        assert_eq!(state.stopping_step().status, StopStatus::Stop);
        assert!(matches!(state.accumulate_trial(&s, &code), Err(Error::BlockStopped { trials: 2 })));
    }

    #[test]
    fn zero_scores_predict_item_zero() {
        let code = build_flash_code();
        let mut state = StoppingState::new(2, 16).unwrap();
        state.accumulate_trial(&[0.0; 12], &code).unwrap();
        state.accumulate_trial(&[0.0; 12], &code).unwrap();
        assert_eq!(state.prediction_history, vec![0, 0]);
        let d = state.stopping_step();
        assert_eq!(d.predicted_item, Some(0));
    }

    #[test]
    fn invalid_limits_rejected() {
        assert!(StoppingState::new(1, 16).is_err());
        assert!(StoppingState::new(4, 3).is_err());
    }
}
