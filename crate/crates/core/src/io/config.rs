//! JSON run configuration for the command-line tools.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::paradigm::ParadigmId;
use crate::session::CohortConfig;
use crate::synth::SubjectProfile;

/// Subject-model parameters that override the calibrated defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileOverrides {
    /// Multiplies every ERP amplitude; 0 removes the ERPs.
    pub erp_scale: Option<f64>,
    pub nontarget_gain: Option<f64>,
    pub noise_rms_uv: Option<f64>,
    pub alpha_base_uv: Option<f64>,
    pub alpha_drift_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    pub welch_segment_s: f64,
    pub welch_overlap: f64,
    pub significance: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { welch_segment_s: 2.0, welch_overlap: 0.5, significance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Both paradigms when absent.
    pub paradigm: Option<ParadigmId>,
    pub subjects: usize,
    pub seed: u64,
    pub profile: ProfileOverrides,
    pub amplitude_spread: f64,
    pub counterbalance: bool,
    pub fatigue_carryover: f64,
    pub min_trials: usize,
    pub max_trials: usize,
    pub analysis: AnalysisOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = CohortConfig::default();
        Self {
            paradigm: None,
            subjects: c.subjects,
            seed: c.base_seed,
            profile: ProfileOverrides::default(),
            amplitude_spread: c.amplitude_spread,
            counterbalance: c.counterbalance,
            fatigue_carryover: c.fatigue_carryover,
            min_trials: c.min_trials,
            max_trials: c.max_trials,
            analysis: AnalysisOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(format!("run config: {e}")))?;
        cfg.cohort()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn subject_profile(&self) -> Result<SubjectProfile> {
        let p = &self.profile;
        let mut profile = SubjectProfile::calibrated(0);
        if let Some(s) = p.erp_scale {
            profile = profile.with_erp_scale(s);
        }
        profile.nontarget_gain = p.nontarget_gain.unwrap_or(profile.nontarget_gain);
        profile.noise_rms_uv = p.noise_rms_uv.unwrap_or(profile.noise_rms_uv);
        profile.alpha_base_uv = p.alpha_base_uv.unwrap_or(profile.alpha_base_uv);
        profile.alpha_drift_rate = p.alpha_drift_rate.unwrap_or(profile.alpha_drift_rate);
        profile.validate()?;
        Ok(profile)
    }

    pub fn cohort(&self) -> Result<CohortConfig> {
        let cohort = CohortConfig {
            subjects: self.subjects,
            base_seed: self.seed,
            paradigms: self.paradigm.map_or_else(|| ParadigmId::ALL.to_vec(), |p| vec![p]),
            profile: self.subject_profile()?,
            amplitude_spread: self.amplitude_spread,
            counterbalance: self.counterbalance,
            fatigue_carryover: self.fatigue_carryover,
            min_trials: self.min_trials,
            max_trials: self.max_trials,
        };
        cohort.validate()?;
        if self.min_trials < 2 || self.max_trials < self.min_trials {
            return Err(invalid("trial limits must satisfy 2 <= min_trials <= max_trials"));
        }
        if !(self.analysis.significance > 0.0 && self.analysis.significance < 1.0) {
            return Err(invalid("significance must lie in (0, 1)"));
        }
        Ok(cohort)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"subjectz": 3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"profile": {"noise": 1}}"#).is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_json(
            r#"{"paradigm": "LS_P", "subjects": 3, "profile": {"erp_scale": 0, "alpha_drift_rate": 0}}"#,
        )
        .unwrap();
        let cohort = cfg.cohort().unwrap();
        assert_eq!(cohort.paradigms, vec![ParadigmId::LsP]);
        assert_eq!(cohort.subjects, 3);
        assert_eq!(cohort.profile.alpha_drift_rate, 0.0);
        assert!(cohort.profile.erp_components.iter().all(|c| c.amplitude_uv == 0.0));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_json(r#"{"max_trials": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"profile": {"noise_rms_uv": -1}}"#).is_err());
    }
}
