//! End-to-end checks of calibration, held-out scoring and the fatigue signal.

use speller_core::analysis::half_band_power;
use speller_core::dsp::{recording_features, WelchConfig, ALPHA};
use speller_core::paradigm::ParadigmId;
use speller_core::session::{online_channels, online_recording, run_offline, OfflineOutcome, ProtocolConfig};
use speller_core::synth::SubjectProfile;

/// Mann-Whitney estimate of the area under the ROC curve.
fn auc(scores: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
    let neg: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn held_out_auc(profile: &SubjectProfile, offline: &OfflineOutcome, protocol: &ProtocolConfig) -> f64 {
    let mut rec = online_recording(profile, protocol).unwrap();
    // the first eight blocks are plenty and keep the test quick
    rec.events.retain(|e| e.block_index < 8);
    let features = recording_features(&rec, &rec.events).unwrap();
    let scored: Vec<(f64, bool)> = features
        .iter()
        .map(|f| (offline.model.score_features(&f.values).unwrap(), f.label > 0.0))
        .collect();
    auc(&scored)
}

#[test]
fn calibrated_subject_generalizes_to_the_online_run() {
    let profile = SubjectProfile::calibrated(5);
    let protocol = ProtocolConfig::standard(ParadigmId::MsP);
    let offline = run_offline(&profile, &protocol).unwrap();
    assert_eq!(offline.features.len(), 2880);
    assert_eq!(offline.features.iter().filter(|f| f.label > 0.0).count(), 480);
    let a = held_out_auc(&profile, &offline, &protocol);
    assert!(a >= 0.75, "held-out AUC {a:.3}");
}

#[test]
fn noiseless_subject_separates_perfectly() {
    let profile = SubjectProfile { noise_rms_uv: 0.0, alpha_base_uv: 0.0, ..SubjectProfile::calibrated(8) };
    let protocol = ProtocolConfig::standard(ParadigmId::LsP);
    let offline = run_offline(&profile, &protocol).unwrap();
    let a = held_out_auc(&profile, &offline, &protocol);
    assert!(a > 0.99, "held-out AUC {a:.4}");
}

#[test]
fn calibration_is_reproducible() {
    let profile = SubjectProfile::calibrated(21);
    let protocol = ProtocolConfig::standard(ParadigmId::LsP);
    let a = run_offline(&profile, &protocol).unwrap().model;
    let b = run_offline(&profile, &protocol).unwrap().model;
    let bits = |w: &[f64]| w.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.weights), bits(&b.weights));
    assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
}

#[test]
fn alpha_rises_in_every_subject_without_noise() {
    let protocol = ProtocolConfig::standard(ParadigmId::MsP);
    for seed in 0..6 {
        let profile = SubjectProfile { noise_rms_uv: 0.0, ..SubjectProfile::calibrated(seed) }.with_erp_scale(0.0);
        let rec = online_channels(&profile, &protocol, &["Pz"]).unwrap();
        let (first, last) = half_band_power(&rec, "Pz", ALPHA, &WelchConfig::default()).unwrap();
        assert!(last > first, "seed {seed}: {first} -> {last}");
    }
}
