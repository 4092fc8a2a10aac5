use std::path::Path;
use std::process::{Command, Output};

fn speller(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speller"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn speller")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_table2_reproduces_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = speller(&["check-table2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("36/36 rows within"), "{out}");
    assert_eq!(out.lines().count(), 38);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = speller(&["--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = speller(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("check-table2"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"subjects": 1, "noise": 3.0}"#).unwrap();
    let o = speller(&["--config", cfg.to_str().unwrap(), "cohort"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
}

#[test]
fn missing_recording_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = speller(&["train", "--recording", "nowhere"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));
}

fn synth_one(dir: &Path, config: &str) -> std::path::PathBuf {
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, config).unwrap();
    let o = speller(
        &["--config", "cfg.json", "--paradigm", "ms", "--out", "rec", "synth", "--subjects", "1"],
        dir,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let subject = dir.join("rec/S01-MS-P");
    for part in ["offline", "online"] {
        for file in ["meta.json", "eeg.f32le", "events.csv", "targets.csv"] {
            assert!(subject.join(part).join(file).is_file(), "{part}/{file}");
        }
    }
    subject
}

fn train_and_decode(dir: &Path, subject: &Path) -> serde_json::Value {
    let offline = subject.join("offline");
    let o = speller(&["--out", "model.json", "train", "--recording", offline.to_str().unwrap()], dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let online = subject.join("online");
    let o = speller(
        &["--out", "out", "online", "--model", "model.json", "--recording", online.to_str().unwrap()],
        dir,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(dir.join("out/blocks.csv")).unwrap().lines().count(), 43);
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/session.json")).unwrap()).unwrap()
}

#[test]
fn noiseless_subject_spells_everything_in_two_trials() {
    let dir = tempfile::tempdir().unwrap();
    let subject = synth_one(
        dir.path(),
        r#"{"profile": {"noise_rms_uv": 0.0, "alpha_base_uv": 0.0}, "amplitude_spread": 0.0}"#,
    );
    let session = train_and_decode(dir.path(), &subject);
    assert_eq!(session["totals"]["correct"], 42);
    assert_eq!(session["totals"]["trials_total"], 84);
}

#[test]
fn erp_free_subject_decodes_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let subject = synth_one(dir.path(), r#"{"profile": {"erp_scale": 0.0}}"#);
    let session = train_and_decode(dir.path(), &subject);
    // 95 % binomial interval for 42 selections at p = 1/42 is [0, 3]
    let correct = session["totals"]["correct"].as_u64().unwrap();
    assert!(correct <= 3, "{correct} correct");
}

#[test]
fn truncated_payload_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let subject = synth_one(dir.path(), r#"{"profile": {"noise_rms_uv": 0.0}}"#);
    let eeg = subject.join("offline/eeg.f32le");
    let bytes = std::fs::read(&eeg).unwrap();
    std::fs::write(&eeg, &bytes[..bytes.len() - 64]).unwrap();
    let o = speller(&["train", "--recording", subject.join("offline").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("payload size mismatch"), "{}", stderr(&o));
}

#[test]
fn cohort_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let o = speller(&["--seed", "3", "--out", "cohort", "cohort", "--seeds", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let results = std::fs::read_to_string(dir.path().join("cohort/results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines[0], "subject,paradigm,order_position,accuracy_pct,trials,bit_rate");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));

    let o = speller(&["--out", "analysis", "analyze", "--input", "cohort"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("MS-P: accuracy"), "{}", stdout(&o));
    for file in ["table2.csv", "halves.json", "fatigue.json", "stats.json"] {
        assert!(dir.path().join("analysis").join(file).is_file(), "{file}");
    }
}
