//! CSV and JSON report emitters. Accuracy and bit rate carry one decimal, as in the published table.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::blda::BldaModel;
use crate::error::{invalid, Result};
use crate::session::{CohortSession, SessionResult};

/// Subject-level results: one row per subject and paradigm.
pub fn results_csv(sessions: &[CohortSession]) -> String {
    let mut out = String::from("subject,paradigm,order_position,accuracy_pct,trials,bit_rate\n");
    for s in sessions {
        let t = &s.result.totals;
        let _ = writeln!(
            out,
            "S{},{},{},{:.1},{},{:.1}",
            s.subject + 1,
            s.result.paradigm_id.display_name(),
            s.order_position + 1,
            t.accuracy_pct,
            t.trials_total,
            t.bit_rate
        );
    }
    out
}

pub fn blocks_csv(result: &SessionResult) -> String {
    let mut out = String::from("block_index,target,predicted,correct,trials_used,start_time_s\n");
    for b in &result.blocks {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.1}",
            b.block_index,
            b.target,
            b.predicted,
            b.correct() as u8,
            b.trials_used,
            b.start_time_s
        );
    }
    out
}

/// Pretty JSON with a trailing newline; field order follows the type definitions.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| invalid(format!("serialization failed: {e}")))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| invalid(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

pub fn save_model(path: &Path, model: &BldaModel) -> Result<()> {
    write_text(path, &to_json(model)?)
}

pub fn load_model(path: &Path) -> Result<BldaModel> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let model: BldaModel = serde_json::from_str(&text).map_err(|e| invalid(format!("model file: {e}")))?;
    model.validate()?;
    Ok(model)
}
