//! Cohort-level summary: per-paradigm means, halves, correlations, fatigue, and paradigm comparisons.

use serde::{Deserialize, Serialize};

use super::{
    angle_correlation, compare_paired, fatigue_report, halves_comparison, order_correlation, BandPowerReport,
    HalvesReport, PairedComparison, StatResult,
};
use crate::error::{invalid, Result};
use crate::paradigm::{build_layout, DisplayGeometry, ParadigmId};
use crate::session::{CohortSession, SessionResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let sd = if x.len() > 1 {
            (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadigmSummary {
    pub paradigm_id: ParadigmId,
    pub sessions: usize,
    pub accuracy_pct: MeanSd,
    pub trials_total: MeanSd,
    pub bit_rate: MeanSd,
    pub halves: HalvesReport,
    /// Per-character accuracy against spelling position.
    pub order_correlation: Option<StatResult>,
    /// Per-item accuracy against visual angle.
    pub angle_correlation: Option<StatResult>,
    pub fatigue: Option<BandPowerReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadigmComparison {
    pub accuracy_pct: PairedComparison,
    pub trials_total: PairedComparison,
    pub bit_rate: PairedComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub paradigms: Vec<ParadigmSummary>,
    /// MS-P against LS-P, paired by subject; present when both were run.
    pub comparison: Option<ParadigmComparison>,
}

fn paradigm_sessions(sessions: &[CohortSession], p: ParadigmId) -> Vec<&CohortSession> {
    let mut v: Vec<&CohortSession> = sessions.iter().filter(|s| s.result.paradigm_id == p).collect();
    v.sort_by_key(|s| s.subject);
    v
}

fn summarize(p: ParadigmId, sessions: &[&CohortSession]) -> Result<ParadigmSummary> {
    let results: Vec<&SessionResult> = sessions.iter().map(|s| &s.result).collect();
    let col = |f: fn(&SessionResult) -> f64| MeanSd::of(&results.iter().map(|r| f(r)).collect::<Vec<_>>());
    let layout = build_layout(p, &DisplayGeometry::default_for(p))?;
    let band: Vec<_> = sessions.iter().map(|s| s.band_power).collect();
    Ok(ParadigmSummary {
        paradigm_id: p,
        sessions: sessions.len(),
        accuracy_pct: col(|r| r.totals.accuracy_pct),
        trials_total: col(|r| r.totals.trials_total as f64),
        bit_rate: col(|r| r.totals.bit_rate),
        halves: halves_comparison(&results)?,
        order_correlation: order_correlation(&results).ok(),
        angle_correlation: angle_correlation(&layout, &results).ok(),
        fatigue: fatigue_report(&band).ok(),
    })
}

pub fn summarize_cohort(sessions: &[CohortSession]) -> Result<CohortSummary> {
    let mut paradigms = Vec::new();
    for p in ParadigmId::ALL {
        let s = paradigm_sessions(sessions, p);
        if !s.is_empty() {
            paradigms.push(summarize(p, &s)?);
        }
    }
    if paradigms.is_empty() {
        return Err(invalid("no sessions to summarize"));
    }
    let ms = paradigm_sessions(sessions, ParadigmId::MsP);
    let ls = paradigm_sessions(sessions, ParadigmId::LsP);
    let paired = !ms.is_empty()
        && ms.len() == ls.len()
        && ms.iter().zip(&ls).all(|(a, b)| a.subject == b.subject);
    let comparison = if paired && ms.len() >= 2 {
        let col = |v: &[&CohortSession], f: fn(&SessionResult) -> f64| v.iter().map(|s| f(&s.result)).collect::<Vec<_>>();
        Some(ParadigmComparison {
            accuracy_pct: compare_paired(&col(&ms, |r| r.totals.accuracy_pct), &col(&ls, |r| r.totals.accuracy_pct))?,
            trials_total: compare_paired(
                &col(&ms, |r| r.totals.trials_total as f64),
                &col(&ls, |r| r.totals.trials_total as f64),
            )?,
            bit_rate: compare_paired(&col(&ms, |r| r.totals.bit_rate), &col(&ls, |r| r.totals.bit_rate))?,
        })
    } else {
        None
    };
    Ok(CohortSummary { paradigms, comparison })
}
