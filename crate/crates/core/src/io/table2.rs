//! Published per-subject online results of the ALS cohort, used to check the bit-rate convention.

use serde::Serialize;

use crate::analysis::bit_rate;
use crate::paradigm::{ParadigmId, N_ITEMS, TRIAL_S};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table2Row {
    pub subject: u8,
    pub paradigm: ParadigmId,
    pub accuracy_pct: f64,
    pub trials: u32,
    pub bit_rate: f64,
}

// subject, (MS-P accuracy, trials, bit rate), (LS-P accuracy, trials, bit rate)
const RAW: [(u8, (f64, u32, f64), (f64, u32, f64)); 18] = [
    (1, (88.1, 112, 39.6), (76.2, 127, 27.5)),
    (2, (81.0, 104, 37.1), (92.9, 105, 46.4)),
    (3, (81.0, 110, 35.1), (85.7, 103, 41.1)),
    (4, (59.5, 121, 19.5), (88.1, 120, 37.0)),
    (5, (61.9, 131, 19.2), (71.4, 136, 23.1)),
    (6, (64.3, 133, 20.0), (47.6, 138, 12.1)),
    (7, (78.6, 110, 33.4), (83.3, 119, 33.9)),
    (8, (100.0, 94, 60.2), (97.6, 91, 58.9)),
    (9, (90.5, 95, 49.0), (97.6, 95, 56.4)),
    (10, (85.7, 104, 40.7), (100.0, 99, 57.2)),
    (11, (81.0, 107, 36.0), (69.0, 121, 24.6)),
    (12, (90.5, 95, 49.0), (92.9, 102, 47.8)),
    (13, (92.9, 100, 48.7), (81.0, 112, 34.4)),
    (14, (83.2, 98, 41.1), (92.9, 99, 49.2)),
    (15, (81.0, 125, 30.9), (85.7, 119, 35.6)),
    (16, (95.2, 107, 47.7), (100.0, 91, 62.2)),
    (17, (71.4, 115, 27.4), (61.9, 128, 19.6)),
    (18, (90.5, 105, 44.3), (78.6, 103, 35.6)),
];

/// The 36 rows, MS-P and LS-P interleaved per subject.
pub fn table2_rows() -> Vec<Table2Row> {
    RAW.iter()
        .flat_map(|&(subject, ms, ls)| {
            [(ParadigmId::MsP, ms), (ParadigmId::LsP, ls)].map(|(paradigm, (accuracy_pct, trials, bit_rate))| {
                Table2Row { subject, paradigm, accuracy_pct, trials, bit_rate }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table2Check {
    pub row: Table2Row,
    pub computed: f64,
    pub residual: f64,
}

/// Recomputes every row's bit rate from its printed accuracy and trial count.
pub fn check_table2() -> Vec<Table2Check> {
    table2_rows()
        .into_iter()
        .map(|row| {
            let computed = bit_rate(row.accuracy_pct / 100.0, N_ITEMS, row.trials as f64, TRIAL_S);
            Table2Check { row, computed, residual: computed - row.bit_rate }
        })
        .collect()
}
