//! Speller displays, the 12-group flash code and stimulus timing.
//!
//! Both displays show the same 42 items and share one flash code; they differ
//! only in where the items sit on screen. Item positions are given in cm from
//! the display center and every visual angle is measured from the fixation
//! point, the center of the stimulus matrix, at the viewing distance.
//!
//! The flash code is the circulant graph on Z12 with connection set
//! {±1, ±2, ±3, 6}: 42 edges, every vertex of degree 7. Each item is one edge,
//! so it flashes with exactly two groups, every group holds seven items, and
//! two items never share more than one group.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const N_ITEMS: usize = 42;
pub const N_GROUPS: usize = 12;
pub const SAMPLE_RATE_HZ: f64 = 256.0;
pub const SOA_S: f64 = 0.2;
pub const FLASH_ON_S: f64 = 0.1;
pub const TRIAL_S: f64 = N_GROUPS as f64 * SOA_S;
pub const DEFAULT_VIEWING_DISTANCE_CM: f64 = 80.0;

/// Target eccentricity ranges (degrees) the default geometries are calibrated to.
pub const MS_P_ANGLE_RANGE_DEG: (f64, f64) = (1.07, 9.58);
pub const LS_P_ANGLE_RANGE_DEG: (f64, f64) = (4.43, 12.34);

/// Item labels in row-major order of the matrix display.
///
/// "DH" is the comma, "JH." the period, "SP" space, "BS" backspace and "No"
/// cancel.
pub const LABELS: [&str; N_ITEMS] = [
    "A", "B", "C", "D", "E", "F", "G", //
    "H", "I", "J", "K", "L", "M", "N", //
    "O", "P", "Q", "R", "S", "T", "U", //
    "V", "W", "X", "Y", "Z", "1", "2", //
    "3", "4", "5", "6", "7", "8", "9", //
    "0", "DH", "JH.", "SP", "BS", "No", "?",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParadigmId {
    #[serde(rename = "MS_P")]
    MsP,
    #[serde(rename = "LS_P")]
    LsP,
}

impl ParadigmId {
    pub const ALL: [ParadigmId; 2] = [ParadigmId::MsP, ParadigmId::LsP];

    pub fn short_name(self) -> &'static str {
        match self {
            ParadigmId::MsP => "ms",
            ParadigmId::LsP => "ls",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ParadigmId::MsP => "MS-P",
            ParadigmId::LsP => "LS-P",
        }
    }

    pub fn feedback_region(self) -> FeedbackRegion {
        match self {
            ParadigmId::MsP => FeedbackRegion::LeftSide,
            ParadigmId::LsP => FeedbackRegion::Center,
        }
    }
}

impl std::str::FromStr for ParadigmId {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ms" | "ms-p" | "ms_p" => Ok(ParadigmId::MsP),
            "ls" | "ls-p" | "ls_p" => Ok(ParadigmId::LsP),
            other => Err(invalid(format!("unknown paradigm '{other}' (expected ms or ls)"))),
        }
    }
}

impl std::fmt::Display for ParadigmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackRegion {
    #[serde(rename = "LEFT_SIDE")]
    LeftSide,
    #[serde(rename = "CENTER")]
    Center,
}

/// Physical set-up of one display. Lengths in cm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayGeometry {
    pub width_cm: f64,
    pub height_cm: f64,
    pub viewing_distance_cm: f64,
    pub cell_pitch_x_cm: f64,
    pub cell_pitch_y_cm: f64,
    /// Offset of the stimulus-matrix center (the fixation point) from the display center.
    pub center_offset_cm: [f64; 2],
}

impl DisplayGeometry {
    /// Laptop display (26 x 19.5 cm) at 80 cm with the grid pitch calibrated
    /// so that item eccentricities span the paradigm's quoted angle range.
    pub fn default_for(paradigm: ParadigmId) -> Self {
        let (pitch_x, pitch_y) = calibrated_pitch(paradigm, DEFAULT_VIEWING_DISTANCE_CM);
        Self {
            width_cm: 26.0,
            height_cm: 19.5,
            viewing_distance_cm: DEFAULT_VIEWING_DISTANCE_CM,
            cell_pitch_x_cm: pitch_x,
            cell_pitch_y_cm: pitch_y,
            center_offset_cm: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("width_cm", self.width_cm),
            ("height_cm", self.height_cm),
            ("viewing_distance_cm", self.viewing_distance_cm),
            ("cell_pitch_x_cm", self.cell_pitch_x_cm),
            ("cell_pitch_y_cm", self.cell_pitch_y_cm),
        ];
        for (name, value) in lengths {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(format!("{name} must be a positive length, got {value}")));
            }
        }
        if !self.center_offset_cm.iter().all(|v| v.is_finite()) {
            return Err(invalid("center_offset_cm must be finite"));
        }
        Ok(())
    }
}

/// Grid pitch (x, y) that maps the nearest and farthest items of the paradigm's
/// grid onto its quoted angle range at `distance_cm`.
pub fn calibrated_pitch(paradigm: ParadigmId, distance_cm: f64) -> (f64, f64) {
    let radius = |deg: f64| distance_cm * deg.to_radians().tan();
    match paradigm {
        ParadigmId::MsP => {
            // nearest item sits half a row from the fixation point: (0, py/2);
            // farthest is a corner: (3 px, 2.5 py)
            let (lo, hi) = MS_P_ANGLE_RANGE_DEG;
            let pitch_y = 2.0 * radius(lo);
            let r = radius(hi);
            let pitch_x = (r * r - 6.25 * pitch_y * pitch_y).sqrt() / 3.0;
            (pitch_x, pitch_y)
        }
        ParadigmId::LsP => {
            // nearest item borders the central hole: (2 px, py/2);
            // farthest is a corner: (4 px, 2.5 py)
            let (lo, hi) = LS_P_ANGLE_RANGE_DEG;
            let (r, big_r) = (radius(lo), radius(hi));
            let py2 = (big_r * big_r - 4.0 * r * r) / 5.25;
            let px2 = (r * r - 0.25 * py2) / 4.0;
            (px2.sqrt(), py2.sqrt())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutItem {
    pub label: String,
    pub grid_row: usize,
    pub grid_col: usize,
    /// Position in cm from the display center (x right, y up).
    pub position_cm: [f64; 2],
    /// Eccentricity from the fixation point, degrees.
    pub visual_angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpellerLayout {
    pub paradigm_id: ParadigmId,
    pub geometry: DisplayGeometry,
    pub feedback_region: FeedbackRegion,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub items: Vec<LayoutItem>,
}

impl SpellerLayout {
    pub fn angle_range(&self) -> (f64, f64) {
        self.items.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), item| {
            (lo.min(item.visual_angle_deg), hi.max(item.visual_angle_deg))
        })
    }

    pub fn mean_angle(&self) -> f64 {
        self.items.iter().map(|i| i.visual_angle_deg).sum::<f64>() / self.items.len() as f64
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.items.iter().position(|i| i.label == label)
    }
}

/// Grid cells (row, col) occupied by items, in row-major order.
fn grid_cells(paradigm: ParadigmId) -> (usize, usize, Vec<(usize, usize)>) {
    match paradigm {
        ParadigmId::MsP => {
            let cells = (0..6).flat_map(|r| (0..7).map(move |c| (r, c))).collect();
            (6, 7, cells)
        }
        ParadigmId::LsP => {
            // 6 x 9 frame around a 4-row x 3-column feedback area in the middle
            let cells = (0..6)
                .flat_map(|r| (0..9).map(move |c| (r, c)))
                .filter(|&(r, c)| !((1..=4).contains(&r) && (3..=5).contains(&c)))
                .collect();
            (6, 9, cells)
        }
    }
}

pub fn build_layout(paradigm: ParadigmId, geometry: &DisplayGeometry) -> Result<SpellerLayout> {
    geometry.validate()?;
    let (rows, cols, cells) = grid_cells(paradigm);
    debug_assert_eq!(cells.len(), N_ITEMS);
    let center_row = (rows as f64 - 1.0) / 2.0;
    let center_col = (cols as f64 - 1.0) / 2.0;

    let items = cells
        .into_iter()
        .zip(LABELS)
        .map(|((row, col), label)| {
            let local = [
                (col as f64 - center_col) * geometry.cell_pitch_x_cm,
                (center_row - row as f64) * geometry.cell_pitch_y_cm,
            ];
            let position_cm = [
                local[0] + geometry.center_offset_cm[0],
                local[1] + geometry.center_offset_cm[1],
            ];
            LayoutItem {
                label: label.to_string(),
                grid_row: row,
                grid_col: col,
                position_cm,
                visual_angle_deg: visual_angle(local, geometry.viewing_distance_cm),
            }
        })
        .collect();

    Ok(SpellerLayout {
        paradigm_id: paradigm,
        geometry: geometry.clone(),
        feedback_region: paradigm.feedback_region(),
        grid_rows: rows,
        grid_cols: cols,
        items,
    })
}

/// Angular eccentricity (degrees) of a point `position_cm` away from fixation.
pub fn visual_angle(position_cm: [f64; 2], viewing_distance_cm: f64) -> f64 {
    let r = position_cm[0].hypot(position_cm[1]);
    r.atan2(viewing_distance_cm).to_degrees()
}

/// Bijection between items and unordered pairs of flash groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlashCode {
    pub n_groups: usize,
    /// `item_to_pair[i] = [a, b]` with `a < b`.
    pub item_to_pair: Vec<[usize; 2]>,
    /// Item indices flashed by each group, ascending.
    pub group_members: Vec<Vec<usize>>,
}

/// The default circulant code, items mapped to the lexicographically sorted edge list.
pub fn build_flash_code() -> FlashCode {
    let mut edges: Vec<[usize; 2]> = Vec::with_capacity(N_ITEMS);
    for d in 1..=3 {
        for i in 0..N_GROUPS {
            let j = (i + d) % N_GROUPS;
            edges.push([i.min(j), i.max(j)]);
        }
    }
    for i in 0..N_GROUPS / 2 {
        edges.push([i, i + N_GROUPS / 2]);
    }
    edges.sort_unstable();

    let mut group_members = vec![Vec::new(); N_GROUPS];
    for (item, pair) in edges.iter().enumerate() {
        group_members[pair[0]].push(item);
        group_members[pair[1]].push(item);
    }
    FlashCode {
        n_groups: N_GROUPS,
        item_to_pair: edges,
        group_members,
    }
}

impl FlashCode {
    pub fn n_items(&self) -> usize {
        self.item_to_pair.len()
    }

    pub fn pair(&self, item: usize) -> [usize; 2] {
        self.item_to_pair[item]
    }

    pub fn contains(&self, group: usize, item: usize) -> bool {
        let [a, b] = self.item_to_pair[item];
        group == a || group == b
    }

    pub fn item_for_pair(&self, g1: usize, g2: usize) -> Option<usize> {
        let key = [g1.min(g2), g1.max(g2)];
        self.item_to_pair.iter().position(|p| *p == key)
    }

    /// Checks the structural properties every flash code must have.
    pub fn validate(&self) -> Result<()> {
        if self.group_members.len() != self.n_groups {
            return Err(invalid("group_members length differs from n_groups"));
        }
        for (item, &[a, b]) in self.item_to_pair.iter().enumerate() {
            if a >= b || b >= self.n_groups {
                return Err(invalid(format!("item {item} has malformed pair [{a}, {b}]")));
            }
            if self.item_to_pair[..item].contains(&[a, b]) {
                return Err(invalid(format!("item {item} duplicates pair [{a}, {b}]")));
            }
        }
        for (g, members) in self.group_members.iter().enumerate() {
            for &item in members {
                if item >= self.n_items() || !self.contains(g, item) {
                    return Err(invalid(format!("group {g} lists item {item} inconsistently")));
                }
            }
        }
        let memberships: usize = self.group_members.iter().map(Vec::len).sum();
        if memberships != 2 * self.n_items() {
            return Err(invalid("group membership count differs from 2 x items"));
        }
        Ok(())
    }
}

/// One flash of one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlashEvent {
    pub onset_sample: usize,
    pub group_id: usize,
    pub block_index: usize,
    pub trial_index: usize,
    pub is_target: bool,
}

/// Random flash order for one trial: a uniform permutation of the 12 groups.
pub fn schedule_trial<R: Rng + ?Sized>(rng: &mut R) -> [usize; N_GROUPS] {
    let mut order: [usize; N_GROUPS] = std::array::from_fn(|g| g);
    order.shuffle(rng);
    order
}

/// Sample offset of the `k`-th flash of a trial block, counted from the block's first onset.
pub fn flash_offset_samples(k: usize) -> usize {
    (k as f64 * SOA_S * SAMPLE_RATE_HZ).round() as usize
}
