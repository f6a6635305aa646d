//! Sample assembly: missing-row elimination, feature derivation, the PVE
//! target, quintile category bins and the seeded train/test split.

use std::fmt;
use std::io::{self, Write};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::power_client::DailyRecord;
use crate::solar_geometry;

pub const CATEGORY_COUNT: usize = 5;
pub const FEATURE_COUNT: usize = 3;

pub const CATEGORY_NAMES: [&str; CATEGORY_COUNT] = ["very low", "low", "moderate", "high", "very high"];

pub const DEFAULT_TEST_RATIO: f64 = 0.35;
pub const DEFAULT_EFFICIENCY: f64 = 0.20;
pub const DEFAULT_AREA: f64 = 1.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DatasetError {
    #[error("no complete daily records remain after removing missing values")]
    EmptyDataset,
    #[error("target has {distinct} distinct value(s); need at least 5 for quintile bins")]
    DegenerateTarget { distinct: usize },
    #[error("bin edges are not strictly increasing: {0:?}")]
    NonIncreasingEdges([f64; 4]),
    #[error("need at least {min} samples to split, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Index into [`CATEGORY_NAMES`], ordered from lowest to highest energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Category(u8);

impl Category {
    pub const ALL: [Category; CATEGORY_COUNT] =
        [Category(0), Category(1), Category(2), Category(3), Category(4)];

    pub fn new(index: usize) -> Option<Self> {
        (index < CATEGORY_COUNT).then_some(Category(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        CATEGORY_NAMES[self.index()]
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub t_avg: f64,
    pub kt: f64,
    pub s_mod: f64,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; FEATURE_COUNT] {
        [self.t_avg, self.kt, self.s_mod]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.as_array().iter().all(|v| v.is_finite()) {
            return Err(DatasetError::InvalidConfig("features must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.kt) {
            return Err(DatasetError::InvalidConfig(format!(
                "clearness index {} outside [0, 1]",
                self.kt
            )));
        }
        if self.s_mod < 0.0 {
            return Err(DatasetError::InvalidConfig(format!(
                "negative module irradiance {}",
                self.s_mod
            )));
        }
        Ok(())
    }
}

/// A cleaned day with features and target but no category yet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub date: NaiveDate,
    pub features: FeatureVector,
    pub pve: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub date: NaiveDate,
    pub features: FeatureVector,
    pub pve: f64,
    pub label: Category,
}

/// Panel parameters turning module-plane irradiance into energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub efficiency: f64,
    pub area: f64,
}

impl Default for PanelSpec {
    fn default() -> Self {
        PanelSpec {
            efficiency: DEFAULT_EFFICIENCY,
            area: DEFAULT_AREA,
        }
    }
}

impl PanelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(DatasetError::InvalidConfig(format!(
                "efficiency {} outside (0, 1]",
                self.efficiency
            )));
        }
        if !(self.area > 0.0 && self.area.is_finite()) {
            return Err(DatasetError::InvalidConfig(format!("area {} must be > 0", self.area)));
        }
        Ok(())
    }

    pub fn energy(&self, s_mod: f64) -> f64 {
        s_mod * self.efficiency * self.area
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_ratio: DEFAULT_TEST_RATIO,
            seed: 0,
        }
    }
}

/// Drops incomplete records and derives `S_mod` and PVE for the rest.
///
/// Returns the surviving rows (in input order) and how many were dropped.
pub fn assemble(
    records: &[DailyRecord],
    latitude: f64,
    panel: PanelSpec,
) -> Result<(Vec<Row>, usize)> {
    panel.validate()?;
    let mut rows = Vec::with_capacity(records.len());
    for rec in records {
        let (Some(t_avg), Some(kt), Some(s_horiz)) = (rec.t_avg, rec.kt, rec.s_horiz) else {
            continue;
        };
        let s_mod = solar_geometry::s_mod_for(latitude, rec.date, s_horiz);
        rows.push(Row {
            date: rec.date,
            features: FeatureVector { t_avg, kt, s_mod },
            pve: panel.energy(s_mod),
        });
    }
    let dropped = records.len() - rows.len();
    if rows.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok((rows, dropped))
}

/// Four interior edges separating the five ordered categories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinScheme {
    edges: [f64; 4],
}

impl BinScheme {
    pub fn from_edges(edges: [f64; 4]) -> Result<Self> {
        let increasing = edges.iter().all(|e| e.is_finite()) && edges.windows(2).all(|w| w[0] < w[1]);
        if !increasing {
            return Err(DatasetError::NonIncreasingEdges(edges));
        }
        Ok(BinScheme { edges })
    }

    pub fn edges(&self) -> [f64; 4] {
        self.edges
    }

    pub fn names(&self) -> [&'static str; CATEGORY_COUNT] {
        CATEGORY_NAMES
    }

    /// Lower and upper edge of a category; `None` marks an open end.
    pub fn interval(&self, cat: Category) -> (Option<f64>, Option<f64>) {
        let i = cat.index();
        let lo = i.checked_sub(1).map(|j| self.edges[j]);
        let hi = self.edges.get(i).copied();
        (lo, hi)
    }

    /// Category of `pve`; values on an edge go to the lower bin.
    pub fn apply(&self, pve: f64) -> Category {
        let idx = self.edges.iter().take_while(|&&e| pve > e).count();
        Category(idx as u8)
    }
}

/// Percentile with linear interpolation between order statistics
/// (position `p * (n - 1)` in the sorted sample).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Fits quintile edges (20/40/60/80 percentiles) on training targets.
pub fn fit_bins(pve_values: &[f64]) -> Result<BinScheme> {
    let mut sorted: Vec<f64> = pve_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < CATEGORY_COUNT {
        return Err(DatasetError::DegenerateTarget {
            distinct: distinct.len(),
        });
    }
    let edges = [0.2, 0.4, 0.6, 0.8].map(|p| percentile(&sorted, p));
    BinScheme::from_edges(edges)
}

pub fn apply_bins(scheme: &BinScheme, pve: f64) -> Category {
    scheme.apply(pve)
}

pub fn label_rows(rows: &[Row], scheme: &BinScheme) -> Vec<LabeledSample> {
    rows.iter()
        .map(|r| LabeledSample {
            date: r.date,
            features: r.features,
            pve: r.pve,
            label: scheme.apply(r.pve),
        })
        .collect()
}

pub const MIN_SPLIT_SAMPLES: usize = 10;

/// Number of held-out items for `n` samples, `floor(n * ratio)`.
pub fn test_count(n: usize, ratio: f64) -> usize {
    // Tolerance absorbs products such as 100 * 0.35 landing just under 35.
    ((n as f64 * ratio) + 1e-9).floor() as usize
}

/// Seeded shuffle, then the first `ceil(n * (1 - ratio))` items train.
///
/// The permutation comes from ChaCha8 seeded with `seed` (via
/// `seed_from_u64`) driving a Fisher-Yates shuffle, which is stable across
/// platforms.
pub fn split<T: Clone>(items: &[T], cfg: SplitConfig) -> Result<(Vec<T>, Vec<T>)> {
    if !(cfg.test_ratio > 0.0 && cfg.test_ratio < 1.0) {
        return Err(DatasetError::InvalidConfig(format!(
            "test ratio {} outside (0, 1)",
            cfg.test_ratio
        )));
    }
    if items.len() < MIN_SPLIT_SAMPLES {
        return Err(DatasetError::TooFewSamples {
            got: items.len(),
            min: MIN_SPLIT_SAMPLES,
        });
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order.shuffle(&mut rng);
    let n_train = items.len() - test_count(items.len(), cfg.test_ratio);
    let train = order[..n_train].iter().map(|&i| items[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}

/// Writes `date,t_avg,kt,s_mod,pve,label` rows.
pub fn write_samples_csv<W: Write>(mut w: W, samples: &[LabeledSample]) -> io::Result<()> {
    writeln!(w, "date,t_avg,kt,s_mod,pve,label")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.date.format("%Y-%m-%d"),
            s.features.t_avg,
            s.features.kt,
            s.features.s_mod,
            s.pve,
            s.label.name()
        )?;
    }
    Ok(())
}
