//! Gaussian naive Bayes over the three daily features, with a versioned JSON
//! model file.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    BinScheme, Category, FeatureVector, LabeledSample, PanelSpec, SplitConfig, CATEGORY_COUNT,
    CATEGORY_NAMES, FEATURE_COUNT,
};
use crate::power_client::GeoQuery;

pub const FORMAT_VERSION: u32 = 1;

/// Relative variance floor, scaled by the largest pooled feature variance.
pub const VAR_SMOOTHING: f64 = 1e-9;
/// Floor used when every feature is constant over the training set.
pub const ABSOLUTE_VAR_FLOOR: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("model format version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Provenance carried alongside the fitted parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(default)]
    pub query: Option<GeoQuery>,
    #[serde(default)]
    pub split: Option<SplitConfig>,
    #[serde(default)]
    pub panel: Option<PanelSpec>,
    /// RFC 3339 timestamp; left empty unless the caller supplies one.
    #[serde(default)]
    pub fitted_at: Option<String>,
    #[serde(default)]
    pub n_train: usize,
    pub variance_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnbModel {
    pub priors: [f64; CATEGORY_COUNT],
    pub means: [[f64; FEATURE_COUNT]; CATEGORY_COUNT],
    pub variances: [[f64; FEATURE_COUNT]; CATEGORY_COUNT],
    pub bins: BinScheme,
    pub meta: ModelMeta,
}

/// Log of the normal density `N(x; mean, variance)`.
pub fn gaussian_log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * variance).ln() - d * d / (2.0 * variance)
}

/// Feature column `j` of `samples`, sorted so that downstream sums do not
/// depend on sample order.
fn sorted_column<'a>(samples: impl Iterator<Item = &'a LabeledSample>, j: usize) -> Vec<f64> {
    let mut col: Vec<f64> = samples.map(|s| s.features.as_array()[j]).collect();
    col.sort_by(f64::total_cmp);
    col
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_variance(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64
}

impl GnbModel {
    /// Fits priors, per-class means and floored population variances.
    ///
    /// Classes without training samples get prior 0 and are never predicted.
    pub fn fit(train: &[LabeledSample], bins: BinScheme) -> Result<Self> {
        if train.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let n = train.len() as f64;

        let pooled_max = (0..FEATURE_COUNT)
            .map(|j| {
                let col = sorted_column(train.iter(), j);
                population_variance(&col, mean(&col))
            })
            .fold(0.0, f64::max);
        let floor = if pooled_max > 0.0 {
            VAR_SMOOTHING * pooled_max
        } else {
            ABSOLUTE_VAR_FLOOR
        };

        let mut priors = [0.0; CATEGORY_COUNT];
        let mut means = [[0.0; FEATURE_COUNT]; CATEGORY_COUNT];
        let mut variances = [[floor; FEATURE_COUNT]; CATEGORY_COUNT];
        for cat in Category::ALL {
            let k = cat.index();
            let members = || train.iter().filter(move |s| s.label == cat);
            let count = members().count();
            if count == 0 {
                continue;
            }
            priors[k] = count as f64 / n;
            for j in 0..FEATURE_COUNT {
                let col = sorted_column(members(), j);
                means[k][j] = mean(&col);
                variances[k][j] = population_variance(&col, means[k][j]).max(floor);
            }
        }

        Ok(GnbModel {
            priors,
            means,
            variances,
            bins,
            meta: ModelMeta {
                n_train: train.len(),
                variance_floor: floor,
                ..ModelMeta::default()
            },
        })
    }

    /// `ln P(C_k) + Σ_j ln p(x_j | C_k)` per class; prior-0 classes get −∞.
    pub fn log_joint(&self, f: &FeatureVector) -> [f64; CATEGORY_COUNT] {
        let x = f.as_array();
        let mut out = [f64::NEG_INFINITY; CATEGORY_COUNT];
        for (k, slot) in out.iter_mut().enumerate() {
            if self.priors[k] <= 0.0 {
                continue;
            }
            *slot = self.priors[k].ln()
                + (0..FEATURE_COUNT)
                    .map(|j| gaussian_log_pdf(x[j], self.means[k][j], self.variances[k][j]))
                    .sum::<f64>();
        }
        out
    }

    pub fn predict(&self, f: &FeatureVector) -> Category {
        argmax_lowest(&self.log_joint(f))
    }

    /// Posterior class probabilities (softmax of the log joint).
    pub fn predict_proba(&self, f: &FeatureVector) -> [f64; CATEGORY_COUNT] {
        normalize_log(&self.log_joint(f))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&ModelFile::from(self))
            .expect("model serialisation is infallible");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct VersionProbe {
            format_version: u32,
        }
        let probe: VersionProbe = serde_json::from_str(text)
            .map_err(|e| ModelError::CorruptModel(format!("unreadable model file: {e}")))?;
        if probe.format_version != FORMAT_VERSION {
            return Err(ModelError::FormatVersionMismatch {
                found: probe.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| ModelError::CorruptModel(format!("unreadable model file: {e}")))?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Index of the largest value; ties go to the lower index.
pub fn argmax_lowest(values: &[f64; CATEGORY_COUNT]) -> Category {
    let mut best = 0;
    for k in 1..CATEGORY_COUNT {
        if values[k] > values[best] {
            best = k;
        }
    }
    Category::ALL[best]
}

/// Max-shifted softmax over log-space scores.
pub fn normalize_log(log_scores: &[f64; CATEGORY_COUNT]) -> [f64; CATEGORY_COUNT] {
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = log_scores.map(|v| (v - max).exp());
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    p
}

/// On-disk layout of a model.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    bin_edges: Vec<f64>,
    bin_names: Vec<String>,
    meta: ModelMeta,
}

impl From<&GnbModel> for ModelFile {
    fn from(m: &GnbModel) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            priors: m.priors.to_vec(),
            means: m.means.iter().map(|r| r.to_vec()).collect(),
            variances: m.variances.iter().map(|r| r.to_vec()).collect(),
            bin_edges: m.bins.edges().to_vec(),
            bin_names: CATEGORY_NAMES.iter().map(|s| s.to_string()).collect(),
            meta: m.meta.clone(),
        }
    }
}

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::CorruptModel(msg.into())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<[[f64; FEATURE_COUNT]; CATEGORY_COUNT]> {
    if rows.len() != CATEGORY_COUNT || rows.iter().any(|r| r.len() != FEATURE_COUNT) {
        return Err(corrupt(format!("{what} must be {CATEGORY_COUNT}x{FEATURE_COUNT}")));
    }
    let mut out = [[0.0; FEATURE_COUNT]; CATEGORY_COUNT];
    for (dst, src) in out.iter_mut().zip(rows) {
        dst.copy_from_slice(src);
    }
    if out.iter().flatten().any(|v| !v.is_finite()) {
        return Err(corrupt(format!("{what} contains non-finite values")));
    }
    Ok(out)
}

impl TryFrom<ModelFile> for GnbModel {
    type Error = ModelError;

    fn try_from(f: ModelFile) -> Result<Self> {
        let priors: [f64; CATEGORY_COUNT] = f
            .priors
            .as_slice()
            .try_into()
            .map_err(|_| corrupt(format!("priors must have {CATEGORY_COUNT} entries")))?;
        if priors.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(corrupt("priors must be finite and non-negative"));
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(corrupt(format!("priors sum to {sum}, not 1")));
        }
        let means = matrix(&f.means, "means")?;
        let variances = matrix(&f.variances, "variances")?;
        let floor = f.meta.variance_floor;
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(corrupt("variance floor must be positive"));
        }
        if variances.iter().flatten().any(|&v| v < floor) {
            return Err(corrupt("variance below floor"));
        }
        let edges: [f64; 4] = f
            .bin_edges
            .as_slice()
            .try_into()
            .map_err(|_| corrupt("bin_edges must have 4 entries"))?;
        let bins = BinScheme::from_edges(edges).map_err(|e| corrupt(e.to_string()))?;
        if f.bin_names.iter().map(String::as_str).ne(CATEGORY_NAMES) {
            return Err(corrupt(format!("unexpected bin names {:?}", f.bin_names)));
        }
        Ok(GnbModel {
            priors,
            means,
            variances,
            bins,
            meta: f.meta,
        })
    }
}
