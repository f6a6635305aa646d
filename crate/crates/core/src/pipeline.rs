//! End-to-end glue: records → labeled samples → fitted model → evaluation.

use std::path::PathBuf;

use crate::dataset::{self, DatasetError, LabeledSample, PanelSpec, SplitConfig};
use crate::eval::{self, ConfusionMatrix, EvalError};
use crate::gnb::{GnbModel, ModelError};
use crate::power_client::{self, DailyRecord, FetchMode, GeoQuery, PowerError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Where daily records come from.
#[derive(Debug, Clone)]
pub struct DataSource {
    pub base_url: String,
    pub mode: FetchMode,
    pub cassette_dir: PathBuf,
}

impl DataSource {
    pub fn fixtures(cassette_dir: impl Into<PathBuf>) -> Self {
        DataSource {
            base_url: power_client::DEFAULT_BASE_URL.to_string(),
            mode: FetchMode::Fixture,
            cassette_dir: cassette_dir.into(),
        }
    }

    pub fn records(&self, query: &GeoQuery) -> Result<Vec<DailyRecord>> {
        let resp = power_client::fetch_daily(query, &self.base_url, self.mode, &self.cassette_dir)?;
        Ok(power_client::parse_power_response(&resp)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainConfig {
    pub split: SplitConfig,
    pub panel: PanelSpec,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GnbModel,
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    pub dropped: usize,
    /// Held-out confusion matrix.
    pub confusion: ConfusionMatrix,
}

/// Splits assembled rows, fits bins on the training targets, labels both
/// halves and fits the classifier.
pub fn train_on_records(
    records: &[DailyRecord],
    query: &GeoQuery,
    cfg: TrainConfig,
) -> Result<TrainOutcome> {
    let (rows, dropped) = dataset::assemble(records, query.latitude, cfg.panel)?;
    let (train_rows, test_rows) = dataset::split(&rows, cfg.split)?;
    let targets: Vec<f64> = train_rows.iter().map(|r| r.pve).collect();
    let bins = dataset::fit_bins(&targets)?;
    let train = dataset::label_rows(&train_rows, &bins);
    let test = dataset::label_rows(&test_rows, &bins);
    let mut model = GnbModel::fit(&train, bins)?;
    model.meta.query = Some(query.clone());
    model.meta.split = Some(cfg.split);
    model.meta.panel = Some(cfg.panel);
    let confusion = eval::confusion(&model, &test)?;
    Ok(TrainOutcome {
        model,
        train,
        test,
        dropped,
        confusion,
    })
}

pub fn train(source: &DataSource, query: &GeoQuery, cfg: TrainConfig) -> Result<TrainOutcome> {
    let records = source.records(query)?;
    train_on_records(&records, query, cfg)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub samples: Vec<LabeledSample>,
    pub dropped: usize,
    pub confusion: ConfusionMatrix,
}

/// Labels a new period with the model's stored bins and panel, then scores it.
pub fn evaluate_records(
    model: &GnbModel,
    records: &[DailyRecord],
    latitude: f64,
) -> Result<Evaluation> {
    let panel = model.meta.panel.unwrap_or_default();
    let (rows, dropped) = dataset::assemble(records, latitude, panel)?;
    let samples = dataset::label_rows(&rows, &model.bins);
    let confusion = eval::confusion(model, &samples)?;
    Ok(Evaluation {
        samples,
        dropped,
        confusion,
    })
}

pub fn evaluate(model: &GnbModel, source: &DataSource, query: &GeoQuery) -> Result<Evaluation> {
    let records = source.records(query)?;
    evaluate_records(model, &records, query.latitude)
}

impl PipelineError {
    /// Errors meaning "not enough usable data here" rather than a fault.
    pub fn is_insufficient_data(&self) -> bool {
        matches!(
            self,
            PipelineError::Power(PowerError::FixtureMissing { .. })
                | PipelineError::Dataset(
                    DatasetError::EmptyDataset
                        | DatasetError::DegenerateTarget { .. }
                        | DatasetError::NonIncreasingEdges(_)
                        | DatasetError::TooFewSamples { .. }
                )
                | PipelineError::Eval(EvalError::EmptyTestSet)
        )
    }
}
