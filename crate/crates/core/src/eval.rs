//! Confusion matrices, accuracy and the multi-location sweep.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dataset::{Category, LabeledSample, CATEGORY_COUNT, CATEGORY_NAMES};
use crate::gnb::GnbModel;
use crate::pipeline::{self, DataSource, PipelineError, TrainConfig};
use crate::power_client::GeoQuery;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

/// Counts indexed `[actual][predicted]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; CATEGORY_COUNT]; CATEGORY_COUNT],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; CATEGORY_COUNT]; CATEGORY_COUNT]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn record(&mut self, actual: Category, predicted: Category) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..CATEGORY_COUNT).map(|i| self.counts[i][i]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = [[0; CATEGORY_COUNT]; CATEGORY_COUNT];
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                t[j][i] = c;
            }
        }
        ConfusionMatrix { counts: t }
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<18}", "actual \\ predicted")?;
        for name in CATEGORY_NAMES {
            write!(f, "{name:>10}")?;
        }
        writeln!(f)?;
        for (name, row) in CATEGORY_NAMES.iter().zip(&self.counts) {
            write!(f, "{name:<18}")?;
            for c in row {
                write!(f, "{c:>10}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn confusion(model: &GnbModel, test: &[LabeledSample]) -> Result<ConfusionMatrix, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let mut cm = ConfusionMatrix::default();
    for s in test {
        cm.record(s.label, model.predict(&s.features));
    }
    Ok(cm)
}

/// Multiclass accuracy: trace over total.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Share of misclassifications that land in a neighbouring category.
/// A matrix without errors yields 1.0.
pub fn adjacent_error_fraction(cm: &ConfusionMatrix) -> f64 {
    let mut off = 0u64;
    let mut adjacent = 0u64;
    for (i, row) in cm.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if i != j {
                off += c;
                if i.abs_diff(j) == 1 {
                    adjacent += c;
                }
            }
        }
    }
    if off == 0 {
        1.0
    } else {
        adjacent as f64 / off as f64
    }
}

/// Formats a fraction as a percentage truncated to four decimals, so that
/// 344/365 prints as `94.2465%`.
pub fn format_percent(fraction: f64) -> String {
    let scaled = (fraction * 1e6 + 1e-6).floor() / 1e4;
    format!("{scaled:.4}%")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Period {
    pub fn new(label: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Self {
        Period {
            label: label.into(),
            start,
            end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub latitude: f64,
    pub longitude: f64,
    pub period: String,
    pub n_test: usize,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedLocation {
    pub latitude: f64,
    pub longitude: f64,
    pub period: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisAverage {
    pub value: f64,
    pub mean_accuracy: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub period: String,
    pub entries: Vec<SweepEntry>,
    pub skipped: Vec<SkippedLocation>,
    pub lat_averages: Vec<AxisAverage>,
    pub lon_averages: Vec<AxisAverage>,
}

fn coord_order(a: (f64, f64), b: (f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

/// Mean accuracy per distinct axis value, in ascending order of the value.
/// Sums run over `entries` in their stored order.
pub fn axis_averages(entries: &[SweepEntry], axis: impl Fn(&SweepEntry) -> f64) -> Vec<AxisAverage> {
    let mut values: Vec<f64> = entries.iter().map(&axis).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
        .into_iter()
        .map(|value| {
            let (sum, count) = entries
                .iter()
                .filter(|e| axis(e) == value)
                .fold((0.0, 0usize), |(s, n), e| (s + e.accuracy, n + 1));
            AxisAverage {
                value,
                mean_accuracy: sum / count as f64,
                count,
            }
        })
        .collect()
}

impl SweepReport {
    /// Builds a report, sorting entries by (latitude, longitude).
    pub fn new(
        period: impl Into<String>,
        mut entries: Vec<SweepEntry>,
        mut skipped: Vec<SkippedLocation>,
    ) -> Self {
        entries.sort_by(|a, b| coord_order((a.latitude, a.longitude), (b.latitude, b.longitude)));
        skipped.sort_by(|a, b| coord_order((a.latitude, a.longitude), (b.latitude, b.longitude)));
        let lat_averages = axis_averages(&entries, |e| e.latitude);
        let lon_averages = axis_averages(&entries, |e| e.longitude);
        SweepReport {
            period: period.into(),
            entries,
            skipped,
            lat_averages,
            lon_averages,
        }
    }

    /// Mean accuracy over all evaluated locations.
    pub fn mean_accuracy(&self) -> Option<f64> {
        if self.entries.is_empty() {
            return None;
        }
        Some(self.entries.iter().map(|e| e.accuracy).sum::<f64>() / self.entries.len() as f64)
    }

    /// `lat,lon,period,n_test,accuracy`; skipped locations carry `skipped`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        enum Row<'a> {
            Done(&'a SweepEntry),
            Skip(&'a SkippedLocation),
        }
        let mut rows: Vec<((f64, f64), Row)> = self
            .entries
            .iter()
            .map(|e| ((e.latitude, e.longitude), Row::Done(e)))
            .chain(self.skipped.iter().map(|s| ((s.latitude, s.longitude), Row::Skip(s))))
            .collect();
        rows.sort_by(|a, b| coord_order(a.0, b.0));
        writeln!(w, "lat,lon,period,n_test,accuracy")?;
        for (_, row) in rows {
            match row {
                Row::Done(e) => writeln!(
                    w,
                    "{},{},{},{},{}",
                    e.latitude, e.longitude, e.period, e.n_test, e.accuracy
                )?,
                Row::Skip(s) => writeln!(w, "{},{},{},0,skipped", s.latitude, s.longitude, s.period)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub latitudes: Vec<f64>,
    pub longitudes: Vec<f64>,
    pub train_period: Period,
    pub eval_period: Period,
}

/// Held-out (training period) and cross-period reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub same_period: SweepReport,
    pub cross_period: SweepReport,
}

#[derive(Debug, thiserror::Error)]
#[error("location ({latitude}, {longitude}), period {period}: {source}")]
pub struct SweepError {
    pub latitude: f64,
    pub longitude: f64,
    pub period: String,
    #[source]
    pub source: PipelineError,
}

enum Outcome {
    Entry(SweepEntry),
    Skipped(SkippedLocation),
}

type LocationResult = Result<(Outcome, Option<Outcome>), SweepError>;

fn run_location(
    lat: f64,
    lon: f64,
    plan: &SweepPlan,
    source: &DataSource,
    cfg: TrainConfig,
) -> LocationResult {
    let fail = |period: &Period, source: PipelineError| SweepError {
        latitude: lat,
        longitude: lon,
        period: period.label.clone(),
        source,
    };
    let skip = |period: &Period, err: &PipelineError| {
        Outcome::Skipped(SkippedLocation {
            latitude: lat,
            longitude: lon,
            period: period.label.clone(),
            reason: err.to_string(),
        })
    };

    let tp = &plan.train_period;
    let train_q = GeoQuery::new(lat, lon, tp.start, tp.end);
    let trained = match pipeline::train(source, &train_q, cfg) {
        Ok(t) => t,
        Err(e) if e.is_insufficient_data() => {
            let ep = &plan.eval_period;
            return Ok((skip(tp, &e), Some(skip(ep, &e))));
        }
        Err(e) => return Err(fail(tp, e)),
    };
    let same = Outcome::Entry(SweepEntry {
        latitude: lat,
        longitude: lon,
        period: tp.label.clone(),
        n_test: trained.test.len(),
        accuracy: accuracy(&trained.confusion).map_err(|e| fail(tp, e.into()))?,
        confusion: trained.confusion,
    });

    let ep = &plan.eval_period;
    let eval_q = GeoQuery::new(lat, lon, ep.start, ep.end);
    let cross = match pipeline::evaluate(&trained.model, source, &eval_q) {
        Ok(ev) => Outcome::Entry(SweepEntry {
            latitude: lat,
            longitude: lon,
            period: ep.label.clone(),
            n_test: ev.samples.len(),
            accuracy: accuracy(&ev.confusion).map_err(|e| fail(ep, e.into()))?,
            confusion: ev.confusion,
        }),
        Err(e) if e.is_insufficient_data() => skip(ep, &e),
        Err(e) => return Err(fail(ep, e)),
    };
    Ok((same, Some(cross)))
}

/// Trains at every grid point on the training period, then scores the
/// held-out split and the evaluation period with the same model.
///
/// Locations run on separate threads; reports are sorted by coordinates so
/// the output does not depend on completion order.
pub fn sweep(plan: &SweepPlan, source: &DataSource, cfg: TrainConfig) -> Result<SweepResult, SweepError> {
    let grid: Vec<(f64, f64)> = plan
        .latitudes
        .iter()
        .flat_map(|&lat| plan.longitudes.iter().map(move |&lon| (lat, lon)))
        .collect();

    let results: Vec<LocationResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .iter()
            .map(|&(lat, lon)| scope.spawn(move || run_location(lat, lon, plan, source, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let mut same = (Vec::new(), Vec::new());
    let mut cross = (Vec::new(), Vec::new());
    let push = |bucket: &mut (Vec<SweepEntry>, Vec<SkippedLocation>), o: Outcome| match o {
        Outcome::Entry(e) => bucket.0.push(e),
        Outcome::Skipped(s) => bucket.1.push(s),
    };
    for r in results {
        let (s, c) = r?;
        push(&mut same, s);
        if let Some(c) = c {
            push(&mut cross, c);
        }
    }
    Ok(SweepResult {
        same_period: SweepReport::new(plan.train_period.label.clone(), same.0, same.1),
        cross_period: SweepReport::new(plan.eval_period.label.clone(), cross.0, cross.1),
    })
}
