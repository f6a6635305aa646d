//! `pve` command-line interface.
//!
//! Exit codes: 0 success, 1 usage, 2 network/fixture, 3 data, 4 model.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::dataset::{self, FeatureVector, PanelSpec, SplitConfig};
use crate::eval::{self, format_percent, Period, SweepPlan, SweepReport};
use crate::gnb::GnbModel;
use crate::pipeline::{self, DataSource, PipelineError, TrainConfig};
use crate::power_client::{self, FetchMode, GeoQuery, PowerError};
use crate::synth;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FETCH: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MODEL: i32 = 4;

pub const DEFAULT_CASSETTE_DIR: &str = "cassettes";
pub const SWEEP_LATITUDES: [f64; 4] = [-60.0, -30.0, 40.0, 72.0];
pub const SWEEP_LONGITUDES: [f64; 4] = [-150.0, -75.0, 90.0, 140.0];

#[derive(Debug, Parser)]
#[command(name = "pve", version, about = "Categorical photovoltaic energy predictor")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalOpts {
    /// TOML file with any of the global keys below (flags take precedence).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// `live` fetches and records cassettes, `fixture` replays them.
    #[arg(long, global = true, env = "PVE_MODE")]
    pub mode: Option<FetchMode>,
    #[arg(long, global = true, env = "PVE_CASSETTE_DIR")]
    pub cassette_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "PVE_BASE_URL")]
    pub base_url: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub test_ratio: Option<f64>,
    /// Panel efficiency in (0, 1].
    #[arg(long, global = true)]
    pub efficiency: Option<f64>,
    /// Panel area, m².
    #[arg(long, global = true)]
    pub area: Option<f64>,
}

#[derive(Debug, Args, Clone)]
pub struct Location {
    #[arg(long, allow_hyphen_values = true)]
    pub lat: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: f64,
    /// First day, yyyymmdd.
    #[arg(long, value_parser = parse_date)]
    pub start: NaiveDate,
    /// Last day, yyyymmdd.
    #[arg(long, value_parser = parse_date)]
    pub end: NaiveDate,
}

impl Location {
    fn query(&self) -> GeoQuery {
        GeoQuery::new(self.lat, self.lon, self.start, self.end)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download (or replay) daily data and report how many days arrived.
    Fetch(Location),
    /// Fit a model on a period and report held-out accuracy.
    Train {
        #[command(flatten)]
        loc: Location,
        /// Where to write the model file.
        #[arg(long)]
        model: PathBuf,
    },
    /// Predict the energy category for one day's features.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t_avg: f64,
        #[arg(long)]
        kt: f64,
        #[arg(long)]
        s_mod: f64,
        /// Also print posterior probabilities.
        #[arg(long)]
        proba: bool,
    },
    /// Score a stored model on another period.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        loc: Location,
    },
    /// Train and score on every latitude/longitude combination.
    Sweep {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = SWEEP_LATITUDES)]
        lats: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = SWEEP_LONGITUDES)]
        lons: Vec<f64>,
        #[arg(long, value_parser = parse_date, default_value = "20160101")]
        train_start: NaiveDate,
        #[arg(long, value_parser = parse_date, default_value = "20170101")]
        train_end: NaiveDate,
        #[arg(long, value_parser = parse_date, default_value = "20170102")]
        eval_start: NaiveDate,
        #[arg(long, value_parser = parse_date, default_value = "20180101")]
        eval_end: NaiveDate,
        /// Output directory for the CSV reports and JSON summary.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the feature time series (and labeled samples) as CSV.
    PlotData {
        #[command(flatten)]
        loc: Location,
        #[arg(long)]
        out: PathBuf,
        /// Label samples with this model's bins instead of refitting.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write a line chart per series.
        #[arg(long)]
        svg: bool,
    },
    /// Record a cassette filled with synthetic climatology for offline use.
    SynthFixture(Location),
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    power_client::parse_yyyymmdd(s).ok_or_else(|| format!("expected a yyyymmdd date, got {s:?}"))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mode: Option<FetchMode>,
    cassette_dir: Option<PathBuf>,
    base_url: Option<String>,
    seed: Option<u64>,
    test_ratio: Option<f64>,
    efficiency: Option<f64>,
    area: Option<f64>,
}

/// Fully resolved settings shared by every command.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub cassette_dir: PathBuf,
    pub base_url: String,
    pub mode: FetchMode,
    pub seed: u64,
    pub test_ratio: f64,
    pub panel_efficiency: f64,
    pub panel_area: f64,
}

impl CliConfig {
    pub fn resolve(opts: &GlobalOpts) -> Result<Self, String> {
        let file = match &opts.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|e| format!("invalid config {}: {e}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let cfg = CliConfig {
            cassette_dir: opts
                .cassette_dir
                .clone()
                .or(file.cassette_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_CASSETTE_DIR)),
            base_url: opts
                .base_url
                .clone()
                .or(file.base_url)
                .unwrap_or_else(|| power_client::DEFAULT_BASE_URL.to_string()),
            mode: opts.mode.or(file.mode).unwrap_or(FetchMode::Fixture),
            seed: opts.seed.or(file.seed).unwrap_or(0),
            test_ratio: opts
                .test_ratio
                .or(file.test_ratio)
                .unwrap_or(dataset::DEFAULT_TEST_RATIO),
            panel_efficiency: opts
                .efficiency
                .or(file.efficiency)
                .unwrap_or(dataset::DEFAULT_EFFICIENCY),
            panel_area: opts.area.or(file.area).unwrap_or(dataset::DEFAULT_AREA),
        };
        if !(cfg.test_ratio > 0.0 && cfg.test_ratio < 1.0) {
            return Err(format!("--test-ratio {} must be in (0, 1)", cfg.test_ratio));
        }
        if !(cfg.panel_efficiency > 0.0 && cfg.panel_efficiency <= 1.0) {
            return Err(format!("--efficiency {} must be in (0, 1]", cfg.panel_efficiency));
        }
        if !(cfg.panel_area > 0.0 && cfg.panel_area.is_finite()) {
            return Err(format!("--area {} must be > 0", cfg.panel_area));
        }
        Ok(cfg)
    }

    pub fn source(&self) -> DataSource {
        DataSource {
            base_url: self.base_url.clone(),
            mode: self.mode,
            cassette_dir: self.cassette_dir.clone(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            split: SplitConfig {
                test_ratio: self.test_ratio,
                seed: self.seed,
            },
            panel: PanelSpec {
                efficiency: self.panel_efficiency,
                area: self.panel_area,
            },
        }
    }
}

/// A failed command: message plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Power(_) => EXIT_FETCH,
            PipelineError::Dataset(dataset::DatasetError::InvalidConfig(_)) => EXIT_USAGE,
            PipelineError::Dataset(_) | PipelineError::Eval(_) => EXIT_DATA,
            PipelineError::Model(_) => EXIT_MODEL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<PowerError> for Failure {
    fn from(e: PowerError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<crate::gnb::ModelError> for Failure {
    fn from(e: crate::gnb::ModelError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<dataset::DatasetError> for Failure {
    fn from(e: dataset::DatasetError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: EXIT_DATA,
            message: format!("I/O error: {e}"),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CmdResult {
    let cfg = CliConfig::resolve(&cli.global).map_err(Failure::usage)?;
    match &cli.command {
        Command::Fetch(loc) => cmd_fetch(&cfg, loc, out),
        Command::Train { loc, model } => cmd_train(&cfg, loc, model, out),
        Command::Predict {
            model,
            t_avg,
            kt,
            s_mod,
            proba,
        } => cmd_predict(
            model,
            FeatureVector {
                t_avg: *t_avg,
                kt: *kt,
                s_mod: *s_mod,
            },
            *proba,
            out,
        ),
        Command::Evaluate { model, loc } => cmd_evaluate(&cfg, model, loc, out),
        Command::Sweep {
            lats,
            lons,
            train_start,
            train_end,
            eval_start,
            eval_end,
            out: dir,
        } => {
            let plan = SweepPlan {
                latitudes: lats.clone(),
                longitudes: lons.clone(),
                train_period: period(*train_start, *train_end),
                eval_period: period(*eval_start, *eval_end),
            };
            cmd_sweep(&cfg, &plan, dir, out)
        }
        Command::PlotData {
            loc,
            out: dir,
            model,
            svg,
        } => cmd_plot_data(&cfg, loc, dir, model.as_deref(), *svg, out),
        Command::SynthFixture(loc) => cmd_synth_fixture(&cfg, loc, out),
    }
}

fn period(start: NaiveDate, end: NaiveDate) -> Period {
    Period::new(format!("{}-{}", start.year(), end.year()), start, end)
}

fn validated_query(loc: &Location) -> Result<GeoQuery, Failure> {
    let q = loc.query();
    q.validate()?;
    Ok(q)
}

pub fn cmd_fetch(cfg: &CliConfig, loc: &Location, out: &mut dyn Write) -> CmdResult {
    let q = validated_query(loc)?;
    let resp = power_client::fetch_daily(&q, &cfg.base_url, cfg.mode, &cfg.cassette_dir)?;
    let records = power_client::parse_power_response(&resp)?;
    let missing = records.iter().filter(|r| !r.is_complete()).count();
    writeln!(
        out,
        "fetched {} days ({missing} with missing values) [{}]",
        records.len(),
        match resp.source {
            FetchMode::Live => "live",
            FetchMode::Fixture => "fixture",
        }
    )?;
    writeln!(
        out,
        "cassette: {}",
        power_client::cassette_path(&cfg.cassette_dir, &resp.url).display()
    )?;
    Ok(())
}

/// RFC 3339 time from `SOURCE_DATE_EPOCH`, when set.
fn fit_timestamp() -> Option<String> {
    let secs: i64 = std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()?;
    chrono::DateTime::from_timestamp(secs, 0).map(|t| t.to_rfc3339())
}

pub fn cmd_train(cfg: &CliConfig, loc: &Location, model_out: &Path, out: &mut dyn Write) -> CmdResult {
    let q = validated_query(loc)?;
    let mut outcome = pipeline::train(&cfg.source(), &q, cfg.train_config())?;
    outcome.model.meta.fitted_at = fit_timestamp();
    outcome.model.save(model_out)?;
    let acc = eval::accuracy(&outcome.confusion).map_err(PipelineError::from)?;
    writeln!(out, "train samples: {}", outcome.train.len())?;
    writeln!(out, "test samples: {}", outcome.test.len())?;
    writeln!(out, "dropped days: {}", outcome.dropped)?;
    writeln!(out, "test accuracy: {}", format_percent(acc))?;
    writeln!(out, "model: {}", model_out.display())?;
    Ok(())
}

/// `high (0.85-1.32 kWh)`, with `<`/`>` forms for the open-ended classes.
pub fn format_prediction(model: &GnbModel, f: &FeatureVector) -> String {
    let cat = model.predict(f);
    match model.bins.interval(cat) {
        (None, Some(hi)) => format!("{} (<{hi:.2} kWh)", cat.name()),
        (Some(lo), None) => format!("{} (>{lo:.2} kWh)", cat.name()),
        (Some(lo), Some(hi)) => format!("{} ({lo:.2}-{hi:.2} kWh)", cat.name()),
        (None, None) => cat.name().to_string(),
    }
}

pub fn cmd_predict(model_path: &Path, f: FeatureVector, proba: bool, out: &mut dyn Write) -> CmdResult {
    f.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let model = GnbModel::load(model_path)?;
    writeln!(out, "{}", format_prediction(&model, &f))?;
    if proba {
        for (name, p) in dataset::CATEGORY_NAMES.iter().zip(model.predict_proba(&f)) {
            writeln!(out, "  {name:<10} {p:.6}")?;
        }
    }
    Ok(())
}

pub fn cmd_evaluate(cfg: &CliConfig, model_path: &Path, loc: &Location, out: &mut dyn Write) -> CmdResult {
    let q = validated_query(loc)?;
    let model = GnbModel::load(model_path)?;
    let ev = pipeline::evaluate(&model, &cfg.source(), &q)?;
    let acc = eval::accuracy(&ev.confusion).map_err(PipelineError::from)?;
    write!(out, "{}", ev.confusion)?;
    writeln!(out, "predictions: {}", ev.confusion.total())?;
    writeln!(out, "dropped days: {}", ev.dropped)?;
    writeln!(out, "accuracy: {}", format_percent(acc))?;
    writeln!(
        out,
        "adjacent-class errors: {}",
        format_percent(eval::adjacent_error_fraction(&ev.confusion))
    )?;
    Ok(())
}

fn write_report_summary(report: &SweepReport, out: &mut dyn Write) -> io::Result<()> {
    writeln!(
        out,
        "period {}: {} evaluated, {} skipped, mean accuracy {}",
        report.period,
        report.entries.len(),
        report.skipped.len(),
        report.mean_accuracy().map(format_percent).unwrap_or_else(|| "n/a".into())
    )?;
    for a in &report.lat_averages {
        writeln!(out, "  lat {:>8}: {} ({} locations)", a.value, format_percent(a.mean_accuracy), a.count)?;
    }
    for a in &report.lon_averages {
        writeln!(out, "  lon {:>8}: {} ({} locations)", a.value, format_percent(a.mean_accuracy), a.count)?;
    }
    Ok(())
}

pub fn sweep_csv_path(dir: &Path, report: &SweepReport) -> PathBuf {
    dir.join(format!("sweep_{}.csv", report.period))
}

pub fn cmd_sweep(cfg: &CliConfig, plan: &SweepPlan, dir: &Path, out: &mut dyn Write) -> CmdResult {
    for &lat in &plan.latitudes {
        for &lon in &plan.longitudes {
            GeoQuery::new(lat, lon, plan.train_period.start, plan.train_period.end).validate()?;
        }
    }
    let result = eval::sweep(plan, &cfg.source(), cfg.train_config()).map_err(|e| {
        let mut f = Failure::from(e.source);
        f.message = format!("location ({}, {}), period {}: {}", e.latitude, e.longitude, e.period, f.message);
        f
    })?;
    fs::create_dir_all(dir)?;
    for report in [&result.same_period, &result.cross_period] {
        let path = sweep_csv_path(dir, report);
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        fs::write(&path, buf)?;
        write_report_summary(report, out)?;
        writeln!(out, "  csv: {}", path.display())?;
    }
    let mut summary = serde_json::to_string_pretty(&result).expect("report serialises");
    summary.push('\n');
    fs::write(dir.join("sweep_summary.json"), summary)?;
    Ok(())
}

fn write_series(path: &Path, points: &[(NaiveDate, f64)]) -> io::Result<()> {
    let mut text = String::from("date,value\n");
    for (d, v) in points {
        let _ = writeln!(text, "{},{v}", d.format("%Y-%m-%d"));
    }
    fs::write(path, text)
}

/// Minimal single-polyline SVG chart of a dated series.
pub fn svg_line_chart(title: &str, points: &[(NaiveDate, f64)]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 320.0;
    const PAD: f64 = 40.0;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{PAD}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n"
    );
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        let span = ((last.0 - first.0).num_days().max(1)) as f64;
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
        let range = if hi > lo { hi - lo } else { 1.0 };
        let coords: Vec<String> = points
            .iter()
            .map(|(d, v)| {
                let x = PAD + (W - 2.0 * PAD) * ((*d - first.0).num_days() as f64 / span);
                let y = H - PAD - (H - 2.0 * PAD) * ((v - lo) / range);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<text x=\"4\" y=\"{PAD}\" font-family=\"sans-serif\" font-size=\"10\">{hi:.2}</text>\n\
             <text x=\"4\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\">{lo:.2}</text>\n\
             <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.2\" points=\"{}\"/>",
            H - PAD,
            coords.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn cmd_plot_data(
    cfg: &CliConfig,
    loc: &Location,
    dir: &Path,
    model_path: Option<&Path>,
    svg: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let q = validated_query(loc)?;
    let records = cfg.source().records(&q)?;
    if records.is_empty() {
        return Err(PipelineError::from(dataset::DatasetError::EmptyDataset).into());
    }
    fs::create_dir_all(dir)?;
    type Pick = fn(&power_client::DailyRecord) -> Option<f64>;
    let series: [(&str, &str, Pick); 3] = [
        ("t_avg", "Average temperature (°C)", |r| r.t_avg),
        ("kt", "Clearness index", |r| r.kt),
        ("s_horiz", "Horizontal irradiance (kWh/m²/day)", |r| r.s_horiz),
    ];
    for (name, title, pick) in series {
        let points: Vec<(NaiveDate, f64)> =
            records.iter().filter_map(|r| pick(r).map(|v| (r.date, v))).collect();
        write_series(&dir.join(format!("{name}.csv")), &points)?;
        if svg {
            fs::write(dir.join(format!("{name}.svg")), svg_line_chart(title, &points))?;
        }
        writeln!(out, "{name}: {} points", points.len())?;
    }

    let (samples, panel) = match model_path {
        Some(p) => {
            let model = GnbModel::load(p)?;
            let panel = model.meta.panel.unwrap_or_default();
            let (rows, _) = dataset::assemble(&records, q.latitude, panel)?;
            (dataset::label_rows(&rows, &model.bins), panel)
        }
        None => {
            let panel = cfg.train_config().panel;
            let (rows, _) = dataset::assemble(&records, q.latitude, panel)?;
            let targets: Vec<f64> = rows.iter().map(|r| r.pve).collect();
            let bins = dataset::fit_bins(&targets)?;
            (dataset::label_rows(&rows, &bins), panel)
        }
    };
    let mut buf = Vec::new();
    dataset::write_samples_csv(&mut buf, &samples)?;
    fs::write(dir.join("samples.csv"), buf)?;
    writeln!(
        out,
        "samples: {} (efficiency {}, area {} m²)",
        samples.len(),
        panel.efficiency,
        panel.area
    )?;
    Ok(())
}

pub fn cmd_synth_fixture(cfg: &CliConfig, loc: &Location, out: &mut dyn Write) -> CmdResult {
    let q = validated_query(loc)?;
    let body = synth::synthesize_body(&q).map_err(|e| Failure::usage(e.to_string()))?;
    let url = power_client::build_power_url(&q, &cfg.base_url)?;
    let path = power_client::write_cassette(&cfg.cassette_dir, &url, &body)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}
