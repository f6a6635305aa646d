//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{cassette_dir, oracle_argmax, oracle_fit, oracle_joint, random_instance, ymd};
use pve_core::cli::{self, SWEEP_LATITUDES, SWEEP_LONGITUDES};
use pve_core::dataset::{BinScheme, FeatureVector};
use pve_core::eval::{self, ConfusionMatrix, Period, SweepPlan, SweepReport};
use pve_core::gnb::{gaussian_log_pdf, GnbModel};
use pve_core::pipeline::{self, DataSource, TrainConfig};
use pve_core::power_client::{self, GeoQuery};
use pve_core::solar_geometry::{module_irradiance, solar_declination, solar_elevation, MAX_DECLINATION};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Axis<'a> = (&'a str, &'a [eval::AxisAverage], fn(&eval::SweepEntry) -> f64);

const METRIC_TOLERANCE: f64 = 1e-6;
const PROBA_SUM_TOLERANCE: f64 = 1e-12;
const LOG_PDF_TOLERANCE: f64 = 1e-9;
const INTEGRAL_TOLERANCE: f64 = 1e-6;
const MIN_ACCURACY: f64 = 0.85;
const MIN_ADJACENT: f64 = 0.9;
const ZENITH_TOLERANCE: f64 = 0.5;
const ORACLE_INSTANCES: u64 = 500;

const REFERENCE_MATRIX: [[u64; 5]; 5] = [
    [27, 3, 0, 0, 0],
    [0, 70, 6, 0, 0],
    [0, 3, 62, 2, 0],
    [0, 0, 1, 68, 3],
    [0, 0, 0, 3, 117],
];

const HYDERABAD_URL: &str = "https://power.larc.nasa.gov/cgi-bin/v1/DataAccess.py?&request=execute&identifier=SinglePoint&parameters=T2M,ALLSKY_KT,ALLSKY_SFC_SW_DWN&startDate=20160101&endDate=20170102&userCommunity=SSE&tempAverage=DAILY&outputList=CSV&lat=17.84&lon=78.2";

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < budget, || format!("took {took:?}, budget {budget:?}"))
}

fn metric_replay() -> Outcome {
    let start = Instant::now();
    let cm = ConfusionMatrix::from_counts(REFERENCE_MATRIX);
    let acc = eval::accuracy(&cm).map_err(|e| e.to_string())?;
    let adjacent = eval::adjacent_error_fraction(&cm);
    ensure(cm.trace() == 344 && cm.total() == 365, || format!("{}/{}", cm.trace(), cm.total()))?;
    ensure((acc - 0.942465).abs() <= METRIC_TOLERANCE, || format!("accuracy {acc}"))?;
    ensure(eval::format_percent(acc) == "94.2465%", || eval::format_percent(acc))?;
    ensure(adjacent == 1.0, || format!("adjacent fraction {adjacent}"))?;
    within_budget(start, Duration::from_secs(1))?;
    Ok(format!("344/365 = {}, adjacent errors {adjacent}", eval::format_percent(acc)))
}

fn gnb_oracle() -> Outcome {
    let start = Instant::now();
    let bins = BinScheme::from_edges([1.0, 2.0, 3.0, 4.0]).unwrap();
    let mut queries = 0;
    for seed in 0..ORACLE_INSTANCES {
        let (train, points) = random_instance(10_000 + seed);
        let model = GnbModel::fit(&train, bins).map_err(|e| e.to_string())?;
        let fit = oracle_fit(&train);
        for x in points {
            let f = FeatureVector { t_avg: x[0], kt: x[1], s_mod: x[2] };
            let expected = oracle_argmax(&oracle_joint(&fit, x));
            let got = model.predict(&f).index();
            ensure(got == expected, || format!("instance {seed}: predicted {got}, oracle {expected}"))?;
            let sum: f64 = model.predict_proba(&f).iter().sum();
            ensure((sum - 1.0).abs() <= PROBA_SUM_TOLERANCE, || format!("instance {seed}: proba sum {sum}"))?;
            queries += 1;
        }
    }
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!("{ORACLE_INSTANCES} instances, {queries} queries agree"))
}

fn gaussian_checks() -> Outcome {
    let at_zero = gaussian_log_pdf(0.0, 0.0, 1.0);
    ensure((at_zero - (-0.918938533)).abs() <= LOG_PDF_TOLERANCE, || format!("log_pdf(0,0,1) = {at_zero}"))?;
    let mut worst: f64 = 0.0;
    for (mu, var) in [(0.0, 1.0), (3.5, 0.04), (-20.0, 9.0), (0.5, 1e-4)] {
        let sigma = f64::sqrt(var);
        let (a, b) = (mu - 8.0 * sigma, mu + 8.0 * sigma);
        // Composite Simpson's rule.
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            total += w * gaussian_log_pdf(a + i as f64 * h, mu, var).exp();
        }
        let integral = total * h / 3.0;
        worst = worst.max((integral - 1.0).abs());
        ensure((integral - 1.0).abs() <= INTEGRAL_TOLERANCE, || format!("mu {mu} var {var}: integral {integral}"))?;
    }
    Ok(format!("log_pdf(0,0,1) = {at_zero:.9}, worst integral error {worst:.1e}"))
}

fn van_end_to_end() -> Outcome {
    let start = Instant::now();
    let source = DataSource::fixtures(cassette_dir());
    let train_q = GeoQuery::new(38.499, 43.365, ymd("20160101"), ymd("20170101"));
    let eval_q = GeoQuery::new(38.499, 43.365, ymd("20170102"), ymd("20180101"));
    let outcome = pipeline::train(&source, &train_q, TrainConfig::default()).map_err(|e| e.to_string())?;
    ensure(outcome.model.meta.split.unwrap().test_ratio == 0.35, || "ratio is not 0.35".into())?;
    let cross = pipeline::evaluate(&outcome.model, &source, &eval_q).map_err(|e| e.to_string())?;

    let mut parts = Vec::new();
    for (name, cm) in [("held-out", &outcome.confusion), ("2017-18", &cross.confusion)] {
        let acc = eval::accuracy(cm).map_err(|e| e.to_string())?;
        let adj = eval::adjacent_error_fraction(cm);
        ensure(acc >= MIN_ACCURACY, || format!("{name} accuracy {}", eval::format_percent(acc)))?;
        ensure(adj >= MIN_ADJACENT, || format!("{name} adjacent fraction {adj}"))?;
        parts.push(format!("{name} {} (n={}, adjacent {adj:.3})", eval::format_percent(acc), cm.total()));
    }
    within_budget(start, Duration::from_secs(10))?;
    Ok(format!("{}; reference band 90.607-96.124%", parts.join(", ")))
}

fn check_axis(report: &SweepReport) -> Result<(), String> {
    let axes: [Axis; 2] = [
        ("lat", &report.lat_averages, |e| e.latitude),
        ("lon", &report.lon_averages, |e| e.longitude),
    ];
    for (name, stored, key) in axes {
        let mut recomputed = 0;
        for avg in stored {
            let members: Vec<f64> = report.entries.iter().filter(|e| key(e) == avg.value).map(|e| e.accuracy).collect();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            ensure(members.len() == avg.count, || format!("{name} {}: count {} vs {}", avg.value, avg.count, members.len()))?;
            ensure(mean.to_bits() == avg.mean_accuracy.to_bits(), || {
                format!("{name} {}: stored {} recomputed {mean}", avg.value, avg.mean_accuracy)
            })?;
            recomputed += members.len();
        }
        ensure(recomputed == report.entries.len(), || format!("{name} averages miss entries"))?;
    }
    Ok(())
}

fn sweep_structure() -> Outcome {
    let plan = SweepPlan {
        latitudes: SWEEP_LATITUDES.to_vec(),
        longitudes: SWEEP_LONGITUDES.to_vec(),
        train_period: Period::new("2016-2017", ymd("20160101"), ymd("20170101")),
        eval_period: Period::new("2017-2018", ymd("20170102"), ymd("20180101")),
    };
    let result = eval::sweep(&plan, &DataSource::fixtures(cassette_dir()), TrainConfig::default())
        .map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for report in [&result.same_period, &result.cross_period] {
        let n = report.entries.len() + report.skipped.len();
        ensure(n == 16, || format!("{}: {n} locations", report.period))?;
        check_axis(report)?;
        parts.push(format!(
            "{}: {} entries, {} skipped, mean {}",
            report.period,
            report.entries.len(),
            report.skipped.len(),
            report.mean_accuracy().map(eval::format_percent).unwrap_or_default()
        ));
    }
    Ok(parts.join("; "))
}

fn solar_geometry() -> Outcome {
    let noon = solar_elevation(0.0, solar_declination(81), 0.0);
    ensure((noon - 90.0).abs() <= ZENITH_TOLERANCE, || format!("equinox noon elevation {noon}"))?;
    let peak = (1..=366).map(solar_declination).fold(0.0f64, |m, d| m.max(d.abs()));
    ensure(peak <= MAX_DECLINATION, || format!("|declination| reaches {peak}"))?;
    let m = module_irradiance(5.0, 30.0);
    ensure(m == 10.0, || format!("module_irradiance(5, 30) = {m}"))?;
    Ok(format!("noon elevation {noon:.4}, max |declination| {peak:.4}, module_irradiance(5, 30) = {m}"))
}

fn run_cli(args: &[String]) -> Result<(), String> {
    let mut argv = vec!["pve".to_string(), "--cassette-dir".into(), cassette_dir().display().to_string()];
    argv.extend(args.iter().cloned());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    match cli::run(argv, &mut out, &mut err) {
        0 => Ok(()),
        code => Err(format!("exit {code}: {}", String::from_utf8_lossy(&err))),
    }
}

fn determinism() -> Outcome {
    let mut models = Vec::new();
    let mut sweeps = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let model = dir.path().join("model.json");
        let train: Vec<String> = [
            "--seed", "42", "train", "--lat", "38.499", "--lon", "43.365", "--start", "20160101", "--end", "20170101",
            "--model",
        ]
        .iter()
        .map(|s| s.to_string())
        .chain([model.display().to_string()])
        .collect();
        run_cli(&train)?;
        run_cli(&["--seed".into(), "42".into(), "sweep".into(), "--out".into(), dir.path().display().to_string()])?;
        models.push(fs::read(&model).map_err(|e| e.to_string())?);
        let mut csv = Vec::new();
        for label in ["2016-2017", "2017-2018"] {
            csv.extend(fs::read(dir.path().join(format!("sweep_{label}.csv"))).map_err(|e| e.to_string())?);
        }
        sweeps.push(csv);
    }
    ensure(models[0] == models[1], || "model files differ".into())?;
    ensure(sweeps[0] == sweeps[1], || "sweep CSVs differ".into())?;
    Ok(format!("model {} bytes, sweep CSVs {} bytes, identical", models[0].len(), sweeps[0].len()))
}

fn url_golden() -> Outcome {
    let q = GeoQuery::new(17.84, 78.2, ymd("20160101"), ymd("20170102"));
    let url = power_client::build_power_url(&q, power_client::DEFAULT_BASE_URL).map_err(|e| e.to_string())?;
    ensure(url == HYDERABAD_URL, || format!("got {url}"))?;
    Ok("matches golden string".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 metric replay", metric_replay),
        ("2 gnb oracle equivalence", gnb_oracle),
        ("3 gaussian analytic checks", gaussian_checks),
        ("4 van end-to-end", van_end_to_end),
        ("5 sweep structure", sweep_structure),
        ("6 solar geometry", solar_geometry),
        ("7 determinism", determinism),
        ("8 url bit-exactness", url_golden),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
