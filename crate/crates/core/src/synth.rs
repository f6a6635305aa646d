//! Deterministic synthetic daily climatology rendered in the POWER JSON
//! layout. Used to produce offline cassettes and the browser demo's data;
//! values are plausible, not observed.
//!
//! Each location gets its own random stream seeded from its coordinates and
//! simulated day by day from [`EPOCH`], so any two queries for the same place
//! agree on every date they share.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Map, Value};

use crate::power_client::{
    self, DailyRecord, GeoQuery, MISSING_SENTINEL, PARAM_GHI, PARAM_KT, PARAM_T2M,
};
use crate::solar_geometry::{day_of_year, solar_declination};

/// First simulated day; queries must not start earlier.
pub const EPOCH: NaiveDate = match NaiveDate::from_ymd_opt(2010, 1, 1) {
    Some(d) => d,
    None => unreachable!(),
};

/// Solar constant, kW/m².
const SOLAR_CONSTANT: f64 = 1.367;
/// Probability that any single value is reported as missing.
const DROPOUT: f64 = 0.004;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("query starts before the synthetic epoch {EPOCH}")]
    BeforeEpoch,
    #[error("synthetic generator has no model for parameter {0}")]
    UnsupportedParameter(String),
    #[error(transparent)]
    Query(#[from] power_client::PowerError),
}

/// Daily extraterrestrial irradiance on a horizontal plane, kWh/m²/day.
pub fn extraterrestrial_daily(latitude: f64, day: u32) -> f64 {
    let phi = latitude.to_radians();
    let delta = solar_declination(day).to_radians();
    let ws = (-phi.tan() * delta.tan()).clamp(-1.0, 1.0).acos();
    let e0 = 1.0 + 0.033 * (2.0 * std::f64::consts::PI * day as f64 / 365.0).cos();
    let h0 = 24.0 / std::f64::consts::PI
        * SOLAR_CONSTANT
        * e0
        * (phi.cos() * delta.cos() * ws.sin() + ws * phi.sin() * delta.sin());
    h0.max(0.0)
}

fn location_seed(latitude: f64, longitude: f64) -> u64 {
    latitude.to_bits().rotate_left(17) ^ longitude.to_bits() ^ 0x5E_ED0F_501A_u64
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Place-dependent climate constants.
struct Climate {
    kt_base: f64,
    kt_seasonal: f64,
    t_mean: f64,
    t_amplitude: f64,
    /// +1 north of the equator, -1 south.
    hemisphere: f64,
}

impl Climate {
    fn new(latitude: f64, longitude: f64) -> Self {
        let abs_lat = latitude.abs();
        let continental = 0.5 + 0.5 * (longitude.to_radians() * 1.7 + 0.4).sin();
        Climate {
            kt_base: 0.58 - 0.18 * (abs_lat / 90.0).powi(2) + 0.06 * continental,
            kt_seasonal: 0.05 + 0.05 * continental,
            t_mean: 27.0 - 0.42 * abs_lat - 6.0 * (abs_lat / 90.0).powi(3),
            t_amplitude: 1.5 + 0.28 * abs_lat * (0.6 + 0.4 * continental),
            hemisphere: if latitude >= 0.0 { 1.0 } else { -1.0 },
        }
    }
}

/// Simulates `[EPOCH, end]` and returns the records inside `[start, end]`.
pub fn synthesize_records(query: &GeoQuery) -> Result<Vec<DailyRecord>, SynthError> {
    query.validate()?;
    if query.start < EPOCH {
        return Err(SynthError::BeforeEpoch);
    }
    let climate = Climate::new(query.latitude, query.longitude);
    let mut rng = ChaCha8Rng::seed_from_u64(location_seed(query.latitude, query.longitude));
    let cloud_noise = Normal::new(0.0, 0.075).expect("valid sigma");
    let temp_noise = Normal::new(0.0, 1.6).expect("valid sigma");

    let mut cloud = 0.0;
    let mut weather = 0.0;
    let mut out = Vec::new();
    for date in EPOCH.iter_days().take_while(|d| *d <= query.end) {
        let n = day_of_year(date);
        // Phase 0 at the northern summer solstice.
        let season = (2.0 * std::f64::consts::PI * (n as f64 - 172.0) / 365.25).cos();
        let local_summer = climate.hemisphere * season;

        cloud = 0.65 * cloud + cloud_noise.sample(&mut rng);
        weather = 0.8 * weather + temp_noise.sample(&mut rng);
        let dropouts: [bool; 3] = [rng.random_bool(DROPOUT), rng.random_bool(DROPOUT), rng.random_bool(DROPOUT)];

        if date < query.start {
            continue;
        }

        let h0 = extraterrestrial_daily(query.latitude, n);
        let kt = (climate.kt_base + climate.kt_seasonal * local_summer + cloud).clamp(0.04, 0.8);
        let (kt_out, ghi) = if h0 < 0.05 {
            (None, 0.0)
        } else {
            let kt = round2(kt);
            (Some(kt), round2(kt * h0))
        };
        let t2m = round2(
            climate.t_mean + climate.t_amplitude * local_summer + 6.0 * cloud * local_summer + weather,
        );

        let mut rec = DailyRecord::empty(date);
        rec.t_avg = (!dropouts[0]).then_some(t2m);
        rec.kt = kt_out.filter(|_| !dropouts[1]);
        rec.s_horiz = (!dropouts[2]).then_some(ghi);
        out.push(rec);
    }
    Ok(out)
}

/// Renders records for `query` as a POWER JSON body (`features[0]` layout).
pub fn render_power_body(query: &GeoQuery, records: &[DailyRecord]) -> Result<Vec<u8>, SynthError> {
    let mut params = Map::new();
    for name in &query.parameters {
        let pick: fn(&DailyRecord) -> Option<f64> = match name.as_str() {
            PARAM_T2M => |r| r.t_avg,
            PARAM_KT => |r| r.kt,
            PARAM_GHI => |r| r.s_horiz,
            other => return Err(SynthError::UnsupportedParameter(other.to_string())),
        };
        let series: Map<String, Value> = records
            .iter()
            .map(|r| {
                (
                    power_client::format_yyyymmdd(r.date),
                    json!(pick(r).unwrap_or(MISSING_SENTINEL)),
                )
            })
            .collect();
        params.insert(name.clone(), Value::Object(series));
    }
    let elevation = round2(40.0 + 900.0 * (0.5 + 0.5 * (query.longitude.to_radians() * 2.3).cos()));
    let body = json!({
        "features": [{
            "geometry": {
                "coordinates": [query.longitude, query.latitude, elevation],
                "type": "Point"
            },
            "properties": { "parameter": Value::Object(params) },
            "type": "Feature"
        }],
        "header": {
            "title": "Synthetic daily climatology",
            "fill_value": MISSING_SENTINEL,
            "startDate": power_client::format_yyyymmdd(query.start),
            "endDate": power_client::format_yyyymmdd(query.end),
        },
        "type": "FeatureCollection"
    });
    let mut text = serde_json::to_vec_pretty(&body).expect("JSON value serialises");
    text.push(b'\n');
    Ok(text)
}

pub fn synthesize_body(query: &GeoQuery) -> Result<Vec<u8>, SynthError> {
    let records = synthesize_records(query)?;
    render_power_body(query, &records)
}

/// Calendar year boundaries helper used by callers building period queries.
pub fn year_start(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year")
}
