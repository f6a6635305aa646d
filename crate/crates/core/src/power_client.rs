//! POWER API access: request URL construction, cassette-backed fetching and
//! parsing of the daily point JSON response into [`DailyRecord`]s.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Host and script of the v1 single-point endpoint.
pub const DEFAULT_BASE_URL: &str = "https://power.larc.nasa.gov/cgi-bin/v1/DataAccess.py";

/// Value POWER uses for "no data".
pub const MISSING_SENTINEL: f64 = -999.0;

/// Daily mean air temperature at 2 m, °C.
pub const PARAM_T2M: &str = "T2M";
/// All-sky clearness index, dimensionless.
pub const PARAM_KT: &str = "ALLSKY_KT";
/// All-sky surface shortwave downward irradiance, kWh/m²/day.
pub const PARAM_GHI: &str = "ALLSKY_SFC_SW_DWN";

pub const DEFAULT_PARAMETERS: [&str; 3] = [PARAM_T2M, PARAM_KT, PARAM_GHI];

const CASSETTE_EXT: &str = "cassette";
const LIVE_TIMEOUT_SECS: u64 = 30;

#[derive(Debug, thiserror::Error)]
pub enum PowerError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("HTTP status {0}")]
    HttpStatus(u16),
    #[error("no cassette for {url} (expected {path})")]
    FixtureMissing { url: String, path: PathBuf },
    #[error("malformed cassette {path}: {reason}")]
    CorruptCassette { path: PathBuf, reason: String },
    #[error("parse error at {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, PowerError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoQuery {
    pub latitude: f64,
    pub longitude: f64,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub parameters: Vec<String>,
}

impl GeoQuery {
    /// Query for the three default parameters.
    pub fn new(latitude: f64, longitude: f64, start: NaiveDate, end: NaiveDate) -> Self {
        GeoQuery {
            latitude,
            longitude,
            start,
            end,
            parameters: DEFAULT_PARAMETERS.iter().map(|p| p.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.latitude.is_finite() || !(-90.0..=90.0).contains(&self.latitude) {
            return Err(PowerError::InvalidQuery(format!(
                "latitude {} outside [-90, 90]",
                self.latitude
            )));
        }
        if !self.longitude.is_finite() || !(-180.0..=180.0).contains(&self.longitude) {
            return Err(PowerError::InvalidQuery(format!(
                "longitude {} outside [-180, 180]",
                self.longitude
            )));
        }
        if self.start > self.end {
            return Err(PowerError::InvalidQuery(format!(
                "start {} after end {}",
                self.start, self.end
            )));
        }
        if self.parameters.is_empty() {
            return Err(PowerError::InvalidQuery("empty parameter list".into()));
        }
        let mut seen = BTreeSet::new();
        for p in &self.parameters {
            if p.is_empty() || p.contains([',', '&', '=', '?', ' ']) {
                return Err(PowerError::InvalidQuery(format!("bad parameter id {p:?}")));
            }
            if !seen.insert(p.as_str()) {
                return Err(PowerError::InvalidQuery(format!("duplicate parameter {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Live,
    Fixture,
}

pub type FetchMode = Source;

impl std::str::FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "live" => Ok(Source::Live),
            "fixture" => Ok(Source::Fixture),
            other => Err(format!("unknown mode {other:?} (expected live or fixture)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawResponse {
    pub url: String,
    pub body: Vec<u8>,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub t_avg: Option<f64>,
    pub kt: Option<f64>,
    pub s_horiz: Option<f64>,
    /// Values of requested parameters beyond the three features.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Option<f64>>,
}

impl DailyRecord {
    pub fn empty(date: NaiveDate) -> Self {
        DailyRecord {
            date,
            t_avg: None,
            kt: None,
            s_horiz: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.t_avg.is_some() && self.kt.is_some() && self.s_horiz.is_some()
    }
}

/// Shortest decimal rendering that parses back to the same `f64`.
fn render_degrees(v: f64) -> String {
    // Display on f64 is already shortest round-trip; normalise -0.
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

pub fn format_yyyymmdd(date: NaiveDate) -> String {
    date.format("%Y%m%d").to_string()
}

pub fn parse_yyyymmdd(s: &str) -> Option<NaiveDate> {
    if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y%m%d").ok()
}

/// Builds the single-point daily request URL for `query` against `base`.
pub fn build_power_url(query: &GeoQuery, base: &str) -> Result<String> {
    query.validate()?;
    let base = base.trim_end_matches(['?', '&']);
    Ok(format!(
        "{base}?&request=execute&identifier=SinglePoint&parameters={params}\
         &startDate={start}&endDate={end}&userCommunity=SSE&tempAverage=DAILY\
         &outputList=CSV&lat={lat}&lon={lon}",
        params = query.parameters.join(","),
        start = format_yyyymmdd(query.start),
        end = format_yyyymmdd(query.end),
        lat = render_degrees(query.latitude),
        lon = render_degrees(query.longitude),
    ))
}

/// Lowercase hex SHA-256 of the URL.
pub fn cassette_key(url: &str) -> String {
    hex::encode(Sha256::digest(url.as_bytes()))
}

pub fn cassette_path(cassette_dir: &Path, url: &str) -> PathBuf {
    cassette_dir.join(format!("{}.{CASSETTE_EXT}", cassette_key(url)))
}

/// Serialises a cassette: URL line, blank line, raw body.
pub fn encode_cassette(url: &str, body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(url.len() + 2 + body.len());
    out.extend_from_slice(url.as_bytes());
    out.extend_from_slice(b"\n\n");
    out.extend_from_slice(body);
    out
}

/// Splits a cassette into `(url, body)`.
pub fn decode_cassette(bytes: &[u8]) -> Option<(String, Vec<u8>)> {
    let nl = bytes.iter().position(|&b| b == b'\n')?;
    let url = std::str::from_utf8(&bytes[..nl]).ok()?.to_string();
    if bytes.get(nl + 1) != Some(&b'\n') {
        return None;
    }
    Some((url, bytes[nl + 2..].to_vec()))
}

pub fn write_cassette(cassette_dir: &Path, url: &str, body: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(cassette_dir)?;
    let path = cassette_path(cassette_dir, url);
    // Write-then-rename so concurrent readers never observe a partial file.
    let tmp = path.with_extension(format!("{CASSETTE_EXT}.tmp"));
    fs::write(&tmp, encode_cassette(url, body))?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

pub fn read_cassette(cassette_dir: &Path, url: &str) -> Result<RawResponse> {
    let path = cassette_path(cassette_dir, url);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(PowerError::FixtureMissing {
                url: url.to_string(),
                path,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let (stored_url, body) = decode_cassette(&bytes).ok_or_else(|| PowerError::CorruptCassette {
        path: path.clone(),
        reason: "missing URL header".into(),
    })?;
    if stored_url != url {
        return Err(PowerError::CorruptCassette {
            path,
            reason: format!("header URL {stored_url:?} does not match request"),
        });
    }
    Ok(RawResponse {
        url: url.to_string(),
        body,
        source: Source::Fixture,
    })
}

/// Fetches the response for `query`, either live (recording a cassette) or
/// by replaying a previously recorded cassette.
pub fn fetch_daily(
    query: &GeoQuery,
    base: &str,
    mode: FetchMode,
    cassette_dir: &Path,
) -> Result<RawResponse> {
    let url = build_power_url(query, base)?;
    match mode {
        Source::Fixture => read_cassette(cassette_dir, &url),
        Source::Live => {
            let body = http_get(&url)?;
            write_cassette(cassette_dir, &url, &body)?;
            Ok(RawResponse {
                url,
                body,
                source: Source::Live,
            })
        }
    }
}

#[cfg(feature = "live")]
fn http_get(url: &str) -> Result<Vec<u8>> {
    use std::time::Duration;

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(LIVE_TIMEOUT_SECS)))
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent
        .get(url)
        .call()
        .map_err(|e| PowerError::Network(e.to_string()))?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(PowerError::HttpStatus(status));
    }
    resp.body_mut()
        .with_config()
        .limit(64 * 1024 * 1024)
        .read_to_vec()
        .map_err(|e| PowerError::Network(e.to_string()))
}

#[cfg(not(feature = "live"))]
fn http_get(_url: &str) -> Result<Vec<u8>> {
    let _ = LIVE_TIMEOUT_SECS;
    Err(PowerError::Network(
        "live fetching not compiled in (enable the `live` feature)".into(),
    ))
}

fn parse_err(path: impl Into<String>, reason: impl Into<String>) -> PowerError {
    PowerError::Parse {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Parses the POWER JSON tree (`features[0].properties.parameter`).
pub fn parse_power_response(resp: &RawResponse) -> Result<Vec<DailyRecord>> {
    parse_power_body(&resp.body)
}

pub fn parse_power_body(body: &[u8]) -> Result<Vec<DailyRecord>> {
    let root: Value = serde_json::from_slice(body).map_err(|e| parse_err("$", e.to_string()))?;
    let features = root
        .get("features")
        .ok_or_else(|| parse_err("$.features", "missing"))?
        .as_array()
        .ok_or_else(|| parse_err("$.features", "expected array"))?;
    let first = features
        .first()
        .ok_or_else(|| parse_err("$.features[0]", "missing"))?;
    let params = first
        .get("properties")
        .ok_or_else(|| parse_err("$.features[0].properties", "missing"))?
        .get("parameter")
        .ok_or_else(|| parse_err("$.features[0].properties.parameter", "missing"))?
        .as_object()
        .ok_or_else(|| parse_err("$.features[0].properties.parameter", "expected object"))?;

    let mut by_date: BTreeMap<NaiveDate, DailyRecord> = BTreeMap::new();
    for (name, series) in params {
        let base_path = format!("$.features[0].properties.parameter.{name}");
        let series = series
            .as_object()
            .ok_or_else(|| parse_err(&base_path, "expected object keyed by yyyymmdd"))?;
        for (key, raw) in series {
            let path = format!("{base_path}.{key}");
            let date = parse_yyyymmdd(key).ok_or_else(|| parse_err(&path, "bad date key"))?;
            let v = raw
                .as_f64()
                .ok_or_else(|| parse_err(&path, format!("expected number, got {raw}")))?;
            let value = if v == MISSING_SENTINEL { None } else { Some(v) };
            let rec = by_date
                .entry(date)
                .or_insert_with(|| DailyRecord::empty(date));
            match name.as_str() {
                PARAM_T2M => rec.t_avg = value,
                PARAM_KT => {
                    if let Some(kt) = value {
                        if !(0.0..=1.0).contains(&kt) {
                            return Err(parse_err(&path, format!("clearness index {kt} outside [0, 1]")));
                        }
                    }
                    rec.kt = value;
                }
                PARAM_GHI => {
                    if let Some(s) = value {
                        if s < 0.0 {
                            return Err(parse_err(&path, format!("negative irradiance {s}")));
                        }
                    }
                    rec.s_horiz = value;
                }
                _ => {
                    rec.extra.insert(name.clone(), value);
                }
            }
        }
    }
    Ok(by_date.into_values().collect())
}
