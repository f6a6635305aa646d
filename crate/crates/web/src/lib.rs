//! Browser bindings for the energy category predictor.
//!
//! Each export takes plain numbers or JSON text and returns JSON text. The
//! `*_json` functions hold the logic and are usable natively.

use pve_core::dataset::{BinScheme, Category, FeatureVector, PanelSpec, SplitConfig, CATEGORY_NAMES};
use pve_core::pipeline::{self, TrainConfig};
use pve_core::power_client::GeoQuery;
use pve_core::solar_geometry::{self, ELEVATION_FLOOR, MAX_DECLINATION, SAMPLE_HOUR_ANGLE};
use pve_core::{eval, synth, GnbModel};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct CurvePoint {
    day: u32,
    declination: f64,
    elevation: f64,
    /// `S_mod / S_horiz` on that day.
    gain: f64,
}

/// Declination, sampled elevation and module gain for every day of a
/// non-leap year at `latitude`.
pub fn solar_curve_json(latitude: f64) -> Result<String, String> {
    if !(-90.0..=90.0).contains(&latitude) {
        return Err(format!("latitude {latitude} outside [-90, 90]"));
    }
    let points: Vec<CurvePoint> = (1..=365)
        .map(|day| {
            let declination = solar_geometry::solar_declination(day);
            let elevation = solar_geometry::solar_elevation(latitude, declination, SAMPLE_HOUR_ANGLE);
            CurvePoint {
                day,
                declination,
                elevation,
                gain: solar_geometry::module_irradiance(1.0, elevation),
            }
        })
        .collect();
    Ok(serde_json::json!({
        "latitude": latitude,
        "max_declination": MAX_DECLINATION,
        "elevation_floor": ELEVATION_FLOOR,
        "points": points,
    })
    .to_string())
}

#[derive(Serialize)]
struct Scored {
    accuracy: f64,
    accuracy_text: String,
    adjacent: f64,
    n: u64,
    confusion: [[u64; 5]; 5],
}

fn scored(cm: &eval::ConfusionMatrix) -> Result<Scored, String> {
    let accuracy = eval::accuracy(cm).map_err(|e| e.to_string())?;
    Ok(Scored {
        accuracy,
        accuracy_text: eval::format_percent(accuracy),
        adjacent: eval::adjacent_error_fraction(cm),
        n: cm.total(),
        confusion: cm.counts,
    })
}

/// Trains on a synthetic 2016 year at (`latitude`, `longitude`), then scores
/// the held-out split and the following year.
pub fn train_synthetic_json(latitude: f64, longitude: f64, seed: u64, test_ratio: f64) -> Result<String, String> {
    let train_q = GeoQuery::new(latitude, longitude, synth::year_start(2016), synth::year_start(2017));
    let next = synth::year_start(2017).succ_opt().expect("valid date");
    let eval_q = GeoQuery::new(latitude, longitude, next, synth::year_start(2018));
    let train_records = synth::synthesize_records(&train_q).map_err(|e| e.to_string())?;
    let eval_records = synth::synthesize_records(&eval_q).map_err(|e| e.to_string())?;

    let cfg = TrainConfig {
        split: SplitConfig { test_ratio, seed },
        panel: PanelSpec::default(),
    };
    let outcome = pipeline::train_on_records(&train_records, &train_q, cfg).map_err(|e| e.to_string())?;
    let cross = pipeline::evaluate_records(&outcome.model, &eval_records, latitude).map_err(|e| e.to_string())?;
    Ok(serde_json::json!({
        "train_samples": outcome.train.len(),
        "dropped": outcome.dropped,
        "held_out": scored(&outcome.confusion)?,
        "next_year": scored(&cross.confusion)?,
        "bin_edges": outcome.model.bins.edges(),
        "bin_names": CATEGORY_NAMES,
        "model": outcome.model.to_json(),
    })
    .to_string())
}

fn interval_text(bins: &BinScheme, cat: Category) -> String {
    match bins.interval(cat) {
        (None, Some(hi)) => format!("<{hi:.2} kWh"),
        (Some(lo), None) => format!(">{lo:.2} kWh"),
        (Some(lo), Some(hi)) => format!("{lo:.2}-{hi:.2} kWh"),
        (None, None) => String::new(),
    }
}

/// Predicts the category for one day's features with a serialised model.
pub fn predict_json(model_json: &str, t_avg: f64, kt: f64, s_mod: f64) -> Result<String, String> {
    let model = GnbModel::from_json(model_json).map_err(|e| e.to_string())?;
    let f = FeatureVector { t_avg, kt, s_mod };
    f.validate().map_err(|e| e.to_string())?;
    let cat = model.predict(&f);
    Ok(serde_json::json!({
        "category": cat.name(),
        "index": cat.index(),
        "interval": interval_text(&model.bins, cat),
        "proba": model.predict_proba(&f),
    })
    .to_string())
}

#[wasm_bindgen(js_name = solarCurve)]
pub fn solar_curve(latitude: f64) -> Result<String, JsValue> {
    solar_curve_json(latitude).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = trainSynthetic)]
pub fn train_synthetic(latitude: f64, longitude: f64, seed: u32, test_ratio: f64) -> Result<String, JsValue> {
    train_synthetic_json(latitude, longitude, u64::from(seed), test_ratio).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn predict(model_json: &str, t_avg: f64, kt: f64, s_mod: f64) -> Result<String, JsValue> {
    predict_json(model_json, t_avg, kt, s_mod).map_err(|e| JsValue::from_str(&e))
}
