//! Photovoltaic energy category prediction from daily POWER meteorology.
//!
//! The pipeline runs coordinates and a period through [`power_client`]
//! (request, cassette replay, parsing), [`dataset`] (cleaning, `S_mod` via
//! [`solar_geometry`], quintile labels, split), [`gnb`] (Gaussian naive
//! Bayes) and [`eval`] (confusion matrices, cross-period scoring and the
//! multi-location sweep). [`pipeline`] strings those together.

#[cfg(feature = "cli")]
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod gnb;
pub mod pipeline;
pub mod power_client;
pub mod solar_geometry;
pub mod synth;

pub use dataset::{BinScheme, Category, FeatureVector, LabeledSample, PanelSpec, SplitConfig};
pub use eval::{accuracy, adjacent_error_fraction, ConfusionMatrix, SweepReport};
pub use gnb::GnbModel;
pub use power_client::{DailyRecord, GeoQuery};
