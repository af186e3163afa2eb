//! Heatwave effects on night-time lights.
//!
//! Daily weather and satellite radiance series are joined per city, hot days
//! and heatwaves are flagged from a city-specific temperature percentile,
//! and the effect of heatwaves on log radiance is estimated with
//! cross-fitted double machine learning. Stationarity, Granger, sensitivity
//! and event-study diagnostics check the estimate, and a synthetic data
//! generator with a known effect validates the whole chain.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod dml;
pub mod error;
pub mod features;
pub mod heatwave;
pub mod ingest;
pub mod linalg;
pub mod ntl;
pub mod nuisance;
pub mod pipeline;
pub mod synth;
pub mod types;
pub mod weather_api;

pub use error::{Error, Result};
