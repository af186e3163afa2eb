//! Robustness checks around the main estimate: stationarity, Granger
//! association, the threshold sweep and the onset event study.

pub mod adf;
pub mod event_study;
pub mod granger;
pub mod sweep;

use serde::Serialize;

pub use adf::{adf_test, adf_test_with_maxlag, mackinnon_p, schwert_maxlag, AdfResult};
pub use event_study::{event_study, EventStudyResult, EventWindow};
pub use granger::{granger_test, granger_test_at_lag, select_lag_aic, GrangerResult};
pub use sweep::{sweep, CellStatus, Selection, SweepCell, SweepOptions, SweepResult};

use crate::error::Result;
use crate::types::{CityDataset, TemperatureColumn};

/// Stationarity of both series and Granger tests in both directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub city: String,
    pub adf_log_ntl: AdfResult,
    pub adf_temperature: AdfResult,
    /// Does temperature help predict log radiance?
    pub granger_temp_to_ntl: GrangerResult,
    pub granger_ntl_to_temp: GrangerResult,
}

pub fn diagnose(
    city: &str,
    dataset: &CityDataset,
    temperature: TemperatureColumn,
    max_lag: usize,
) -> Result<DiagnosticsReport> {
    let ntl = dataset.log_radiance();
    let temp = dataset.temperatures(temperature);
    Ok(DiagnosticsReport {
        city: city.to_owned(),
        adf_log_ntl: adf_test(&ntl)?,
        adf_temperature: adf_test(&temp)?,
        granger_temp_to_ntl: granger_test(&temp, &ntl, max_lag)?,
        granger_ntl_to_temp: granger_test(&ntl, &temp, max_lag)?,
    })
}
