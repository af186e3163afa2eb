//! DML estimates over a grid of percentile thresholds and durations.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dml::{derive_seed, run_dml, DmlEstimate};
use crate::error::{Error, Result};
use crate::features::assemble_design;
use crate::heatwave::detect;
use crate::ingest::{csv_writer, flush, fmt_num, write_record};
use crate::types::{CityConfig, CityDataset};

pub const DEFAULT_P_GRID: [f64; 3] = [0.80, 0.85, 0.90];
pub const DEFAULT_D_GRID: [usize; 3] = [2, 3, 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// Too few heatwave days to estimate.
    Insufficient,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub p: f64,
    pub d: usize,
    pub seed: u64,
    pub treated_days: usize,
    pub status: CellStatus,
    pub note: String,
    pub estimate: Option<DmlEstimate>,
}

/// How the reported cell is picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Selection {
    /// Smallest standard error among cells with p-value below 0.05.
    #[default]
    MinSeSignificant,
    Fixed { p: f64, d: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub city: String,
    pub cells: Vec<SweepCell>,
    /// Index into `cells`.
    pub chosen: Option<usize>,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub p_grid: Vec<f64>,
    pub d_grid: Vec<usize>,
    /// Cells with fewer heatwave days are flagged and not estimated.
    pub min_treated: usize,
    pub selection: Selection,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            p_grid: DEFAULT_P_GRID.to_vec(),
            d_grid: DEFAULT_D_GRID.to_vec(),
            min_treated: 10,
            selection: Selection::default(),
        }
    }
}

fn run_cell(dataset: &CityDataset, base: &CityConfig, p: f64, d: usize, seed: u64, min_treated: usize) -> SweepCell {
    let mut cell = SweepCell {
        p,
        d,
        seed,
        treated_days: 0,
        status: CellStatus::Ok,
        note: String::new(),
        estimate: None,
    };
    let config = CityConfig {
        percentile_p: p,
        duration_d: d,
        seed,
        ..base.clone()
    };
    let outcome = (|| -> Result<Option<DmlEstimate>> {
        let temps = dataset.temperatures(config.temperature);
        let (_, hw) = detect(&dataset.dates(), &temps, p, d)?;
        let fm = assemble_design(dataset, &hw, &config)?;
        cell.treated_days = fm.d.iter().filter(|&&v| v == 1.0).count();
        if cell.treated_days < min_treated.max(1) {
            return Ok(None);
        }
        run_dml(&fm, &config).map(Some)
    })();
    match outcome {
        Ok(Some(est)) => cell.estimate = Some(est),
        Ok(None) => {
            cell.status = CellStatus::Insufficient;
            cell.note = "insufficient treated sample".into();
        }
        Err(e) => {
            cell.status = CellStatus::Failed;
            cell.note = e.to_string();
        }
    }
    cell
}

/// Runs one DML fit per `(p, d)` cell, in parallel. Cell seeds are derived
/// from the base seed and the cell position, and cell failures are recorded
/// rather than propagated.
pub fn sweep(dataset: &CityDataset, base: &CityConfig, options: &SweepOptions) -> Result<SweepResult> {
    if options.p_grid.is_empty() || options.d_grid.is_empty() {
        return Err(Error::Argument("sweep grids must be non-empty".into()));
    }
    base.validate()?;
    let grid: Vec<(f64, usize)> = options
        .p_grid
        .iter()
        .flat_map(|&p| options.d_grid.iter().map(move |&d| (p, d)))
        .collect();
    let cells: Vec<SweepCell> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(p, d))| run_cell(dataset, base, p, d, derive_seed(base.seed, i as u64), options.min_treated))
        .collect();
    let chosen = select(&cells, &options.selection);
    Ok(SweepResult {
        city: base.city_name.clone(),
        cells,
        chosen,
        selection: options.selection.clone(),
    })
}

pub fn select(cells: &[SweepCell], rule: &Selection) -> Option<usize> {
    match rule {
        Selection::MinSeSignificant => cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.estimate.as_ref().map(|e| (i, e)))
            .filter(|(_, e)| e.p_value < 0.05)
            .min_by(|a, b| a.1.se.total_cmp(&b.1.se))
            .map(|(i, _)| i),
        Selection::Fixed { p, d } => cells.iter().position(|c| c.p == *p && c.d == *d),
    }
}

impl SweepResult {
    pub fn chosen_cell(&self) -> Option<&SweepCell> {
        self.chosen.map(|i| &self.cells[i])
    }

    pub fn cell(&self, p: f64, d: usize) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.p == p && c.d == d)
    }

    /// `city,p,d,treated_days,status,theta,se,z,p_value,pct_change,n,seed,chosen,note`
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = csv_writer(path)?;
        write_record(
            &mut out,
            path,
            [
                "city", "p", "d", "treated_days", "status", "theta", "se", "z", "p_value", "pct_change", "n", "seed",
                "chosen", "note",
            ],
        )?;
        for (i, c) in self.cells.iter().enumerate() {
            let status = match c.status {
                CellStatus::Ok => "ok",
                CellStatus::Insufficient => "insufficient",
                CellStatus::Failed => "failed",
            };
            let nums = match &c.estimate {
                Some(e) => vec![
                    fmt_num(e.theta),
                    fmt_num(e.se),
                    fmt_num(e.z),
                    fmt_num(e.p_value),
                    fmt_num(e.pct_change),
                    e.n.to_string(),
                ],
                None => vec![String::new(); 6],
            };
            let rec = [self.city.clone(), fmt_num(c.p), c.d.to_string(), c.treated_days.to_string(), status.into()]
                .into_iter()
                .chain(nums)
                .chain([
                    c.seed.to_string(),
                    u8::from(self.chosen == Some(i)).to_string(),
                    c.note.clone(),
                ]);
            write_record(&mut out, path, rec)?;
        }
        flush(out, path)
    }
}
