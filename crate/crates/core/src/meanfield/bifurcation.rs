use serde::{Deserialize, Serialize};

use super::ode::coverage_columns;
use super::{find_steady_states, Model, SteadyState};
use crate::error::{Error, Result};
use crate::table::{Cell, CsvTable};

/// Steady states at one parameter value of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub value: f64,
    pub states: Vec<SteadyState>,
}

/// Steady states over `resolution` equally spaced values of `param` in `[lo, hi]`.
///
/// A degenerate range `lo == hi` may use `resolution == 1`.
pub fn bifurcation_scan(model: &Model, param: &str, lo: f64, hi: f64, resolution: usize) -> Result<Vec<ScanRow>> {
    model.param(param)?;
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::InvalidArgument(format!("scan range [{lo}, {hi}] is empty or not finite")));
    }
    let degenerate = lo == hi;
    if resolution == 0 || (resolution < 2 && !degenerate) {
        return Err(Error::InvalidArgument(format!(
            "scan resolution must be at least 2 (got {resolution})"
        )));
    }
    let values: Vec<f64> = if resolution == 1 {
        vec![lo]
    } else {
        (0..resolution)
            .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
            .collect()
    };
    values
        .into_iter()
        .map(|value| {
            let m = model.with_param(param, value)?;
            Ok(ScanRow {
                value,
                states: find_steady_states(&m)?,
            })
        })
        .collect()
}

/// Consecutive scan values between which the number of branches changes.
pub fn fold_brackets(rows: &[ScanRow]) -> Vec<(f64, f64)> {
    rows.windows(2)
        .filter(|w| w[0].states.len() != w[1].states.len())
        .map(|w| (w[0].value, w[1].value))
        .collect()
}

/// One CSV line per (parameter value, steady state).
pub fn scan_table(model: &Model, param: &str, rows: &[ScanRow]) -> CsvTable {
    let mut header = vec![param.to_owned()];
    header.extend(coverage_columns(model).iter().map(|s| s.to_string()));
    header.push("stability".to_owned());
    let mut table = CsvTable::new(header);
    for row in rows {
        for s in &row.states {
            let mut cells = vec![Cell::from(row.value)];
            cells.extend(s.state.as_slice().iter().map(|&v| Cell::from(v)));
            cells.push(Cell::from(s.stability.label()));
            table.push_row(cells);
        }
    }
    table
}
