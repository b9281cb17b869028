//! Long-format plot tables for the `research` command.
//!
//! Every table carries the same four-column header
//! `(feature, grid_value, row_id, response)` so downstream tooling can
//! concatenate them. Partial-dependence tables hold one row per grid
//! point with `row_id = "PD"`; individual-expectation tables hold one
//! row per (data row, grid point) pair plus the PD overlay; surrogate
//! tables reuse the columns as (encoded feature, anchor id, _, weight).

use crate::dataset::Value;
use crate::transparency::{ICEResult, PDResult};

use super::AuditError;

/// Column header shared by every plot table.
pub const PLOT_HEADER: [&str; 4] = ["feature", "grid_value", "row_id", "response"];

/// Marker used in the `row_id` column for aggregated (PD) rows.
pub const PD_ROW_ID: &str = "PD";

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub feature: String,
    pub grid_value: String,
    pub row_id: String,
    pub response: f64,
}

/// One CSV-renderable table with a stable name (used as the file stem).
#[derive(Debug, Clone)]
pub struct PlotTable {
    pub name: String,
    pub rows: Vec<PlotRow>,
}

impl PlotTable {
    /// Renders the table as CSV bytes, header first.
    pub fn to_csv(&self) -> Result<Vec<u8>, AuditError> {
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        writer
            .write_record(PLOT_HEADER)
            .map_err(|e| AuditError::Analysis {
                stage: "plots".to_string(),
                message: e.to_string(),
            })?;
        for row in &self.rows {
            writer
                .write_record([
                    row.feature.as_str(),
                    row.grid_value.as_str(),
                    row.row_id.as_str(),
                    &super::json::format_float(row.response),
                ])
                .map_err(|e| AuditError::Analysis {
                    stage: "plots".to_string(),
                    message: e.to_string(),
                })?;
        }
        writer.into_inner().map_err(|e| AuditError::Analysis {
            stage: "plots".to_string(),
            message: e.to_string(),
        })
    }
}

/// All tables produced by one research run, in request order.
#[derive(Debug, Clone, Default)]
pub struct PlotBundle {
    pub tables: Vec<PlotTable>,
}

fn grid_value_text(v: &Value) -> String {
    v.render()
}

/// One row per grid point, aggregated over the dataset.
pub fn pd_table(pd: &PDResult) -> PlotTable {
    let rows = pd
        .grid
        .points
        .iter()
        .zip(&pd.curve)
        .map(|(point, &response)| PlotRow {
            feature: pd.grid.feature.clone(),
            grid_value: grid_value_text(point),
            row_id: PD_ROW_ID.to_string(),
            response,
        })
        .collect();
    PlotTable {
        name: format!("pd_{}", pd.grid.feature),
        rows,
    }
}

/// One row per (data row, grid point) pair, then the PD overlay: for a
/// dataset of n rows and a grid of g points the table has n*g + g rows.
pub fn ice_table(ice: &ICEResult, pd: &PDResult) -> PlotTable {
    let mut rows = Vec::with_capacity(ice.curves.len() * ice.grid.len() + pd.grid.len());
    for (row_id, curve) in ice.curves.iter().enumerate() {
        for (point, &response) in ice.grid.points.iter().zip(curve) {
            rows.push(PlotRow {
                feature: ice.grid.feature.clone(),
                grid_value: grid_value_text(point),
                row_id: row_id.to_string(),
                response,
            });
        }
    }
    rows.extend(pd_table(pd).rows);
    PlotTable {
        name: format!("ice_{}", ice.grid.feature),
        rows,
    }
}

/// One row per encoded feature of a surrogate explanation; `grid_value`
/// carries the anchor row id and `response` the fitted weight.
pub fn surrogate_table(anchor_row: usize, feature_names: &[String], weights: &[f64]) -> PlotTable {
    let rows = feature_names
        .iter()
        .zip(weights)
        .map(|(name, &weight)| PlotRow {
            feature: name.clone(),
            grid_value: anchor_row.to_string(),
            row_id: "surrogate".to_string(),
            response: weight,
        })
        .collect();
    PlotTable {
        name: format!("surrogate_{anchor_row}"),
        rows,
    }
}
