//! Minimal SVG line charts for plot tables with numeric grids.
//!
//! These are a convenience view over the CSV tables, not the contract:
//! one polyline per `row_id`, no styling dependencies, fixed canvas.
//! Tables whose grid values do not all parse as numbers (categorical
//! grids, surrogate weight tables) are skipped by returning `None`.

use std::collections::BTreeMap;

use super::plots::{PlotTable, PD_ROW_ID};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// Series colour: the PD overlay is drawn black and thick, individual
/// curves thin grey.
fn stroke(row_id: &str) -> (&'static str, &'static str) {
    if row_id == PD_ROW_ID {
        ("#000000", "2.5")
    } else {
        ("#9999aa", "1")
    }
}

fn scale(value: f64, min: f64, max: f64, lo: f64, hi: f64) -> f64 {
    if max > min {
        lo + (value - min) / (max - min) * (hi - lo)
    } else {
        (lo + hi) / 2.0
    }
}

/// Renders `table` as an SVG document, or `None` when the grid is not
/// numeric (nothing sensible to draw on the x axis).
pub fn line_chart(table: &PlotTable) -> Option<String> {
    if table.rows.is_empty() {
        return None;
    }
    let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &table.rows {
        let x: f64 = row.grid_value.parse().ok()?;
        if !x.is_finite() {
            return None;
        }
        series
            .entry(&row.row_id)
            .or_default()
            .push((x, row.response));
    }
    let xs: Vec<f64> = series.values().flatten().map(|p| p.0).collect();
    let ys: Vec<f64> = series.values().flatten().map(|p| p.1).collect();
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    // A single grid point gives no x axis to speak of (e.g. surrogate
    // weight tables, whose grid column repeats the anchor id).
    if x_min == x_max {
        return None;
    }

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));
    // Axes along the left and bottom margins.
    out.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"#333333\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN
    ));
    out.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#333333\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    out.push_str(&format!(
        "  <text x=\"{x}\" y=\"{y}\" font-size=\"12\" font-family=\"monospace\">{name}</text>\n",
        x = MARGIN,
        y = MARGIN - 10.0,
        name = table.name
    ));

    // Draw the PD overlay last so it sits on top.
    let mut ordered: Vec<(&str, &Vec<(f64, f64)>)> = series.iter().map(|(k, v)| (*k, v)).collect();
    ordered.sort_by_key(|(k, _)| *k == PD_ROW_ID);
    for (row_id, points) in ordered {
        let (colour, width) = stroke(row_id);
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    scale(x, x_min, x_max, MARGIN, WIDTH - MARGIN),
                    // SVG y grows downward.
                    scale(y, y_min, y_max, HEIGHT - MARGIN, MARGIN)
                )
            })
            .collect();
        out.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"{width}\"/>\n",
            coords.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    Some(out)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}
