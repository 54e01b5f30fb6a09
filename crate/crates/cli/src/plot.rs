//! Minimal CSV-to-SVG plotting: one polyline per series, labeled axes, no
//! interactivity. Series are grouped by the (scheme, policy, a1) columns
//! when present.

use crate::runner::CliError;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 56.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Parsed CSV: header names and string rows, comment lines skipped.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn parse_csv(text: &str) -> Result<Table, CliError> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Validation("CSV has no header row".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != header.len() {
            return Err(CliError::Validation(format!(
                "CSV row {} has {} fields, header has {}",
                i + 2,
                fields.len(),
                header.len()
            )));
        }
        rows.push(fields);
    }
    Ok(Table { header, rows })
}

fn column_index(table: &Table, name: &str) -> Result<usize, CliError> {
    table
        .header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| {
            CliError::Validation(format!(
                "column '{name}' not found; available: {}",
                table.header.join(", ")
            ))
        })
}

/// Renders `y` against `x` and writes a self-contained SVG.
pub fn plot(csv_path: &Path, x_col: &str, y_col: &str, out_path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(csv_path)?;
    let table = parse_csv(&text)?;
    let xi = column_index(&table, x_col)?;
    let yi = column_index(&table, y_col)?;
    let group_cols: Vec<usize> = ["scheme", "policy", "a1"]
        .iter()
        .filter_map(|c| table.header.iter().position(|h| h == c))
        .collect();

    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &table.rows {
        let x: f64 = row[xi]
            .parse()
            .map_err(|_| CliError::Validation(format!("non-numeric x value '{}'", row[xi])))?;
        let y: f64 = row[yi]
            .parse()
            .map_err(|_| CliError::Validation(format!("non-numeric y value '{}'", row[yi])))?;
        let key = if group_cols.is_empty() {
            y_col.to_string()
        } else {
            group_cols
                .iter()
                .map(|&c| row[c].clone())
                .collect::<Vec<_>>()
                .join("/")
        };
        series.entry(key).or_default().push((x, y));
    }
    if series.is_empty() {
        return Err(CliError::Validation("no data rows to plot".into()));
    }

    let all: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    let (mut x_min, mut x_max) = bounds(all.iter().map(|p| p.0));
    let (mut y_min, mut y_max) = bounds(all.iter().map(|p| p.1));
    if x_max == x_min {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if y_max == y_min {
        y_min -= 1.0;
        y_max += 1.0;
    }

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    // axes
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        MARGIN_LEFT,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        MARGIN_LEFT,
        MARGIN_TOP,
        MARGIN_LEFT,
        MARGIN_TOP + plot_h
    );
    // ticks
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = x_min + t * (x_max - x_min);
        let yv = y_min + t * (y_max - y_min);
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            sx(xv),
            MARGIN_TOP + plot_h + 16.0,
            trim_num(xv)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            MARGIN_LEFT - 6.0,
            sy(yv) + 4.0,
            trim_num(yv)
        );
    }
    // axis titles
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        x_col
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        y_col
    );
    // series
    for (idx, (name, pts)) in series.iter().enumerate() {
        let mut pts = pts.clone();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let color = PALETTE[idx % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"{color}\">{}</text>",
            MARGIN_LEFT + plot_w - 150.0,
            MARGIN_TOP + 14.0 * (idx as f64 + 1.0),
            name
        );
    }
    svg.push_str("</svg>\n");

    if let Some(dir) = out_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(out_path, svg)?;
    println!("wrote {}", out_path.display());
    Ok(())
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn trim_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 0.01 && v.abs() < 100_000.0 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}
