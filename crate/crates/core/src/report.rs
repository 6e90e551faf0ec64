//! Flat-file output: performance-map CSV and SVG heatmaps.
//!
//! CSV header is `p_h,p_c,value,count,low_confidence`, one row per grid cell
//! with `p_h` outer and `p_c` inner. Undefined values are empty fields.
//! Floats are written in shortest round-trip form, so reading a file back
//! yields bit-identical values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::metrics::{MapKind, MapSource, PerformanceMap};

pub const CSV_HEADER: &str = "p_h,p_c,value,count,low_confidence";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    p_h: f64,
    p_c: f64,
    value: Option<f64>,
    count: u64,
    low_confidence: bool,
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::MalformedMap(e.to_string())
}

pub fn map_to_csv(map: &PerformanceMap) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for (index, (value, count)) in map.values.iter().zip(&map.counts).enumerate() {
        let (p_h, p_c) = map.grid.point(index);
        writer
            .serialize(Row {
                p_h,
                p_c,
                value: *value,
                count: *count,
                low_confidence: map.low_confidence(index),
            })
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Parses a map written by [`map_to_csv`]. The grid is inferred from the row
/// count and every coordinate is checked against it.
pub fn map_from_csv(text: &str, kind: MapKind, source: MapSource) -> Result<PerformanceMap> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_err)?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::MalformedMap(format!(
            "expected header `{CSV_HEADER}`"
        )));
    }
    let rows = reader
        .deserialize::<Row>()
        .collect::<std::result::Result<Vec<Row>, _>>()
        .map_err(csv_err)?;
    let side = (rows.len() as f64).sqrt().round() as usize;
    if side < 2 || side * side != rows.len() {
        return Err(Error::MalformedMap(format!(
            "{} rows do not form a square grid",
            rows.len()
        )));
    }
    let grid = GridSpec::new(side - 1)?;
    for (index, row) in rows.iter().enumerate() {
        let (p_h, p_c) = grid.point(index);
        if (row.p_h - p_h).abs() > 1e-9 || (row.p_c - p_c).abs() > 1e-9 {
            return Err(Error::MalformedMap(format!(
                "row {} is ({}, {}), expected ({p_h}, {p_c})",
                index + 1,
                row.p_h,
                row.p_c
            )));
        }
    }
    let (values, counts) = rows.iter().map(|r| (r.value, r.count)).unzip();
    PerformanceMap::new(grid, kind, source, values, counts)
}

const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

/// Fixed five-stop colour ramp over `[0, 1]`, dark purple to yellow.
pub fn ramp_color(v: f64) -> String {
    let v = v.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (v.floor() as usize).min(RAMP.len() - 2);
    let f = v - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

const UNDEFINED_COLOR: &str = "#d0d0d0";
const LEFT: f64 = 60.0;
const TOP: f64 = 40.0;
const PLOT: f64 = 400.0;

/// Heatmap with `p_h` on the x axis and `p_c` on the y axis (upwards).
/// Grey cells are undefined.
pub fn render_heatmap(map: &PerformanceMap, title: &str) -> String {
    let side = map.grid.side();
    let cell = PLOT / side as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="560" height="500" viewBox="0 0 560 500" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="560" height="500" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + PLOT / 2.0,
        escape(title)
    );
    let _ = writeln!(svg, r#"<g shape-rendering="crispEdges">"#);
    for (index, value) in map.values.iter().enumerate() {
        let (i_h, i_c) = map.grid.cell(index);
        let x = LEFT + i_h as f64 * cell;
        let y = TOP + (side - 1 - i_c) as f64 * cell;
        let fill = value.map_or_else(|| UNDEFINED_COLOR.to_string(), ramp_color);
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{w:.3}" fill="{fill}"/>"#,
            w = cell + 0.05
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT}" height="{PLOT}" fill="none" stroke="black"/>"#
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let offset = (tick * map.grid.divisions() as f64 + 0.5) * cell;
        let x = LEFT + offset;
        let y = TOP + PLOT - offset;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.3}" y1="{b}" x2="{x:.3}" y2="{b2}" stroke="black"/><text x="{x:.3}" y="{ty}" text-anchor="middle">{tick}</text>"#,
            b = TOP + PLOT,
            b2 = TOP + PLOT + 5.0,
            ty = TOP + PLOT + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{l}" y1="{y:.3}" x2="{LEFT}" y2="{y:.3}" stroke="black"/><text x="{tx}" y="{ty:.3}" text-anchor="end">{tick}</text>"#,
            l = LEFT - 5.0,
            tx = LEFT - 8.0,
            ty = y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">p_h</text>"#,
        LEFT + PLOT / 2.0,
        TOP + PLOT + 38.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">p_c</text>"#,
        TOP + PLOT / 2.0,
        TOP + PLOT / 2.0
    );
    // colour bar
    let bar_x = LEFT + PLOT + 30.0;
    let steps = 50;
    let step_h = PLOT / steps as f64;
    for s in 0..steps {
        let v = (s as f64 + 0.5) / steps as f64;
        let y = TOP + PLOT - (s + 1) as f64 * step_h;
        let _ = writeln!(
            svg,
            r#"<rect x="{bar_x}" y="{y:.3}" width="18" height="{h:.3}" fill="{}"/>"#,
            ramp_color(v),
            h = step_h + 0.05
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{tx}" y="{}">1</text><text x="{tx}" y="{}">0</text>"#,
        TOP + 10.0,
        TOP + PLOT,
        tx = bar_x + 24.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
