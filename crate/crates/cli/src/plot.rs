//! Long-format plot data (`send_rate,series,value`) and a small SVG line
//! chart renderer.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::CliError;

pub const PLOT_HEADER: [&str; 3] = ["send_rate", "series", "value"];

#[derive(Clone, Debug, PartialEq)]
pub struct PlotPoint {
    pub send_rate: f64,
    pub series: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub title: String,
    pub y_label: String,
    pub points: Vec<PlotPoint>,
}

impl PlotData {
    /// Points grouped by series name, each sorted by send rate.
    pub fn series(&self) -> BTreeMap<&str, Vec<(f64, f64)>> {
        let mut out: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for p in &self.points {
            out.entry(p.series.as_str()).or_default().push((p.send_rate, p.value));
        }
        for pts in out.values_mut() {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        out
    }
}

pub fn to_csv(data: &PlotData) -> Result<Vec<u8>, CliError> {
    let err = |e: csv::Error| CliError::Internal(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PLOT_HEADER).map_err(err)?;
    for p in &data.points {
        w.write_record([p.send_rate.to_string(), p.series.clone(), p.value.to_string()])
            .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

/// Parses plot data written by [`to_csv`]. `title` labels the chart.
pub fn from_csv(bytes: &[u8], title: &str) -> Result<PlotData, CliError> {
    let mut r = csv::Reader::from_reader(bytes);
    let headers = r.headers().map_err(|e| CliError::Invalid(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != PLOT_HEADER {
        return Err(CliError::Invalid(format!(
            "{title}: expected header {}",
            PLOT_HEADER.join(",")
        )));
    }
    let mut points = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| CliError::Invalid(format!("{title}: {e}")))?;
        let num = |j: usize| {
            record[j].parse::<f64>().map_err(|_| {
                CliError::Invalid(format!("{title}: row {}: cannot parse {:?}", i + 2, &record[j]))
            })
        };
        points.push(PlotPoint {
            send_rate: num(0)?,
            series: record[1].to_string(),
            value: num(2)?,
        });
    }
    Ok(PlotData {
        title: title.to_string(),
        y_label: "value".to_string(),
        points,
    })
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A line chart with one polyline per series and a legend.
pub fn render_svg(data: &PlotData) -> String {
    let series = data.series();
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for p in &data.points {
        x0 = x0.min(p.send_rate);
        x1 = x1.max(p.send_rate);
        y1 = y1.max(p.value);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    y1 *= 1.05;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / y1 * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&data.title)
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * f64::from(i) / 4.0;
        let fy = y1 * f64::from(i) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            bottom + 18.0,
            (fx * 100.0).round() / 100.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            sy(fy) + 4.0,
            (fy * 1000.0).round() / 1000.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">send rate (msg/s)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&data.y_label)
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
            path.join(" ")
        );
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            right - 90.0,
            right - 70.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            right - 64.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
