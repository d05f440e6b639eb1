//! Static SVG line charts for CAR curves and metric growth.
//!
//! Output depends only on the input values: coordinates are printed with a
//! fixed precision and series keep their input order, so identical inputs
//! give byte-identical files.

use std::fmt::Write;

use crate::car::CarCurve;
use crate::growth::Growth;
use crate::report::NamedCurve;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf", "#393b79",
];
const CHANCE_COLOR: &str = "#d62728";

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub dashed: bool,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub x_ticks: Vec<(f64, String)>,
    pub y_ticks: Vec<(f64, String)>,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn unit_ticks() -> Vec<(f64, String)> {
    (0..=10)
        .map(|i| (i as f64 / 10.0, format!("{:.1}", i as f64 / 10.0)))
        .collect()
}

impl LineChart {
    fn sx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        LEFT + (x - lo) / (hi - lo) * (WIDTH - LEFT - RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        HEIGHT - BOTTOM - (y - lo) / (hi - lo) * (HEIGHT - TOP - BOTTOM)
    }

    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            s,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(&self.title)
        );

        for (x, label) in &self.x_ticks {
            let px = self.sx(*x);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{TOP:.2}" x2="{px:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
                TOP + plot_h
            );
            let _ = writeln!(
                s,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + plot_h + 16.0,
                escape(label)
            );
        }
        for (y, label) in &self.y_ticks {
            let py = self.sy(*y);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/>"##,
                LEFT + plot_w
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                py + 4.0,
                escape(label)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + plot_h / 2.0,
            TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let points = series
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", self.sx(x), self.sy(y)))
                .collect::<Vec<_>>()
                .join(" ");
            let dash = if series.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="2"{dash} points="{points}"/>"#,
                series.color
            );
            for &(x, y) in &series.points {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                    self.sx(x),
                    self.sy(y),
                    series.color
                );
            }
            let ly = TOP + 10.0 + i as f64 * 18.0;
            let lx = LEFT + plot_w + 14.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/>"#,
                lx + 20.0,
                series.color
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 26.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// One polyline per curve over c ∈ [0, 1]; the chance curve is drawn dashed red.
pub fn car_chart(title: &str, curves: &[NamedCurve], chance: Option<&CarCurve>) -> LineChart {
    let mut series: Vec<Series> = curves
        .iter()
        .enumerate()
        .map(|(i, nc)| Series {
            name: nc.name.clone(),
            points: nc.curve.points().collect(),
            color: PALETTE[i % PALETTE.len()].to_string(),
            dashed: false,
        })
        .collect();
    if let Some(c) = chance {
        series.push(Series {
            name: "chance".into(),
            points: c.points().collect(),
            color: CHANCE_COLOR.into(),
            dashed: true,
        });
    }
    LineChart {
        title: title.to_string(),
        x_label: "consistency threshold c".into(),
        y_label: "MCA(c)".into(),
        x_range: (0.0, 1.0),
        y_range: (0.0, 1.0),
        x_ticks: unit_ticks(),
        y_ticks: unit_ticks(),
        series,
    }
}

/// One polyline per metric over the sorted model axis; slopes go in the legend.
pub fn growth_chart(title: &str, g: &Growth, slopes: &[(String, f64)]) -> LineChart {
    let n = g.models.len();
    let series = g
        .series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let name = match slopes.iter().find(|(m, _)| *m == s.metric) {
                Some((_, slope)) => format!("{} (slope {slope:.3})", s.metric),
                None => s.metric.clone(),
            };
            Series {
                name,
                points: s
                    .values
                    .iter()
                    .enumerate()
                    .map(|(x, &y)| (x as f64, y))
                    .collect(),
                color: PALETTE[i % PALETTE.len()].to_string(),
                dashed: false,
            }
        })
        .collect();
    LineChart {
        title: title.to_string(),
        x_label: "models (sorted by mean score)".into(),
        y_label: "metric value".into(),
        x_range: (0.0, (n.max(2) - 1) as f64),
        y_range: (0.0, 1.0),
        x_ticks: g
            .models
            .iter()
            .enumerate()
            .map(|(i, m)| (i as f64, m.clone()))
            .collect(),
        y_ticks: unit_ticks(),
        series,
    }
}
