//! Plot data files: one CSV of series per figure and a static SVG chart.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::CharacterizationReport;
use crate::experiment::Phase;
use crate::format::sig_shortest;

const DIGITS: usize = 6;
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: [f64; 4] = [60.0, 20.0, 30.0, 50.0]; // left, right, top, bottom
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Style {
    Line,
    Markers,
    LineMarkers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub style: Style,
    pub points: Vec<[f64; 2]>,
    /// Symmetric error bar per point, if any.
    pub errors: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn n(v: f64) -> String {
    sig_shortest(v, DIGITS)
}

/// Round tick step covering `span` in roughly five intervals.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let pad = if hi == 0.0 { 1.0 } else { hi.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let step = tick_step(hi - lo);
    ((lo / step).floor() * step, (hi / step).ceil() * step)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p[0]));
        let (x0, x1) = range(xs);
        let ys = self.series.iter().flat_map(|s| {
            s.points.iter().enumerate().flat_map(move |(i, p)| {
                let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
                [p[1] - e, p[1] + e]
            })
        });
        let (y0, y1) = range(ys);
        let [ml, mr, mt, mb] = MARGIN;
        let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
        let px = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| mt + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            n(WIDTH / 2.0),
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            n(pw),
            n(ph)
        );

        for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
            let step = tick_step(hi - lo);
            let mut k = (lo / step).ceil() as i64;
            while (k as f64) * step <= hi + step * 1e-9 {
                let v = k as f64 * step;
                let label = n(if v.abs() < step * 1e-9 { 0.0 } else { v });
                if horizontal {
                    let x = n(px(v));
                    let _ = writeln!(
                        s,
                        r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{label}</text>"#,
                        n(mt + ph),
                        n(mt + ph + 5.0),
                        n(mt + ph + 18.0)
                    );
                } else {
                    let y = n(py(v));
                    let _ = writeln!(
                        s,
                        r#"<line x1="{}" y1="{y}" x2="{ml}" y2="{y}" stroke="black"/><text x="{}" y="{y}" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
                        n(ml - 5.0),
                        n(ml - 8.0)
                    );
                }
                k += 1;
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            n(ml + pw / 2.0),
            n(HEIGHT - 12.0),
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(14 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
            n(mt + ph / 2.0),
            escape(&self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let finite: Vec<(usize, [f64; 2])> = series
                .points
                .iter()
                .copied()
                .enumerate()
                .filter(|(_, p)| p[0].is_finite() && p[1].is_finite())
                .collect();
            if matches!(series.style, Style::Line | Style::LineMarkers) && finite.len() > 1 {
                let path: Vec<String> = finite
                    .iter()
                    .map(|(_, p)| format!("{},{}", n(px(p[0])), n(py(p[1]))))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
            if let Some(errors) = &series.errors {
                for &(j, p) in &finite {
                    let x = n(px(p[0]));
                    let _ = writeln!(
                        s,
                        r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="{color}"/>"#,
                        n(py(p[1] - errors[j])),
                        n(py(p[1] + errors[j]))
                    );
                }
            }
            if matches!(series.style, Style::Markers | Style::LineMarkers) {
                for (_, p) in &finite {
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#,
                        n(px(p[0])),
                        n(py(p[1]))
                    );
                }
            }
            let ly = mt + 16.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
                n(ml + 10.0),
                n(ly - 9.0),
                n(ml + 26.0),
                n(ly),
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// Long-format CSV: `series,x,y,error`.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "series,{},{},error\n",
            csv_label(&self.x_label),
            csv_label(&self.y_label)
        );
        for series in &self.series {
            for (i, p) in series.points.iter().enumerate() {
                let e = series.errors.as_ref().map_or(String::new(), |e| n(e[i]));
                let _ = writeln!(out, "{},{},{},{e}", series.name, n(p[0]), n(p[1]));
            }
        }
        out
    }
}

fn csv_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect::<String>()
        .split('_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

fn quantity(report: &CharacterizationReport) -> &'static str {
    match report.unit {
        Some(crate::sensor::ReadingUnit::Farad) => "capacitance",
        Some(crate::sensor::ReadingUnit::Ohm) => "resistance",
        None => "reading",
    }
}

/// Charts supported by the report's contents, keyed by file stem.
pub fn charts(report: &CharacterizationReport) -> Vec<(&'static str, Chart)> {
    let q = quantity(report);
    let y_label = format!("relative change in {q}");
    let mut out = Vec::new();

    if let Some(curve) = report.curves.first() {
        let to_xy = |pts: &[super::CurvePoint]| -> Vec<[f64; 2]> {
            pts.iter()
                .map(|p| [p.strain_pct, p.relative_change])
                .collect()
        };
        out.push((
            "hysteresis",
            Chart {
                title: format!("Cycle {} stretch and release", curve.cycle_index),
                x_label: "strain (%)".into(),
                y_label: y_label.clone(),
                series: vec![
                    Series {
                        name: "stretch".into(),
                        style: Style::LineMarkers,
                        points: to_xy(&curve.stretch_points),
                        errors: None,
                    },
                    Series {
                        name: "release".into(),
                        style: Style::LineMarkers,
                        points: to_xy(&curve.release_branch()),
                        errors: None,
                    },
                ],
            },
        ));
    }

    if let (Some(gf), Some(b), Some(r2)) = (report.gauge_factor, report.intercept, report.r_squared)
    {
        let mut series = Vec::new();
        for phase in [Phase::Stretch, Phase::Release] {
            let pts: Vec<_> = report
                .fit_points
                .iter()
                .filter(|p| p.phase == phase)
                .collect();
            if pts.is_empty() {
                continue;
            }
            series.push(Series {
                name: format!("{phase} mean"),
                style: Style::Markers,
                points: pts
                    .iter()
                    .map(|p| [p.strain_pct, p.mean_relative_change])
                    .collect(),
                errors: Some(pts.iter().map(|p| p.std_relative_change).collect()),
            });
        }
        let (lo, hi) = report
            .fit_points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.strain_pct), hi.max(p.strain_pct))
            });
        series.push(Series {
            name: "fit".into(),
            style: Style::Line,
            points: [lo, hi].iter().map(|&s| [s, b + gf * s / 100.0]).collect(),
            errors: None,
        });
        out.push((
            "linear_fit",
            Chart {
                title: format!("GF = {}, R² = {}", n(gf), n(r2)),
                x_label: "strain (%)".into(),
                y_label: y_label.clone(),
                series,
            },
        ));
    }

    if !report.failure_curve.is_empty() {
        out.push((
            "failure",
            Chart {
                title: match report.stretchability_pct {
                    Some(s) => format!("Strain to failure: {}%", n(s)),
                    None => "Strain to failure".into(),
                },
                x_label: "strain (%)".into(),
                y_label,
                series: vec![Series {
                    name: "failure run".into(),
                    style: Style::LineMarkers,
                    points: report
                        .failure_curve
                        .iter()
                        .map(|p| [p.strain_pct, p.relative_change])
                        .collect(),
                    errors: None,
                }],
            },
        ));
    }

    if !report.zero_values.is_empty() {
        let unit = report.unit.map_or("", |u| u.symbol());
        out.push((
            "zero_values",
            Chart {
                title: format!("Zero {q} per sensor"),
                x_label: "sensor index".into(),
                y_label: format!("zero value ({unit})"),
                series: vec![Series {
                    name: "sensors".into(),
                    style: Style::Markers,
                    points: report
                        .zero_values
                        .iter()
                        .enumerate()
                        .map(|(i, (_, v))| [(i + 1) as f64, *v])
                        .collect(),
                    errors: None,
                }],
            },
        ));
    }
    out
}

/// Writes `<stem>.csv` and `<stem>.svg` for each chart; returns the paths.
pub fn write_plots(report: &CharacterizationReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (stem, chart) in charts(report) {
        for (ext, body) in [("csv", chart.to_csv()), ("svg", chart.to_svg())] {
            let path = dir.join(format!("{stem}.{ext}"));
            fs::write(&path, body)?;
            written.push(path);
        }
    }
    Ok(written)
}
