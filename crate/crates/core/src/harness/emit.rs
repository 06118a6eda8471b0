use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{Aggregate, Report};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "method,rep,delta1,delta2,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    SvgScatter,
    SvgRadar,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 4] = [Self::Csv, Self::Json, Self::SvgScatter, Self::SvgRadar];

    pub fn file_name(self) -> &'static str {
        match self {
            Self::Csv => "results.csv",
            Self::Json => "report.json",
            Self::SvgScatter => "scatter.svg",
            Self::SvgRadar => "radar.svg",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg-scatter" | "svg_scatter" | "scatter" => Ok(Self::SvgScatter),
            "svg-radar" | "svg_radar" | "radar" => Ok(Self::SvgRadar),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// One row per (method, replication) with test-set metrics.
pub fn write_report_csv<W: Write>(report: &Report, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Data(format!("csv write failed: {e}"));
    w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    for r in &report.results {
        w.write_record([
            r.method.clone(),
            r.rep.to_string(),
            r.metrics.delta1.to_string(),
            r.metrics.delta2.to_string(),
            r.metrics.value.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Per-replication (Delta1, Delta2) points, one color per method, with each
/// method's mean marked and labelled by its mean value.
pub fn svg_scatter(report: &Report) -> String {
    let (pw, ph, margin) = (480.0, 360.0, 60.0);
    let width = pw + 2.0 * margin + 160.0;
    let height = ph + 2.0 * margin;
    let methods: Vec<&str> = report.aggregates.iter().map(|a| a.method.as_str()).collect();
    let color = |m: &str| PALETTE[methods.iter().position(|x| *x == m).unwrap_or(0) % PALETTE.len()];
    let (xlo, xhi) = range(report.results.iter().map(|r| r.metrics.delta1));
    let (ylo, yhi) = range(report.results.iter().map(|r| r.metrics.delta2));
    let (x0, y0) = (margin, margin);
    let px = |v: f64| x0 + (v - xlo) / (xhi - xlo) * pw;
    let py = |v: f64| y0 + ph - (v - ylo) / (yhi - ylo) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">Delta1 (action gap)</text>"#,
        x0 + pw / 2.0,
        y0 + ph + 34.0
    );
    let (lx, ly) = (x0 - 40.0, y0 + ph / 2.0);
    let _ = writeln!(
        svg,
        r#"<text x="{lx}" y="{ly}" text-anchor="middle" transform="rotate(-90 {lx} {ly})">Delta2 (outcome gap)</text>"#
    );
    for (tx, v) in [(x0, xlo), (x0 + pw, xhi)] {
        let _ = writeln!(svg, r#"<text x="{tx}" y="{}" text-anchor="middle">{v:.3}</text>"#, y0 + ph + 16.0);
    }
    for (ty, v) in [(y0 + ph, ylo), (y0, yhi)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{ty}" text-anchor="end">{v:.3}</text>"#, x0 - 4.0);
    }
    for r in &report.results {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.5"/>"#,
            px(r.metrics.delta1),
            py(r.metrics.delta2),
            color(&r.method)
        );
    }
    for a in &report.aggregates {
        let (cx, cy) = (px(a.delta1.mean), py(a.delta2.mean));
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="{}" stroke="#000"/><text x="{:.2}" y="{:.2}">V={:.3}</text>"##,
            cx - 4.0,
            cy - 4.0,
            color(&a.method),
            cx + 7.0,
            cy - 6.0,
            a.value.mean
        );
    }
    legend(&mut svg, &methods, pw + margin + 30.0, margin);
    svg.push_str("</svg>\n");
    svg
}

fn legend(svg: &mut String, methods: &[&str], x: f64, y: f64) {
    for (i, m) in methods.iter().enumerate() {
        let yy = y + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            yy,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            yy + 9.0,
            escape(m)
        );
    }
}

/// Mean metrics min-max scaled to [0, 1] across methods, with the two gaps
/// inverted so larger is better on every axis. An axis on which all methods
/// agree scores 1.
pub fn radar_scores(aggregates: &[Aggregate]) -> Vec<(String, [f64; 3])> {
    let cols: [Vec<f64>; 3] = [
        aggregates.iter().map(|a| a.delta1.mean).collect(),
        aggregates.iter().map(|a| a.delta2.mean).collect(),
        aggregates.iter().map(|a| a.value.mean).collect(),
    ];
    let scale = |col: &[f64], v: f64, invert: bool| {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 0.0 {
            return 1.0;
        }
        let t = (v - lo) / (hi - lo);
        if invert {
            1.0 - t
        } else {
            t
        }
    };
    aggregates
        .iter()
        .map(|a| {
            (
                a.method.clone(),
                [
                    scale(&cols[0], a.delta1.mean, true),
                    scale(&cols[1], a.delta2.mean, true),
                    scale(&cols[2], a.value.mean, false),
                ],
            )
        })
        .collect()
}

/// Three-axis radar chart of [`radar_scores`].
pub fn svg_radar(report: &Report) -> String {
    let scores = radar_scores(&report.aggregates);
    let (cx, cy, rad) = (220.0, 210.0, 150.0);
    let axes = ["action fairness", "outcome fairness", "value"];
    let angle = |i: usize| -std::f64::consts::FRAC_PI_2 + i as f64 * 2.0 * std::f64::consts::PI / 3.0;
    let point = |i: usize, t: f64| (cx + rad * t * angle(i).cos(), cy + rad * t * angle(i).sin());

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="600" height="420" font-family="sans-serif" font-size="12">"#
    );
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let pts: Vec<String> = (0..3)
            .map(|i| {
                let (x, y) = point(i, ring);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(svg, r##"<polygon points="{}" fill="none" stroke="#ccc"/>"##, pts.join(" "));
    }
    for (i, name) in axes.iter().enumerate() {
        let (x, y) = point(i, 1.0);
        let (lx, ly) = point(i, 1.12);
        let _ = writeln!(svg, r##"<line x1="{cx}" y1="{cy}" x2="{x:.2}" y2="{y:.2}" stroke="#888"/>"##);
        let _ = writeln!(svg, r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle">{name}</text>"#);
    }
    for (k, (_, s)) in scores.iter().enumerate() {
        let pts: Vec<String> = (0..3)
            .map(|i| {
                let (x, y) = point(i, s[i]);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let c = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{c}" fill-opacity="0.15" stroke="{c}" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }
    let names: Vec<&str> = scores.iter().map(|(m, _)| m.as_str()).collect();
    legend(&mut svg, &names, 440.0, 40.0);
    svg.push_str("</svg>\n");
    svg
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes `report` in `format`. A directory target receives the format's
/// default file name; returns the path written.
pub fn emit_report(report: &Report, format: ReportFormat, target: &Path) -> Result<std::path::PathBuf> {
    let path = if target.is_dir() {
        target.join(format.file_name())
    } else {
        if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
        target.to_path_buf()
    };
    match format {
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            write_report_csv(report, &mut buf)?;
            write_file(&path, &buf)?;
        }
        ReportFormat::Json => {
            let json = serde_json::to_vec_pretty(report).map_err(|e| Error::Data(e.to_string()))?;
            write_file(&path, &json)?;
        }
        ReportFormat::SvgScatter => write_file(&path, svg_scatter(report).as_bytes())?,
        ReportFormat::SvgRadar => write_file(&path, svg_radar(report).as_bytes())?,
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_experiment, ExperimentConfig, Scenario, Stat};
    use crate::solver::Method;

    fn agg(method: &str, d1: f64, d2: f64, v: f64) -> Aggregate {
        let st = |mean| Stat { mean, se: 0.0 };
        Aggregate {
            method: method.into(),
            base: Method::Dfl,
            c0: None,
            k: None,
            n: 1,
            delta1: st(d1),
            delta2: st(d2),
            value: st(v),
        }
    }

    #[test]
    fn radar_inverts_gaps() {
        let s = radar_scores(&[agg("a", 0.0, 0.2, 1.0), agg("b", 1.0, 0.1, 2.0), agg("c", 0.5, 0.1, 1.5)]);
        assert_eq!(s[0].1, [1.0, 0.0, 0.0]);
        assert_eq!(s[1].1, [0.0, 1.0, 1.0]);
        assert_eq!(s[2].1, [0.5, 1.0, 0.5]);
    }

    #[test]
    fn radar_constant_axis_scores_one() {
        let s = radar_scores(&[agg("a", 0.3, 0.3, 1.0), agg("b", 0.3, 0.3, 1.0)]);
        assert!(s.iter().all(|(_, v)| *v == [1.0; 3]));
    }

    #[test]
    fn emits_all_formats() {
        let cfg = ExperimentConfig {
            scenario: Scenario::B2Demo,
            replications: 2,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for f in ReportFormat::ALL {
            let path = emit_report(&report, f, dir.path()).unwrap();
            assert!(path.exists());
        }
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), report.results.len());
        let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back.results, report.results);
        let svg = std::fs::read_to_string(dir.path().join("scatter.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), report.results.len());
        assert_eq!(svg.matches("V=").count(), report.aggregates.len());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cfg = ExperimentConfig {
            methods: vec![Method::Optimal, Method::Vb2],
            replications: 1,
            sim: crate::data::SimConfig {
                n_train: 60,
                n_test: 100,
                seed: 3,
            },
            dfl: crate::solver::DFLConfig {
                class_spec: crate::policy::PolicyClassSpec {
                    pool_size: 50,
                    refine_budget: 10,
                    ..Default::default()
                },
                ..Default::default()
            },
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&report, &mut buf).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>().join(","), CSV_HEADER);
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 2);
        for (row, r) in rows.iter().zip(&report.results) {
            assert_eq!(&row[0], r.method);
            assert_eq!(row[1].parse::<usize>().unwrap(), r.rep);
            assert_eq!(row[2].parse::<f64>().unwrap(), r.metrics.delta1);
            assert_eq!(row[3].parse::<f64>().unwrap(), r.metrics.delta2);
            assert_eq!(row[4].parse::<f64>().unwrap(), r.metrics.value);
        }
    }

    #[test]
    fn radar_two_point_axis_hits_endpoints() {
        let s = radar_scores(&[agg("a", 0.0, 0.0, 1.0), agg("b", 0.0, 0.0, 3.0)]);
        assert_eq!((s[0].1[2], s[1].1[2]), (0.0, 1.0));
    }

    #[test]
    fn format_names_parse() {
        assert_eq!("svg-radar".parse::<ReportFormat>().unwrap(), ReportFormat::SvgRadar);
        assert!("pdf".parse::<ReportFormat>().is_err());
    }
}
