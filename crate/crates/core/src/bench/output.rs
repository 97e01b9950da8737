//! Canonical CSV, timing CSV, run metadata and a minimal SVG chart.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::runner::{Reference, ResultRow};
use crate::error::{MolError, Result};
use crate::numeric::median;

pub const HEADER: [&str; 11] = ["experiment", "method", "scalarization", "weights", "n", "N", "sizes", "seed", "excess", "excess_risks", "status"];

/// Seventeen significant digits, enough to round-trip any double.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| MolError::Data(format!("bad float `{s}`")))
}

fn record(r: &ResultRow) -> Vec<String> {
    vec![
        r.experiment.clone(),
        r.method.clone(),
        r.scalarization.clone(),
        r.weights.clone(),
        r.n.to_string(),
        r.big_n.to_string(),
        r.sizes.clone(),
        r.seed.to_string(),
        fmt_f64(r.excess),
        r.excess_risks.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";"),
        r.status.clone(),
    ]
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(record(r))?;
    }
    let bytes = w.into_inner().map_err(|e| MolError::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| MolError::Data(e.to_string()))
}

pub fn timings_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "scalarization", "weights", "sizes", "seed", "wall_time"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.scalarization.clone(),
            r.weights.clone(),
            r.sizes.clone(),
            r.seed.to_string(),
            format!("{:.6}", r.wall_time),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| MolError::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| MolError::Data(e.to_string()))
}

pub fn read_rows_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(MolError::Data("unexpected CSV header".into()));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let int = |i: usize| rec[i].parse::<u64>().map_err(|_| MolError::Data(format!("bad integer `{}`", &rec[i])));
        let risks = if rec[9].is_empty() { Vec::new() } else { rec[9].split(';').map(parse_f64).collect::<Result<_>>()? };
        rows.push(ResultRow {
            experiment: rec[0].into(),
            method: rec[1].into(),
            scalarization: rec[2].into(),
            weights: rec[3].into(),
            n: int(4)? as usize,
            big_n: int(5)? as usize,
            sizes: rec[6].into(),
            seed: int(7)?,
            excess: parse_f64(&rec[8])?,
            excess_risks: risks,
            status: rec[10].into(),
            wall_time: 0.0,
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct Meta<'a> {
    experiment: &'a str,
    config: &'a ExperimentConfig,
    references: &'a [Reference],
    rows: usize,
    failed_rows: usize,
    label_noise: &'static str,
    version: &'static str,
}

pub fn meta_json(cfg: &ExperimentConfig, refs: &[Reference], rows: &[ResultRow]) -> Result<String> {
    let meta = Meta {
        experiment: cfg.experiment.name(),
        config: cfg,
        references: refs,
        rows: rows.len(),
        failed_rows: rows.iter().filter(|r| r.status != "ok").count(),
        label_noise: "regression labels carry uniform noise on [-noise, noise], clipped to the label box",
        version: env!("CARGO_PKG_VERSION"),
    };
    Ok(serde_json::to_string_pretty(&meta)?)
}

/// Median excess per method against `n` (log-log), one polyline per method.
pub fn svg_chart(rows: &[ResultRow]) -> String {
    let mut series: BTreeMap<&str, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.status == "ok") {
        series.entry(&r.method).or_default().entry(r.n).or_default().push(r.excess);
    }
    let pts: BTreeMap<&str, Vec<(f64, f64)>> = series
        .iter()
        .map(|(m, by_n)| {
            let p = by_n
                .iter()
                .filter_map(|(n, v)| {
                    let med = median(v);
                    (med > 0.0).then(|| ((*n as f64).log10(), med.log10()))
                })
                .collect();
            (*m, p)
        })
        .collect();
    let all: Vec<(f64, f64)> = pts.values().flatten().copied().collect();
    let (w, h, pad) = (640.0, 420.0, 50.0);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if !all.is_empty() {
        let lo = |f: fn(&(f64, f64)) -> f64| all.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = |f: fn(&(f64, f64)) -> f64| all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let (x0, x1) = (lo(|p| p.0), hi(|p| p.0).max(lo(|p| p.0) + 1e-9));
        let (y0, y1) = (lo(|p| p.1), hi(|p| p.1).max(lo(|p| p.1) + 1e-9));
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let _ = writeln!(out, r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - pad, w - pad, h - pad);
        let _ = writeln!(out, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, h - pad);
        let _ = writeln!(out, r#"<text x="{}" y="{}">log10 n</text>"#, w / 2.0, h - 15.0);
        let _ = writeln!(out, r#"<text x="5" y="{}">log10 median excess</text>"#, pad - 20.0);
        let colors = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];
        for (i, (m, p)) in pts.iter().enumerate() {
            let c = colors[i % colors.len()];
            let line: Vec<String> = p.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#, line.join(" "));
            for (x, y) in p {
                let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(*x), sy(*y));
            }
            let _ = writeln!(out, r#"<text x="{}" y="{}" fill="{c}">{m}</text>"#, w - pad - 90.0, pad + 15.0 * i as f64);
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Writes `results.csv`, `timings.csv`, `meta.json` and `excess.svg`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, refs: &[Reference], rows: &[ResultRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), rows_to_csv(rows)?)?;
    std::fs::write(dir.join("timings.csv"), timings_to_csv(rows)?)?;
    std::fs::write(dir.join("meta.json"), meta_json(cfg, refs, rows)?)?;
    std::fs::write(dir.join("excess.svg"), svg_chart(rows))?;
    Ok(())
}
