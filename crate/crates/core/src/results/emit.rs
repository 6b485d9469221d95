use std::fmt::Write as _;

use serde::Serialize;

use super::report::{ReportRow, RetentionReport};
use super::ResultsError;
use crate::metrics::{format_rational_fixed, render_tcr, CompressionConfig};
use crate::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

fn fixed4(v: f64) -> String {
    format!("{v:.4}")
}

fn table_cells(report: &RetentionReport) -> (Vec<String>, Vec<Vec<String>>) {
    let tasks = report.task_columns();
    let mut header = vec!["Model".to_string(), "Config".into(), "TCr".into()];
    header.extend(tasks.iter().map(|t| format!("R_{t}")));
    header.extend(["Sr".to_string(), "SrCr".into()]);
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let mut cells = vec![
                r.model.clone(),
                r.label.clone(),
                format_rational_fixed(r.tcr, 4, false),
            ];
            for t in &tasks {
                cells.push(
                    r.tasks
                        .iter()
                        .find(|x| &x.task == t)
                        .map_or(String::new(), |x| fixed4(x.retention)),
                );
            }
            cells.push(fixed4(r.sr));
            cells.push(fixed4(r.srcr.srcr));
            cells
        })
        .collect();
    (header, rows)
}

/// Render a report as a Markdown or CSV table with four-decimal cells. Row order
/// is the report's (model, then compression rate ascending).
pub fn emit_table(report: &RetentionReport, format: TableFormat) -> String {
    let (header, rows) = table_cells(report);
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for r in rows {
                let _ = writeln!(out, "| {} |", r.join(" | "));
            }
        }
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            // writing into a Vec cannot fail
            w.write_record(&header).expect("in-memory write");
            for r in rows {
                w.write_record(&r).expect("in-memory write");
            }
            out = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells");
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    RetentionBars,
    SrcrBars,
    JointVsQuant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub group: String,
    pub series: String,
    pub value: f64,
}

/// Plot data as `(group, series, value)` rows plus a minimal SVG bar chart.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotBundle {
    pub points: Vec<PlotPoint>,
    pub csv: String,
    pub svg: String,
}

/// (joint sparsity, joint bits, quantization-only bits) sharing one compression rate:
/// 75%, 81.25% and 87.5%.
pub const EQUAL_RATE_TRIPLES: [((i64, i64), i64, i64); 3] =
    [((1, 2), 8, 4), ((1, 4), 4, 3), ((1, 3), 3, 2)];

fn group_name(report: &RetentionReport, row: &ReportRow) -> String {
    if report.models().len() > 1 {
        format!("{} {}", row.model, row.label)
    } else {
        row.label.clone()
    }
}

fn point(group: String, series: impl Into<String>, value: f64) -> PlotPoint {
    PlotPoint {
        group,
        series: series.into(),
        value,
    }
}

fn joint_vs_quant(report: &RetentionReport) -> Result<Vec<PlotPoint>, ResultsError> {
    let mut points = Vec::new();
    for model in report.models() {
        for &((sn, sd), jb, qb) in &EQUAL_RATE_TRIPLES {
            let joint =
                CompressionConfig::joint(Rational::new(sn, sd), Rational::from_integer(jb))?;
            let quant = CompressionConfig::quantization(Rational::from_integer(qb))?;
            let (j, q) = (report.find(&model, &joint), report.find(&model, &quant));
            let (j, q) = match (j, q) {
                (None, None) => continue,
                (Some(j), Some(q)) => (j, q),
                _ => {
                    return Err(ResultsError::MissingPair {
                        model: model.clone(),
                        joint: joint.label(),
                        quant: quant.label(),
                    })
                }
            };
            let group = if report.models().len() > 1 {
                format!("{model} {}", render_tcr(j.tcr))
            } else {
                render_tcr(j.tcr)
            };
            points.push(point(group.clone(), j.label.clone(), j.sr));
            points.push(point(group, q.label.clone(), q.sr));
        }
    }
    if points.is_empty() {
        return Err(ResultsError::MissingPair {
            model: report.models().join(","),
            joint: "any equal-rate joint config".into(),
            quant: "its quantization-only partner".into(),
        });
    }
    Ok(points)
}

/// Build plot data for one figure kind.
pub fn emit_plot_data(
    report: &RetentionReport,
    kind: FigureKind,
) -> Result<PlotBundle, ResultsError> {
    if report.is_empty() {
        return Err(ResultsError::EmptyReport);
    }
    let points = match kind {
        FigureKind::RetentionBars => report
            .rows
            .iter()
            .flat_map(|r| {
                let g = group_name(report, r);
                r.tasks
                    .iter()
                    .map(|t| point(g.clone(), t.task.clone(), t.retention))
                    .chain(std::iter::once(point(g.clone(), "Sr", r.sr)))
                    .collect::<Vec<_>>()
            })
            .collect(),
        FigureKind::SrcrBars => report
            .rows
            .iter()
            .filter(|r| r.config != CompressionConfig::baseline())
            .flat_map(|r| {
                let g = group_name(report, r);
                let mut v = vec![point(g.clone(), "SrCr", r.srcr.srcr)];
                if let Some(e) = r.srcr_estimate {
                    v.push(point(g, "estimate", e));
                }
                v
            })
            .collect(),
        FigureKind::JointVsQuant => joint_vs_quant(report)?,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "series", "value"])
        .expect("in-memory write");
    for p in &points {
        w.write_record([p.group.as_str(), p.series.as_str(), &fixed4(p.value)])
            .expect("in-memory write");
    }
    let csv = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells");
    let svg = render_svg(&points);
    Ok(PlotBundle { points, csv, svg })
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn render_svg(points: &[PlotPoint]) -> String {
    const BAR: f64 = 14.0;
    const GAP: f64 = 10.0;
    const HEIGHT: f64 = 200.0;
    let max = points.iter().map(|p| p.value).fold(1.0f64, f64::max);
    let mut series: Vec<&str> = Vec::new();
    for p in points {
        if !series.contains(&p.series.as_str()) {
            series.push(&p.series);
        }
    }
    let palette = [
        "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
    ];
    let mut x = GAP;
    let mut body = String::new();
    let mut last_group: Option<&str> = None;
    for p in points {
        if last_group.is_some_and(|g| g != p.group) {
            x += GAP;
        }
        if last_group != Some(p.group.as_str()) {
            let _ = writeln!(
                body,
                r#"<text x="{x:.1}" y="{:.1}" font-size="9">{}</text>"#,
                HEIGHT + 34.0,
                escape(&p.group)
            );
        }
        last_group = Some(&p.group);
        let h = (p.value.max(0.0) / max) * HEIGHT;
        let color =
            palette[series.iter().position(|s| *s == p.series).unwrap_or(0) % palette.len()];
        let _ = writeln!(
            body,
            r#"<rect x="{x:.1}" y="{:.1}" width="{BAR}" height="{h:.1}" fill="{color}"><title>{} {}: {:.4}</title></rect>"#,
            HEIGHT + 20.0 - h,
            escape(&p.group),
            escape(&p.series),
            p.value
        );
        x += BAR;
    }
    let mut legend = String::new();
    for (i, s) in series.iter().enumerate() {
        let _ = writeln!(
            legend,
            r#"<rect x="{:.1}" y="4" width="8" height="8" fill="{}"/><text x="{:.1}" y="12" font-size="9">{}</text>"#,
            GAP + i as f64 * 90.0,
            palette[i % palette.len()],
            GAP + i as f64 * 90.0 + 11.0,
            escape(s)
        );
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\">\n{legend}{body}</svg>\n",
        (x + GAP).max(200.0),
        HEIGHT + 44.0
    )
}
