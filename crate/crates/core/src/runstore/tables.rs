use std::fmt::Write;

use crate::analysis::SensitivityReport;
use crate::metrics::{CoverageReport, DistanceReport};
use crate::numeric::mean_and_population_std;

/// `mean±std` with the mean to two decimals and the population standard
/// deviation to three, without its leading zero: `0.70±.100`.
pub fn format_mean_std(values: &[f64]) -> String {
    match mean_and_population_std(values) {
        None => "n/a".to_string(),
        Some((mean, std)) => {
            let std = format!("{std:.3}");
            let std = std.strip_prefix('0').unwrap_or(&std);
            format!("{mean:.2}±{std}")
        }
    }
}

/// One row of the coverage and distance tables: one method on one dataset,
/// with one report per seed.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub dataset: String,
    pub method: String,
    pub coverage: Vec<CoverageReport>,
    pub distance: Vec<DistanceReport>,
}

pub const COVERAGE_HEADER: &str = "dataset,method,chosen-CF,chosen-SF,rejected-CF,rejected-SF,both-CF,both-SF";
pub const DISTANCE_HEADER: &str = "dataset,method,syn. dist.,sem. dist.,sem. div.";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Coverage and distance tables as CSV text, cells aggregated across seeds.
pub fn emit_tables(rows: &[TableRow]) -> (String, String) {
    let mut coverage = format!("{COVERAGE_HEADER}\n");
    let mut distance = format!("{DISTANCE_HEADER}\n");
    for row in rows {
        let cell = |f: &dyn Fn(&CoverageReport) -> f64| {
            format_mean_std(&row.coverage.iter().map(f).collect::<Vec<_>>())
        };
        let cells = [
            cell(&|c| c.chosen.cf),
            cell(&|c| c.chosen.sf),
            cell(&|c| c.rejected.cf),
            cell(&|c| c.rejected.sf),
            cell(&|c| c.both.cf),
            cell(&|c| c.both.sf),
        ];
        writeln!(
            coverage,
            "{},{},{}",
            csv_field(&row.dataset),
            csv_field(&row.method),
            cells.join(",")
        )
        .expect("write to string");
        let dcell = |f: &dyn Fn(&DistanceReport) -> Option<f64>| {
            format_mean_std(&row.distance.iter().filter_map(f).collect::<Vec<_>>())
        };
        writeln!(
            distance,
            "{},{},{},{},{}",
            csv_field(&row.dataset),
            csv_field(&row.method),
            dcell(&|d| d.syntactic),
            dcell(&|d| d.semantic),
            dcell(&|d| d.diversity)
        )
        .expect("write to string");
    }
    (coverage, distance)
}

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bar chart of flip rates: one group per attribute (in the order
/// of the first report), one bar per report, y from 0 to 1.
pub fn emit_sensitivity_chart(title: &str, reports: &[SensitivityReport]) -> String {
    let attributes: Vec<&str> = reports
        .first()
        .map(|r| r.attributes.iter().map(|a| a.attribute.as_str()).collect())
        .unwrap_or_default();
    let (left, top, plot_h, bottom) = (50.0, 40.0, 200.0, 110.0);
    let bar_w = 12.0;
    let group_w = bar_w * reports.len().max(1) as f64 + 10.0;
    let plot_w = group_w * attributes.len().max(1) as f64;
    let legend_h = 16.0 * reports.len() as f64;
    let width = left + plot_w + 20.0;
    let height = top + plot_h + bottom + legend_h;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{left:.0}" y="20" font-family="sans-serif" font-size="14">{}</text>"#,
        xml_escape(title)
    );
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = top + plot_h * (1.0 - v);
        let _ = writeln!(
            svg,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/>"##,
            left + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.2}</text>"#,
            left - 4.0,
            y + 3.0
        );
    }
    for (g, attribute) in attributes.iter().enumerate() {
        let x0 = left + g as f64 * group_w + 5.0;
        for (m, report) in reports.iter().enumerate() {
            let Some(pfr) = report.pfr(attribute) else {
                continue;
            };
            let h = plot_h * pfr.clamp(0.0, 1.0);
            let _ = writeln!(
                svg,
                r#"<rect x="{:.1}" y="{:.1}" width="{bar_w:.1}" height="{h:.1}" fill="{}"><title>{} {}: {pfr:.3}</title></rect>"#,
                x0 + m as f64 * bar_w,
                top + plot_h - h,
                PALETTE[m % PALETTE.len()],
                xml_escape(&report.model_id),
                xml_escape(attribute)
            );
        }
        let lx = x0 + bar_w * reports.len() as f64 / 2.0;
        let ly = top + plot_h + 8.0;
        let _ = writeln!(
            svg,
            r#"<text x="{lx:.1}" y="{ly:.1}" font-family="sans-serif" font-size="10" text-anchor="end" transform="rotate(-60 {lx:.1} {ly:.1})">{}</text>"#,
            xml_escape(attribute)
        );
    }
    let _ = writeln!(
        svg,
        r##"<line x1="{left:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#000000"/>"##,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    for (m, report) in reports.iter().enumerate() {
        let y = top + plot_h + bottom + 16.0 * m as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{left:.1}" y="{:.1}" width="10" height="10" fill="{}"/>"#,
            y - 9.0,
            PALETTE[m % PALETTE.len()]
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{y:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
            left + 16.0,
            xml_escape(&report.model_id)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
