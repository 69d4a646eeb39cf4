use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ComparisonRow, ComparisonTable, RateTable, ReductionPoint, Report};
use crate::error::{Error, Result};
use crate::ingest::Category;
use crate::specfun::Probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedFile {
    pub name: String,
    pub contents: String,
}

/// Renders a report. Markdown and JSON produce one file, CSV one file per
/// table. Output depends only on the report, so identical inputs give
/// identical bytes.
pub fn render_report(report: &Report, format: ReportFormat) -> Result<Vec<RenderedFile>> {
    let file = |name: &str, contents: String| RenderedFile {
        name: name.to_string(),
        contents,
    };
    Ok(match format {
        ReportFormat::Markdown => {
            let mut out = String::from("# Crash Rate Benchmark Report\n\n");
            out.push_str(&rate_table_markdown(&report.rate_table));
            for table in &report.comparisons {
                out.push('\n');
                out.push_str(&comparison_markdown(table));
            }
            out.push('\n');
            out.push_str(&reductions_markdown(&report.reductions));
            vec![file("report.md", out)]
        }
        ReportFormat::Csv => vec![
            file("rates.csv", rate_table_csv(&report.rate_table)?),
            file("comparisons.csv", comparisons_csv(&report.comparisons)?),
            file("reductions.csv", reductions_csv(&report.reductions)?),
        ],
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            vec![file("report.json", text)]
        }
    })
}

fn confidence_pct(alpha: Probability) -> String {
    let level = ((1.0 - alpha.value()) * 100_000.0).round() / 1000.0;
    format!("{level}%")
}

/// One decimal, with `<0.1` for small positive values.
fn fmt_rate(x: f64) -> String {
    if x > 0.0 && x < 0.05 {
        "<0.1".to_string()
    } else {
        format!("{x:.1}")
    }
}

fn fmt_ratio(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.abs() < 0.01 {
        format!("{x:.3}")
    } else {
        format!("{x:.2}")
    }
}

fn fmt_ipmm(x: f64) -> String {
    format!("{x:.2}")
}

fn md_row(out: &mut String, cells: &[String]) {
    out.push('|');
    for c in cells {
        let _ = write!(out, " {} |", c.replace('|', "\\|"));
    }
    out.push('\n');
}

fn md_header(out: &mut String, cells: &[&str], numeric_from: usize) {
    md_row(out, &cells.iter().map(|c| c.to_string()).collect::<Vec<_>>());
    let rule: Vec<String> = (0..cells.len())
        .map(|i| {
            if i >= numeric_from {
                "---:".to_string()
            } else {
                "---".to_string()
            }
        })
        .collect();
    md_row(out, &rule);
}

/// Counts, rates and intervals with one column group per market.
pub fn rate_table_markdown(table: &RateTable) -> String {
    let level = confidence_pct(table.alpha);
    let mut out = format!("## Incidents per Million Miles ({level} confidence intervals)\n\n");
    let locations: Vec<_> = table.locations().collect();
    let mut header = vec!["Measure".to_string()];
    for loc in &locations {
        header.push(format!("{} n", loc.code()));
        header.push(format!("{} IPMM", loc.code()));
        header.push(format!("{} CI", loc.code()));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    md_header(&mut out, &header_refs, 1);

    let mut miles = vec!["Miles (millions)".to_string()];
    for e in &table.exposure {
        miles.extend([format!("{}", e.miles_millions), "-".into(), "-".into()]);
    }
    md_row(&mut out, &miles);
    for category in Category::ALL {
        let mut cells = vec![category.label().to_string()];
        for &loc in &locations {
            match table.get(loc, category) {
                Some(r) => cells.extend([
                    r.count.get().to_string(),
                    fmt_rate(r.point),
                    format!("({}, {})", fmt_rate(r.lower), fmt_rate(r.upper)),
                ]),
                None => cells.extend(["-".into(), "-".into(), "-".into()]),
            }
        }
        md_row(&mut out, &cells);
    }
    out
}

fn starred(row: &ComparisonRow) -> String {
    let v = fmt_ratio(row.ratio.point);
    if row.significant {
        format!("**{v}\\***")
    } else {
        v
    }
}

pub fn comparison_markdown(table: &ComparisonTable) -> String {
    let level = confidence_pct(table.alpha);
    let with_boot = table.rows.iter().any(|r| r.bootstrap.is_some());
    let mut out = format!("## {}\n\n", table.title);
    let mut header = vec![
        "Human Benchmark",
        "Location",
        "ADS Events",
        "Human IPMM",
        "ADS IPMM",
        "Rate Ratio",
        "Lower",
        "Upper",
    ];
    if with_boot {
        header.extend(["Bootstrap Lower", "Bootstrap Upper"]);
    }
    md_header(&mut out, &header, 2);
    for row in &table.rows {
        let mut cells = vec![
            format!("{} {}", row.benchmark.label, row.benchmark.outcome_group.label()),
            row.location_label.clone(),
            format!("{} ({})", row.ads_count.get(), row.ads_selection.key()),
            fmt_ipmm(row.benchmark.ipmm),
            fmt_rate(row.ads_ipmm),
            starred(row),
            fmt_ratio(row.ratio.lower),
            fmt_ratio(row.ratio.upper),
        ];
        if with_boot {
            match &row.bootstrap {
                Some(b) => cells.extend([fmt_ratio(b.lower), fmt_ratio(b.upper)]),
                None => cells.extend(["-".into(), "-".into()]),
            }
        }
        md_row(&mut out, &cells);
    }
    let _ = writeln!(
        out,
        "\nBounds are {level} confidence intervals; \\* marks ratios whose interval excludes 1."
    );
    out
}

pub fn reductions_markdown(points: &[ReductionPoint]) -> String {
    let mut out = String::from("## Percent Reduction\n\n");
    md_header(
        &mut out,
        &["Outcome", "Benchmark", "Location", "Reduction %", "Lower %", "Upper %"],
        3,
    );
    for p in points {
        let reduction = if p.significant {
            format!("**{:.1}\\***", p.reduction_pct)
        } else {
            format!("{:.1}", p.reduction_pct)
        };
        md_row(
            &mut out,
            &[
                p.outcome_group.label().to_string(),
                p.benchmark.clone(),
                p.location.clone(),
                reduction,
                format!("{:.1}", p.lower_pct),
                format!("{:.1}", p.upper_pct),
            ],
        );
    }
    out
}

fn finish(wtr: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = wtr.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn rate_table_csv(table: &RateTable) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "location",
        "category",
        "count",
        "miles_millions",
        "ipmm",
        "lower",
        "upper",
        "alpha",
    ])?;
    for r in &table.rows {
        let e = &r.estimate;
        wtr.write_record([
            r.location.code().to_string(),
            r.category.key().to_string(),
            e.count.get().to_string(),
            e.exposure.value().to_string(),
            e.point.to_string(),
            e.lower.to_string(),
            e.upper.to_string(),
            table.alpha.value().to_string(),
        ])?;
    }
    finish(wtr)
}

pub fn comparisons_csv(tables: &[ComparisonTable]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "table",
        "benchmark",
        "benchmark_label",
        "scope",
        "ads_selection",
        "ads_count",
        "ads_miles_millions",
        "ads_ipmm",
        "human_ipmm",
        "human_vmt_millions",
        "human_count",
        "ratio",
        "lower",
        "upper",
        "alpha",
        "significant",
        "bootstrap_lower",
        "bootstrap_upper",
    ])?;
    for t in tables {
        for r in &t.rows {
            let (bl, bu) = match &r.bootstrap {
                Some(b) => (b.lower.to_string(), b.upper.to_string()),
                None => (String::new(), String::new()),
            };
            wtr.write_record([
                t.id.clone(),
                r.benchmark.key().to_string(),
                r.benchmark.label.clone(),
                r.scope.key().to_string(),
                r.ads_selection.key().to_string(),
                r.ads_count.get().to_string(),
                r.ads_miles_millions.to_string(),
                r.ads_ipmm.to_string(),
                r.benchmark.ipmm.to_string(),
                r.benchmark.vmt_millions.to_string(),
                r.benchmark_count.get().to_string(),
                r.ratio.point.to_string(),
                r.ratio.lower.to_string(),
                r.ratio.upper.to_string(),
                t.alpha.value().to_string(),
                r.significant.to_string(),
                bl,
                bu,
            ])?;
        }
    }
    finish(wtr)
}

/// Plot data: x is the location, y the percent reduction, lo/hi its interval.
pub fn reductions_csv(points: &[ReductionPoint]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["outcome_group", "benchmark", "x", "y", "lo", "hi", "significant"])?;
    for p in points {
        wtr.write_record([
            p.outcome_group.key().to_string(),
            p.benchmark.clone(),
            p.location.clone(),
            p.reduction_pct.to_string(),
            p.lower_pct.to_string(),
            p.upper_pct.to_string(),
            p.significant.to_string(),
        ])?;
    }
    finish(wtr)
}
