use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::svg::{bar_chart, line_chart, Series};
use super::{DeltaRow, EvalError, EvaluationReport, LearningCurve};
use crate::classifiers::ClassifierKind;
use crate::lexicon::SenseType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" => Ok(ReportFormat::Svg),
            _ => Err(format!(
                "unknown report format {s:?} (expected csv, json or svg)"
            )),
        }
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ReportItem<'a> {
    Evaluation(&'a EvaluationReport),
    Curve(&'a LearningCurve),
    Delta(&'a [DeltaRow]),
}

fn hundredths_of_percent(fraction: f64) -> i64 {
    (fraction * 10_000.0).round() as i64
}

fn format_hundredths(v: i64) -> String {
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    format!("{sign}{}.{:02}", a / 100, a % 100)
}

/// A [0, 1] accuracy as a percentage with two decimals.
pub fn percent(fraction: f64) -> String {
    format_hundredths(hundredths_of_percent(fraction))
}

fn sense_header(first: &[&str]) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain(SenseType::ALL.iter().map(|s| s.name().to_owned()))
        .collect()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, EvalError> {
    let bytes = w.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// `kind,before,after,delta` in percent. The delta is the difference of the
/// two rounded columns, so the printed row is always self-consistent.
pub fn delta_csv(rows: &[DeltaRow]) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "before", "after", "delta"])?;
    for r in rows {
        let (b, a) = (
            hundredths_of_percent(r.before),
            hundredths_of_percent(r.after),
        );
        w.write_record([
            r.kind.name(),
            &format_hundredths(b),
            &format_hundredths(a),
            &format_hundredths(a - b),
        ])?;
    }
    finish(w)
}

/// `kind,overall,<sense>...` with one row per evaluated kind.
pub fn evaluation_csv(report: &EvaluationReport) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(sense_header(&["kind", "overall"]))?;
    let mut kinds: Vec<ClassifierKind> = report
        .overall
        .keys()
        .chain(report.per_sense.keys())
        .copied()
        .collect();
    kinds.sort();
    kinds.dedup();
    for kind in kinds {
        let mut rec = vec![kind.name().to_owned()];
        rec.push(
            report
                .overall
                .get(&kind)
                .map(|a| percent(a.accuracy))
                .unwrap_or_default(),
        );
        let cells = report.per_sense.get(&kind);
        for s in SenseType::ALL {
            rec.push(
                cells
                    .and_then(|c| c.get(&s))
                    .map(|a| percent(a.accuracy))
                    .unwrap_or_default(),
            );
        }
        w.write_record(&rec)?;
    }
    finish(w)
}

/// `size,<sense>...` with one row per training size.
pub fn curve_csv(curve: &LearningCurve) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(
        ["size".to_owned()]
            .into_iter()
            .chain(curve.senses.iter().map(|s| s.name().to_owned())),
    )?;
    for (size, row) in curve.sizes.iter().zip(&curve.accuracy) {
        let rec: Vec<String> = std::iter::once(size.to_string())
            .chain(row.iter().map(|&v| percent(v)))
            .collect();
        w.write_record(&rec)?;
    }
    finish(w)
}

fn render_json(item: ReportItem<'_>) -> Result<String, EvalError> {
    let mut s = match item {
        ReportItem::Evaluation(r) => serde_json::to_string_pretty(r)?,
        ReportItem::Curve(c) => serde_json::to_string_pretty(c)?,
        ReportItem::Delta(d) => serde_json::to_string_pretty(d)?,
    };
    s.push('\n');
    Ok(s)
}

fn render_svg(item: ReportItem<'_>) -> String {
    match item {
        ReportItem::Evaluation(r) if !r.per_sense.is_empty() => {
            let groups: Vec<String> = SenseType::ALL.iter().map(|s| s.name().to_owned()).collect();
            let series = r
                .per_sense
                .iter()
                .map(|(k, cells)| Series {
                    name: k.name().to_owned(),
                    values: SenseType::ALL
                        .iter()
                        .map(|s| cells.get(s).map_or(0.0, |a| a.accuracy))
                        .collect(),
                })
                .collect();
            bar_chart("One-vs-all accuracy per sense type", &groups, series)
        }
        ReportItem::Evaluation(r) => {
            let groups: Vec<String> = r.overall.keys().map(|k| k.name().to_owned()).collect();
            let values = r.overall.values().map(|a| a.accuracy).collect();
            bar_chart(
                "Overall accuracy",
                &groups,
                vec![Series {
                    name: "overall".into(),
                    values,
                }],
            )
        }
        ReportItem::Delta(rows) => {
            let groups: Vec<String> = rows.iter().map(|r| r.kind.name().to_owned()).collect();
            let series = vec![
                Series {
                    name: "before".into(),
                    values: rows.iter().map(|r| r.before).collect(),
                },
                Series {
                    name: "after".into(),
                    values: rows.iter().map(|r| r.after).collect(),
                },
            ];
            bar_chart(
                "Overall accuracy before and after segmentation",
                &groups,
                series,
            )
        }
        ReportItem::Curve(c) => {
            let series = c
                .senses
                .iter()
                .enumerate()
                .map(|(j, s)| Series {
                    name: s.name().to_owned(),
                    values: c.accuracy.iter().map(|row| row[j]).collect(),
                })
                .collect();
            line_chart(
                &format!("{} accuracy by training size", c.kind),
                &c.sizes,
                series,
            )
        }
    }
}

/// Renders a report item in the requested format.
pub fn render(item: ReportItem<'_>, format: ReportFormat) -> Result<String, EvalError> {
    match format {
        ReportFormat::Json => render_json(item),
        ReportFormat::Svg => Ok(render_svg(item)),
        ReportFormat::Csv => match item {
            ReportItem::Evaluation(r) => evaluation_csv(r),
            ReportItem::Curve(c) => curve_csv(c),
            ReportItem::Delta(d) => delta_csv(d),
        },
    }
}

/// Writes a report item to `path`.
pub fn emit_report(
    item: ReportItem<'_>,
    format: ReportFormat,
    path: &Path,
) -> Result<(), EvalError> {
    let text = render(item, format)?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}
