//! Report files and confusion-matrix plots.
//!
//! CSV layout: header `label,support,precision,recall,f1,<label 0>,...`; one
//! row per true class with its confusion counts in the trailing columns, then
//! `accuracy`, `macro_avg` and `weighted_avg` summary rows with those columns
//! left empty.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{ConfusionMatrix, MetricReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `.json` means JSON; anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    #[serde(flatten)]
    report: &'a MetricReport,
    confusion: &'a ConfusionMatrix,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn to_csv(report: &MetricReport, cm: &ConfusionMatrix) -> std::result::Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "label".to_string(),
        "support".into(),
        "precision".into(),
        "recall".into(),
        "f1".into(),
    ];
    header.extend(cm.labels.iter().cloned());
    w.write_record(&header)?;
    for i in 0..cm.n {
        let mut row = vec![
            cm.labels[i].clone(),
            report.support[i].to_string(),
            report.precision[i].to_string(),
            report.recall[i].to_string(),
            report.f1[i].to_string(),
        ];
        row.extend(cm.counts[i].iter().map(u64::to_string));
        w.write_record(&row)?;
    }
    let total = cm.total().to_string();
    let blank = vec![String::new(); cm.n];
    for (name, p, r, f) in [
        ("accuracy", String::new(), String::new(), report.accuracy.to_string()),
        (
            "macro_avg",
            report.macro_precision.to_string(),
            report.macro_recall.to_string(),
            report.macro_f1.to_string(),
        ),
        (
            "weighted_avg",
            report.weighted_precision.to_string(),
            report.weighted_recall.to_string(),
            report.weighted_f1.to_string(),
        ),
    ] {
        let mut row = vec![name.to_string(), total.clone(), p, r, f];
        row.extend(blank.iter().cloned());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn export_report(
    report: &MetricReport,
    cm: &ConfusionMatrix,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    if report.support.len() != cm.n {
        return Err(Error::shape("export_report", &[report.support.len()], &[cm.n]));
    }
    let bytes = match format {
        ReportFormat::Json => {
            let mut b = serde_json::to_vec_pretty(&JsonReport { report, confusion: cm })?;
            b.push(b'\n');
            b
        }
        ReportFormat::Csv => to_csv(report, cm).map_err(|e| csv_err(path, e))?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads the confusion counts and labels back from a CSV report.
pub fn read_confusion_csv(path: impl AsRef<Path>) -> Result<ConfusionMatrix> {
    let path = path.as_ref();
    let malformed = |what: String| Error::InvalidConfig(format!("{}: {what}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let n = header
        .len()
        .checked_sub(5)
        .ok_or_else(|| malformed("too few columns".into()))?;
    let mut counts = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for record in r.records().take(n) {
        let record = record.map_err(|e| csv_err(path, e))?;
        labels.push(record[0].to_string());
        let row = (5..5 + n)
            .map(|j| record[j].parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| malformed(format!("row {:?}: {e}", &record[0])))?;
        counts.push(row);
    }
    if counts.len() != n {
        return Err(malformed(format!("{} class rows for {n} columns", counts.len())));
    }
    ConfusionMatrix::from_counts(counts)?.with_labels(labels)
}

/// 3x5 digit glyphs, rows top to bottom, bit 2 leftmost.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

const CELL: usize = 10;
const MARGIN: usize = 12;

struct Canvas {
    w: usize,
    h: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn new(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            rgb: vec![255; w * h * 3],
        }
    }

    fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        if x < self.w && y < self.h {
            let i = (y * self.w + x) * 3;
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    fn number(&mut self, x: usize, y: usize, value: usize) {
        for (k, ch) in value.to_string().bytes().enumerate() {
            let glyph = DIGITS[(ch - b'0') as usize];
            for (dy, bits) in glyph.iter().enumerate() {
                for dx in 0..3 {
                    if bits >> (2 - dx) & 1 == 1 {
                        self.set(x + k * 4 + dx, y + dy, [0, 0, 0]);
                    }
                }
            }
        }
    }
}

/// Row-normalized heatmap, white (0) to dark blue (1), with class indices
/// along both axes.
fn heatmap(cm: &ConfusionMatrix) -> Vec<u8> {
    let side = MARGIN + cm.n * CELL;
    let mut canvas = Canvas::new(side, side);
    for (t, (row, total)) in cm.counts.iter().zip(cm.row_sums()).enumerate() {
        for (p, &count) in row.iter().enumerate() {
            let v = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            let shade = |lo: f64| (255.0 - v * (255.0 - lo)).round() as u8;
            let color = [shade(8.0), shade(48.0), shade(107.0)];
            for dy in 0..CELL - 1 {
                for dx in 0..CELL - 1 {
                    canvas.set(MARGIN + p * CELL + dx, MARGIN + t * CELL + dy, color);
                }
            }
        }
        if cm.n <= 100 {
            canvas.number(MARGIN + t * CELL + 1, 3, t);
            canvas.number(1, MARGIN + t * CELL + 2, t);
        }
    }
    let mut out = format!("P6\n{} {}\n255\n", canvas.w, canvas.h).into_bytes();
    out.extend_from_slice(&canvas.rgb);
    out
}

fn text_grid(cm: &ConfusionMatrix) -> String {
    let width = cm
        .counts
        .iter()
        .flatten()
        .map(|c| c.to_string().len())
        .max()
        .unwrap_or(1)
        .max(cm.n.to_string().len());
    let mut s = String::new();
    for (i, label) in cm.labels.iter().enumerate() {
        let _ = writeln!(s, "{i:>width$}  {label}");
    }
    s.push('\n');
    let _ = write!(s, "{:>width$}", "");
    for p in 0..cm.n {
        let _ = write!(s, " {p:>width$}");
    }
    s.push('\n');
    for (t, row) in cm.counts.iter().enumerate() {
        let _ = write!(s, "{t:>width$}");
        for c in row {
            let _ = write!(s, " {c:>width$}");
        }
        s.push('\n');
    }
    s
}

/// Writes a text grid for `.txt` paths and a binary PPM heatmap otherwise.
pub fn render_confusion_plot(cm: &ConfusionMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("txt") => text_grid(cm).into_bytes(),
        _ => heatmap(cm),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{confusion, report};

    fn sample() -> ConfusionMatrix {
        confusion(&[0, 1, 1, 2, 2, 0], &[0, 1, 0, 2, 2, 1], 3)
            .unwrap()
            .with_labels(vec!["oak".into(), "felt, wool".into(), "steel".into()])
            .unwrap()
    }

    #[test]
    fn csv_counts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cm = sample();
        let path = dir.path().join("r.csv");
        export_report(&report(&cm).unwrap(), &cm, &path, ReportFormat::Csv).unwrap();
        assert_eq!(read_confusion_csv(&path).unwrap(), cm);
    }

    #[test]
    fn json_has_averages() {
        let dir = tempfile::tempdir().unwrap();
        let cm = sample();
        let path = dir.path().join("r.json");
        export_report(&report(&cm).unwrap(), &cm, &path, ReportFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        assert!(v["macro_f1"].is_number() && v["weighted_f1"].is_number());
        assert_eq!(v["confusion"]["counts"][2][2], 2);
    }

    #[test]
    fn plots_render() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<usize> = (0..59).collect();
        let cm = confusion(&labels, &labels, 59).unwrap();
        let ppm = dir.path().join("cm.ppm");
        render_confusion_plot(&cm, &ppm).unwrap();
        let bytes = fs::read(&ppm).unwrap();
        let side = MARGIN + 59 * CELL;
        assert!(bytes.starts_with(format!("P6\n{side} {side}\n255\n").as_bytes()));
        let txt = dir.path().join("cm.txt");
        render_confusion_plot(&sample(), &txt).unwrap();
        assert!(fs::read_to_string(&txt).unwrap().contains("felt, wool"));
        assert!(render_confusion_plot(&cm, dir.path().join("missing/cm.ppm")).is_err());
    }
}
