//! Accuracy metrics, top-N confusion matrices and output artifacts: top-N and
//! raw probability CSVs, SVG heat maps and timestamped file names.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::dataset::CategoryTaxonomy;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{truths} truths but {predictions} predictions")]
    LengthMismatch { truths: usize, predictions: usize },
    #[error("top-N level {0} is out of range")]
    InvalidN(usize),
    #[error("nothing to write")]
    EmptyRows,
    #[error("label {0:?} is not on the matrix axis")]
    UnknownLabel(String),
    #[error("cannot write {path}: {source}")]
    UnwritablePath { path: PathBuf, source: io::Error },
    #[error("csv encoding failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Category/score pairs, best first.
pub type Ranked = Vec<(String, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub file: String,
    pub page: u32,
    pub ranked: Ranked,
}

fn check_lengths<S>(truths: &[S], predictions: &[Ranked], n: usize) -> Result<(), ReportError> {
    if truths.len() != predictions.len() {
        return Err(ReportError::LengthMismatch {
            truths: truths.len(),
            predictions: predictions.len(),
        });
    }
    if n == 0 {
        return Err(ReportError::InvalidN(n));
    }
    Ok(())
}

fn in_top<S: AsRef<str>>(truth: &S, ranked: &Ranked, n: usize) -> bool {
    ranked.iter().take(n).any(|(l, _)| l == truth.as_ref())
}

/// Fraction of samples whose truth is among the first `n` predictions.
/// Empty input scores 0.
pub fn topn_accuracy<S: AsRef<str>>(truths: &[S], predictions: &[Ranked], n: usize) -> Result<f64, ReportError> {
    check_lengths(truths, predictions, n)?;
    if truths.is_empty() {
        return Ok(0.0);
    }
    let hits = truths
        .iter()
        .zip(predictions)
        .filter(|(t, p)| in_top(*t, p, n))
        .count();
    Ok(hits as f64 / truths.len() as f64)
}

/// Rows are true categories, columns predicted ones, both in `labels` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<u64>,
    n: usize,
}

impl ConfusionMatrix {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k() + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.k().max(1)).map(|r| r.iter().sum()).collect()
    }

    /// Row-normalized fractions; empty rows stay zero.
    pub fn normalized(&self) -> Vec<f64> {
        let k = self.k();
        let sums = self.row_sums();
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| match sums[i / k] {
                0 => 0.0,
                s => c as f64 / s as f64,
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, ReportError> {
        let mut w = csv_writer();
        let mut header = vec!["TRUE\\PRED".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut rec = vec![label.clone()];
            rec.extend((0..self.k()).map(|j| self.get(i, j).to_string()));
            w.write_record(&rec)?;
        }
        finish(w)
    }
}

/// Labels for a matrix axis: every taxonomy label that occurs among the truths
/// or top-1 predictions, in taxonomy order, then any foreign labels sorted.
pub fn matrix_axis<S: AsRef<str>>(taxonomy: &CategoryTaxonomy, truths: &[S], predictions: &[Ranked]) -> Vec<String> {
    let mut present: Vec<&str> = truths.iter().map(|t| t.as_ref()).collect();
    present.extend(predictions.iter().filter_map(|p| p.first().map(|(l, _)| l.as_str())));
    let mut axis: Vec<String> = taxonomy
        .labels()
        .filter(|l| present.contains(l))
        .map(str::to_string)
        .collect();
    let mut extra: Vec<&str> = present.into_iter().filter(|l| !taxonomy.contains(l)).collect();
    extra.sort_unstable();
    extra.dedup();
    axis.extend(extra.into_iter().map(str::to_string));
    axis
}

/// Top-N confusion matrix. A sample counts on the diagonal when its truth is
/// within the first `n` predictions, otherwise in the cell of its top-1
/// prediction, so row sums always equal truth counts.
pub fn confusion_matrix<S: AsRef<str>>(
    truths: &[S],
    predictions: &[Ranked],
    n: usize,
    labels: &[String],
) -> Result<ConfusionMatrix, ReportError> {
    check_lengths(truths, predictions, n)?;
    let k = labels.len();
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let find = |l: &str| index.get(l).copied().ok_or_else(|| ReportError::UnknownLabel(l.to_string()));
    let mut counts = vec![0u64; k * k];
    for (t, ranked) in truths.iter().zip(predictions) {
        let ti = find(t.as_ref())?;
        let pi = if in_top(t, ranked, n) {
            ti
        } else {
            let top = ranked.first().ok_or(ReportError::InvalidN(n))?;
            find(&top.0)?
        };
        counts[ti * k + pi] += 1;
    }
    Ok(ConfusionMatrix {
        labels: labels.to_vec(),
        counts,
        n,
    })
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, ReportError> {
    w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))
}

/// Rows ordered by file, then numeric page; identical keys fall back to the
/// ranked content so the output never depends on input order.
fn sorted_rows(rows: &[PredictionRow]) -> Vec<&PredictionRow> {
    let mut sorted: Vec<&PredictionRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.file.cmp(&b.file).then(a.page.cmp(&b.page)).then_with(|| {
            let key = |r: &PredictionRow| -> Vec<(String, u64)> {
                r.ranked.iter().map(|(l, s)| (l.clone(), s.to_bits())).collect()
            };
            key(a).cmp(&key(b))
        })
    });
    sorted
}

pub fn topn_csv(rows: &[PredictionRow], n: usize) -> Result<Vec<u8>, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyRows);
    }
    if n == 0 || rows.iter().any(|r| r.ranked.len() < n) {
        return Err(ReportError::InvalidN(n));
    }
    let mut w = csv_writer();
    let mut header = vec!["FILE".to_string(), "PAGE".to_string()];
    for i in 1..=n {
        header.push(format!("CLASS-{i}"));
        header.push(format!("SCORE-{i}"));
    }
    w.write_record(&header)?;
    for row in sorted_rows(rows) {
        let mut rec = vec![row.file.clone(), row.page.to_string()];
        for (label, score) in &row.ranked[..n] {
            rec.push(label.clone());
            rec.push(format!("{score:.4}"));
        }
        w.write_record(&rec)?;
    }
    finish(w)
}

/// One probability column per entry of `columns`; categories a row does not
/// mention score 0.
pub fn raw_csv(rows: &[PredictionRow], columns: &[String]) -> Result<Vec<u8>, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyRows);
    }
    let mut w = csv_writer();
    let mut header = vec!["FILE".to_string(), "PAGE".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for row in sorted_rows(rows) {
        let mut rec = vec![row.file.clone(), row.page.to_string()];
        for c in columns {
            let p = row.ranked.iter().find(|(l, _)| l == c).map_or(0.0, |x| x.1);
            rec.push(format!("{p:.6}"));
        }
        w.write_record(&rec)?;
    }
    finish(w)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    fs::write(path, bytes).map_err(|source| ReportError::UnwritablePath {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_topn_csv(rows: &[PredictionRow], n: usize, path: &Path) -> Result<(), ReportError> {
    write_bytes(path, &topn_csv(rows, n)?)
}

pub fn write_raw_csv(rows: &[PredictionRow], columns: &[String], path: &Path) -> Result<(), ReportError> {
    write_bytes(path, &raw_csv(rows, columns)?)
}

pub fn write_confusion_csv(matrix: &ConfusionMatrix, path: &Path) -> Result<(), ReportError> {
    write_bytes(path, &matrix.to_csv()?)
}

const CELL: usize = 44;
const LABEL_GUTTER: usize = 90;
const TITLE_BAND: usize = 40;
const LOW: [f64; 3] = [255.0, 255.0, 255.0];
const HIGH: [f64; 3] = [8.0, 48.0, 107.0];

fn shade(t: f64) -> String {
    let c: Vec<u8> = LOW
        .iter()
        .zip(HIGH)
        .map(|(lo, hi)| (lo + (hi - lo) * t).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Heat map with one `<rect class="cell">` per matrix cell. Colour is the
/// cell value over the matrix maximum (row fractions when `normalized`).
pub fn render_confusion_svg(matrix: &ConfusionMatrix, title: &str, normalized: bool) -> String {
    let k = matrix.k();
    let values: Vec<f64> = if normalized {
        matrix.normalized()
    } else {
        matrix.counts.iter().map(|&c| c as f64).collect()
    };
    let max = values.iter().copied().fold(0.0, f64::max);
    let grid_x = LABEL_GUTTER;
    let grid_y = TITLE_BAND + LABEL_GUTTER;
    let width = grid_x + k * CELL + 20;
    let height = grid_y + k * CELL + 40;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r#"<text class="title" x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
        width / 2,
        escape(title)
    );
    for (i, label) in matrix.labels.iter().enumerate() {
        let centre = i * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text class="row-label" x="{}" y="{}" font-size="11" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            grid_x - 6,
            grid_y + centre,
            escape(label)
        );
        let (cx, cy) = (grid_x + centre, grid_y - 6);
        let _ = writeln!(
            s,
            r#"<text class="col-label" x="{cx}" y="{cy}" font-size="11" transform="rotate(-60 {cx} {cy})">{}</text>"#,
            escape(label)
        );
    }
    for t in 0..k {
        for p in 0..k {
            let v = values[t * k + p];
            let level = if max > 0.0 { v / max } else { 0.0 };
            let (x, y) = (grid_x + p * CELL, grid_y + t * CELL);
            let _ = writeln!(
                s,
                r##"<rect class="cell" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="#cccccc"/>"##,
                shade(level)
            );
            let text = if normalized {
                format!("{v:.2}")
            } else {
                matrix.get(t, p).to_string()
            };
            let ink = if level > 0.5 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="11" text-anchor="middle" dominant-baseline="middle" fill="{ink}">{text}</text>"#,
                x + CELL / 2,
                y + CELL / 2
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">predicted</text>"#,
        grid_x + k * CELL / 2,
        height - 12
    );
    s.push_str("</svg>\n");
    s
}

pub fn write_confusion_svg(matrix: &ConfusionMatrix, title: &str, normalized: bool, path: &Path) -> Result<(), ReportError> {
    write_bytes(path, render_confusion_svg(matrix, title, normalized).as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    TopN,
    Raw,
    ConfusionSvg,
    ConfusionCsv,
    Summary,
}

impl OutputKind {
    pub fn prefix(self) -> &'static str {
        match self {
            OutputKind::TopN => "topn",
            OutputKind::Raw => "raw",
            OutputKind::ConfusionSvg | OutputKind::ConfusionCsv => "confmat",
            OutputKind::Summary => "summary",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            OutputKind::TopN | OutputKind::Raw | OutputKind::ConfusionCsv => "csv",
            OutputKind::ConfusionSvg => "svg",
            OutputKind::Summary => "txt",
        }
    }
}

/// `<kind>_<model_id>_<yyyymmdd-HHMMSS>.<ext>` in UTC.
pub fn output_name(kind: OutputKind, model_id: &str, timestamp: DateTime<Utc>) -> String {
    format!(
        "{}_{}_{}.{}",
        kind.prefix(),
        model_id,
        timestamp.format("%Y%m%d-%H%M%S"),
        kind.extension()
    )
}

/// Overall top-1..top-N accuracy plus per-category top-1 accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracySummary {
    pub samples: usize,
    /// Entry `i` is top-(i+1) accuracy.
    pub topn: Vec<f64>,
    /// (category, samples, top-1 accuracy) in axis order.
    pub per_category: Vec<(String, usize, f64)>,
}

pub fn accuracy_summary<S: AsRef<str>>(
    truths: &[S],
    predictions: &[Ranked],
    max_n: usize,
    labels: &[String],
) -> Result<AccuracySummary, ReportError> {
    check_lengths(truths, predictions, max_n)?;
    let topn = (1..=max_n)
        .map(|n| topn_accuracy(truths, predictions, n))
        .collect::<Result<Vec<_>, _>>()?;
    let per_category = labels
        .iter()
        .filter_map(|label| {
            let idx: Vec<usize> = (0..truths.len()).filter(|&i| truths[i].as_ref() == label).collect();
            if idx.is_empty() {
                return None;
            }
            let hits = idx.iter().filter(|&&i| in_top(&truths[i], &predictions[i], 1)).count();
            Some((label.clone(), idx.len(), hits as f64 / idx.len() as f64))
        })
        .collect();
    Ok(AccuracySummary {
        samples: truths.len(),
        topn,
        per_category,
    })
}

impl AccuracySummary {
    pub fn render(&self, model_id: &str) -> String {
        let mut s = format!("model: {model_id}\nsamples: {}\n", self.samples);
        for (i, a) in self.topn.iter().enumerate() {
            let _ = writeln!(s, "top-{} accuracy: {a:.4}", i + 1);
        }
        s.push_str("per-category top-1 accuracy:\n");
        for (label, count, a) in &self.per_category {
            let _ = writeln!(s, "  {label}: {a:.4} ({count} samples)");
        }
        s
    }
}
