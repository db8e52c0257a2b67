//! Confusion matrices, precision/recall/F1 reports, family-level regrouping and
//! the inference benchmark.

mod bench;
mod export;

pub use bench::{benchmark, benchmark_parallel, BenchMode, BenchResult};
pub use export::{export_report, read_confusion_csv, render_confusion_plot, ReportFormat};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{Granularity, Grouping, Taxonomy};

/// Published reference figures for the full 59-class task. They describe
/// other hardware and another dataset and are printed for context only.
pub mod reference {
    pub const ACCURACY: f64 = 0.9505;
    pub const MACRO_F1: f64 = 0.951;
    pub const WEIGHTED_F1: f64 = 0.951;
    /// Nine-family recall: every family at least this...
    pub const NINE_FAMILY_MIN_RECALL: f64 = 0.92;
    /// ...and most families above this.
    pub const NINE_FAMILY_TYPICAL_RECALL: f64 = 0.98;
    pub const SECONDS_PER_SAMPLE: f64 = 0.00339;
    pub const IMAGES_PER_SECOND: f64 = 295.0;
    pub const PARAMETERS: usize = 341_307;
}

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n: usize,
    pub counts: Vec<Vec<u64>>,
    pub labels: Vec<String>,
}

impl ConfusionMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            counts: vec![vec![0; n]; n],
            labels: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if let Some(row) = counts.iter().find(|r| r.len() != n) {
            return Err(Error::InvalidShape(format!(
                "confusion row of length {} in a {n}x{n} matrix",
                row.len()
            )));
        }
        Ok(Self {
            counts,
            ..Self::zeros(n)
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::shape("confusion labels", &[labels.len()], &[self.n]));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.n).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// `trace / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], n: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::shape("confusion", &[preds.len()], &[labels.len()]));
    }
    let mut cm = ConfusionMatrix::zeros(n);
    for (&p, &t) in preds.iter().zip(labels) {
        if let Some(&label) = [p, t].iter().find(|&&v| v >= n) {
            return Err(Error::LabelOutOfRange { label, classes: n });
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<u64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

impl MetricReport {
    /// Classes with at least one true sample.
    pub fn present_classes(&self) -> Vec<usize> {
        (0..self.support.len()).filter(|&i| self.support[i] > 0).collect()
    }

    /// Mean F1 over `classes` only. Useful when a wide model is evaluated on
    /// a subset of its classes; predictions outside the subset still count
    /// against recall.
    pub fn macro_f1_over(&self, classes: &[usize]) -> f64 {
        let picked: Vec<f64> = classes.iter().filter_map(|&i| self.f1.get(i).copied()).collect();
        mean(&picked)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn weighted_mean(v: &[f64], w: &[u64], total: u64) -> f64 {
    v.iter().zip(w).map(|(x, &s)| x * s as f64).sum::<f64>() / total as f64
}

/// Per-class and averaged scores. A score whose denominator is zero is 0 and
/// still counts towards the macro mean.
pub fn report(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let support = cm.row_sums();
    let predicted = cm.col_sums();
    let mut precision = Vec::with_capacity(cm.n);
    let mut recall = Vec::with_capacity(cm.n);
    let mut f1 = Vec::with_capacity(cm.n);
    for i in 0..cm.n {
        let tp = cm.counts[i][i];
        let p = ratio(tp, predicted[i]);
        let r = ratio(tp, support[i]);
        precision.push(p);
        recall.push(r);
        // 2PR/(P+R) == 2tp/(support+predicted); the count form is exact
        f1.push(ratio(2 * tp, support[i] + predicted[i]));
    }
    Ok(MetricReport {
        accuracy: cm.accuracy(),
        macro_precision: mean(&precision),
        macro_recall: mean(&recall),
        macro_f1: mean(&f1),
        weighted_precision: weighted_mean(&precision, &support, total),
        weighted_recall: weighted_mean(&recall, &support, total),
        weighted_f1: weighted_mean(&f1, &support, total),
        precision,
        recall,
        f1,
        support,
    })
}

/// Sums the blocks of `cm` that fall into the same groups.
pub fn group_confusion_with(cm: &ConfusionMatrix, grouping: &Grouping) -> Result<ConfusionMatrix> {
    if cm.n != grouping.classes() {
        return Err(Error::shape("group_confusion", &[cm.n], &[grouping.classes()]));
    }
    let mut out = ConfusionMatrix::zeros(grouping.groups()).with_labels(grouping.names.clone())?;
    for (t, row) in cm.counts.iter().enumerate() {
        for (p, &c) in row.iter().enumerate() {
            out.counts[grouping.map[t]][grouping.map[p]] += c;
        }
    }
    Ok(out)
}

pub fn group_confusion(cm: &ConfusionMatrix, taxonomy: &Taxonomy, granularity: Granularity) -> Result<ConfusionMatrix> {
    group_confusion_with(cm, &taxonomy.grouping(granularity))
}

/// Result of comparing the two ways of computing a grouped confusion matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceCheck {
    /// `(true group, predicted group, via block sums, via mapped labels)`
    pub diff: Vec<(usize, usize, u64, u64)>,
}

impl EquivalenceCheck {
    pub fn passed(&self) -> bool {
        self.diff.is_empty()
    }
}

/// Checks that grouping a fine confusion matrix equals the confusion matrix of
/// the group-mapped predictions and labels.
pub fn grouped_equivalence_check_with(
    preds: &[usize],
    labels: &[usize],
    grouping: &Grouping,
) -> Result<EquivalenceCheck> {
    let fine = confusion(preds, labels, grouping.classes())?;
    let by_blocks = group_confusion_with(&fine, grouping)?;
    let map = |v: &[usize]| v.iter().map(|&c| grouping.map[c]).collect::<Vec<_>>();
    let by_labels = confusion(&map(preds), &map(labels), grouping.groups())?;
    let mut diff = Vec::new();
    for t in 0..by_blocks.n {
        for p in 0..by_blocks.n {
            let (a, b) = (by_blocks.counts[t][p], by_labels.counts[t][p]);
            if a != b {
                diff.push((t, p, a, b));
            }
        }
    }
    Ok(EquivalenceCheck { diff })
}

pub fn grouped_equivalence_check(
    preds: &[usize],
    labels: &[usize],
    taxonomy: &Taxonomy,
    granularity: Granularity,
) -> Result<EquivalenceCheck> {
    grouped_equivalence_check_with(preds, labels, &taxonomy.grouping(granularity))
}
