//! Accuracy, weighted-average accuracy, confusion matrices and the report
//! files written after a run.

mod report;

pub use report::{
    emit_report, format_table, ClientResult, MetricsReport, RegimeResult, ReportMetadata,
    StageResult, TaskResult, WeightedAccuracy, Weighting, SUMMARY_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Task;

/// Fraction of exact matches.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Metrics(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Metrics("accuracy of an empty set".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `sum acc * n / sum n` over `(acc, n)` entries.
pub fn weighted_average_accuracy(entries: &[(f64, usize)]) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::Metrics("weighted average of no entries".into()));
    }
    if entries.iter().any(|&(_, n)| n == 0) {
        return Err(Error::Metrics("weight n must be at least 1".into()));
    }
    let num: f64 = entries.iter().map(|&(a, n)| a * n as f64).sum();
    let den: f64 = entries.iter().map(|&(_, n)| n as f64).sum();
    Ok(num / den)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub task: Task,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::Metrics("accuracy of an empty confusion matrix".into())),
            t => Ok(self.trace() as f64 / t as f64),
        }
    }
}

pub fn confusion(task: Task, predictions: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::Metrics("predictions and labels differ in length".into()));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= classes || l >= classes {
            return Err(Error::Metrics(format!("class index {} out of range for {classes} classes", p.max(l))));
        }
        counts[l][p] += 1;
    }
    Ok(ConfusionMatrix { task, counts })
}
