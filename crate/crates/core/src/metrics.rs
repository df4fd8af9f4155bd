//! Evaluation metrics.

use crate::error::{Error, Result};
use crate::task::TaskSpec;

fn check_pair(preds: &[usize], labels: &[usize]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::Config("metrics need at least one prediction".into()));
    }
    if preds.len() != labels.len() {
        return Err(Error::Dimension {
            layer: "predictions".into(),
            expected: labels.len(),
            got: preds.len(),
        });
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_pair(preds, labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Mean absolute and mean squared rank error.
pub fn mae_mse(preds: &[usize], labels: &[usize]) -> Result<(f64, f64)> {
    check_pair(preds, labels)?;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (&p, &y) in preds.iter().zip(labels) {
        let d = p.abs_diff(y) as f64;
        abs += d;
        sq += d * d;
    }
    let n = preds.len() as f64;
    Ok((abs / n, sq / n))
}

/// `CS(i)` for `i = 0..K-1`: fraction of samples with `|p - y| <= i`.
pub fn cumulative_score(preds: &[usize], labels: &[usize], ranks: usize) -> Result<Vec<f64>> {
    check_pair(preds, labels)?;
    if let Some(&v) = preds.iter().chain(labels).find(|&&v| v < 1 || v > ranks) {
        return Err(Error::Config(format!("rank {v} outside [1, {ranks}]")));
    }
    let mut counts = vec![0usize; ranks];
    for (&p, &y) in preds.iter().zip(labels) {
        counts[p.abs_diff(y)] += 1;
    }
    let n = preds.len() as f64;
    let mut acc = 0;
    Ok(counts
        .into_iter()
        .map(|c| {
            acc += c;
            acc as f64 / n
        })
        .collect())
}

/// Row = true label, column = prediction. Values must lie in `0..num_classes`.
pub fn confusion_matrix(
    preds: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Vec<u64>>> {
    check_pair(preds, labels)?;
    let mut m = vec![vec![0u64; num_classes]; num_classes];
    for (row, (&p, &y)) in preds.iter().zip(labels).enumerate() {
        if p >= num_classes || y >= num_classes {
            return Err(Error::LabelOutOfRange {
                row,
                label: p.max(y) as i64,
            });
        }
        m[y][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalMetrics {
    pub mae: f64,
    pub mse: f64,
    pub cs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskMetrics {
    pub name: String,
    pub accuracy: f64,
    pub ordinal: Option<OrdinalMetrics>,
    /// Indexed from the task's smallest label (rank 1 is row 0).
    pub confusion: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub samples: usize,
    pub tasks: Vec<TaskMetrics>,
}

pub fn task_metrics(spec: &TaskSpec, preds: &[usize], labels: &[usize]) -> Result<TaskMetrics> {
    let accuracy = accuracy(preds, labels)?;
    let ordinal = if spec.is_ordinal() {
        let (mae, mse) = mae_mse(preds, labels)?;
        let cs = cumulative_score(preds, labels, spec.cardinality())?;
        Some(OrdinalMetrics { mae, mse, cs })
    } else {
        None
    };
    let shift = spec.min_label();
    let shifted = |v: &[usize]| -> Result<Vec<usize>> {
        v.iter()
            .enumerate()
            .map(|(row, &x)| {
                x.checked_sub(shift).ok_or(Error::LabelOutOfRange {
                    row,
                    label: x as i64,
                })
            })
            .collect()
    };
    let confusion = confusion_matrix(&shifted(preds)?, &shifted(labels)?, spec.cardinality())?;
    Ok(TaskMetrics {
        name: spec.name.clone(),
        accuracy,
        ordinal,
        confusion,
    })
}
