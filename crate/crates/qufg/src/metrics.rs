//! Classification metrics over a node mask.

use crate::error::{Error, Result};

/// Accuracy, macro-F1 and micro-F1 for one evaluation.
///
/// Macro-F1 averages per-class F1 over the classes present in the ground
/// truth (a truth class never predicted contributes 0). Micro-F1 is
/// computed from pooled counts and coincides with accuracy for
/// single-label classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

pub fn compute_metrics(predicted: &[usize], truth: &[usize], mask: &[usize]) -> Result<Metrics> {
    if mask.is_empty() {
        return Err(Error::input("metrics mask must not be empty"));
    }
    let num_classes = mask
        .iter()
        .map(|&i| predicted[i].max(truth[i]))
        .max()
        .unwrap()
        + 1;

    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    let mut support = vec![0usize; num_classes];
    let mut hits = 0usize;

    for &i in mask {
        let (p, t) = (predicted[i], truth[i]);
        support[t] += 1;
        if p == t {
            tp[t] += 1;
            hits += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }

    let mut f1_sum = 0.0;
    let mut truth_classes = 0usize;
    for c in 0..num_classes {
        if support[c] == 0 {
            continue;
        }
        truth_classes += 1;
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom > 0 {
            f1_sum += 2.0 * tp[c] as f64 / denom as f64;
        }
    }

    let total_tp: usize = tp.iter().sum();
    let total_fp: usize = fp.iter().sum();
    let total_fn: usize = fn_.iter().sum();
    let micro_denom = 2 * total_tp + total_fp + total_fn;

    Ok(Metrics {
        accuracy: hits as f64 / mask.len() as f64,
        macro_f1: f1_sum / truth_classes as f64,
        micro_f1: if micro_denom == 0 {
            1.0
        } else {
            2.0 * total_tp as f64 / micro_denom as f64
        },
    })
}
