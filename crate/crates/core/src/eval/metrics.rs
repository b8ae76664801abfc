use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total: usize,
    pub accuracy: f64,
    pub micro_f1: f64,
    /// Unweighted mean of per-class F1; a class never seen nor predicted
    /// contributes 0.
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[truth][pred]`.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn compute_metrics(preds: &[usize], truth: &[usize], num_classes: usize) -> Result<Metrics> {
    if preds.is_empty() {
        return Err(Error::Invalid("no predictions to score".into()));
    }
    if preds.len() != truth.len() {
        return Err(Error::Invalid(format!("{} predictions for {} labels", preds.len(), truth.len())));
    }
    if let Some(bad) = preds.iter().chain(truth).find(|&&c| c >= num_classes) {
        return Err(Error::Invalid(format!("class {bad} out of range for {num_classes} classes")));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in preds.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    let per_class: Vec<ClassMetrics> = (0..num_classes)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            tp_all += tp;
            fp_all += predicted - tp;
            fn_all += support - tp;
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            ClassMetrics {
                precision,
                recall,
                f1: f1(precision, recall),
                support,
            }
        })
        .collect();
    let micro_f1 = f1(ratio(tp_all, tp_all + fp_all), ratio(tp_all, tp_all + fn_all));
    Ok(Metrics {
        total: preds.len(),
        accuracy: ratio(tp_all, preds.len()),
        micro_f1,
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / num_classes as f64,
        per_class,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        // R = 0, NR = 1
        let m = compute_metrics(&[0, 1, 1], &[0, 0, 1], 2).unwrap();
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.macro_f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.confusion, [[1, 1], [0, 1]]);
    }

    #[test]
    fn perfect() {
        let m = compute_metrics(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!((m.accuracy, m.micro_f1, m.macro_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn absent_class_counts_zero() {
        let m = compute_metrics(&[0, 0], &[0, 0], 2).unwrap();
        assert_eq!(m.macro_f1, 0.5);
    }

    #[test]
    fn errors() {
        assert!(compute_metrics(&[], &[], 2).is_err());
        assert!(compute_metrics(&[0], &[0, 1], 2).is_err());
        assert!(compute_metrics(&[2], &[0], 2).is_err());
    }

    proptest! {
        #[test]
        fn micro_f1_is_accuracy(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..60)) {
            let (p, t): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let m = compute_metrics(&p, &t, 3).unwrap();
            prop_assert!((m.micro_f1 - m.accuracy).abs() < 1e-12);
        }
    }
}
