//! Support-weighted classification metrics.
//!
//! Per-class precision, recall and F1 are 0 whenever their denominator is 0.
//! Weighted averages use the number of true instances of each class.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// `confusion[truth][prediction]`.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(
    predictions: &[usize],
    truths: &[usize],
    classes: &[String],
) -> Result<MetricsReport> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::Config("no predictions to score".into()));
    }
    let n = classes.len();
    if let Some(&bad) = predictions.iter().chain(truths).find(|&&c| c >= n) {
        return Err(Error::ShapeMismatch(format!("class index {bad} outside {n} classes")));
    }
    let mut confusion = vec![vec![0usize; n]; n];
    for (&p, &t) in predictions.iter().zip(truths) {
        confusion[t][p] += 1;
    }

    let total = truths.len();
    let correct: usize = (0..n).map(|c| confusion[c][c]).sum();
    let mut per_class = Vec::with_capacity(n);
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for c in 0..n {
        let tp = confusion[c][c];
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let w = support as f64 / total as f64;
        wp += w * precision;
        wr += w * recall;
        wf += w * f1;
        per_class.push(ClassMetrics {
            label: classes[c].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(MetricsReport {
        per_class,
        weighted_precision: wp,
        weighted_recall: wr,
        weighted_f1: wf,
        accuracy: ratio(correct, total),
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub folds: usize,
    pub weighted_f1: MeanStd,
    pub weighted_precision: MeanStd,
    pub weighted_recall: MeanStd,
    pub accuracy: MeanStd,
}

pub fn aggregate(reports: &[MetricsReport]) -> AggregateMetrics {
    let col = |f: fn(&MetricsReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    AggregateMetrics {
        folds: reports.len(),
        weighted_f1: col(|r| r.weighted_f1),
        weighted_precision: col(|r| r.weighted_precision),
        weighted_recall: col(|r| r.weighted_recall),
        accuracy: col(|r| r.accuracy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ab() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn worked_example() {
        let r = compute_metrics(&[0, 1, 1, 1], &[0, 0, 1, 1], &ab()).unwrap();
        assert_abs_diff_eq!(r.accuracy, 0.75);
        assert_abs_diff_eq!(r.per_class[0].precision, 1.0);
        assert_abs_diff_eq!(r.per_class[0].recall, 0.5);
        assert_abs_diff_eq!(r.per_class[0].f1, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.per_class[1].precision, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.per_class[1].recall, 1.0);
        assert_abs_diff_eq!(r.per_class[1].f1, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weighted_f1, 11.0 / 15.0, epsilon = 1e-15);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn perfect_predictions() {
        let r = compute_metrics(&[1, 0, 1], &[1, 0, 1], &ab()).unwrap();
        for v in [r.accuracy, r.weighted_f1, r.weighted_precision, r.weighted_recall] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn never_predicted_class_has_zero_precision() {
        let r = compute_metrics(&[0, 0], &[0, 1], &ab()).unwrap();
        assert_eq!(r.per_class[1].precision, 0.0);
        assert_eq!(r.per_class[1].f1, 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            compute_metrics(&[0], &[0, 1], &ab()),
            Err(Error::LengthMismatch { predictions: 1, truths: 2 })
        ));
        assert!(compute_metrics(&[2], &[0], &ab()).is_err());
        assert!(compute_metrics(&[], &[], &ab()).is_err());
    }

    #[test]
    fn mean_and_sample_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
        assert_eq!(MeanStd::of(&[0.5]).std, 0.0);
    }

    proptest! {
        #[test]
        fn report_invariants(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
            let (p, t): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let classes: Vec<String> = (0..4).map(|c| c.to_string()).collect();
            let r = compute_metrics(&p, &t, &classes).unwrap();
            for v in [r.accuracy, r.weighted_f1, r.weighted_precision, r.weighted_recall] {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
            for (c, m) in r.per_class.iter().enumerate() {
                prop_assert_eq!(r.confusion[c].iter().sum::<usize>(), m.support);
                prop_assert!((0.0..=1.0).contains(&m.f1));
            }
            prop_assert!((r.accuracy - r.weighted_recall).abs() < 1e-12);
        }
    }
}
