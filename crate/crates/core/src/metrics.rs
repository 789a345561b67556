//! Selection error rates against a known support.
//!
//! `F+` is the share of true nulls that were selected, `F−` the share of true signals
//! that were missed. Variable indices are 0-based.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorRates {
    pub false_positive_rate: f64,
    pub false_negative_rate: f64,
}

pub fn error_rates(selected: &[usize], true_support: &[usize], p: usize) -> Result<ErrorRates> {
    let sel: BTreeSet<usize> = selected.iter().copied().collect();
    let truth: BTreeSet<usize> = true_support.iter().copied().collect();
    if let Some(&bad) = sel.iter().chain(truth.iter()).find(|&&j| j >= p) {
        return Err(Error::arg(format!("variable index {bad} out of range for p = {p}")));
    }
    if truth.is_empty() {
        return Err(Error::arg("false negative rate is undefined for an empty true support"));
    }
    if truth.len() == p {
        return Err(Error::arg(
            "false positive rate is undefined when every variable is in the true support",
        ));
    }
    let false_pos = sel.difference(&truth).count();
    let false_neg = truth.difference(&sel).count();
    Ok(ErrorRates {
        false_positive_rate: false_pos as f64 / (p - truth.len()) as f64,
        false_negative_rate: false_neg as f64 / truth.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub mean_rates: ErrorRates,
    /// Fraction of runs selecting each variable.
    pub selection_frequency: Vec<f64>,
    pub replicates: usize,
}

pub fn aggregate_runs(
    per_run: &[Vec<usize>],
    true_support: &[usize],
    p: usize,
) -> Result<RunAggregate> {
    if per_run.is_empty() {
        return Err(Error::arg("cannot aggregate zero runs"));
    }
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    let mut counts = vec![0usize; p];
    for sel in per_run {
        let rates = error_rates(sel, true_support, p)?;
        fp += rates.false_positive_rate;
        fn_ += rates.false_negative_rate;
        for &j in sel.iter().collect::<BTreeSet<_>>() {
            counts[j] += 1;
        }
    }
    let runs = per_run.len() as f64;
    Ok(RunAggregate {
        mean_rates: ErrorRates {
            false_positive_rate: fp / runs,
            false_negative_rate: fn_ / runs,
        },
        selection_frequency: counts.iter().map(|&c| c as f64 / runs).collect(),
        replicates: per_run.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rate_examples() {
        let truth: Vec<usize> = (0..6).collect();
        assert_eq!(error_rates(&truth, &truth, 20).unwrap(), ErrorRates::default());

        let sel: Vec<usize> = (0..8).collect();
        let r = error_rates(&sel, &truth, 20).unwrap();
        assert_abs_diff_eq!(r.false_positive_rate, 2.0 / 14.0);
        assert_eq!(r.false_negative_rate, 0.0);

        let r = error_rates(&[0, 1, 2], &truth, 20).unwrap();
        assert_eq!(r.false_positive_rate, 0.0);
        assert_eq!(r.false_negative_rate, 0.5);
    }

    #[test]
    fn undefined_rates() {
        assert!(error_rates(&[0], &[], 4).is_err());
        assert!(error_rates(&[0], &[0, 1, 2, 3], 4).is_err());
        assert!(error_rates(&[7], &[0], 4).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let agg = aggregate_runs(&[vec![0], vec![1]], &[0, 1], 4).unwrap();
        assert_eq!(agg.selection_frequency, vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(agg.mean_rates.false_negative_rate, 0.5);
        assert_eq!(agg.replicates, 2);

        let single = error_rates(&[0, 3], &[0, 1], 4).unwrap();
        let agg = aggregate_runs(&vec![vec![0, 3]; 5], &[0, 1], 4).unwrap();
        assert_abs_diff_eq!(agg.mean_rates.false_positive_rate, single.false_positive_rate);
        assert_abs_diff_eq!(agg.mean_rates.false_negative_rate, single.false_negative_rate);
        assert!(aggregate_runs(&[], &[0], 4).is_err());
    }
}
