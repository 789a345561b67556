//! Weighted centering that turns Kaplan–Meier weighted least squares into an
//! intercept-free ordinary least squares problem.
//!
//! With weighted means `X̄_w = Σ w_i X_i / Σ w_i` and `Ȳ_w` likewise, the adjusted rows are
//! `√w_i (X_i − X̄_w)` and `√w_i (Y_i − Ȳ_w)`. Rows with zero weight become zero rows and
//! are dropped, which leaves every quadratic loss unchanged.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::survival::{KmWeights, OrderedSurvivalData};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDesign {
    x: DMatrix<f64>,
    y: DVector<f64>,
    mean_x: DVector<f64>,
    mean_y: f64,
    /// Sorted positions (into the ordered data) of the retained rows.
    rows: Vec<usize>,
}

impl WeightedDesign {
    /// Builds a design directly from already-adjusted data, with zero weighted means.
    pub fn from_adjusted(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::arg(format!(
                "design has {} rows but response has {}",
                x.nrows(),
                y.len()
            )));
        }
        let p = x.ncols();
        let rows = (0..x.nrows()).collect();
        Ok(Self {
            x,
            y,
            mean_x: DVector::zeros(p),
            mean_y: 0.0,
            rows,
        })
    }

    /// Adjusted predictors, one row per positive-weight observation.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn mean_x(&self) -> &DVector<f64> {
        &self.mean_x
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Effective row count, `#{i : w_i > 0}`.
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn row_positions(&self) -> &[usize] {
        &self.rows
    }

    /// Keeps only the listed adjusted rows. Weighted means are carried over unchanged.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.rows()) {
            return Err(Error::arg(format!("row {bad} out of range")));
        }
        Ok(Self {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r])),
            mean_x: self.mean_x.clone(),
            mean_y: self.mean_y,
            rows: rows.iter().map(|&r| self.rows[r]).collect(),
        })
    }

    fn check_len(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.p() {
            return Err(Error::arg(format!(
                "coefficient vector has length {}, design has p = {}",
                beta.len(),
                self.p()
            )));
        }
        Ok(())
    }
}

pub fn transform(data: &OrderedSurvivalData, weights: &KmWeights) -> Result<WeightedDesign> {
    let w = weights.as_slice();
    if w.len() != data.len() {
        return Err(Error::arg(format!(
            "{} weights for {} observations",
            w.len(),
            data.len()
        )));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "all observations are censored; Kaplan-Meier weights sum to zero".into(),
        ));
    }

    let design = data.design();
    let p = data.p();
    let log_t = data.log_times();

    let mut mean_x = DVector::zeros(p);
    let mut mean_y = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 {
            mean_x.axpy(wi, &design.row(i).transpose(), 1.0);
            mean_y += wi * log_t[i];
        }
    }
    mean_x /= total;
    mean_y /= total;

    let rows: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let x = DMatrix::from_fn(rows.len(), p, |r, j| {
        let i = rows[r];
        w[i].sqrt() * (design[(i, j)] - mean_x[j])
    });
    let y = DVector::from_iterator(
        rows.len(),
        rows.iter().map(|&i| w[i].sqrt() * (log_t[i] - mean_y)),
    );

    Ok(WeightedDesign {
        x,
        y,
        mean_x,
        mean_y,
        rows,
    })
}

/// Intercept on the original (uncentered) scale: `Ȳ_w − X̄_wᵀ β`.
pub fn recover_intercept(beta: &DVector<f64>, design: &WeightedDesign) -> Result<f64> {
    design.check_len(beta)?;
    Ok(design.mean_y - design.mean_x.dot(beta))
}

/// `½ ‖y − Xβ‖²` on the adjusted design.
pub fn swls_loss(beta: &DVector<f64>, design: &WeightedDesign) -> Result<f64> {
    design.check_len(beta)?;
    let r = &design.y - &design.x * beta;
    Ok(0.5 * r.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{km_weights, order_by_time, SurvivalRecord};
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn data(events: &[bool]) -> OrderedSurvivalData {
        let recs: Vec<_> = events
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let t = i as f64 + 1.0;
                SurvivalRecord::new(t, e, vec![t, (t * 1.7).sin()])
            })
            .collect();
        order_by_time(&recs).unwrap()
    }

    #[test]
    fn uniform_weights_reduce_to_scaled_centering() {
        let d = data(&[true, true, true]);
        let design = transform(&d, &km_weights(&d)).unwrap();
        assert_abs_diff_eq!(design.mean_x()[0], 2.0, epsilon = 1e-14);
        let s = (1.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(design.x()[(0, 0)], -s, epsilon = 1e-14);
        assert_abs_diff_eq!(design.x()[(2, 0)], s, epsilon = 1e-14);
    }

    #[test]
    fn censored_rows_are_dropped() {
        let d = data(&[true, false, true, true]);
        let w = km_weights(&d);
        let design = transform(&d, &w).unwrap();
        assert_eq!(design.rows(), 3);
        assert_eq!(design.row_positions(), &[0, 2, 3]);
        // mean of x1 with weights (0.25, 0, 0.375, 0.375)
        let mx = 0.25 * 1.0 + 0.375 * 3.0 + 0.375 * 4.0;
        assert_abs_diff_eq!(design.mean_x()[0], mx, epsilon = 1e-14);
        assert_abs_diff_eq!(design.x()[(1, 0)], 0.375f64.sqrt() * (3.0 - mx), epsilon = 1e-14);
        // weighted column sums vanish
        for j in 0..2 {
            let s: f64 = (0..design.rows())
                .map(|r| w.as_slice()[design.row_positions()[r]].sqrt() * design.x()[(r, j)])
                .sum();
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn all_censored_is_degenerate() {
        let d = data(&[false, false]);
        assert!(matches!(
            transform(&d, &km_weights(&d)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn intercept_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let mut design = WeightedDesign::from_adjusted(x, dvector![0.0, 0.0]).unwrap();
        design.mean_y = 2.0;
        assert_eq!(recover_intercept(&dvector![0.0, 0.0], &design).unwrap(), 2.0);
        assert_eq!(recover_intercept(&dvector![3.0, -1.0], &design).unwrap(), 2.0);
        design.mean_x = dvector![1.0, 1.0];
        assert_abs_diff_eq!(
            recover_intercept(&dvector![0.5, 0.5], &design).unwrap(),
            1.0
        );
        assert!(recover_intercept(&dvector![1.0], &design).is_err());
        assert!(swls_loss(&dvector![1.0, 2.0, 3.0], &design).is_err());
    }

    #[test]
    fn zero_response_zero_loss() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let design = WeightedDesign::from_adjusted(x, dvector![0.0, 0.0]).unwrap();
        assert_eq!(swls_loss(&dvector![0.0], &design).unwrap(), 0.0);
    }
}
