//! Penalized least squares on a [`WeightedDesign`].
//!
//! Objectives use the literal parameterization
//!
//! ```text
//! lasso:  ½‖y − Xβ‖² + λ1 Σ|β_j|
//! ridge:  ½‖y − Xβ‖² + λ2 βᵀβ
//! enet:   ½‖y − Xβ‖² + λ1 Σ|β_j| + λ2 βᵀβ
//! ```
//!
//! so there is no `1/n` on the loss and the ridge normal equations carry `2λ2`.
//! Lasso and elastic net use cyclic coordinate descent in column order; ridge is solved
//! in closed form by Cholesky.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::swls::WeightedDesign;

/// Penalty family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lasso,
    Ridge,
    #[serde(rename = "enet")]
    ElasticNet,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Lasso, Family::Ridge, Family::ElasticNet];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Lasso => "lasso",
            Family::Ridge => "ridge",
            Family::ElasticNet => "enet",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Family::Lasso),
            "ridge" => Ok(Family::Ridge),
            "enet" | "elastic-net" | "elasticnet" => Ok(Family::ElasticNet),
            other => Err(Error::arg(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: Family,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl PenaltySpec {
    pub fn lasso(lambda1: f64) -> Result<Self> {
        Self::new(Family::Lasso, lambda1, 0.0)
    }

    pub fn ridge(lambda2: f64) -> Result<Self> {
        Self::new(Family::Ridge, 0.0, lambda2)
    }

    pub fn elastic_net(lambda1: f64, lambda2: f64) -> Result<Self> {
        Self::new(Family::ElasticNet, lambda1, lambda2)
    }

    pub fn new(family: Family, lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 >= 0.0 && lambda1.is_finite() && lambda2 >= 0.0 && lambda2.is_finite()) {
            return Err(Error::arg(format!(
                "penalties must be finite and nonnegative (lambda1 = {lambda1}, lambda2 = {lambda2})"
            )));
        }
        match family {
            Family::Lasso if lambda2 != 0.0 => Err(Error::arg("lasso requires lambda2 = 0")),
            Family::Ridge if lambda1 != 0.0 => Err(Error::arg("ridge requires lambda1 = 0")),
            _ => Ok(Self {
                family,
                lambda1,
                lambda2,
            }),
        }
    }

    /// The same penalty with a path value substituted: `λ2` for ridge, `λ1` otherwise.
    /// The elastic net keeps its `λ2`.
    pub fn at(&self, lambda: f64) -> Self {
        let mut spec = *self;
        match self.family {
            Family::Ridge => spec.lambda2 = lambda,
            Family::Lasso | Family::ElasticNet => spec.lambda1 = lambda,
        }
        spec
    }

    pub fn objective(&self, design: &WeightedDesign, beta: &DVector<f64>) -> f64 {
        let r = design.y() - design.x() * beta;
        0.5 * r.norm_squared() + self.lambda1 * beta.lp_norm(1) + self.lambda2 * beta.norm_squared()
    }

    /// Largest violation of the optimality conditions at `beta`.
    ///
    /// With `g = Xᵀ(y − Xβ) − 2λ2β`: zero coordinates need `|g_j| ≤ λ1`, nonzero ones need
    /// `g_j = λ1 sign(β_j)`.
    pub fn kkt_residual(&self, design: &WeightedDesign, beta: &DVector<f64>) -> f64 {
        let r = design.y() - design.x() * beta;
        let g = design.x().tr_mul(&r) - beta * (2.0 * self.lambda2);
        g.iter()
            .zip(beta.iter())
            .map(|(&gj, &bj)| {
                if bj == 0.0 {
                    (gj.abs() - self.lambda1).max(0.0)
                } else {
                    (gj - self.lambda1 * bj.signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Stop when the largest coefficient change over a full sweep falls below this.
    pub tolerance: f64,
    /// Measure convergence on unit-norm columns. The problem being solved is unchanged
    /// and coefficients are always reported on the centered scale.
    pub unit_scaling: bool,
    /// Record the objective after every sweep in [`FitResult::objective_trace`].
    pub track_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-7,
            unit_scaling: false,
            track_objective: false,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.tolerance > 0.0) {
            return Err(Error::arg(
                "solver needs max_iterations >= 1 and tolerance > 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: DVector<f64>,
    pub converged: bool,
    /// Full sweeps performed (0 for closed-form fits).
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub fn lasso_fit(design: &WeightedDesign, lambda1: f64, opts: &SolverOptions) -> Result<FitResult> {
    fit(design, &PenaltySpec::lasso(lambda1)?, opts, None)
}

pub fn enet_fit(
    design: &WeightedDesign,
    lambda1: f64,
    lambda2: f64,
    opts: &SolverOptions,
) -> Result<FitResult> {
    fit(design, &PenaltySpec::elastic_net(lambda1, lambda2)?, opts, None)
}

/// Closed-form ridge: `(XᵀX + 2λ2 I)⁻¹ Xᵀy`.
pub fn ridge_fit(design: &WeightedDesign, lambda2: f64) -> Result<DVector<f64>> {
    PenaltySpec::ridge(lambda2)?;
    let x = design.x();
    let p = design.p();
    let mut gram = x.tr_mul(x);
    for j in 0..p {
        gram[(j, j)] += 2.0 * lambda2;
    }
    let scale = (0..p).map(|j| gram[(j, j)]).fold(0.0, f64::max);
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::RankDeficient("XᵀX + 2λ2·I is not positive definite".into())
    })?;
    let l = chol.l_dirty();
    let min_pivot = (0..p).map(|j| l[(j, j)] * l[(j, j)]).fold(f64::INFINITY, f64::min);
    if p > 0 && min_pivot <= scale * 1e-12 {
        return Err(Error::RankDeficient(format!(
            "design is numerically singular at lambda2 = {lambda2}"
        )));
    }
    Ok(chol.solve(&x.tr_mul(design.y())))
}

/// Solves any penalty family, optionally warm-started from `init`.
pub fn fit(
    design: &WeightedDesign,
    penalty: &PenaltySpec,
    opts: &SolverOptions,
    init: Option<&DVector<f64>>,
) -> Result<FitResult> {
    opts.validate()?;
    if penalty.family == Family::Ridge {
        let coefficients = ridge_fit(design, penalty.lambda2)?;
        let objective_trace = if opts.track_objective {
            vec![penalty.objective(design, &coefficients)]
        } else {
            Vec::new()
        };
        return Ok(FitResult {
            coefficients,
            converged: true,
            iterations: 0,
            objective_trace,
        });
    }
    Ok(coordinate_descent(design, penalty, opts, init))
}

fn coordinate_descent(
    design: &WeightedDesign,
    penalty: &PenaltySpec,
    opts: &SolverOptions,
    init: Option<&DVector<f64>>,
) -> FitResult {
    let x = design.x();
    let p = design.p();
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared()).collect();
    let conv_scale: Vec<f64> = if opts.unit_scaling {
        col_sq.iter().map(|c| c.sqrt()).collect()
    } else {
        vec![1.0; p]
    };

    let mut beta = match init {
        Some(b) if b.len() == p => b.clone(),
        _ => DVector::zeros(p),
    };
    for j in 0..p {
        if col_sq[j] == 0.0 {
            beta[j] = 0.0;
        }
    }
    let mut resid = design.y() - x * &beta;
    let mut trace = Vec::new();
    if opts.track_objective {
        trace.push(penalty.objective(design, &beta));
    }

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_iterations {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let xj = x.column(j);
            let old = beta[j];
            let rho = xj.dot(&resid) + col_sq[j] * old;
            let new = soft_threshold(rho, penalty.lambda1) / (col_sq[j] + 2.0 * penalty.lambda2);
            let delta = new - old;
            if delta != 0.0 {
                resid.axpy(-delta, &xj, 1.0);
                beta[j] = new;
                max_delta = max_delta.max(delta.abs() * conv_scale[j]);
            }
        }
        if opts.track_objective {
            trace.push(penalty.objective(design, &beta));
        }
        if max_delta < opts.tolerance {
            converged = true;
            break;
        }
    }

    if converged {
        if let Some(polished) = polish_active_set(design, penalty, &beta) {
            beta = polished;
            if opts.track_objective {
                trace.push(penalty.objective(design, &beta));
            }
        }
    }

    FitResult {
        coefficients: beta,
        converged,
        iterations: sweeps,
        objective_trace: trace,
    }
}

/// Exact minimizer on the support and signs found by coordinate descent:
/// `β_A = (X_AᵀX_A + 2λ2 I)⁻¹ (X_Aᵀy − λ1 s_A)`.
///
/// The sweep tolerance bounds the last step, not the distance to the optimum, so this
/// removes the remaining error. The result is used only if it keeps every sign and does
/// not raise the objective beyond rounding; otherwise the descent iterate stands.
fn polish_active_set(
    design: &WeightedDesign,
    penalty: &PenaltySpec,
    beta: &DVector<f64>,
) -> Option<DVector<f64>> {
    let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    if active.is_empty() {
        return None;
    }
    let x = design.x();
    let xa = x.select_columns(&active);
    let mut gram = xa.tr_mul(&xa);
    let scale = (0..active.len()).map(|k| gram[(k, k)]).fold(0.0, f64::max);
    for k in 0..active.len() {
        gram[(k, k)] += 2.0 * penalty.lambda2;
    }
    let chol = Cholesky::new(gram)?;
    let l = chol.l_dirty();
    if (0..active.len()).any(|k| l[(k, k)] * l[(k, k)] <= scale * 1e-10) {
        return None;
    }
    let mut rhs = xa.tr_mul(design.y());
    for (k, &j) in active.iter().enumerate() {
        rhs[k] -= penalty.lambda1 * beta[j].signum();
    }
    let solved = chol.solve(&rhs);
    let mut out = DVector::zeros(beta.len());
    for (k, &j) in active.iter().enumerate() {
        if solved[k].signum() != beta[j].signum() || solved[k] == 0.0 {
            return None;
        }
        out[j] = solved[k];
    }
    // Near the optimum the two objectives agree to rounding, so allow a relative ulp-scale slack.
    let before = penalty.objective(design, beta);
    (penalty.objective(design, &out) <= before + 1e-12 * before.abs().max(1.0)).then_some(out)
}

/// Smallest `λ1` at which the lasso solution is identically zero: `max_j |x_jᵀy|`.
pub fn lambda_max(design: &WeightedDesign) -> Result<f64> {
    if design.x().iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("design matrix is identically zero".into()));
    }
    Ok(design.x().tr_mul(design.y()).amax())
}

/// Geometric grid of `count` points from `max` down to `ratio · max`.
pub fn geometric_grid(max: f64, count: usize, ratio: f64) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::arg("a lambda grid needs at least two points"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::arg(format!("grid ratio must lie in (0, 1), got {ratio}")));
    }
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::Degenerate(format!(
            "largest grid value must be positive, got {max}"
        )));
    }
    let step = ratio.ln() / (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|k| max * (step * k as f64).exp()).collect();
    grid[count - 1] = max * ratio;
    Ok(grid)
}

pub fn lambda_grid(design: &WeightedDesign, count: usize, ratio: f64) -> Result<Vec<f64>> {
    geometric_grid(lambda_max(design)?, count, ratio)
}

/// Solutions along a descending penalty grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPath {
    pub lambdas: Vec<f64>,
    /// `|Λ| × p`, row `k` solves the problem at `lambdas[k]`.
    pub coefficients: DMatrix<f64>,
    pub converged: Vec<bool>,
}

impl CoefficientPath {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn coefficients_at(&self, k: usize) -> DVector<f64> {
        self.coefficients.row(k).transpose()
    }
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::arg("lambda grid is empty"));
    }
    if grid.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(Error::arg("lambda grid values must be finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::arg("lambda grid must be strictly decreasing"));
    }
    Ok(())
}

/// Fits every grid point, warm-starting each from the previous (larger) penalty.
pub fn fit_path(
    design: &WeightedDesign,
    grid: &[f64],
    penalty: &PenaltySpec,
    opts: &SolverOptions,
) -> Result<CoefficientPath> {
    validate_grid(grid)?;
    let p = design.p();
    let mut coefficients = DMatrix::zeros(grid.len(), p);
    let mut converged = Vec::with_capacity(grid.len());
    let mut warm: Option<DVector<f64>> = None;
    for (k, &lambda) in grid.iter().enumerate() {
        let res = fit(design, &penalty.at(lambda), opts, warm.as_ref())?;
        coefficients.set_row(k, &res.coefficients.transpose());
        converged.push(res.converged);
        warm = Some(res.coefficients);
    }
    Ok(CoefficientPath {
        lambdas: grid.to_vec(),
        coefficients,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda: f64,
    pub index: usize,
    /// Mean held-out squared error per grid point.
    pub mean_errors: Vec<f64>,
    /// `fold_errors[f][k]`: held-out squared error of fold `f` at grid point `k`.
    pub fold_errors: Vec<Vec<f64>>,
}

/// K-fold cross-validation over the adjusted rows.
///
/// The held-out error of a fold is the residual sum of squares on its rows. The grid
/// point with the smallest mean error wins; exact ties go to the larger penalty.
pub fn cross_validate(
    design: &WeightedDesign,
    grid: &[f64],
    penalty: &PenaltySpec,
    folds: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<CvResult> {
    validate_grid(grid)?;
    let n = design.rows();
    if folds < 2 {
        return Err(Error::arg("cross-validation needs at least 2 folds"));
    }
    if folds > n {
        return Err(Error::arg(format!(
            "{folds} folds requested but only {n} weighted rows"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    let assignment: Vec<usize> = {
        let mut a = vec![0; n];
        for (pos, &row) in order.iter().enumerate() {
            a[row] = pos % folds;
        }
        a
    };

    let mut fold_errors = Vec::with_capacity(folds);
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
        let train_design = design.select_rows(&train)?;
        let test_design = design.select_rows(&test)?;
        let path = fit_path(&train_design, grid, penalty, opts)?;
        fold_errors.push(
            (0..grid.len())
                .map(|k| (test_design.y() - test_design.x() * path.coefficients_at(k)).norm_squared())
                .collect::<Vec<f64>>(),
        );
    }
    let mean_errors: Vec<f64> = (0..grid.len())
        .map(|k| fold_errors.iter().map(|f| f[k]).sum::<f64>() / folds as f64)
        .collect();

    let mut index = 0;
    for (k, &err) in mean_errors.iter().enumerate() {
        if err < mean_errors[index] {
            index = k;
        }
    }
    Ok(CvResult {
        lambda: grid[index],
        index,
        mean_errors,
        fold_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn scalar_design(xtx: f64, xty: f64) -> WeightedDesign {
        // single column x = (√xtx), y chosen so that xᵀy matches
        let x = DMatrix::from_element(1, 1, xtx.sqrt());
        WeightedDesign::from_adjusted(x, dvector![xty / xtx.sqrt()]).unwrap()
    }

    #[test]
    fn scalar_closed_forms() {
        let d = scalar_design(1.0, 2.0);
        let opts = SolverOptions::default();
        assert_abs_diff_eq!(lasso_fit(&d, 0.5, &opts).unwrap().coefficients[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ridge_fit(&d, 0.5).unwrap()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            enet_fit(&d, 0.5, 0.5, &opts).unwrap().coefficients[0],
            0.75,
            epsilon = 1e-12
        );
    }

    #[test]
    fn penalty_validation() {
        assert!(PenaltySpec::lasso(-1.0).is_err());
        assert!(PenaltySpec::new(Family::Lasso, 1.0, 0.5).is_err());
        assert!(PenaltySpec::new(Family::Ridge, 0.5, 1.0).is_err());
        assert!(PenaltySpec::elastic_net(0.0, 0.0).is_ok());
        assert_eq!("enet".parse::<Family>().unwrap(), Family::ElasticNet);
        assert!("scad".parse::<Family>().is_err());
    }

    #[test]
    fn zero_column_stays_zero() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.5]);
        let d = WeightedDesign::from_adjusted(x, dvector![1.0, -1.0, 0.2]).unwrap();
        let res = lasso_fit(&d, 0.0, &SolverOptions::default()).unwrap();
        assert_eq!(res.coefficients[0], 0.0);
        assert!(res.converged);
    }

    #[test]
    fn lambda_max_examples() {
        // orthonormal columns, so Xᵀy = y
        let x = DMatrix::identity(2, 2);
        let d = WeightedDesign::from_adjusted(x, dvector![2.0, -3.0]).unwrap();
        let lmax = lambda_max(&d).unwrap();
        assert_eq!(lmax, 3.0);
        let opts = SolverOptions::default();
        assert!(lasso_fit(&d, 3.0, &opts).unwrap().coefficients.iter().all(|&b| b == 0.0));
        assert!(lasso_fit(&d, 2.9, &opts).unwrap().coefficients.iter().any(|&b| b != 0.0));

        let x = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let d = WeightedDesign::from_adjusted(x, dvector![1.0, -1.0]).unwrap();
        assert_eq!(lambda_max(&d).unwrap(), 0.0);
        assert!(lambda_grid(&d, 5, 0.1).is_err());

        assert_eq!(lambda_max(&scalar_design(1.0, 5.0)).unwrap(), 5.0);

        let zero = WeightedDesign::from_adjusted(DMatrix::zeros(2, 2), dvector![1.0, 2.0]).unwrap();
        assert!(matches!(lambda_max(&zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn grid_examples() {
        let g = geometric_grid(1.0, 3, 0.01).unwrap();
        assert_abs_diff_eq!(g[0], 1.0);
        assert_abs_diff_eq!(g[1], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(g[2], 0.01, epsilon = 1e-15);
        assert_eq!(geometric_grid(4.0, 2, 0.25).unwrap(), vec![4.0, 1.0]);
        assert!(geometric_grid(1.0, 1, 0.5).is_err());
        assert!(geometric_grid(1.0, 3, 1.0).is_err());
    }

    #[test]
    fn ridge_rank_deficiency() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 0.5, -1.0, 2.0]);
        let d = WeightedDesign::from_adjusted(x, dvector![1.0, 1.0]).unwrap();
        assert!(matches!(ridge_fit(&d, 0.0), Err(Error::RankDeficient(_))));
        assert!(ridge_fit(&d, 0.1).is_ok());
    }

    #[test]
    fn orthonormal_ridge_zero_is_ols() {
        let x = DMatrix::identity(3, 3);
        let d = WeightedDesign::from_adjusted(x, dvector![1.0, -2.0, 0.5]).unwrap();
        let b = ridge_fit(&d, 0.0).unwrap();
        assert_abs_diff_eq!(b, dvector![1.0, -2.0, 0.5], epsilon = 1e-14);
    }

    #[test]
    fn path_rejects_bad_grid() {
        let d = scalar_design(1.0, 2.0);
        let pen = PenaltySpec::lasso(0.0).unwrap();
        let opts = SolverOptions::default();
        assert!(fit_path(&d, &[], &pen, &opts).is_err());
        assert!(fit_path(&d, &[0.1, 0.2], &pen, &opts).is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.99, 0.5, 0.51, -1.0, -0.98]);
        let d = WeightedDesign::from_adjusted(x, dvector![1.0, 0.3, -0.7]).unwrap();
        let opts = SolverOptions {
            max_iterations: 1,
            tolerance: 1e-14,
            ..Default::default()
        };
        let res = lasso_fit(&d, 0.001, &opts).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 1);
    }
}
