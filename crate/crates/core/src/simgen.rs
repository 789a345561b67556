//! Synthetic censored AFT data.
//!
//! Covariates are i.i.d. uniform(0, 1) draws mixed through the Cholesky factor of an
//! equicorrelation matrix. Log survival times follow `Y = β0 + Xᵀβ + σε` with standard
//! normal errors, and censoring times are uniform on `(0, c_max)`, with `c_max` found by
//! bisection so that a pilot sample hits the requested censoring rate.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::survival::{SurvivalDataset, SurvivalRecord};

pub const DEFAULT_PILOT_SIZE: usize = 100_000;

/// Allowed gap between pilot and target censoring rates.
pub const CALIBRATION_TOLERANCE: f64 = 0.005;

const CALIBRATION_MAX_ITER: usize = 200;

// stream ids within one dataset seed
const STREAM_COVARIATES: u64 = 0;
const STREAM_ERRORS: u64 = 1;
const STREAM_CENSORING: u64 = 2;
const STREAM_PILOT: u64 = 0xC0FFEE;

/// Scale on which uniform censoring times are compared with survival times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringScale {
    /// `C ~ U(0, c_max)` against `T = exp(Y)`.
    #[default]
    Time,
    /// `C ~ U(0, c_max)` against `Y` directly.
    LogTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// The first `q` covariates carry signal.
    pub q: usize,
    pub beta_value: f64,
    pub beta0: f64,
    pub sigma: f64,
    /// Pairwise covariate correlation.
    pub r: f64,
    pub target_censoring: f64,
    pub censoring_scale: CensoringScale,
    /// Upper end of the censoring distribution. Calibrated from `target_censoring` when absent.
    pub c_max: Option<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 50,
            p: 20,
            q: 6,
            beta_value: 5.0,
            beta0: 0.0,
            sigma: 1.0,
            r: 0.0,
            target_censoring: 0.3,
            censoring_scale: CensoringScale::Time,
            c_max: None,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::arg("n and p must be positive"));
        }
        if self.q > self.p {
            return Err(Error::arg(format!("q = {} exceeds p = {}", self.q, self.p)));
        }
        if !(self.r < 1.0) || self.r.is_nan() {
            return Err(Error::arg(format!("correlation r must be < 1, got {}", self.r)));
        }
        if !(0.0..1.0).contains(&self.target_censoring) {
            return Err(Error::arg(format!(
                "censoring rate must lie in [0, 1), got {}",
                self.target_censoring
            )));
        }
        if !(self.sigma >= 0.0) || !self.beta_value.is_finite() || !self.beta0.is_finite() {
            return Err(Error::arg("sigma must be >= 0 and coefficients finite"));
        }
        if let Some(c) = self.c_max {
            if !(c > 0.0) {
                return Err(Error::arg(format!("c_max must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> DVector<f64> {
        DVector::from_fn(self.p, |j, _| if j < self.q { self.beta_value } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub dataset: SurvivalDataset,
    /// `0..q`.
    pub true_support: Vec<usize>,
    pub realized_censoring: f64,
    /// `None` when the data are uncensored.
    pub c_max: Option<f64>,
}

/// `n × p` matrix `U Lᵀ`, where `U` has i.i.d. uniform(0, 1) entries and `L` is the lower
/// Cholesky factor of the equicorrelation matrix with off-diagonal `r`.
pub fn correlated_uniform(n: usize, p: usize, r: f64, seed: u64) -> Result<DMatrix<f64>> {
    let corr = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { r });
    let l = Cholesky::new(corr)
        .ok_or_else(|| {
            Error::arg(format!(
                "equicorrelation matrix with r = {r}, p = {p} is not positive definite"
            ))
        })?
        .unpack();
    let mut rng = stream_rng(seed, STREAM_COVARIATES);
    // row-major draw order so that a given seed yields the same rows for any n
    let u = DMatrix::from_row_iterator(n, p, (0..n * p).map(|_| rng.random::<f64>()));
    if r == 0.0 {
        return Ok(u);
    }
    Ok(u * l.transpose())
}

fn log_times(config: &SimConfig, n: usize, seed: u64) -> Result<DVector<f64>> {
    let x = correlated_uniform(n, config.p, config.r, seed)?;
    let mut y = x * config.coefficients();
    let mut rng = stream_rng(seed, STREAM_ERRORS);
    for yi in y.iter_mut() {
        let eps: f64 = StandardNormal.sample(&mut rng);
        *yi += config.beta0 + config.sigma * eps;
    }
    Ok(y)
}

fn uniforms(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_CENSORING);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn survival_value(scale: CensoringScale, y: f64) -> f64 {
    match scale {
        CensoringScale::Time => y.exp(),
        CensoringScale::LogTime => y,
    }
}

/// Finds `c_max` such that the censoring rate on a pilot sample is within
/// [`CALIBRATION_TOLERANCE`] of the target. Bisection runs on `ln c_max`.
pub fn calibrate_censoring(config: &SimConfig, pilot_size: usize) -> Result<f64> {
    config.validate()?;
    let target = config.target_censoring;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::arg(format!(
            "calibration target must lie in (0, 1), got {target}"
        )));
    }
    if pilot_size == 0 {
        return Err(Error::arg("pilot sample must be nonempty"));
    }
    let pilot_seed = derive_seed(config.seed, STREAM_PILOT);
    let t: Vec<f64> = log_times(config, pilot_size, pilot_seed)?
        .iter()
        .map(|&y| survival_value(config.censoring_scale, y))
        .collect();
    let v = uniforms(pilot_size, pilot_seed);
    let rate = |c: f64| {
        let censored = t.iter().zip(&v).filter(|(&ti, &vi)| ti > c * vi).count();
        censored as f64 / pilot_size as f64
    };

    let positive: Vec<f64> = t.iter().copied().filter(|&x| x > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::Calibration(
            "no positive survival values on the censoring scale".into(),
        ));
    }
    let median = {
        let mut s = positive.clone();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    };

    let mut lo = median.ln();
    let mut hi = lo;
    let mut iterations = 0;
    // widen until rate(lo) >= target >= rate(hi)
    while rate(lo.exp()) < target {
        lo -= 1.0;
        iterations += 1;
        if iterations >= CALIBRATION_MAX_ITER {
            return Err(Error::Calibration(format!(
                "could not bracket target censoring {target} from below"
            )));
        }
    }
    while rate(hi.exp()) > target {
        hi += 1.0;
        iterations += 1;
        if iterations >= CALIBRATION_MAX_ITER {
            return Err(Error::Calibration(format!(
                "could not bracket target censoring {target} from above"
            )));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid.exp());
        if (r - target).abs() <= CALIBRATION_TOLERANCE {
            return Ok(mid.exp());
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations >= CALIBRATION_MAX_ITER {
            return Err(Error::Calibration(format!(
                "bisection did not reach {target} ± {CALIBRATION_TOLERANCE} in {CALIBRATION_MAX_ITER} iterations"
            )));
        }
    }
}

/// Resolves the censoring bound: explicit `c_max`, none for zero censoring, otherwise calibrated.
pub fn resolve_c_max(config: &SimConfig) -> Result<Option<f64>> {
    if let Some(c) = config.c_max {
        return Ok(Some(c));
    }
    if config.target_censoring == 0.0 {
        return Ok(None);
    }
    calibrate_censoring(config, DEFAULT_PILOT_SIZE).map(Some)
}

/// Draws one dataset. Covariate, error and censoring streams all derive from `seed`.
pub fn generate_aft(config: &SimConfig, seed: u64) -> Result<SimulatedDataset> {
    config.validate()?;
    let c_max = resolve_c_max(config)?;
    generate_with_bound(config, c_max, seed)
}

/// As [`generate_aft`] with the censoring bound already known (`None` = no censoring).
pub fn generate_with_bound(
    config: &SimConfig,
    c_max: Option<f64>,
    seed: u64,
) -> Result<SimulatedDataset> {
    config.validate()?;
    let n = config.n;
    let x = correlated_uniform(n, config.p, config.r, seed)?;
    let y = log_times(config, n, seed)?;
    let v = uniforms(n, seed);

    let mut records = Vec::with_capacity(n);
    let mut censored = 0;
    for i in 0..n {
        let (time, event) = match c_max {
            None => (y[i].exp(), true),
            Some(c) => {
                let cens = c * v[i];
                match config.censoring_scale {
                    CensoringScale::Time => {
                        let t = y[i].exp();
                        (t.min(cens), t <= cens)
                    }
                    CensoringScale::LogTime => (y[i].min(cens).exp(), y[i] <= cens),
                }
            }
        };
        if !event {
            censored += 1;
        }
        records.push(SurvivalRecord {
            time,
            event,
            covariates: x.row(i).iter().copied().collect(),
        });
    }

    Ok(SimulatedDataset {
        dataset: SurvivalDataset {
            covariate_names: (1..=config.p).map(|j| format!("x{j}")).collect(),
            records,
        },
        true_support: (0..config.q).collect(),
        realized_censoring: censored as f64 / n as f64,
        c_max,
    })
}
