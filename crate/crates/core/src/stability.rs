//! Stability selection by half-sample subsampling.
//!
//! Each subsample of size `⌊n/2⌋` is drawn without replacement, re-weighted with its own
//! Kaplan–Meier weights, re-centered and fit along a shared penalty grid. The selection
//! probability of variable `k` at penalty `λ` is the fraction of subsamples selecting it;
//! variables whose maximum over the grid reaches the threshold form the stable set.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{stream_rng, Rng};
use crate::solvers::{fit_path, validate_grid, Family, PenaltySpec, SolverOptions};
use crate::survival::{km_weights, OrderedSurvivalData};
use crate::swls::transform;

/// Coefficients below this magnitude count as zero under [`SelectionRule::Nonzero`].
pub const ZERO_TOLERANCE: f64 = 1e-10;

/// Default stable-set threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.6;

/// Default number of subsamples.
pub const DEFAULT_SUBSAMPLES: usize = 100;

/// Redraws allowed per requested subsample before giving up on all-censored draws.
const REDRAW_FACTOR: usize = 100;

/// Turns a coefficient vector into a selected / not-selected mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SelectionRule {
    /// `|β_j| > 1e-10`.
    Nonzero,
    /// `|β_j| ≥ tau`. Used for ridge, which never produces exact zeros.
    Magnitude { tau: f64 },
}

impl SelectionRule {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Ridge => SelectionRule::Magnitude { tau: 1.0 },
            Family::Lasso | Family::ElasticNet => SelectionRule::Nonzero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionRule::Magnitude { tau } if !(tau > 0.0 && tau.is_finite()) => {
                Err(Error::arg(format!("magnitude rule needs tau > 0, got {tau}")))
            }
            _ => Ok(()),
        }
    }

    pub fn selects(&self, coefficient: f64) -> bool {
        match *self {
            SelectionRule::Nonzero => coefficient.abs() > ZERO_TOLERANCE,
            SelectionRule::Magnitude { tau } => coefficient.abs() >= tau,
        }
    }
}

pub fn selection_indicator<'a>(
    coefficients: impl IntoIterator<Item = &'a f64>,
    rule: &SelectionRule,
) -> Vec<bool> {
    coefficients.into_iter().map(|&b| rule.selects(b)).collect()
}

/// Indices (sorted) of coefficients selected by `rule`.
pub fn selected_set<'a>(
    coefficients: impl IntoIterator<Item = &'a f64>,
    rule: &SelectionRule,
) -> Vec<usize> {
    coefficients
        .into_iter()
        .enumerate()
        .filter(|(_, &b)| rule.selects(b))
        .map(|(j, _)| j)
        .collect()
}

fn draw_half(rng: &mut Rng, n: usize) -> Vec<usize> {
    let mut idx = index::sample(rng, n, n / 2).into_vec();
    idx.sort_unstable();
    idx
}

/// `count` independent half-samples of `0..n`, each sorted ascending.
///
/// Subsample `b` is drawn from its own random stream derived from `(seed, b)`.
pub fn subsample_indices(n: usize, count: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n < 2 {
        return Err(Error::arg(format!("subsampling needs n >= 2, got {n}")));
    }
    if count == 0 {
        return Err(Error::arg("at least one subsample is required"));
    }
    Ok((0..count)
        .map(|b| draw_half(&mut stream_rng(seed, b as u64), n))
        .collect())
}

/// Everything that parameterizes a stability-selection run besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityParams {
    /// Family plus any fixed parameter (the elastic net's `λ2`); the grid supplies the rest.
    pub penalty: PenaltySpec,
    pub grid: Vec<f64>,
    pub subsamples: usize,
    pub seed: u64,
    pub rule: SelectionRule,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult {
    pub lambdas: Vec<f64>,
    /// `counts[k][l]`: subsamples selecting variable `k` at `lambdas[l]`.
    pub counts: Vec<Vec<u32>>,
    pub subsample_count: usize,
    /// Draws rejected because the half-sample had no events.
    pub redraws: usize,
    /// Path fits that hit the iteration cap.
    pub unconverged_fits: usize,
    pub threshold: Option<f64>,
    pub stable_set: Option<Vec<usize>>,
}

impl StabilityResult {
    pub fn p(&self) -> usize {
        self.counts.len()
    }

    pub fn probability(&self, variable: usize, lambda_index: usize) -> f64 {
        f64::from(self.counts[variable][lambda_index]) / self.subsample_count as f64
    }

    /// `p × |Λ|` selection probabilities.
    pub fn probabilities(&self) -> Vec<Vec<f64>> {
        (0..self.p())
            .map(|k| (0..self.lambdas.len()).map(|l| self.probability(k, l)).collect())
            .collect()
    }

    /// `max_λ Π̂_k^λ` for every variable.
    pub fn max_per_variable(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|row| {
                let m = row.iter().copied().max().unwrap_or(0);
                f64::from(m) / self.subsample_count as f64
            })
            .collect()
    }

    /// Records the stable set at `threshold`.
    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        self.stable_set = Some(stable_set(&self, threshold)?);
        self.threshold = Some(threshold);
        Ok(self)
    }
}

/// `{k : max_λ Π̂_k^λ ≥ threshold}`, sorted.
pub fn stable_set(result: &StabilityResult, threshold: f64) -> Result<Vec<usize>> {
    check_threshold(threshold)?;
    Ok(stable_from_maxima(&result.max_per_variable(), threshold))
}

pub fn stable_from_maxima(maxima: &[f64], threshold: f64) -> Vec<usize> {
    maxima
        .iter()
        .enumerate()
        .filter(|(_, &m)| m >= threshold)
        .map(|(k, _)| k)
        .collect()
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::arg(format!(
            "threshold must lie strictly between 0 and 1, got {threshold}"
        )));
    }
    Ok(())
}

/// Selection mask per grid point (`[l][k]`) for one subsample given by sorted positions.
pub fn subsample_selection(
    data: &OrderedSurvivalData,
    positions: &[usize],
    params: &StabilityParams,
) -> Result<(Vec<Vec<bool>>, usize)> {
    let sub = data.subset(positions)?;
    let design = transform(&sub, &km_weights(&sub))?;
    let path = fit_path(&design, &params.grid, &params.penalty, &params.solver)?;
    let masks = (0..path.len())
        .map(|l| selection_indicator(path.coefficients.row(l).iter(), &params.rule))
        .collect();
    let unconverged = path.converged.iter().filter(|&&c| !c).count();
    Ok((masks, unconverged))
}

/// Estimates selection probabilities over `params.subsamples` half-samples.
///
/// Half-samples without any event are redrawn from the same stream. More than
/// `100 · B` draws in total is reported as degenerate censoring. Fits run in parallel
/// when the `parallel` feature is on; the result does not depend on scheduling.
pub fn selection_probabilities(
    data: &OrderedSurvivalData,
    params: &StabilityParams,
) -> Result<StabilityResult> {
    validate_grid(&params.grid)?;
    params.rule.validate()?;
    let n = data.len();
    let b_count = params.subsamples;
    if b_count == 0 {
        return Err(Error::arg("at least one subsample is required"));
    }
    if n < 2 {
        return Err(Error::arg(format!("subsampling needs n >= 2, got {n}")));
    }

    let events = data.events();
    let cap = REDRAW_FACTOR * b_count;
    let mut attempts = 0usize;
    let mut subsamples = Vec::with_capacity(b_count);
    for b in 0..b_count {
        let mut rng = stream_rng(params.seed, b as u64);
        loop {
            attempts += 1;
            if attempts > cap {
                return Err(Error::Degenerate(format!(
                    "no events in {} half-sample draws (cap {cap}); censoring is too heavy for n = {n}",
                    attempts - 1
                )));
            }
            let draw = draw_half(&mut rng, n);
            if draw.iter().any(|&i| events[i]) {
                subsamples.push(draw);
                break;
            }
        }
    }

    let per_subsample = par::map_indexed(b_count, |b| {
        subsample_selection(data, &subsamples[b], params)
    });

    let p = data.p();
    let mut counts = vec![vec![0u32; params.grid.len()]; p];
    let mut unconverged_fits = 0;
    for res in per_subsample {
        let (masks, unconverged) = res?;
        unconverged_fits += unconverged;
        for (l, mask) in masks.iter().enumerate() {
            for (k, &sel) in mask.iter().enumerate() {
                if sel {
                    counts[k][l] += 1;
                }
            }
        }
    }

    Ok(StabilityResult {
        lambdas: params.grid.clone(),
        counts,
        subsample_count: b_count,
        redraws: attempts - b_count,
        unconverged_fits,
        threshold: None,
        stable_set: None,
    })
}
