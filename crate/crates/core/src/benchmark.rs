//! Replicate driver comparing penalized AFT fits with and without stability selection.
//!
//! For every scenario the driver draws `replicates` datasets and runs each configured
//! method on the same draws. A method without stability selection is one full-data fit at
//! the cross-validated penalty; with stability selection it is the stable set from
//! half-sample selection probabilities. Each cell reports mean `F+`/`F−` and
//! per-variable selection frequencies across replicates.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{aggregate_runs, RunAggregate};
use crate::par;
use crate::rng::derive_seed;
use crate::simgen::{generate_with_bound, resolve_c_max, CensoringScale, SimConfig};
use crate::solvers::{
    cross_validate, fit, geometric_grid, lambda_max, Family, PenaltySpec, SolverOptions,
};
use crate::stability::{
    check_threshold, selected_set, selection_probabilities, SelectionRule, StabilityParams,
    DEFAULT_SUBSAMPLES, DEFAULT_THRESHOLD,
};
use crate::survival::{km_weights, order_by_time, OrderedSurvivalData, SurvivalRecord};
use crate::swls::{transform, WeightedDesign};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const STREAM_CV: u64 = 1;
const STREAM_SUBSAMPLES: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    /// Defaults to a label built from the other fields.
    pub id: Option<String>,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub r: f64,
    pub target_censoring: f64,
    pub replicates: usize,
    pub beta_value: f64,
    pub beta0: f64,
    pub sigma: f64,
    pub censoring_scale: CensoringScale,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            id: None,
            n: 50,
            p: 20,
            q: 6,
            r: 0.0,
            target_censoring: 0.3,
            replicates: 100,
            beta_value: 5.0,
            beta0: 0.0,
            sigma: 1.0,
            censoring_scale: CensoringScale::Time,
        }
    }
}

impl Scenario {
    pub fn label(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| format!("p{}_q{}_n{}_r{}", self.p, self.q, self.n, self.r))
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            n: self.n,
            p: self.p,
            q: self.q,
            beta_value: self.beta_value,
            beta0: self.beta0,
            sigma: self.sigma,
            r: self.r,
            target_censoring: self.target_censoring,
            censoring_scale: self.censoring_scale,
            c_max: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub family: Family,
    pub stability: bool,
}

impl MethodSpec {
    pub fn label(&self) -> String {
        let arm = if self.stability { "with" } else { "without" };
        format!("{}_{arm}_stability", self.family)
    }

    /// Lasso, ridge, elastic net, each without then with stability selection.
    pub fn table_order() -> Vec<MethodSpec> {
        Family::ALL
            .iter()
            .flat_map(|&family| {
                [false, true].map(|stability| MethodSpec { family, stability })
            })
            .collect()
    }
}

/// Which part of the full-data grid the stability arm maximizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityGrid {
    /// Every grid point, down to `grid_ratio · λ_max`.
    Full,
    /// Grid points no smaller than the full-data cross-validated penalty.
    #[default]
    DownToCv,
}

/// Knobs shared by the single-fit and stability-selection arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionSettings {
    /// Subsamples per stability run.
    pub subsamples: usize,
    pub threshold: f64,
    pub grid_count: usize,
    /// Smallest grid value as a fraction of `λ_max`.
    pub grid_ratio: f64,
    /// Magnitude cutoff for ridge selections.
    pub tau: f64,
    pub cv_folds: usize,
    /// Elastic-net `λ2` as a fraction of `λ_max` of the full-data design.
    pub enet_l2_ratio: f64,
    pub stability_grid: StabilityGrid,
    pub solver: SolverOptions,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            subsamples: DEFAULT_SUBSAMPLES,
            threshold: DEFAULT_THRESHOLD,
            grid_count: 50,
            grid_ratio: 0.01,
            tau: 1.0,
            cv_folds: 5,
            enet_l2_ratio: 0.01,
            stability_grid: StabilityGrid::DownToCv,
            solver: SolverOptions::default(),
        }
    }
}

impl SelectionSettings {
    pub fn validate(&self) -> Result<()> {
        if self.subsamples == 0 {
            return Err(Error::arg("subsamples must be >= 1"));
        }
        check_threshold(self.threshold)?;
        if self.grid_count < 2 || !(self.grid_ratio > 0.0 && self.grid_ratio < 1.0) {
            return Err(Error::arg("grid needs count >= 2 and ratio in (0, 1)"));
        }
        if self.cv_folds < 2 {
            return Err(Error::arg("cv_folds must be >= 2"));
        }
        if !(self.enet_l2_ratio >= 0.0) {
            return Err(Error::arg("enet_l2_ratio must be >= 0"));
        }
        SelectionRule::Magnitude { tau: self.tau }.validate()
    }

    pub fn rule(&self, family: Family) -> SelectionRule {
        match family {
            Family::Ridge => SelectionRule::Magnitude { tau: self.tau },
            _ => SelectionRule::Nonzero,
        }
    }
}

/// Full-data quantities every method needs.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub ordered: OrderedSurvivalData,
    pub design: WeightedDesign,
    pub lambda_max: f64,
}

pub fn prepare(records: &[SurvivalRecord]) -> Result<PreparedData> {
    let ordered = order_by_time(records)?;
    let design = transform(&ordered, &km_weights(&ordered))?;
    let lambda_max = lambda_max(&design)?;
    Ok(PreparedData {
        ordered,
        design,
        lambda_max,
    })
}

impl PreparedData {
    pub fn grid(&self, settings: &SelectionSettings) -> Result<Vec<f64>> {
        geometric_grid(self.lambda_max, settings.grid_count, settings.grid_ratio)
    }

    /// Penalty template for a family: the elastic net's `λ2` is fixed relative to `λ_max`.
    pub fn penalty(&self, family: Family, settings: &SelectionSettings) -> PenaltySpec {
        let lambda2 = match family {
            Family::ElasticNet => settings.enet_l2_ratio * self.lambda_max,
            _ => 0.0,
        };
        PenaltySpec {
            family,
            lambda1: 0.0,
            lambda2,
        }
    }
}

/// Single full-data fit at the cross-validated penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct CvFit {
    pub penalty: PenaltySpec,
    pub grid: Vec<f64>,
    pub lambda_index: usize,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub selected: Vec<usize>,
}

fn cv_choice(
    data: &PreparedData,
    family: Family,
    settings: &SelectionSettings,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    let grid = data.grid(settings)?;
    let folds = settings.cv_folds.min(data.design.rows());
    if folds < 2 {
        return Err(Error::Degenerate(format!(
            "only {} uncensored rows; cross-validation impossible",
            data.design.rows()
        )));
    }
    let template = data.penalty(family, settings);
    let cv = cross_validate(
        &data.design,
        &grid,
        &template,
        folds,
        derive_seed(seed, STREAM_CV),
        &settings.solver,
    )?;
    Ok((grid, cv.index))
}

pub fn cv_fit(
    data: &PreparedData,
    family: Family,
    settings: &SelectionSettings,
    seed: u64,
) -> Result<CvFit> {
    let (grid, index) = cv_choice(data, family, settings, seed)?;
    let penalty = data.penalty(family, settings).at(grid[index]);
    let res = fit(&data.design, &penalty, &settings.solver, None)?;
    let coefficients: Vec<f64> = res.coefficients.iter().copied().collect();
    let selected = selected_set(&coefficients, &settings.rule(family));
    Ok(CvFit {
        penalty,
        grid,
        lambda_index: index,
        coefficients,
        converged: res.converged,
        selected,
    })
}

/// Stability-selection inputs for one dataset. With [`StabilityGrid::DownToCv`] the grid is
/// cut after the full-data cross-validated penalty (same folds as [`cv_fit`] with this seed).
pub fn stability_params(
    data: &PreparedData,
    family: Family,
    settings: &SelectionSettings,
    seed: u64,
) -> Result<StabilityParams> {
    let grid = match settings.stability_grid {
        StabilityGrid::Full => data.grid(settings)?,
        StabilityGrid::DownToCv => {
            let (mut grid, index) = cv_choice(data, family, settings, seed)?;
            grid.truncate(index + 1);
            grid
        }
    };
    Ok(StabilityParams {
        penalty: data.penalty(family, settings),
        grid,
        subsamples: settings.subsamples,
        seed: derive_seed(seed, STREAM_SUBSAMPLES),
        rule: settings.rule(family),
        solver: settings.solver,
    })
}

/// Variables chosen by one method on one dataset.
pub fn select(
    data: &PreparedData,
    method: MethodSpec,
    settings: &SelectionSettings,
    seed: u64,
) -> Result<Vec<usize>> {
    if method.stability {
        let params = stability_params(data, method.family, settings, seed)?;
        let result = selection_probabilities(&data.ordered, &params)?;
        crate::stability::stable_set(&result, settings.threshold)
    } else {
        Ok(cv_fit(data, method.family, settings, seed)?.selected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub scenarios: Vec<Scenario>,
    pub methods: Vec<MethodSpec>,
    pub settings: SelectionSettings,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            scenarios: vec![Scenario::default()],
            methods: MethodSpec::table_order(),
            settings: SelectionSettings::default(),
            seed: 1,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.methods.is_empty() {
            return Err(Error::arg("benchmark needs at least one scenario and one method"));
        }
        for s in &self.scenarios {
            if s.replicates == 0 {
                return Err(Error::arg(format!("scenario {}: replicates must be >= 1", s.label())));
            }
            s.sim_config(0).validate()?;
        }
        self.settings.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario_id: String,
    pub method_id: String,
    pub family: Family,
    pub stability: bool,
    /// `"ok"` or `"failed: <reason>"`.
    pub status: String,
    pub replicates: usize,
    pub false_positive_rate: Option<f64>,
    pub false_negative_rate: Option<f64>,
    pub selection_frequency: Vec<f64>,
    pub mean_realized_censoring: f64,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub scenario_id: String,
    pub method_id: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub records: Vec<ResultRecord>,
    /// Wall time per cell, kept apart from `records` so those stay reproducible.
    pub timings: Vec<CellTiming>,
}

pub fn scenario_seed(seed: u64, scenario: usize) -> u64 {
    derive_seed(seed, scenario as u64)
}

pub fn replicate_seed(scenario_seed: u64, replicate: usize) -> u64 {
    derive_seed(scenario_seed, 1 + replicate as u64)
}

struct ReplicateOutcome {
    realized_censoring: f64,
    selections: Vec<Result<Vec<usize>>>,
    seconds: Vec<f64>,
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    config.validate()?;
    let settings = &config.settings;
    let n_methods = config.methods.len();
    // cells[m][s]
    let mut records: Vec<Vec<Option<ResultRecord>>> = vec![vec![None; config.scenarios.len()]; n_methods];
    let mut timings = vec![vec![0.0; config.scenarios.len()]; n_methods];

    for (s_idx, scenario) in config.scenarios.iter().enumerate() {
        let s_seed = scenario_seed(config.seed, s_idx);
        let sim = scenario.sim_config(s_seed);
        let label = scenario.label();

        let c_max = match resolve_c_max(&sim) {
            Ok(c) => c,
            Err(e) => {
                for (m_idx, &method) in config.methods.iter().enumerate() {
                    records[m_idx][s_idx] = Some(failed_record(&label, method, scenario, config.seed, &e));
                }
                continue;
            }
        };

        let outcomes: Vec<Result<ReplicateOutcome>> = par::map_indexed(scenario.replicates, |rep| {
            let seed = replicate_seed(s_seed, rep);
            let data = generate_with_bound(&sim, c_max, seed)?;
            let prepared = prepare(&data.dataset.records);
            let mut selections = Vec::with_capacity(n_methods);
            let mut seconds = Vec::with_capacity(n_methods);
            for &method in &config.methods {
                let start = Instant::now();
                let sel = match &prepared {
                    Ok(prep) => select(prep, method, settings, seed),
                    Err(e) => Err(Error::Degenerate(e.to_string())),
                };
                seconds.push(start.elapsed().as_secs_f64());
                selections.push(sel);
            }
            Ok(ReplicateOutcome {
                realized_censoring: data.realized_censoring,
                selections,
                seconds,
            })
        });

        let mut realized = 0.0;
        let mut per_method: Vec<Result<Vec<Vec<usize>>>> = (0..n_methods).map(|_| Ok(Vec::new())).collect();
        for outcome in outcomes {
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) => {
                    for slot in per_method.iter_mut() {
                        if slot.is_ok() {
                            *slot = Err(Error::Degenerate(format!("data generation: {e}")));
                        }
                    }
                    continue;
                }
            };
            realized += outcome.realized_censoring;
            for (m_idx, sel) in outcome.selections.into_iter().enumerate() {
                timings[m_idx][s_idx] += outcome.seconds[m_idx];
                match (&mut per_method[m_idx], sel) {
                    (Ok(list), Ok(sel)) => list.push(sel),
                    (slot @ Ok(_), Err(e)) => *slot = Err(e),
                    (Err(_), _) => {}
                }
            }
        }
        let mean_realized = realized / scenario.replicates as f64;

        for (m_idx, &method) in config.methods.iter().enumerate() {
            let record = match &per_method[m_idx] {
                Ok(selections) => match aggregate_runs(selections, &(0..scenario.q).collect::<Vec<_>>(), scenario.p) {
                    Ok(agg) => ok_record(&label, method, scenario, config.seed, agg, mean_realized),
                    Err(e) => failed_record(&label, method, scenario, config.seed, &e),
                },
                Err(e) => failed_record(&label, method, scenario, config.seed, e),
            };
            records[m_idx][s_idx] = Some(record);
        }
    }

    let mut out_records = Vec::new();
    let mut out_timings = Vec::new();
    for (m_idx, method) in config.methods.iter().enumerate() {
        for (s_idx, scenario) in config.scenarios.iter().enumerate() {
            if let Some(r) = records[m_idx][s_idx].take() {
                out_records.push(r);
            }
            out_timings.push(CellTiming {
                scenario_id: scenario.label(),
                method_id: method.label(),
                seconds: timings[m_idx][s_idx],
            });
        }
    }
    Ok(BenchmarkOutput {
        records: out_records,
        timings: out_timings,
    })
}

fn ok_record(
    label: &str,
    method: MethodSpec,
    scenario: &Scenario,
    seed: u64,
    agg: RunAggregate,
    mean_realized: f64,
) -> ResultRecord {
    ResultRecord {
        scenario_id: label.to_string(),
        method_id: method.label(),
        family: method.family,
        stability: method.stability,
        status: "ok".into(),
        replicates: scenario.replicates,
        false_positive_rate: Some(agg.mean_rates.false_positive_rate),
        false_negative_rate: Some(agg.mean_rates.false_negative_rate),
        selection_frequency: agg.selection_frequency,
        mean_realized_censoring: mean_realized,
        seed,
        version: VERSION.into(),
    }
}

fn failed_record(
    label: &str,
    method: MethodSpec,
    scenario: &Scenario,
    seed: u64,
    err: &Error,
) -> ResultRecord {
    ResultRecord {
        scenario_id: label.to_string(),
        method_id: method.label(),
        family: method.family,
        stability: method.stability,
        status: format!("failed: {err}"),
        replicates: scenario.replicates,
        false_positive_rate: None,
        false_negative_rate: None,
        selection_frequency: Vec::new(),
        mean_realized_censoring: f64::NAN,
        seed,
        version: VERSION.into(),
    }
}
