//! JSON and CSV shapes written by the commands.

use aftstab::benchmark::{BenchmarkConfig, CellTiming, ResultRecord, SelectionSettings};
use aftstab::simgen::SimConfig;
use aftstab::solvers::{Family, PenaltySpec};
use aftstab::stability::SelectionRule;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationManifest {
    pub command: String,
    pub version: String,
    pub config: SimConfig,
    pub c_max: Option<f64>,
    pub realized_censoring: f64,
    /// 1-based indices of the covariates with nonzero coefficients.
    pub true_support: Vec<usize>,
    pub data_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    /// 0-based position of the chosen penalty in `grid`.
    pub selected_index: usize,
    pub selected_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub command: String,
    pub version: String,
    pub data_file: String,
    pub method: Family,
    pub n: usize,
    pub events: usize,
    pub penalty: PenaltySpec,
    pub cv: Option<CvReport>,
    pub lambda_max: f64,
    pub intercept: f64,
    pub coefficients: Vec<NamedValue>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest violation of the optimality conditions at the returned coefficients.
    pub kkt_residual: f64,
    pub rule: SelectionRule,
    pub selected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabselReport {
    pub command: String,
    pub version: String,
    pub data_file: String,
    pub method: Family,
    pub n: usize,
    pub events: usize,
    pub seed: u64,
    pub settings: SelectionSettings,
    pub penalty: PenaltySpec,
    pub rule: SelectionRule,
    pub lambdas: Vec<f64>,
    pub subsamples: usize,
    pub redraws: usize,
    pub unconverged_fits: usize,
    pub threshold: f64,
    pub variables: Vec<String>,
    pub max_probability: Vec<NamedValue>,
    /// `probabilities[k][l]` for variable `k` at `lambdas[l]`.
    pub probabilities: Vec<Vec<f64>>,
    pub stable_set: Vec<String>,
    /// 1-based column positions of `stable_set`.
    pub stable_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkFile {
    pub command: String,
    pub version: String,
    pub config: BenchmarkConfig,
    pub records: Vec<ResultRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingsFile {
    pub total_seconds: f64,
    pub threads: usize,
    pub cells: Vec<CellTiming>,
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::runtime(e.to_string())
}

/// Starts a CSV buffer with a `#` comment line holding `config` as JSON.
pub fn csv_with_preamble<T: Serialize>(label: &str, config: &T) -> csv::Writer<Vec<u8>> {
    let line = format!(
        "# aftstab {} {label} {}\n",
        aftstab::benchmark::VERSION,
        serde_json::to_string(config).expect("config serializes")
    );
    csv::Writer::from_writer(line.into_bytes())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn results_csv(file: &BenchmarkFile) -> CliResult<Vec<u8>> {
    let mut w = csv_with_preamble("benchmark", &file.config);
    w.write_record([
        "scenarioId",
        "methodId",
        "status",
        "replicates",
        "falsePositiveRate",
        "falseNegativeRate",
        "meanRealizedCensoring",
        "seed",
        "version",
    ])
    .map_err(csv_err)?;
    for r in &file.records {
        w.write_record([
            r.scenario_id.clone(),
            r.method_id.clone(),
            r.status.clone(),
            r.replicates.to_string(),
            opt(r.false_positive_rate),
            opt(r.false_negative_rate),
            format!("{:?}", r.mean_realized_censoring),
            r.seed.to_string(),
            r.version.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(csv_err)
}

pub fn frequencies_csv(file: &BenchmarkFile) -> CliResult<Vec<u8>> {
    let mut w = csv_with_preamble("benchmark", &file.config);
    w.write_record(["scenarioId", "methodId", "variable", "frequency"])
        .map_err(csv_err)?;
    for r in &file.records {
        for (j, f) in r.selection_frequency.iter().enumerate() {
            w.write_record([
                r.scenario_id.clone(),
                r.method_id.clone(),
                format!("x{}", j + 1),
                format!("{f:?}"),
            ])
            .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(csv_err)
}
