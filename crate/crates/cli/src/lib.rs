//! Command implementations behind the `aftstab` binary.
//!
//! Each `cmd_*` function takes parsed arguments, writes its output files and returns the
//! report it wrote. `main.rs` only parses flags and maps errors onto exit codes.

pub mod args;
pub mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aftstab::benchmark::{
    cv_fit, prepare, run_benchmark, stability_params, BenchmarkConfig, SelectionSettings,
    StabilityGrid, VERSION,
};
use aftstab::simgen::{generate_aft, SimConfig};
use aftstab::solvers::{fit, Family, PenaltySpec};
use aftstab::stability::{selected_set, selection_probabilities};
use aftstab::survival::{load_csv, write_csv, CategoricalColumn, CsvSchema, SurvivalDataset};
use serde::{Deserialize, Serialize};

pub use args::{BenchmarkArgs, FitArgs, SchemaArgs, SimulateArgs, StabselArgs};
use report::{
    BenchmarkFile, CvReport, FitReport, NamedValue, SimulationManifest, StabselReport,
};

/// Exit status for usage and validation problems.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for data degeneracy and runtime failures.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<aftstab::Error> for CliError {
    fn from(e: aftstab::Error) -> Self {
        let code = if e.is_data_degeneracy() {
            EXIT_RUNTIME
        } else {
            EXIT_USAGE
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("reports serialize");
    out.push(b'\n');
    out
}

/// Writes pretty JSON to `path`, or to stdout when `path` is `None`.
fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let bytes = to_json(value);
    match path {
        Some(p) => write_file(p, &bytes),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::runtime(e.to_string())),
    }
}

impl SchemaArgs {
    pub fn to_schema(&self) -> CliResult<CsvSchema> {
        let categorical = self
            .categorical
            .iter()
            .map(|spec| {
                let (column, levels) = spec.split_once(':').ok_or_else(|| {
                    CliError::usage(format!(
                        "--categorical expects COLUMN:LEVEL1,LEVEL2,..., got `{spec}`"
                    ))
                })?;
                Ok(CategoricalColumn {
                    column: column.to_string(),
                    levels: levels.split(',').map(str::to_string).collect(),
                })
            })
            .collect::<CliResult<_>>()?;
        Ok(CsvSchema {
            time_column: self.time_col.clone(),
            status_column: self.status_col.clone(),
            covariates: self
                .covariates
                .as_ref()
                .map(|c| c.split(',').map(str::to_string).collect()),
            categorical,
        })
    }
}

pub fn load_dataset(path: &Path, schema: &SchemaArgs) -> CliResult<SurvivalDataset> {
    let schema = schema.to_schema()?;
    let ds = load_csv(path, &schema)?;
    if ds.records.is_empty() {
        return Err(CliError::usage(format!("{}: no data rows", path.display())));
    }
    Ok(ds)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<SimulationManifest> {
    let config = SimConfig {
        n: args.n,
        p: args.p,
        q: args.q,
        beta_value: args.beta,
        beta0: args.beta0,
        sigma: args.sigma,
        r: args.r,
        target_censoring: args.censoring,
        censoring_scale: args.censoring_scale.into(),
        c_max: args.c_max,
        seed: args.seed,
    };
    let sim = generate_aft(&config, args.seed)?;
    let manifest = SimulationManifest {
        command: "simulate".into(),
        version: VERSION.into(),
        config,
        c_max: sim.c_max,
        realized_censoring: sim.realized_censoring,
        true_support: sim.true_support.iter().map(|&j| j + 1).collect(),
        data_file: args.out.display().to_string(),
    };

    let mut csv = Vec::new();
    let preamble = vec![format!(
        "aftstab {VERSION} simulate {}",
        serde_json::to_string(&manifest.config).expect("config serializes")
    )];
    write_csv(&mut csv, &sim.dataset, &preamble)?;
    write_file(&args.out, &csv)?;
    write_file(&manifest_path(args), &to_json(&manifest))?;
    Ok(manifest)
}

pub fn manifest_path(args: &SimulateArgs) -> PathBuf {
    args.manifest
        .clone()
        .unwrap_or_else(|| args.out.with_extension("manifest.json"))
}

fn selection_settings(
    grid_count: usize,
    grid_ratio: f64,
    tau: f64,
    folds: usize,
    enet_l2_ratio: f64,
) -> SelectionSettings {
    SelectionSettings {
        grid_count,
        grid_ratio,
        tau,
        cv_folds: folds,
        enet_l2_ratio,
        ..Default::default()
    }
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<FitReport> {
    let family: Family = args.method.parse()?;
    let data = load_dataset(&args.data, &args.schema)?;
    let prepared = prepare(&data.records)?;
    let settings = selection_settings(
        args.grid_count,
        args.grid_ratio,
        args.tau,
        args.folds,
        args.enet_l2_ratio,
    );
    settings.validate()?;
    let rule = settings.rule(family);

    let (penalty, cv) = if args.cv {
        let cv = cv_fit(&prepared, family, &settings, args.seed)?;
        let report = CvReport {
            folds: args.folds,
            seed: args.seed,
            grid: cv.grid.clone(),
            selected_index: cv.lambda_index,
            selected_lambda: cv.grid[cv.lambda_index],
        };
        (cv.penalty, Some(report))
    } else {
        let penalty = match family {
            Family::Lasso => PenaltySpec::lasso(
                args.lambda1
                    .ok_or_else(|| CliError::usage("lasso needs --lambda1 or --cv"))?,
            )?,
            Family::Ridge => PenaltySpec::ridge(
                args.lambda2
                    .ok_or_else(|| CliError::usage("ridge needs --lambda2 or --cv"))?,
            )?,
            Family::ElasticNet => PenaltySpec::elastic_net(
                args.lambda1
                    .ok_or_else(|| CliError::usage("enet needs --lambda1 or --cv"))?,
                args.lambda2.unwrap_or(0.0),
            )?,
        };
        (penalty, None)
    };

    let res = fit(&prepared.design, &penalty, &settings.solver, None)?;
    let intercept = aftstab::swls::recover_intercept(&res.coefficients, &prepared.design)?;
    let coefficients: Vec<f64> = res.coefficients.iter().copied().collect();
    let selected = selected_set(&coefficients, &rule);

    let report = FitReport {
        command: "fit".into(),
        version: VERSION.into(),
        data_file: args.data.display().to_string(),
        method: family,
        n: prepared.ordered.len(),
        events: prepared.ordered.event_count(),
        penalty,
        cv,
        lambda_max: prepared.lambda_max,
        intercept,
        coefficients: named(&data.covariate_names, &coefficients),
        converged: res.converged,
        iterations: res.iterations,
        kkt_residual: penalty.kkt_residual(&prepared.design, &res.coefficients),
        rule,
        selected: selected.iter().map(|&j| data.covariate_names[j].clone()).collect(),
    };
    emit_json(&report, args.out.as_deref())?;
    Ok(report)
}

fn named(names: &[String], values: &[f64]) -> Vec<NamedValue> {
    names
        .iter()
        .zip(values)
        .map(|(name, &value)| NamedValue {
            name: name.clone(),
            value,
        })
        .collect()
}

pub fn cmd_stabsel(args: &StabselArgs) -> CliResult<StabselReport> {
    let family: Family = args.method.parse()?;
    let data = load_dataset(&args.data, &args.schema)?;
    let prepared = prepare(&data.records)?;
    let settings = SelectionSettings {
        subsamples: args.subsamples,
        threshold: args.threshold,
        stability_grid: if args.full_grid {
            StabilityGrid::Full
        } else {
            StabilityGrid::DownToCv
        },
        ..selection_settings(
            args.grid_count,
            args.grid_ratio,
            args.tau,
            args.folds,
            args.enet_l2_ratio,
        )
    };
    settings.validate()?;

    let params = stability_params(&prepared, family, &settings, args.seed)?;
    let result = selection_probabilities(&prepared.ordered, &params)?.with_threshold(args.threshold)?;
    let names = &data.covariate_names;
    let stable = result.stable_set.clone().unwrap_or_default();

    let report = StabselReport {
        command: "stabsel".into(),
        version: VERSION.into(),
        data_file: args.data.display().to_string(),
        method: family,
        n: prepared.ordered.len(),
        events: prepared.ordered.event_count(),
        seed: args.seed,
        settings,
        penalty: params.penalty,
        rule: params.rule,
        lambdas: result.lambdas.clone(),
        subsamples: result.subsample_count,
        redraws: result.redraws,
        unconverged_fits: result.unconverged_fits,
        threshold: args.threshold,
        max_probability: named(names, &result.max_per_variable()),
        probabilities: result.probabilities(),
        stable_set: stable.iter().map(|&j| names[j].clone()).collect(),
        stable_indices: stable.iter().map(|&j| j + 1).collect(),
        variables: names.clone(),
    };

    let table_config = serde_json::json!({
        "data_file": report.data_file,
        "method": family,
        "seed": args.seed,
        "settings": report.settings,
    });
    let mut table = report::csv_with_preamble("stabsel", &table_config);
    table
        .write_record(["variable", "lambdaIndex", "lambda", "probability"])
        .map_err(|e| CliError::runtime(e.to_string()))?;
    for (k, name) in names.iter().enumerate() {
        for (l, &lambda) in result.lambdas.iter().enumerate() {
            table
                .write_record([
                    name.clone(),
                    (l + 1).to_string(),
                    format!("{lambda:?}"),
                    format!("{:?}", result.probability(k, l)),
                ])
                .map_err(|e| CliError::runtime(e.to_string()))?;
        }
    }
    let table = table
        .into_inner()
        .map_err(|e| CliError::runtime(e.to_string()))?;

    emit_json(&report, args.report.as_deref())?;
    if let Some(path) = &args.table {
        write_file(path, &table)?;
    }
    Ok(report)
}

/// Benchmark config file: the library config plus where to write results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfigFile {
    #[serde(flatten)]
    pub config: BenchmarkConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

pub fn read_benchmark_config(path: &Path) -> CliResult<BenchmarkConfigFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: invalid benchmark config: {e}", path.display())))
}

/// Files written by [`cmd_benchmark`], relative to the output directory.
pub const BENCHMARK_RESULTS_JSON: &str = "results.json";
pub const BENCHMARK_RESULTS_CSV: &str = "results.csv";
pub const BENCHMARK_FREQUENCIES_CSV: &str = "selection_frequencies.csv";
pub const BENCHMARK_TIMINGS_JSON: &str = "timings.json";

pub fn cmd_benchmark(args: &BenchmarkArgs) -> CliResult<BenchmarkFile> {
    let file = read_benchmark_config(&args.config)?;
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| file.output_dir.clone())
        .ok_or_else(|| CliError::usage("benchmark needs --out-dir or output_dir in the config"))?;
    file.config.validate()?;

    let start = Instant::now();
    let output = run_benchmark(&file.config)?;
    let total_seconds = start.elapsed().as_secs_f64();

    let results = BenchmarkFile {
        command: "benchmark".into(),
        version: VERSION.into(),
        config: file.config.clone(),
        records: output.records.clone(),
    };
    write_file(&out_dir.join(BENCHMARK_RESULTS_JSON), &to_json(&results))?;
    write_file(
        &out_dir.join(BENCHMARK_RESULTS_CSV),
        &report::results_csv(&results)?,
    )?;
    write_file(
        &out_dir.join(BENCHMARK_FREQUENCIES_CSV),
        &report::frequencies_csv(&results)?,
    )?;
    let timings = report::TimingsFile {
        total_seconds,
        threads: rayon::current_num_threads(),
        cells: output.timings,
    };
    write_file(&out_dir.join(BENCHMARK_TIMINGS_JSON), &to_json(&timings))?;
    Ok(results)
}
