//! Right-censored survival records, time ordering and Kaplan–Meier weights.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed subject: follow-up time, event indicator and covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    /// Observed time `min(T, C)` on the original (positive) scale.
    pub time: f64,
    /// `true` when the event was observed, `false` when censored.
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            covariates,
        }
    }
}

/// Records sorted by log-time, with the design matrix row-aligned to the order.
///
/// Ties in time place events before censorings, then fall back to the original
/// index, so the order is total and stable.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSurvivalData {
    times: Vec<f64>,
    log_times: Vec<f64>,
    events: Vec<bool>,
    design: DMatrix<f64>,
    permutation: Vec<usize>,
}

impl OrderedSurvivalData {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn log_times(&self) -> &[f64] {
        &self.log_times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// `permutation()[k]` is the original index of the record at sorted position `k`.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Records in sorted order.
    pub fn records(&self) -> Vec<SurvivalRecord> {
        (0..self.len())
            .map(|i| SurvivalRecord {
                time: self.times[i],
                event: self.events[i],
                covariates: self.design.row(i).iter().copied().collect(),
            })
            .collect()
    }

    /// Restricts to the given sorted positions and re-orders the result.
    ///
    /// The returned permutation indexes into `positions`, not into the original data.
    pub fn subset(&self, positions: &[usize]) -> Result<Self> {
        let records: Vec<SurvivalRecord> = positions
            .iter()
            .map(|&k| {
                if k >= self.len() {
                    return Err(Error::arg(format!(
                        "subset position {k} out of range for n = {}",
                        self.len()
                    )));
                }
                Ok(SurvivalRecord {
                    time: self.times[k],
                    event: self.events[k],
                    covariates: self.design.row(k).iter().copied().collect(),
                })
            })
            .collect::<Result<_>>()?;
        order_by_time(&records)
    }
}

/// Sorts records by time (natural log scale) and validates them.
pub fn order_by_time(records: &[SurvivalRecord]) -> Result<OrderedSurvivalData> {
    let first = records
        .first()
        .ok_or_else(|| Error::arg("cannot order an empty record list"))?;
    let p = first.covariates.len();
    for (i, r) in records.iter().enumerate() {
        if !(r.time > 0.0 && r.time.is_finite()) {
            return Err(Error::Validation {
                row: i + 1,
                message: format!("time must be positive and finite, got {}", r.time),
            });
        }
        if r.covariates.len() != p {
            return Err(Error::Validation {
                row: i + 1,
                message: format!("expected {p} covariates, got {}", r.covariates.len()),
            });
        }
    }

    let mut permutation: Vec<usize> = (0..records.len()).collect();
    // events (true) sort before censorings at equal times
    permutation.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        ra.time
            .total_cmp(&rb.time)
            .then_with(|| rb.event.cmp(&ra.event))
            .then_with(|| a.cmp(&b))
    });

    let n = records.len();
    let times: Vec<f64> = permutation.iter().map(|&i| records[i].time).collect();
    let log_times = times.iter().map(|t| t.ln()).collect();
    let events = permutation.iter().map(|&i| records[i].event).collect();
    let design = DMatrix::from_fn(n, p, |row, col| records[permutation[row]].covariates[col]);

    Ok(OrderedSurvivalData {
        times,
        log_times,
        events,
        design,
        permutation,
    })
}

/// Kaplan–Meier weights aligned to an [`OrderedSurvivalData`].
#[derive(Debug, Clone, PartialEq)]
pub struct KmWeights(Vec<f64>);

impl KmWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Kaplan–Meier weights by the closed-form recursion
///
/// ```text
/// w_1 = δ_(1) / n
/// w_i = δ_(i) / (n - i + 1) · Π_{j<i} ((n - j) / (n - j + 1))^{δ_(j)}
/// ```
///
/// Censored observations get weight exactly zero.
pub fn km_weights(data: &OrderedSurvivalData) -> KmWeights {
    let n = data.len();
    let mut weights = Vec::with_capacity(n);
    let mut survivor = 1.0;
    for (idx, &event) in data.events().iter().enumerate() {
        // idx is i - 1 in 1-based notation, so n - i + 1 == n - idx
        let at_risk = (n - idx) as f64;
        if event {
            weights.push(survivor / at_risk);
            survivor *= (at_risk - 1.0) / at_risk;
        } else {
            weights.push(0.0);
        }
    }
    KmWeights(weights)
}

/// Product-limit survival estimate as a right-continuous step function.
#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    /// Distinct observed times (original scale), ascending.
    pub times: Vec<f64>,
    /// Survival probability just after each entry of `times`.
    pub survival: Vec<f64>,
    /// Drop in survival attributed to each ordered observation. Tied events share
    /// their time's drop equally; censored observations get zero.
    pub observation_jumps: Vec<f64>,
}

impl KmCurve {
    /// `S(t)`: 1 before the first time, constant between steps.
    pub fn eval(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => 1.0,
            k => self.survival[k - 1],
        }
    }
}

/// Standard product-limit estimator over distinct times, `S(t) = Π (1 - d_t / m_t)`.
pub fn km_survival_curve(data: &OrderedSurvivalData) -> KmCurve {
    let n = data.len();
    let times = data.times();
    let events = data.events();

    let mut curve = KmCurve {
        times: Vec::new(),
        survival: Vec::new(),
        observation_jumps: vec![0.0; n],
    };
    let mut s = 1.0;
    let mut start = 0;
    while start < n {
        let t = times[start];
        let end = start + times[start..].iter().take_while(|&&x| x == t).count();
        let at_risk = (n - start) as f64;
        let deaths = events[start..end].iter().filter(|&&e| e).count();
        let next = s * (1.0 - deaths as f64 / at_risk);
        if deaths > 0 {
            let share = (s - next) / deaths as f64;
            for (jump, _) in curve.observation_jumps[start..end]
                .iter_mut()
                .zip(&events[start..end])
                .filter(|(_, &e)| e)
            {
                *jump = share;
            }
        }
        s = next;
        curve.times.push(t);
        curve.survival.push(s);
        start = end;
    }
    curve
}

/// Encoding for a categorical column: each listed level maps to its position (0, 1, 2, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub column: String,
    pub levels: Vec<String>,
}

/// How CSV columns map onto a survival dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Defaults to `time`.
    pub time_column: Option<String>,
    /// Defaults to `status`, falling back to `event`.
    pub status_column: Option<String>,
    /// Covariate columns in the order to use. `None` takes every other column in header order.
    pub covariates: Option<Vec<String>>,
    pub categorical: Vec<CategoricalColumn>,
}

/// Records plus the covariate names they were read under.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    pub covariate_names: Vec<String>,
    pub records: Vec<SurvivalRecord>,
}

impl SurvivalDataset {
    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let position = |name: &str| header.iter().position(|h| h == name);

    let time_name = schema.time_column.as_deref().unwrap_or("time");
    let time_idx =
        position(time_name).ok_or_else(|| Error::Schema(format!("no time column `{time_name}`")))?;
    let status_idx = match schema.status_column.as_deref() {
        Some(name) => {
            position(name).ok_or_else(|| Error::Schema(format!("no status column `{name}`")))?
        }
        None => position("status")
            .or_else(|| position("event"))
            .ok_or_else(|| Error::Schema("no status column (`status` or `event`)".into()))?,
    };

    let covariate_idx: Vec<usize> = match &schema.covariates {
        Some(names) => names
            .iter()
            .map(|n| position(n).ok_or_else(|| Error::Schema(format!("no covariate column `{n}`"))))
            .collect::<Result<_>>()?,
        None => (0..header.len())
            .filter(|&i| i != time_idx && i != status_idx)
            .collect(),
    };
    if covariate_idx.is_empty() {
        return Err(Error::Schema("at least one covariate column is required".into()));
    }
    if covariate_idx.contains(&time_idx) || covariate_idx.contains(&status_idx) {
        return Err(Error::Schema(
            "time/status columns cannot also be covariates".into(),
        ));
    }

    let mut encodings: HashMap<usize, &CategoricalColumn> = HashMap::new();
    for cat in &schema.categorical {
        let idx = position(&cat.column)
            .ok_or_else(|| Error::Schema(format!("no categorical column `{}`", cat.column)))?;
        if !covariate_idx.contains(&idx) {
            return Err(Error::Schema(format!(
                "categorical column `{}` is not a covariate",
                cat.column
            )));
        }
        encodings.insert(idx, cat);
    }

    let mut records = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row_no = k + 1;
        let row = row?;
        let field = |idx: usize| -> Result<&str> {
            match row.get(idx) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(Error::Validation {
                    row: row_no,
                    message: format!("missing value in column `{}`", header[idx]),
                }),
            }
        };
        let number = |idx: usize| -> Result<f64> {
            let raw = field(idx)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Validation {
                    row: row_no,
                    message: format!("column `{}`: `{raw}` is not a finite number", header[idx]),
                })
        };

        let time = number(time_idx)?;
        if time <= 0.0 {
            return Err(Error::Validation {
                row: row_no,
                message: format!("time must be positive, got {time}"),
            });
        }
        let status = number(status_idx)?;
        let event = if status == 1.0 {
            true
        } else if status == 0.0 {
            false
        } else {
            return Err(Error::Validation {
                row: row_no,
                message: format!("status must be 0 or 1, got {status}"),
            });
        };

        let covariates = covariate_idx
            .iter()
            .map(|&idx| match encodings.get(&idx) {
                Some(cat) => {
                    let raw = field(idx)?;
                    cat.levels
                        .iter()
                        .position(|l| l == raw)
                        .map(|code| code as f64)
                        .ok_or_else(|| Error::Validation {
                            row: row_no,
                            message: format!(
                                "column `{}`: unknown level `{raw}`",
                                header[idx]
                            ),
                        })
                }
                None => number(idx),
            })
            .collect::<Result<_>>()?;
        records.push(SurvivalRecord {
            time,
            event,
            covariates,
        });
    }

    Ok(SurvivalDataset {
        covariate_names: covariate_idx.iter().map(|&i| header[i].clone()).collect(),
        records,
    })
}

/// Writes `time,status,<names...>`, the layout [`read_csv`] accepts with the default schema.
///
/// Lines starting with `#` are comments to [`read_csv`]; `preamble` lines are written that way.
pub fn write_csv<W: Write>(mut writer: W, dataset: &SurvivalDataset, preamble: &[String]) -> Result<()> {
    for line in preamble {
        writeln!(writer, "# {line}").map_err(|source| Error::Io {
            path: "<csv writer>".into(),
            source,
        })?;
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_string(), "status".to_string()];
    header.extend(dataset.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for r in &dataset.records {
        let mut row = Vec::with_capacity(r.covariates.len() + 2);
        row.push(format_float(r.time));
        row.push(if r.event { "1" } else { "0" }.to_string());
        row.extend(r.covariates.iter().map(|&x| format_float(x)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
fn format_float(x: f64) -> String {
    format!("{x:?}")
}
