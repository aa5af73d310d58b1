//! Experiment runner: parameter sweeps, time-resolved comparisons against
//! RK4, and CSV output.
//!
//! Errors are absolute, per component, against [`reference_solve`]. The
//! aggregate is `e1` in one dimension and `√(Σ e_i² / d)` otherwise.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;

use crate::ask::{ask_solve, AskConfig};
use crate::error::{Error, Result};
use crate::models::{round_up_to_even, DynamicalSystem};
use crate::reference::{reference_solve, rk4_solve, Rk4Config};

pub const CSV_HEADER: [&str; 10] = ["method", "model", "param_name", "param_value", "t", "e1", "e2", "e3", "agg", "f_calls"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ask,
    Rk4,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ask => "ask",
            Method::Rk4 => "rk4",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ask" => Ok(Method::Ask),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// The swept ASK parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    /// Polynomial order `N`.
    Order,
    /// Check-point count `n`.
    CheckCount,
    /// Neighborhood radius `r`.
    Radius,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Order => "N",
            SweepParam::CheckCount => "n",
            SweepParam::Radius => "r",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "N" => Ok(SweepParam::Order),
            "n" => Ok(SweepParam::CheckCount),
            "r" => Ok(SweepParam::Radius),
            other => Err(Error::InvalidConfig(format!("unknown sweep parameter '{other}' (expected N, n or r)"))),
        }
    }
}

/// One sweep: a model, the swept parameter with its values, and the ASK
/// configuration holding every other parameter fixed (including `γ` and `T`).
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub model: DynamicalSystem,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub fixed: AskConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep value list is empty".into()));
        }
        for &v in &self.values {
            self.config_for(v)?;
        }
        Ok(())
    }

    /// The full configuration for one swept value.
    pub fn config_for(&self, value: f64) -> Result<AskConfig> {
        let mut config = self.fixed;
        match self.param {
            SweepParam::Order => {
                let order = as_count(value, "N")?;
                let even = round_up_to_even(order);
                if even != order {
                    info!("order N = {order} rounded up to {even}");
                }
                config.order = even;
            }
            SweepParam::CheckCount => config.check_count = as_count(value, "n")?,
            SweepParam::Radius => config.radius = value,
        }
        config.validate()?;
        Ok(config)
    }
}

fn as_count(value: f64, name: &str) -> Result<usize> {
    if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(Error::InvalidConfig(format!("{name} must be a non-negative integer, got {value}")))
    }
}

/// One row of output. `failure` is set when the solve for this row failed;
/// its errors are then NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub method: Method,
    pub model: String,
    pub param_name: String,
    pub param_value: f64,
    pub t: f64,
    pub errors: Vec<f64>,
    pub aggregate: f64,
    pub f_calls: Option<u64>,
    pub failure: Option<String>,
}

impl ErrorRecord {
    fn measured(method: Method, model: &str, param: (&str, f64), t: f64, errors: Vec<f64>, f_calls: u64) -> Self {
        Self {
            method,
            model: model.to_string(),
            param_name: param.0.to_string(),
            param_value: param.1,
            t,
            aggregate: aggregate_error(&errors),
            errors,
            f_calls: Some(f_calls),
            failure: None,
        }
    }

    fn failed(method: Method, model: &DynamicalSystem, param: (&str, f64), t: f64, err: &Error) -> Self {
        warn!("{method} on {} with {} = {}: {err}", model.name(), param.0, param.1);
        Self {
            method,
            model: model.name().to_string(),
            param_name: param.0.to_string(),
            param_value: param.1,
            t,
            errors: vec![f64::NAN; model.dim()],
            aggregate: f64::NAN,
            f_calls: None,
            failure: Some(err.to_string()),
        }
    }

    pub fn is_failure(&self) -> bool {
        self.failure.is_some()
    }
}

/// `e1` for one component, `√(Σ e_i² / d)` otherwise.
pub fn aggregate_error(errors: &[f64]) -> f64 {
    match errors {
        [e] => *e,
        _ => (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt(),
    }
}

/// Per-component absolute differences.
pub fn component_errors(state: &[f64], reference: &[f64]) -> Vec<f64> {
    state.iter().zip(reference).map(|(a, b)| (a - b).abs()).collect()
}

/// `count + 1` uniform times `k T / count`, `k = 0..=count`.
pub fn uniform_grid(horizon: f64, count: usize) -> Vec<f64> {
    if count == 0 {
        return vec![horizon];
    }
    (0..=count).map(|k| k as f64 * horizon / count as f64).collect()
}

/// Runs one ASK solve per swept value and measures the error at `T`. Rows
/// come back in the order of `spec.values`; a failed solve yields a marked
/// row and the sweep carries on.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ErrorRecord>> {
    spec.validate()?;
    let horizon = spec.fixed.horizon;
    let reference = reference_solve(&spec.model, &[horizon])?;
    let truth = &reference.states[0];
    let name = spec.param.name();
    let records = spec
        .values
        .par_iter()
        .map(|&value| {
            let config = spec.config_for(value)?;
            Ok(match ask_solve(&spec.model, spec.model.x0(), &config) {
                Ok(sol) => ErrorRecord::measured(
                    Method::Ask,
                    spec.model.name(),
                    (name, value),
                    horizon,
                    component_errors(sol.final_state(), truth),
                    sol.f_calls(),
                ),
                Err(e) => ErrorRecord::failed(Method::Ask, &spec.model, (name, value), horizon, &e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(records)
}

/// Time-resolved errors along `time_grid` for each requested method. ASK is
/// evaluated at the grid times; RK4 is sampled at the node nearest each grid
/// time and the row carries that node's time.
pub fn run_compare(
    system: &DynamicalSystem,
    methods: &[Method],
    time_grid: &[f64],
    ask: &AskConfig,
    rk4_steps: usize,
) -> Result<Vec<ErrorRecord>> {
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods to compare".into()));
    }
    if time_grid.is_empty() {
        return Err(Error::InvalidConfig("empty time grid".into()));
    }
    let horizon = ask.horizon;
    if let Some(&bad) = time_grid.iter().find(|&&t| !(0.0..=horizon).contains(&t)) {
        return Err(Error::TimeOutOfRange { t: bad, horizon });
    }
    ask.validate()?;
    if methods.contains(&Method::Rk4) && rk4_steps == 0 {
        return Err(Error::InvalidConfig("RK4 needs at least one step".into()));
    }

    let node_of = |t: f64| ((t / horizon * rk4_steps as f64).round() as usize).min(rk4_steps);
    let node_time = |m: usize| m as f64 * horizon / rk4_steps as f64;
    let mut times: Vec<f64> = time_grid.to_vec();
    if methods.contains(&Method::Rk4) {
        times.extend(time_grid.iter().map(|&t| node_time(node_of(t))));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let reference = reference_solve(system, &times)?;
    let truth = |t: f64| reference.at(t).expect("reference covers every sampled time");

    let mut records = Vec::new();
    for &method in methods {
        match method {
            Method::Ask => {
                let param = ("N", ask.order as f64);
                match ask_solve(system, system.x0(), ask) {
                    Ok(sol) => {
                        for &t in time_grid {
                            records.push(match sol.evaluate_at(t) {
                                Ok(x) => ErrorRecord::measured(
                                    method,
                                    system.name(),
                                    param,
                                    t,
                                    component_errors(&x, truth(t)),
                                    sol.f_calls(),
                                ),
                                Err(e) => ErrorRecord::failed(method, system, param, t, &e),
                            });
                        }
                    }
                    Err(e) => records.extend(time_grid.iter().map(|&t| ErrorRecord::failed(method, system, param, t, &e))),
                }
            }
            Method::Rk4 => {
                let param = ("M", rk4_steps as f64);
                match rk4_solve(system, system.x0(), horizon, Rk4Config { steps: rk4_steps }) {
                    Ok(traj) => {
                        for &t in time_grid {
                            let m = node_of(t);
                            let tm = node_time(m);
                            records.push(ErrorRecord::measured(
                                method,
                                system.name(),
                                param,
                                tm,
                                component_errors(&traj.states[m], truth(tm)),
                                traj.f_calls,
                            ));
                        }
                    }
                    Err(e) => records.extend(time_grid.iter().map(|&t| ErrorRecord::failed(method, system, param, t, &e))),
                }
            }
        }
    }
    Ok(records)
}

/// Final-time RK4 errors at the smallest step counts whose cost `4M` is at
/// least each budget.
pub fn run_rk4_budgets(system: &DynamicalSystem, horizon: f64, budgets: &[u64]) -> Result<Vec<ErrorRecord>> {
    let reference = reference_solve(system, &[horizon])?;
    let truth = &reference.states[0];
    budgets
        .par_iter()
        .map(|&budget| {
            let steps = budget.div_ceil(4).max(1) as usize;
            let param = ("M", steps as f64);
            Ok(match rk4_solve(system, system.x0(), horizon, Rk4Config { steps }) {
                Ok(traj) => ErrorRecord::measured(
                    Method::Rk4,
                    system.name(),
                    param,
                    horizon,
                    component_errors(traj.final_state(), truth),
                    traj.f_calls,
                ),
                Err(e) => ErrorRecord::failed(Method::Rk4, system, param, horizon, &e),
            })
        })
        .collect()
}

/// Writes the records as CSV. Missing components and the call count of a
/// failed row are left empty; failed errors are written as `NaN`.
pub fn emit_csv<W: Write>(records: &[ErrorRecord], destination: W) -> Result<()> {
    if let Some(first) = records.first() {
        if let Some(bad) = records.iter().find(|r| r.errors.len() != first.errors.len()) {
            return Err(Error::ShapeMismatch {
                context: "record dimension",
                expected: first.errors.len(),
                found: bad.errors.len(),
            });
        }
        if first.errors.len() > 3 {
            return Err(Error::UnsupportedDimension(first.errors.len()));
        }
    }
    let mut w = csv::Writer::from_writer(destination);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let e = |i: usize| r.errors.get(i).map(|v| fmt_f64(*v)).unwrap_or_default();
        w.write_record([
            r.method.to_string(),
            r.model.clone(),
            r.param_name.clone(),
            fmt_f64(r.param_value),
            fmt_f64(r.t),
            e(0),
            e(1),
            e(2),
            fmt_f64(r.aggregate),
            r.f_calls.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`, switching to
/// exponent form for very small or large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn emit_csv_to_path(records: &[ErrorRecord], path: &Path) -> Result<()> {
    let file = File::create(path)?;
    emit_csv(records, BufWriter::new(file))
}

/// Writes `t,x1,..,xd` rows.
pub fn emit_states_csv<W: Write>(times: &[f64], states: &[Vec<f64>], destination: W) -> Result<()> {
    let dim = states.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(destination);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=dim).map(|i| format!("x{i}")))
        .collect();
    w.write_record(&header)?;
    for (t, x) in times.iter().zip(states) {
        w.write_record(std::iter::once(fmt_f64(*t)).chain(x.iter().map(|v| fmt_f64(*v))))?;
    }
    w.flush()?;
    Ok(())
}
