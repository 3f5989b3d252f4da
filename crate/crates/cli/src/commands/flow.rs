use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use curvlab_core::{step_euler, Boundary, FlowState, GridSpec, TauParam, C64};
use serde::{Deserialize, Serialize};

use crate::config::{parse_list, parse_tau, resolve_metric, CliError, CliResult, ResolvedMetric};
use crate::output::{csv_err, emit, fmt_f, open_sink, rows, Report, Table};
use crate::{Format, GlobalArgs};

#[derive(Args, Debug, Clone, Serialize)]
pub struct FlowArgs {
    /// JSON run file with `metric`, `tau`, `dt`, `steps`, optional `reference_metric`,
    /// `grid` and `kappa0`; replaces the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `inf` or a positive number.
    #[arg(long, default_value = "1")]
    pub tau: String,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// Reference metric for the trace diagnostics; defaults to the initial metric.
    #[arg(long)]
    pub reference: Option<String>,
    /// Grid extent `lo,hi` in every real coordinate.
    #[arg(long, default_value = "-0.5,0.5", allow_hyphen_values = true)]
    pub extent: String,
    #[arg(long, default_value_t = 11)]
    pub resolution: usize,
    #[arg(long, default_value = "periodic")]
    pub boundary: String,
    /// Report the parabolic Schwarz residual at the center node for this kappa0.
    #[arg(long)]
    pub kappa0: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum TauValue {
    Number(f64),
    Text(String),
}

/// Contents of a `--config` run file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowConfig {
    metric: String,
    #[serde(default)]
    reference_metric: Option<String>,
    tau: TauValue,
    dt: f64,
    steps: usize,
    #[serde(default)]
    grid: GridSpec,
    #[serde(default)]
    kappa0: Option<f64>,
}

impl FlowConfig {
    fn from_flags(g: &GlobalArgs, a: &FlowArgs) -> CliResult<Self> {
        let extent = parse_list(&a.extent)?;
        if extent.len() != 2 {
            return Err(CliError::Config(format!("--extent expects lo,hi, got '{}'", a.extent)));
        }
        let boundary = match a.boundary.as_str() {
            "periodic" => Boundary::Periodic,
            "frozen" => Boundary::Frozen,
            b => return Err(CliError::Config(format!("unknown boundary '{}'", b))),
        };
        Ok(FlowConfig {
            metric: g.metric.clone().unwrap_or_else(|| "builtin:flat(1)".into()),
            reference_metric: a.reference.clone(),
            tau: TauValue::Text(a.tau.clone()),
            dt: a.dt,
            steps: a.steps,
            grid: GridSpec { extent: [extent[0], extent[1]], resolution: a.resolution, boundary },
            kappa0: a.kappa0,
        })
    }

    fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))
    }

    fn tau(&self) -> CliResult<f64> {
        match &self.tau {
            TauValue::Number(t) => Ok(*t),
            TauValue::Text(s) => parse_tau(s),
        }
    }
}

#[derive(Serialize)]
struct Config<'a> {
    run: &'a FlowConfig,
    metric: &'a ResolvedMetric,
    reference: &'a ResolvedMetric,
    tau: f64,
    center: Vec<C64>,
    spacing: f64,
}

/// One row of the per-step stream.
#[derive(Debug, Clone, Serialize)]
struct StepRow {
    step: usize,
    time: f64,
    dt: f64,
    substeps: usize,
    dx: f64,
    sup_trace: f64,
    min_eigenvalue: f64,
    max_velocity: f64,
    center_g11: f64,
    center_residual: Option<f64>,
}

const HEADER: [&str; 10] = [
    "step", "time", "dt", "substeps", "dx", "sup_trace", "min_eigenvalue", "max_velocity", "center_g11",
    "center_residual",
];

impl StepRow {
    fn new(state: &FlowState, center: usize, kappa0: Option<f64>) -> CliResult<Self> {
        let d = state.history.last().expect("flow state has a history");
        let center_residual = kappa0.map(|k| state.parabolic_residual(k, center).map(|r| r.residual)).transpose()?;
        Ok(StepRow {
            step: d.step,
            time: d.time,
            dt: d.dt,
            substeps: d.substeps,
            dx: state.field.grid.spacing(),
            sup_trace: d.sup_trace,
            min_eigenvalue: d.min_eigenvalue,
            max_velocity: d.max_velocity,
            center_g11: state.field.values[center][(0, 0)].re,
            center_residual,
        })
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.step.to_string(),
            fmt_f(self.time),
            fmt_f(self.dt),
            self.substeps.to_string(),
            fmt_f(self.dx),
            fmt_f(self.sup_trace),
            fmt_f(self.min_eigenvalue),
            fmt_f(self.max_velocity),
            fmt_f(self.center_g11),
            self.center_residual.map(fmt_f).unwrap_or_default(),
        ]
    }
}

#[derive(Serialize)]
struct FlowResult {
    steps: Vec<StepRow>,
    final_center_metric: Vec<Vec<C64>>,
}

/// Runs the flow. CSV output is written row by row as steps complete; JSON
/// is written once at the end. A rejected step is a numerical failure.
pub fn run(g: &GlobalArgs, args: &FlowArgs) -> CliResult<bool> {
    let run = match &args.config {
        Some(path) => FlowConfig::load(path)?,
        None => FlowConfig::from_flags(g, args)?,
    };
    let metric = resolve_metric(&run.metric)?;
    let reference = match &run.reference_metric {
        Some(r) => resolve_metric(r)?,
        None => metric.clone(),
    };
    let tau = run.tau()?;
    if !(run.dt > 0.0 && run.dt.is_finite()) {
        return Err(CliError::Config(format!("dt = {} must be positive", run.dt)));
    }
    let mut state = FlowState::new(&metric.spec, run.grid, TauParam::source(tau)?, reference.spec.clone())?;
    let mid = 0.5 * (run.grid.extent[0] + run.grid.extent[1]);
    let center_point = vec![C64::new(mid, mid); metric.n];
    let center = state.field.nearest_node(&center_point);
    let center_point = state.field.node_point(center);

    let format = g.format.unwrap_or(Format::Csv);
    let mut rows_out = Vec::with_capacity(run.steps + 1);
    let mut writer = match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(open_sink(g.out.as_deref())?);
            w.write_record(HEADER).map_err(csv_err)?;
            Some(w)
        }
        Format::Json => None,
    };
    let mut push = |row: StepRow, writer: &mut Option<csv::Writer<Box<dyn Write>>>| -> CliResult<()> {
        if let Some(w) = writer.as_mut() {
            w.write_record(row.record()).map_err(csv_err)?;
            w.flush()?;
        }
        rows_out.push(row);
        Ok(())
    };
    push(StepRow::new(&state, center, run.kappa0)?, &mut writer)?;
    for _ in 0..run.steps {
        state = step_euler(&state, run.dt)?;
        push(StepRow::new(&state, center, run.kappa0)?, &mut writer)?;
    }
    let passed = rows_out.iter().all(|r| r.min_eigenvalue > 0.0);

    if format == Format::Json {
        let mut table = Table::new(&HEADER);
        for r in &rows_out {
            table.push(r.record());
        }
        let report = Report {
            command: "flow",
            version: env!("CARGO_PKG_VERSION"),
            global: g,
            config: Config {
                run: &run,
                metric: &metric,
                reference: &reference,
                tau,
                center: center_point,
                spacing: run.grid.spacing(),
            },
            scheme: None,
            tolerance: None,
            passed,
            results: FlowResult { steps: rows_out, final_center_metric: rows(&state.field.values[center]) },
        };
        emit(g, &report, &table)?;
    }
    Ok(passed)
}
