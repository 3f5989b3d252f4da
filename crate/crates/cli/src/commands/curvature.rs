use clap::Args;
use curvlab_core::chern::{bianchi_residual, build_chern_normal_coordinates, pluriclosed_residual};
use curvlab_core::functionals::{hsc, rbc_tau};
use curvlab_core::{eval_jet2, ChernPackage, PsdForm, TauParam, C64};
use rayon::prelude::*;
use serde::Serialize;

use super::{nest3, nest4, within};
use crate::config::{parse_tau, points_or_samples, resolve_metric, scheme, CliError, CliResult, ResolvedMetric};
use crate::output::{emit, fmt_f, fmt_point, rows, Report, Table};
use crate::GlobalArgs;

const DEFAULT_TOL: f64 = 1e-6;

#[derive(Args, Debug, Clone, Serialize)]
pub struct CurvatureArgs {
    /// Comma-separated identity checks: bianchi, pluriclosed, normal.
    #[arg(long, default_value = "bianchi")]
    pub check: String,
    /// Also report RBC^tau at the normalized identity form.
    #[arg(long)]
    pub tau: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Check {
    Bianchi,
    Pluriclosed,
    Normal,
}

fn parse_checks(text: &str) -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    for c in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let check = match c {
            "bianchi" => Check::Bianchi,
            "pluriclosed" => Check::Pluriclosed,
            "normal" => Check::Normal,
            _ => return Err(CliError::Config(format!("unknown check '{}'", c))),
        };
        if !checks.contains(&check) {
            checks.push(check);
        }
    }
    Ok(checks)
}

#[derive(Serialize)]
struct Config<'a> {
    metric: &'a ResolvedMetric,
    points: &'a [Vec<C64>],
    checks: &'a [Check],
    tau: Option<f64>,
}

#[derive(Serialize, Default)]
struct Residuals {
    bianchi: Option<f64>,
    pluriclosed_direct: Option<f64>,
    pluriclosed_symmetry: Option<f64>,
    /// Metric, first-derivative and mixed-second-derivative residuals.
    normal_coordinates: Option<[f64; 3]>,
}

impl Residuals {
    fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = [self.bianchi, self.pluriclosed_direct, self.pluriclosed_symmetry].into_iter().flatten().collect();
        if let Some(r) = self.normal_coordinates {
            v.extend(r);
        }
        v
    }
}

/// Tensors in the chart frame; scalar functionals in the unitary frame.
#[derive(Serialize)]
struct PointReport {
    point: Vec<C64>,
    metric: Vec<Vec<C64>>,
    torsion: Vec<Vec<Vec<C64>>>,
    curvature: Vec<Vec<Vec<Vec<C64>>>>,
    ric1: Vec<Vec<C64>>,
    ric2: Vec<Vec<C64>>,
    ric3: Vec<Vec<C64>>,
    ric4: Vec<Vec<C64>>,
    torsion_one_form: Vec<C64>,
    q2: Vec<Vec<C64>>,
    ric2_unitary_eigenvalues: Vec<f64>,
    chern_scalar: f64,
    /// HSC along each unitary frame vector.
    hsc_frame: Vec<f64>,
    rbc_tau_identity: Option<f64>,
    residuals: Residuals,
    passed: bool,
}

fn evaluate(
    metric: &ResolvedMetric,
    z: &[C64],
    checks: &[Check],
    tau: Option<f64>,
    tol: f64,
    fd: &curvlab_core::FdScheme,
) -> CliResult<PointReport> {
    let spec = &metric.spec;
    let n = spec.n;
    let jet = eval_jet2(spec, z, fd)?;
    let chart = ChernPackage::from_jet(&jet)?;
    let unitary = ChernPackage::unitary_from_jet(&jet)?;
    let hsc_frame = (0..n)
        .map(|i| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[i] = C64::new(1.0, 0.0);
            hsc(&unitary, &e)
        })
        .collect::<curvlab_core::Result<Vec<_>>>()?;
    let rbc_tau_identity = match tau {
        Some(t) => {
            let id = PsdForm::new(curvlab_core::HermitianMatrix::identity(n))?;
            Some(rbc_tau(&unitary, TauParam::target(t)?, &id)?)
        }
        None => None,
    };
    let mut residuals = Residuals::default();
    for check in checks {
        match check {
            Check::Bianchi => residuals.bianchi = Some(bianchi_residual(spec, z, fd)?),
            Check::Pluriclosed => {
                let (d, s) = pluriclosed_residual(spec, z, fd)?;
                residuals.pluriclosed_direct = Some(d);
                residuals.pluriclosed_symmetry = Some(s);
            }
            Check::Normal => residuals.normal_coordinates = Some(build_chern_normal_coordinates(spec, z, fd)?.residuals),
        }
    }
    let passed = residuals.values().iter().all(|&r| within(r, tol));
    Ok(PointReport {
        point: z.to_vec(),
        metric: rows(chart.g.matrix()),
        torsion: nest3(&chart.torsion, n),
        curvature: nest4(&chart.curvature, n),
        ric1: rows(chart.ric.ric1.matrix()),
        ric2: rows(chart.ric.ric2.matrix()),
        ric3: rows(&chart.ric.ric3),
        ric4: rows(&chart.ric.ric4),
        torsion_one_form: chart.eta.clone(),
        q2: rows(chart.q2.matrix()),
        ric2_unitary_eigenvalues: unitary.ric.ric2.eigenvalues(),
        chern_scalar: unitary.ric.ric2.trace(),
        hsc_frame,
        rbc_tau_identity,
        residuals,
        passed,
    })
}

pub fn run(g: &GlobalArgs, args: &CurvatureArgs) -> CliResult<bool> {
    let metric = resolve_metric(g.metric.as_deref().unwrap_or("builtin:flat(2)"))?;
    let fd = scheme(g.h, g.order)?;
    let points = points_or_samples(g.points.as_deref(), g.region.as_deref(), g.samples, g.seed, &metric)?;
    let checks = parse_checks(&args.check)?;
    let tau = args.tau.as_deref().map(parse_tau).transpose()?;
    let tol = g.tol.unwrap_or(DEFAULT_TOL);

    let results = points
        .par_iter()
        .map(|z| evaluate(&metric, z, &checks, tau, tol, &fd))
        .collect::<CliResult<Vec<_>>>()?;
    let passed = results.iter().all(|r| r.passed);

    let mut table = Table::new(&[
        "point", "h", "order", "chern_scalar", "torsion_max", "curvature_max", "bianchi", "pluriclosed_direct",
        "pluriclosed_symmetry", "normal_max", "passed",
    ]);
    for r in &results {
        let max3 = r.torsion.iter().flatten().flatten().map(|c| c.norm()).fold(0.0, f64::max);
        let max4 = r.curvature.iter().flatten().flatten().flatten().map(|c| c.norm()).fold(0.0, f64::max);
        let opt = |x: Option<f64>| x.map(fmt_f).unwrap_or_default();
        table.push(vec![
            fmt_point(&r.point),
            fmt_f(fd.h),
            fd.order.to_string(),
            fmt_f(r.chern_scalar),
            fmt_f(max3),
            fmt_f(max4),
            opt(r.residuals.bianchi),
            opt(r.residuals.pluriclosed_direct),
            opt(r.residuals.pluriclosed_symmetry),
            opt(r.residuals.normal_coordinates.map(|a| a.iter().copied().fold(0.0, f64::max))),
            r.passed.to_string(),
        ]);
    }
    let report = Report {
        command: "curvature",
        version: env!("CARGO_PKG_VERSION"),
        global: g,
        config: Config { metric: &metric, points: &points, checks: &checks, tau },
        scheme: Some(fd),
        tolerance: Some(tol),
        passed,
        results,
    };
    emit(g, &report, &table)?;
    Ok(passed)
}
