use clap::Args;
use curvlab_core::functionals::{rbc_tau, ric_tau};
use curvlab_core::gauduchon::{
    bismut_package, chern_from_gauduchon, gauduchon_forward, rbc_tau_from_gauduchon, ric_tau_from_gauduchon,
};
use curvlab_core::{eval_jet2, ChernPackage, GauduchonParam, HermitianMatrix, PsdForm, TauParam, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::within;
use crate::config::{parse_list, points_or_samples, resolve_metric, scheme, CliError, CliResult, ResolvedMetric};
use crate::output::{emit, fmt_f, fmt_point, Report, Table};
use crate::GlobalArgs;

const DEFAULT_TOL: f64 = 1e-9;

#[derive(Args, Debug, Clone, Serialize)]
pub struct GauduchonArgs {
    /// Comma-separated Gauduchon parameters; t = 0 and t = 1/2 are rejected.
    #[arg(long, default_value = "-1", allow_hyphen_values = true)]
    pub t: String,
    /// Report forward-then-inverse curvature residuals.
    #[arg(long)]
    pub roundtrip: bool,
    /// Cross-check Ric^tau and RBC^tau through Gauduchon data at this tau (> 0, finite).
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Serialize)]
struct Config<'a> {
    metric: &'a ResolvedMetric,
    points: &'a [Vec<C64>],
    t: &'a [f64],
    roundtrip: bool,
    tau: Option<f64>,
}

#[derive(Serialize)]
struct Row {
    t: f64,
    torsion_max: f64,
    curvature_max: f64,
    roundtrip_residual: Option<f64>,
    ric_tau_residual: Option<f64>,
    rbc_tau_residual: Option<f64>,
}

#[derive(Serialize)]
struct PointResult {
    point: Vec<C64>,
    /// Eigenvalues of the Bismut-data source matrix.
    bismut_source_eigenvalues: Vec<f64>,
    rows: Vec<Row>,
    passed: bool,
}

fn random_form(n: usize, rng: &mut ChaCha8Rng) -> CliResult<PsdForm> {
    let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    Ok(PsdForm::new(HermitianMatrix::hermitian_part(&(&m * m.adjoint())))?)
}

fn evaluate(pkg: &ChernPackage, z: &[C64], ts: &[f64], args: &GauduchonArgs, xi: Option<&PsdForm>, tol: f64) -> CliResult<PointResult> {
    let (_, source) = bismut_package(pkg)?;
    let mut rows = Vec::with_capacity(ts.len());
    for &t in ts {
        let g = gauduchon_forward(pkg, GauduchonParam(t))?;
        let roundtrip_residual = if args.roundtrip {
            Some(chern_from_gauduchon(&g)?.max_abs_diff(&pkg.curvature))
        } else {
            None
        };
        let (ric_tau_residual, rbc_tau_residual) = match (args.tau, xi) {
            (Some(tau), Some(xi)) => {
                let (src, tgt) = (TauParam::source(tau)?, TauParam::target(tau)?);
                let ric = (ric_tau_from_gauduchon(&g, src)?.matrix() - ric_tau(pkg, src)?.matrix()).iter().map(|c| c.norm()).fold(0.0, f64::max);
                let rbc = (rbc_tau_from_gauduchon(&g, tgt, xi)? - rbc_tau(pkg, tgt, xi)?).abs();
                (Some(ric), Some(rbc))
            }
            _ => (None, None),
        };
        rows.push(Row {
            t,
            torsion_max: g.torsion.max_abs(),
            curvature_max: g.curvature.max_abs(),
            roundtrip_residual,
            ric_tau_residual,
            rbc_tau_residual,
        });
    }
    let passed = rows
        .iter()
        .flat_map(|r| [r.roundtrip_residual, r.ric_tau_residual, r.rbc_tau_residual])
        .flatten()
        .all(|v| within(v, tol));
    Ok(PointResult { point: z.to_vec(), bismut_source_eigenvalues: source.eigenvalues(), rows, passed })
}

pub fn run(g: &GlobalArgs, args: &GauduchonArgs) -> CliResult<bool> {
    let metric = resolve_metric(g.metric.as_deref().unwrap_or("builtin:example22"))?;
    let fd = scheme(g.h, g.order)?;
    let points = points_or_samples(g.points.as_deref(), g.region.as_deref(), g.samples, g.seed, &metric)?;
    let ts = parse_list(&args.t)?;
    for &t in &ts {
        GauduchonParam(t).check_invertible()?;
    }
    if let Some(tau) = args.tau {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CliError::Config(format!("--tau {} must be positive and finite", tau)));
        }
    }
    let tol = g.tol.unwrap_or(DEFAULT_TOL);

    let results = points
        .par_iter()
        .enumerate()
        .map(|(k, z)| {
            let jet = eval_jet2(&metric.spec, z, &fd)?;
            let pkg = ChernPackage::unitary_from_jet(&jet)?;
            let xi = match args.tau {
                Some(_) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
                    rng.set_stream(k as u64);
                    Some(random_form(metric.n, &mut rng)?)
                }
                None => None,
            };
            evaluate(&pkg, z, &ts, args, xi.as_ref(), tol)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let passed = results.iter().all(|r| r.passed);

    let mut table = Table::new(&[
        "point", "t", "h", "order", "torsion_max", "curvature_max", "roundtrip_residual", "ric_tau_residual",
        "rbc_tau_residual",
    ]);
    let opt = |x: Option<f64>| x.map(fmt_f).unwrap_or_default();
    for r in &results {
        for row in &r.rows {
            table.push(vec![
                fmt_point(&r.point),
                fmt_f(row.t),
                fmt_f(fd.h),
                fd.order.to_string(),
                fmt_f(row.torsion_max),
                fmt_f(row.curvature_max),
                opt(row.roundtrip_residual),
                opt(row.ric_tau_residual),
                opt(row.rbc_tau_residual),
            ]);
        }
    }
    let report = Report {
        command: "gauduchon",
        version: env!("CARGO_PKG_VERSION"),
        global: g,
        config: Config { metric: &metric, points: &points, t: &ts, roundtrip: args.roundtrip, tau: args.tau },
        scheme: Some(fd),
        tolerance: Some(tol),
        passed,
        results,
    };
    emit(g, &report, &table)?;
    Ok(passed)
}
