use clap::Args;
use curvlab_core::schwarz::{
    bismut_schwarz_report, connection_invariance_residual, laplacian_energy_assembled, schwarz_inequality_slack,
    BismutSchwarzReport, SchwarzConstants,
};
use curvlab_core::{HoloMapSpec, SchwarzReport, C64};
use rayon::prelude::*;
use serde::Serialize;

use super::within;
use crate::config::{parse_list, points_or_samples, resolve_metric, scheme, CliError, CliResult, ResolvedMetric};
use crate::output::{emit, fmt_f, fmt_point, Report, Table};
use crate::GlobalArgs;

/// Relative tolerance for finite-difference versus assembled Laplacian.
const DEFAULT_TOL: f64 = 1e-4;
/// Absolute tolerance for exact identities (skew torsion, connection invariance).
const IDENTITY_TOL: f64 = 1e-8;

#[derive(Args, Debug, Clone, Serialize)]
pub struct SchwarzArgs {
    /// `id`, or components in the source coordinates separated by `;`, e.g. `z1;z1*z2`.
    #[arg(long, default_value = "id")]
    pub map: String,
    /// Source metric; defaults to --metric.
    #[arg(long)]
    pub source: Option<String>,
    /// Target metric; defaults to --metric.
    #[arg(long)]
    pub target: Option<String>,
    /// Constants `c1,c2,kappa0,rank` of the inequality whose pointwise slack is reported.
    #[arg(long, allow_hyphen_values = true)]
    pub constants: Option<String>,
    /// Report the Bismut lower bound at this tau.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Gauduchon parameters for the connection-invariance grid, e.g. `-1,0,0.5,1,2`.
    #[arg(long, allow_hyphen_values = true)]
    pub invariance: Option<String>,
}

#[derive(Serialize)]
struct Config<'a> {
    /// Map components as printed expressions in `z1..zm`.
    map: Vec<String>,
    source: &'a ResolvedMetric,
    target: &'a ResolvedMetric,
    points: &'a [Vec<C64>],
    constants: Option<SchwarzConstants>,
    tau: Option<f64>,
    invariance_grid: Option<&'a [f64]>,
    identity_tolerance: f64,
}

#[derive(Serialize)]
struct PointResult {
    report: SchwarzReport,
    cr_residual: f64,
    inequality_slack: Option<f64>,
    bismut: Option<BismutSchwarzReport>,
    /// Max over the `(t_source, t_target)` grid.
    connection_invariance_residual: Option<f64>,
    passed: bool,
}

fn parse_constants(text: &str) -> CliResult<SchwarzConstants> {
    let v = parse_list(text)?;
    if v.len() != 4 || v[3] < 0.0 || v[3].fract() != 0.0 {
        return Err(CliError::Config(format!("--constants expects c1,c2,kappa0,rank, got '{}'", text)));
    }
    Ok(SchwarzConstants { c1: v[0], c2: v[1], kappa0: v[2], rank: v[3] as usize })
}

fn parse_map(text: &str, m: usize) -> CliResult<HoloMapSpec> {
    if text.trim() == "id" {
        return Ok(HoloMapSpec::identity(m));
    }
    let parts: Vec<&str> = text.split(';').map(str::trim).collect();
    Ok(HoloMapSpec::parse(m, &parts)?)
}

pub fn run(g: &GlobalArgs, args: &SchwarzArgs) -> CliResult<bool> {
    let fallback = g.metric.as_deref();
    let pick = |s: &Option<String>, role: &str| -> CliResult<ResolvedMetric> {
        let r = s.as_deref().or(fallback).ok_or_else(|| CliError::Config(format!("no {} metric given", role)))?;
        resolve_metric(r)
    };
    let source = pick(&args.source, "source")?;
    let target = pick(&args.target, "target")?;
    let map = parse_map(&args.map, source.n)?;
    if map.n != target.n {
        return Err(CliError::Config(format!("map has {} components but the target has dimension {}", map.n, target.n)));
    }
    let fd = scheme(g.h, g.order)?;
    let points = points_or_samples(g.points.as_deref(), g.region.as_deref(), g.samples, g.seed, &source)?;
    let constants = args.constants.as_deref().map(parse_constants).transpose()?;
    let grid = args.invariance.as_deref().map(parse_list).transpose()?;
    let tol = g.tol.unwrap_or(DEFAULT_TOL);

    let evaluate = |z: &Vec<C64>| -> CliResult<PointResult> {
        let report = laplacian_energy_assembled(&map, &source.spec, &target.spec, z, &fd)?;
        let cr_residual = map.cr_residual(z, &fd)?;
        let inequality_slack = constants.as_ref().map(|k| schwarz_inequality_slack(&report, k)).transpose()?;
        let bismut = args.tau.map(|t| bismut_schwarz_report(&map, &source.spec, &target.spec, z, t, &fd)).transpose()?;
        let invariance = match &grid {
            Some(ts) => {
                let mut worst: f64 = 0.0;
                for &ts_ in ts {
                    for &tt in ts {
                        let r = connection_invariance_residual(&map, &source.spec, &target.spec, z, ts_, tt, &fd)?;
                        worst = worst.max(r);
                    }
                }
                Some(worst)
            }
            None => None,
        };
        let passed = within(report.relative_error, tol)
            && within(report.skew_torsion_residual, IDENTITY_TOL)
            && invariance.is_none_or(|r| within(r, IDENTITY_TOL));
        Ok(PointResult { report, cr_residual, inequality_slack, bismut, connection_invariance_residual: invariance, passed })
    };
    let results = points.par_iter().map(evaluate).collect::<CliResult<Vec<_>>>()?;
    let passed = results.iter().all(|r| r.passed);

    let mut table = Table::new(&[
        "point", "h", "order", "energy", "laplacian_fd", "laplacian_assembled", "relative_error", "sym_norm2",
        "skew_norm2", "source_term", "target_term", "skew_torsion_residual", "rank", "inequality_slack",
        "bismut_margin", "passed",
    ]);
    for r in &results {
        let s = &r.report;
        table.push(vec![
            fmt_point(&s.point),
            fmt_f(fd.h),
            fd.order.to_string(),
            fmt_f(s.energy),
            fmt_f(s.laplacian_fd),
            fmt_f(s.laplacian_assembled),
            fmt_f(s.relative_error),
            fmt_f(s.sym_norm2),
            fmt_f(s.skew_norm2),
            fmt_f(s.source_term),
            fmt_f(s.target_term),
            fmt_f(s.skew_torsion_residual),
            s.rank.to_string(),
            r.inequality_slack.map(fmt_f).unwrap_or_default(),
            r.bismut.as_ref().map(|b| fmt_f(b.margin)).unwrap_or_default(),
            r.passed.to_string(),
        ]);
    }
    let report = Report {
        command: "schwarz",
        version: env!("CARGO_PKG_VERSION"),
        global: g,
        config: Config {
            map: map.components.iter().map(|c| c.to_string()).collect(),
            source: &source,
            target: &target,
            points: &points,
            constants,
            tau: args.tau,
            invariance_grid: grid.as_deref(),
            identity_tolerance: IDENTITY_TOL,
        },
        scheme: Some(fd),
        tolerance: Some(tol),
        passed,
        results,
    };
    emit(g, &report, &table)?;
    Ok(passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_and_maps_parse() {
        let k = parse_constants("2,0,2,1").unwrap();
        assert_eq!((k.c1, k.kappa0, k.rank), (2.0, 2.0, 1));
        assert!(parse_constants("2,0,2").is_err());
        assert_eq!(parse_map("z1;z1*z2", 2).unwrap().n, 2);
        assert_eq!(parse_map("id", 3).unwrap().m, 3);
    }
}
