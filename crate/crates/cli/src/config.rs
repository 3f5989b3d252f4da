//! Parsing of metric references, point lists, regions and numeric options.

use std::fmt;
use std::path::Path;

use curvlab_core::{parse_expr, CurvError, FdScheme, MetricSpec, Region, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Failure classes mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input files (exit 2).
    Config(String),
    /// A computation failed (exit 3).
    Numeric(CurvError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {}", m),
            CliError::Numeric(e) => write!(f, "numerical failure: {}", e),
        }
    }
}

impl From<CurvError> for CliError {
    fn from(e: CurvError) -> Self {
        match e {
            CurvError::Parse(_)
            | CurvError::MetricFile(_)
            | CurvError::InvalidParameter(_)
            | CurvError::TauRole { .. }
            | CurvError::GauduchonPole(_)
            | CurvError::NotHolomorphic(_)
            | CurvError::OutsideRegion(_) => CliError::Config(e.to_string()),
            e => CliError::Numeric(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// A metric given as `builtin:NAME` or `file:PATH`.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedMetric {
    pub reference: String,
    pub label: String,
    pub n: usize,
    pub region: Region,
    /// Entries as printed expressions, so the run can be reproduced from the report.
    pub entries: Vec<Vec<String>>,
    #[serde(skip)]
    pub spec: MetricSpec,
}

pub fn resolve_metric(reference: &str) -> CliResult<ResolvedMetric> {
    let spec = if let Some(name) = reference.strip_prefix("builtin:") {
        MetricSpec::from_builtin(name)?
    } else if let Some(path) = reference.strip_prefix("file:") {
        load_metric_file(Path::new(path))?
    } else if Path::new(reference).is_file() {
        load_metric_file(Path::new(reference))?
    } else {
        MetricSpec::from_builtin(reference)?
    };
    Ok(ResolvedMetric {
        reference: reference.to_string(),
        label: spec.label.clone(),
        n: spec.n,
        region: spec.region,
        entries: spec.entries.iter().map(|row| row.iter().map(|e| e.to_string()).collect()).collect(),
        spec,
    })
}

fn load_metric_file(path: &Path) -> CliResult<MetricSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read metric file {}: {}", path.display(), e)))?;
    let mut spec = curvlab_core::parse_metric_spec(&text)?;
    spec.label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    Ok(spec)
}

fn parse_complex(text: &str) -> CliResult<C64> {
    let e = parse_expr(text).map_err(|e| CliError::Config(format!("'{}': {}", text, e)))?;
    if e.arity() > 0 {
        return Err(CliError::Config(format!("coordinate '{}' must be a constant", text)));
    }
    e.eval(&[]).map_err(CliError::from)
}

/// Parses `x1,x2;y1,y2` into points; coordinates may be complex (`0.1+0.2i`).
pub fn parse_points(text: &str, n: usize) -> CliResult<Vec<Vec<C64>>> {
    let mut points = Vec::new();
    for chunk in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let p = chunk.split(',').map(|c| parse_complex(c.trim())).collect::<CliResult<Vec<_>>>()?;
        if p.len() != n {
            return Err(CliError::Config(format!("point '{}' has {} coordinates, expected {}", chunk, p.len(), n)));
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(CliError::Config("empty point list".into()));
    }
    Ok(points)
}

/// Parses `ball:R`, `polydisk:R`, `punctured:R`, `whole` or `metric`.
pub fn parse_region(text: &str, default: Region) -> CliResult<Region> {
    let (kind, radius) = match text.split_once(':') {
        Some((k, r)) => {
            let r: f64 = r.trim().parse().map_err(|_| CliError::Config(format!("bad radius in '{}'", text)))?;
            if r.is_nan() || r <= 0.0 {
                return Err(CliError::Config(format!("radius must be positive in '{}'", text)));
            }
            (k.trim(), r)
        }
        None => (text.trim(), 0.0),
    };
    match kind {
        "metric" => Ok(default),
        "whole" => Ok(Region::Whole),
        "ball" if radius > 0.0 => Ok(Region::Ball { radius }),
        "polydisk" if radius > 0.0 => Ok(Region::Polydisk { radius }),
        "punctured" if radius > 0.0 => Ok(Region::Punctured { radius }),
        _ => Err(CliError::Config(format!("unknown region '{}'", text))),
    }
}

/// `inf` or a number.
pub fn parse_tau(text: &str) -> CliResult<f64> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| CliError::Config(format!("bad tau '{}'", text))),
    }
}

pub fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad number '{}' in '{}'", s, text))))
        .collect()
}

pub fn scheme(h: f64, order: u8) -> CliResult<FdScheme> {
    FdScheme::new(h, order, 1).map_err(CliError::from)
}

/// Explicit points, or `samples` points drawn from `region` with `seed`.
pub fn points_or_samples(
    points: Option<&str>,
    region: Option<&str>,
    samples: usize,
    seed: u64,
    metric: &ResolvedMetric,
) -> CliResult<Vec<Vec<C64>>> {
    if let Some(p) = points {
        return parse_points(p, metric.n);
    }
    let region = match region {
        Some(r) => parse_region(r, metric.region)?,
        None => return Ok(vec![metric.region.base_point(metric.n)]),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..samples.max(1)).map(|_| region.sample(metric.n, &mut rng)).collect())
}
