//! Hermitian metrics on a coordinate chart and their Wirtinger 2-jets.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CurvError, Result};
use crate::expr::{parse_expr, Expr};
use crate::fd::{wirtinger_jet, FdScheme};
use crate::tensor::{hermitian_residual, ComplexTensor, HermitianMatrix, Variance, C64, ONE, ZERO};

/// Chart domain on which a metric is declared valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Region {
    Ball { radius: f64 },
    Polydisk { radius: f64 },
    Punctured { radius: f64 },
    Whole,
}

/// Fraction of the radius used when sampling, so stencils stay inside.
const SAMPLE_SHRINK: f64 = 0.9;

impl Region {
    pub fn contains(&self, z: &[C64]) -> bool {
        let norm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        match *self {
            Region::Ball { radius } => norm < radius,
            Region::Polydisk { radius } => z.iter().all(|c| c.norm() < radius),
            Region::Punctured { radius } => norm > 0.0 && norm < radius,
            Region::Whole => true,
        }
    }

    /// A representative interior point used for the positive-definiteness check.
    pub fn base_point(&self, n: usize) -> Vec<C64> {
        let mut p = vec![ZERO; n];
        if let Region::Punctured { radius } = *self {
            p[0] = C64::new(0.5 * radius, 0.0);
        }
        p
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<C64> {
        match *self {
            Region::Ball { radius } => {
                let dir = unit_direction(n, rng);
                let r = SAMPLE_SHRINK * radius * rng.random::<f64>().powf(1.0 / (2 * n) as f64);
                dir.into_iter().map(|c| c * r).collect()
            }
            Region::Whole => {
                let dir = unit_direction(n, rng);
                let r = rng.random::<f64>().powf(1.0 / (2 * n) as f64);
                dir.into_iter().map(|c| c * r).collect()
            }
            Region::Punctured { radius } => {
                let dir = unit_direction(n, rng);
                let r = radius * (0.25 + (SAMPLE_SHRINK - 0.25) * rng.random::<f64>());
                dir.into_iter().map(|c| c * r).collect()
            }
            Region::Polydisk { radius } => (0..n)
                .map(|_| {
                    let r = SAMPLE_SHRINK * radius * rng.random::<f64>().sqrt();
                    let theta = std::f64::consts::TAU * rng.random::<f64>();
                    C64::from_polar(r, theta)
                })
                .collect(),
        }
    }
}

fn unit_direction(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n).map(|_| C64::new(gaussian(rng), gaussian(rng))).collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// Standard normal sample via Box-Muller.
pub(crate) fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Parameters of the torsion fixture `g = delta + A z + conj(A z) + ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example22Params {
    pub n: usize,
    /// `a[(i * n + k) * n + l]` is `A^l_{ik}`, antisymmetric in `(i, k)`.
    pub a: Vec<C64>,
    pub eps: f64,
}

impl Example22Params {
    /// `A^1_{12} = 1 = -A^1_{21}`, all other components zero.
    pub fn standard(n: usize, eps: f64) -> Result<Self> {
        if n < 2 {
            return Err(CurvError::InvalidParameter("example22 needs n >= 2".into()));
        }
        let mut a = vec![ZERO; n * n * n];
        a[n] = ONE;
        a[n * n] = -ONE;
        let p = Example22Params { n, a, eps };
        p.validate()?;
        Ok(p)
    }

    #[inline]
    pub fn at(&self, i: usize, k: usize, l: usize) -> C64 {
        self.a[(i * self.n + k) * self.n + l]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.a.len() != n * n * n {
            return Err(CurvError::DimensionMismatch { expected: n * n * n, found: self.a.len() });
        }
        if self.eps < 0.0 || !self.eps.is_finite() {
            return Err(CurvError::InvalidParameter(format!("epsilon = {} must be nonnegative", self.eps)));
        }
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    if (self.at(i, k, l) + self.at(k, i, l)).norm() > 1e-14 {
                        return Err(CurvError::InvalidParameter(
                            "A must be antisymmetric in its lower indices".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `sum_p A^p_{ik} conj(A^p_{jl})`.
    fn aa(&self, i: usize, k: usize, j: usize, l: usize) -> C64 {
        (0..self.n).map(|p| self.at(i, k, p) * self.at(j, l, p).conj()).sum()
    }
}

/// Closed-form jets for the builtin catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactJet {
    Flat,
    PoincarePolydisk,
    Example22(Example22Params),
    Hopf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub n: usize,
    /// `entries[k][l]` is `g_{k lbar}`.
    pub entries: Vec<Vec<Expr>>,
    pub region: Region,
    pub exact: Option<ExactJet>,
    /// Builtin name with parameters, or "custom".
    pub label: String,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct MetricFile {
    n: usize,
    entries: Vec<Vec<String>>,
    #[serde(default = "whole")]
    region: Region,
}

fn whole() -> Region {
    Region::Whole
}

const HERMITIAN_SPOT_CHECKS: usize = 32;

impl MetricSpec {
    /// Builds a spec from expression entries, checking shape, Hermitian
    /// symmetry at sample points and positivity at the region's base point.
    pub fn new(entries: Vec<Vec<Expr>>, region: Region) -> Result<Self> {
        let spec = MetricSpec { n: entries.len(), entries, region, exact: None, label: "custom".into() };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(CurvError::InvalidParameter("metric dimension must be positive".into()));
        }
        for row in &self.entries {
            if row.len() != n {
                return Err(CurvError::DimensionMismatch { expected: n, found: row.len() });
            }
            for e in row {
                if e.arity() > n {
                    return Err(CurvError::DimensionMismatch { expected: n, found: e.arity() });
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..HERMITIAN_SPOT_CHECKS {
            let z = self.region.sample(n, &mut rng);
            let g = match self.eval_matrix(&z) {
                Ok(g) => g,
                // Singular sample points say nothing about symmetry.
                Err(CurvError::DivisionByZero) | Err(CurvError::NonFinite(_)) => continue,
                Err(e) => return Err(e),
            };
            let r = hermitian_residual(&g);
            if r > 1e-10 {
                return Err(CurvError::NotHermitian(r));
            }
        }
        let g = self.eval_matrix(&self.region.base_point(n))?;
        if !HermitianMatrix::hermitian_part(&g).is_positive_definite() {
            return Err(CurvError::NotPositiveDefinite);
        }
        Ok(())
    }

    pub fn eval_matrix(&self, z: &[C64]) -> Result<DMatrix<C64>> {
        if z.len() != self.n {
            return Err(CurvError::DimensionMismatch { expected: self.n, found: z.len() });
        }
        if !self.region.contains(z) {
            return Err(CurvError::OutsideRegion(format!("{:?}", z)));
        }
        let mut g = DMatrix::zeros(self.n, self.n);
        for k in 0..self.n {
            for l in 0..self.n {
                g[(k, l)] = self.entries[k][l].eval(z)?;
            }
        }
        Ok(g)
    }

    /// Metric entries flattened row-major, for finite differencing.
    pub fn eval_flat(&self, z: &[C64]) -> Result<Vec<C64>> {
        Ok(self.eval_matrix(z)?.transpose().iter().copied().collect())
    }

    /// The same metric multiplied by a positive constant (closed-form jet dropped).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(CurvError::InvalidParameter(format!("scale {} must be positive", c)));
        }
        let entries =
            self.entries.iter().map(|row| row.iter().map(|e| Expr::mul(Expr::real(c), e.clone())).collect()).collect();
        Ok(MetricSpec { n: self.n, entries, region: self.region, exact: None, label: format!("{}*{}", c, self.label) })
    }

    /// Drops the closed-form jet so every derivative goes through finite differences.
    pub fn without_exact(&self) -> Self {
        MetricSpec { exact: None, ..self.clone() }
    }

    pub fn flat(n: usize) -> Result<Self> {
        let entries = (0..n).map(|k| (0..n).map(|l| Expr::real(if k == l { 1.0 } else { 0.0 })).collect()).collect();
        let mut spec = MetricSpec::new(entries, Region::Whole)?;
        spec.exact = Some(ExactJet::Flat);
        spec.label = format!("flat({})", n);
        Ok(spec)
    }

    /// `g_{k lbar} = delta_{kl} (1 - |z_k|^2)^{-2}` on the unit polydisk.
    pub fn poincare_polydisk(n: usize) -> Result<Self> {
        let entries = (0..n)
            .map(|k| {
                (0..n)
                    .map(|l| {
                        if k == l {
                            Expr::pow(Expr::sub(Expr::real(1.0), Expr::abs2(Expr::Var(k))), -2)
                        } else {
                            Expr::real(0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut spec = MetricSpec::new(entries, Region::Polydisk { radius: 1.0 })?;
        spec.exact = Some(ExactJet::PoincarePolydisk);
        spec.label = format!("poincare_polydisk({})", n);
        Ok(spec)
    }

    /// `g_{k lbar} = delta_{kl} + A^l_{ik} z^i + conj(A^k_{il} z^i)
    ///   + 1/2 A^p_{ik} conj(A^p_{jl}) z^i conj(z^j) + eps z^l conj(z^k)` on the ball of radius 0.25.
    pub fn example22(params: Example22Params) -> Result<Self> {
        params.validate()?;
        let n = params.n;
        let mut entries = Vec::with_capacity(n);
        for k in 0..n {
            let mut row = Vec::with_capacity(n);
            for l in 0..n {
                let mut e = Expr::real(if k == l { 1.0 } else { 0.0 });
                for i in 0..n {
                    e = Expr::add(e, Expr::mul(Expr::complex(params.at(i, k, l)), Expr::Var(i)));
                    e = Expr::add(e, Expr::mul(Expr::complex(params.at(i, l, k).conj()), Expr::ConjVar(i)));
                }
                for i in 0..n {
                    for j in 0..n {
                        let c = params.aa(i, k, j, l) * 0.5;
                        e = Expr::add(e, Expr::mul(Expr::complex(c), Expr::mul(Expr::Var(i), Expr::ConjVar(j))));
                    }
                }
                e = Expr::add(e, Expr::mul(Expr::real(params.eps), Expr::mul(Expr::Var(l), Expr::ConjVar(k))));
                row.push(e);
            }
            entries.push(row);
        }
        let label = format!("example22({}, {})", n, params.eps);
        let mut spec = MetricSpec::new(entries, Region::Ball { radius: 0.25 })?;
        spec.exact = Some(ExactJet::Example22(params));
        spec.label = label;
        Ok(spec)
    }

    /// The torsion fixture with `A^1_{12} = 1` and `eps = 0.1` on C^2.
    pub fn fixture_f1() -> Self {
        MetricSpec::example22(Example22Params::standard(2, 0.1).expect("standard parameters are valid"))
            .expect("fixture metric is valid")
    }

    /// `g_{k lbar} = delta_{kl} / |z|^2` on the punctured ball of radius 2.
    pub fn hopf(n: usize) -> Result<Self> {
        let s = (1..n).fold(Expr::abs2(Expr::Var(0)), |acc, k| Expr::add(acc, Expr::abs2(Expr::Var(k))));
        let entries = (0..n)
            .map(|k| (0..n).map(|l| if k == l { Expr::pow(s.clone(), -1) } else { Expr::real(0.0) }).collect())
            .collect();
        let mut spec = MetricSpec::new(entries, Region::Punctured { radius: 2.0 })?;
        spec.exact = Some(ExactJet::Hopf);
        spec.label = format!("hopf({})", n);
        Ok(spec)
    }

    /// Parses `flat(2)`, `poincare_polydisk(1)`, `example22`, `example22(2, 0.1)`, `hopf(2)`.
    pub fn from_builtin(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args) = match text.find('(') {
            Some(open) => {
                let close = text
                    .rfind(')')
                    .filter(|&c| c > open && c == text.len() - 1)
                    .ok_or_else(|| CurvError::InvalidParameter(format!("malformed builtin '{}'", text)))?;
                let args: Vec<&str> =
                    text[open + 1..close].split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                (&text[..open], args)
            }
            None => (text, Vec::new()),
        };
        let bad = |what: &str| CurvError::InvalidParameter(format!("builtin '{}': {}", text, what));
        let dim = |k: usize, default: usize| -> Result<usize> {
            match args.get(k) {
                Some(s) => s.parse::<usize>().map_err(|_| bad("dimension must be a positive integer")),
                None => Ok(default),
            }
        };
        let max_args = if name == "example22" { 2 } else { 1 };
        if args.len() > max_args {
            return Err(bad("too many parameters"));
        }
        match name {
            "flat" => MetricSpec::flat(dim(0, 2)?),
            "poincare_polydisk" | "poincare" => MetricSpec::poincare_polydisk(dim(0, 1)?),
            "hopf" => MetricSpec::hopf(dim(0, 2)?),
            "example22" | "f1" => {
                let n = dim(0, 2)?;
                let eps = match args.get(1) {
                    Some(s) => s.parse::<f64>().map_err(|_| bad("epsilon must be a number"))?,
                    None => 0.1,
                };
                MetricSpec::example22(Example22Params::standard(n, eps)?)
            }
            _ => Err(bad("unknown builtin (expected flat, poincare_polydisk, example22, hopf)")),
        }
    }

    /// Parses the JSON metric-file format
    /// `{"n": 2, "entries": [["...", "..."], ...], "region": {"type": "ball", "radius": 1}}`.
    pub fn from_json(source: &str) -> Result<Self> {
        let file: MetricFile = serde_json::from_str(source).map_err(|e| CurvError::MetricFile(e.to_string()))?;
        if file.entries.len() != file.n {
            return Err(CurvError::DimensionMismatch { expected: file.n, found: file.entries.len() });
        }
        let mut entries = Vec::with_capacity(file.n);
        for row in &file.entries {
            if row.len() != file.n {
                return Err(CurvError::DimensionMismatch { expected: file.n, found: row.len() });
            }
            entries.push(row.iter().map(|s| parse_expr(s)).collect::<std::result::Result<Vec<_>, _>>()?);
        }
        MetricSpec::new(entries, file.region)
    }

    /// The JSON metric-file form of this spec.
    pub fn to_json(&self) -> String {
        let file = MetricFile {
            n: self.n,
            entries: self.entries.iter().map(|row| row.iter().map(|e| e.to_string()).collect()).collect(),
            region: self.region,
        };
        serde_json::to_string_pretty(&file).expect("metric file serializes")
    }
}

/// Parses metric source text: a JSON metric file, or a single expression for n = 1.
pub fn parse_metric_spec(source: &str) -> Result<MetricSpec> {
    if source.trim_start().starts_with('{') {
        MetricSpec::from_json(source)
    } else {
        MetricSpec::new(vec![vec![parse_expr(source)?]], Region::Whole)
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)
    }
}

/// Metric value and Wirtinger derivatives up to order (1,1) at a point.
#[derive(Debug, Clone)]
pub struct MetricJet2 {
    pub point: Vec<C64>,
    pub g: HermitianMatrix,
    /// The inverse matrix `G^{-1}`; the component `g^{k lbar}` is `g_inv[(l, k)]`.
    pub g_inv: HermitianMatrix,
    /// `d_g[i, k, l]` = d_i g_{k lbar}.
    pub d_g: ComplexTensor,
    /// `dbar_g[j, k, l]` = dbar_j g_{k lbar}.
    pub dbar_g: ComplexTensor,
    /// `dd_g[i, j, k, l]` = d_i dbar_j g_{k lbar}.
    pub dd_g: ComplexTensor,
    pub scheme: FdScheme,
    /// True when the derivatives came from a closed form.
    pub exact: bool,
}

impl MetricJet2 {
    pub fn n(&self) -> usize {
        self.g.dim()
    }

    /// Inverse-metric component `g^{k lbar}`.
    #[inline]
    pub fn ginv(&self, k: usize, l: usize) -> C64 {
        self.g_inv.matrix()[(l, k)]
    }

    /// Inverse-metric rows `ginv[i][j] = g^{i jbar}`.
    pub fn ginv_rows(&self) -> Vec<Vec<C64>> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.ginv(i, j)).collect()).collect()
    }

    /// Assembles a jet from raw parts and checks its invariants against `tol`.
    pub fn from_parts(
        point: Vec<C64>,
        g: DMatrix<C64>,
        d_g: ComplexTensor,
        dbar_g: ComplexTensor,
        dd_g: ComplexTensor,
        scheme: FdScheme,
        exact: bool,
        tol: f64,
    ) -> Result<Self> {
        let n = g.nrows();
        let r = hermitian_residual(&g);
        if r > 1e-10 {
            return Err(CurvError::NotHermitian(r));
        }
        let g = HermitianMatrix::hermitian_part(&g);
        if !g.is_positive_definite() {
            return Err(CurvError::NotPositiveDefinite);
        }
        let inv = g.matrix().clone().try_inverse().ok_or(CurvError::Singular)?;
        let g_inv = HermitianMatrix::hermitian_part(&inv);
        for (t, rank) in [(&d_g, 3), (&dbar_g, 3), (&dd_g, 4)] {
            if t.rank() != rank || t.shape().iter().any(|s| s.dim != n) {
                return Err(CurvError::DimensionMismatch { expected: n, found: t.shape().first().map_or(0, |s| s.dim) });
            }
        }
        let jet = MetricJet2 { point, g, g_inv, d_g, dbar_g, dd_g, scheme, exact };
        let (conj_res, herm_res) = jet.symmetry_residuals();
        let limit = 10.0 * tol;
        if conj_res > limit {
            return Err(CurvError::ConjugationSymmetry { residual: conj_res, limit });
        }
        if herm_res > limit {
            return Err(CurvError::ConjugationSymmetry { residual: herm_res, limit });
        }
        Ok(jet)
    }

    /// `(max |dbar_j g_{k lbar} - conj(d_j g_{l kbar})|, max |dd_{ijkl} - conj(dd_{jilk})|)`,
    /// each relative to `max(1, largest entry)`.
    pub fn symmetry_residuals(&self) -> (f64, f64) {
        let n = self.n();
        let s1 = self.d_g.max_abs().max(1.0);
        let s2 = self.dd_g.max_abs().max(1.0);
        let mut r1: f64 = 0.0;
        let mut r2: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    r1 = r1.max((self.dbar_g[[a, b, c]] - self.d_g[[a, c, b]].conj()).norm() / s1);
                    for d in 0..n {
                        r2 = r2.max((self.dd_g[[a, b, c, d]] - self.dd_g[[b, a, d, c]].conj()).norm() / s2);
                    }
                }
            }
        }
        (r1, r2)
    }
}

fn jet_shapes(n: usize) -> (ComplexTensor, ComplexTensor, ComplexTensor) {
    use Variance::*;
    (
        ComplexTensor::zeros_uniform(n, &[HoloDown, HoloDown, AntiDown]),
        ComplexTensor::zeros_uniform(n, &[AntiDown, HoloDown, AntiDown]),
        ComplexTensor::zeros_uniform(n, &[HoloDown, AntiDown, HoloDown, AntiDown]),
    )
}

fn exact_jet(kind: &ExactJet, z: &[C64]) -> (DMatrix<C64>, ComplexTensor, ComplexTensor, ComplexTensor) {
    let n = z.len();
    let (mut d, mut dbar, mut dd) = jet_shapes(n);
    let mut g = DMatrix::<C64>::identity(n, n);
    match kind {
        ExactJet::Flat => {}
        ExactJet::PoincarePolydisk => {
            for k in 0..n {
                let u = 1.0 - z[k].norm_sqr();
                g[(k, k)] = C64::new(u.powi(-2), 0.0);
                d[[k, k, k]] = 2.0 * z[k].conj() * u.powi(-3);
                dbar[[k, k, k]] = 2.0 * z[k] * u.powi(-3);
                dd[[k, k, k, k]] = C64::new(2.0 * u.powi(-3) + 6.0 * z[k].norm_sqr() * u.powi(-4), 0.0);
            }
        }
        ExactJet::Hopf => {
            let s: f64 = z.iter().map(|c| c.norm_sqr()).sum();
            for k in 0..n {
                g[(k, k)] = C64::new(1.0 / s, 0.0);
                for i in 0..n {
                    d[[i, k, k]] = -z[i].conj() / (s * s);
                    dbar[[i, k, k]] = -z[i] / (s * s);
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        dd[[i, j, k, k]] = -delta / (s * s) + 2.0 * z[i].conj() * z[j] / (s * s * s);
                    }
                }
            }
        }
        ExactJet::Example22(p) => {
            let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            for k in 0..n {
                for l in 0..n {
                    let mut v = C64::new(delta(k, l), 0.0);
                    for i in 0..n {
                        v += p.at(i, k, l) * z[i] + (p.at(i, l, k) * z[i]).conj();
                        for j in 0..n {
                            v += 0.5 * p.aa(i, k, j, l) * z[i] * z[j].conj();
                        }
                    }
                    v += p.eps * z[l] * z[k].conj();
                    g[(k, l)] = v;
                }
            }
            for i in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut di = p.at(i, k, l);
                        let mut dj = p.at(i, l, k).conj();
                        for j in 0..n {
                            di += 0.5 * p.aa(i, k, j, l) * z[j].conj();
                            dj += 0.5 * p.aa(j, k, i, l) * z[j];
                        }
                        di += p.eps * delta(i, l) * z[k].conj();
                        dj += p.eps * delta(i, k) * z[l];
                        d[[i, k, l]] = di;
                        dbar[[i, k, l]] = dj;
                        for j in 0..n {
                            dd[[i, j, k, l]] = 0.5 * p.aa(i, k, j, l) + p.eps * delta(i, l) * delta(j, k);
                        }
                    }
                }
            }
        }
    }
    (g, d, dbar, dd)
}

/// Evaluates the metric and its Wirtinger 2-jet at `point`.
pub fn eval_jet2(spec: &MetricSpec, point: &[C64], scheme: &FdScheme) -> Result<MetricJet2> {
    scheme.validate()?;
    let n = spec.n;
    if point.len() != n {
        return Err(CurvError::DimensionMismatch { expected: n, found: point.len() });
    }
    if !spec.region.contains(point) {
        return Err(CurvError::OutsideRegion(format!("{:?}", point)));
    }
    if let (Some(kind), true) = (&spec.exact, scheme.use_exact) {
        let (g, d, dbar, dd) = exact_jet(kind, point);
        return MetricJet2::from_parts(point.to_vec(), g, d, dbar, dd, *scheme, true, scheme.tolerance());
    }
    jet_from_function(&|z: &[C64]| spec.eval_flat(z), point, n, scheme)
}

/// Finite-difference 2-jet of an arbitrary metric function returning row-major entries.
pub fn jet_from_function<F>(f: &F, point: &[C64], n: usize, scheme: &FdScheme) -> Result<MetricJet2>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let wj = wirtinger_jet(f, point, scheme, true)?;
    if wj.value.len() != n * n {
        return Err(CurvError::DimensionMismatch { expected: n * n, found: wj.value.len() });
    }
    let g = DMatrix::from_fn(n, n, |k, l| wj.value[k * n + l]);
    let (mut d, mut dbar, mut dd) = jet_shapes(n);
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                d[[i, k, l]] = wj.d[i][k * n + l];
                dbar[[i, k, l]] = wj.dbar[i][k * n + l];
                for j in 0..n {
                    dd[[i, j, k, l]] = wj.ddbar[i][j][k * n + l];
                }
            }
        }
    }
    MetricJet2::from_parts(point.to_vec(), g, d, dbar, dd, scheme.without_exact(), false, scheme.tolerance())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn flat_jet_is_zero() {
        let spec = MetricSpec::flat(2).unwrap();
        for scheme in [FdScheme::default(), FdScheme::default().without_exact()] {
            let jet = eval_jet2(&spec, &[c(0.3, 0.1), c(-0.2, 0.4)], &scheme).unwrap();
            assert_eq!(jet.d_g.max_abs(), 0.0);
            assert_eq!(jet.dd_g.max_abs(), 0.0);
        }
    }

    #[test]
    fn poincare_center_second_derivative() {
        let spec = MetricSpec::poincare_polydisk(1).unwrap();
        let exact = eval_jet2(&spec, &[ZERO], &FdScheme::default()).unwrap();
        assert_eq!(exact.dd_g[[0, 0, 0, 0]], c(2.0, 0.0));
        let fd = eval_jet2(&spec, &[ZERO], &FdScheme::default().without_exact()).unwrap();
        assert!((fd.dd_g[[0, 0, 0, 0]] - c(2.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn example22_at_origin() {
        let spec = MetricSpec::fixture_f1();
        let jet = eval_jet2(&spec, &[ZERO, ZERO], &FdScheme::default()).unwrap();
        assert!((jet.g.matrix() - DMatrix::identity(2, 2)).iter().all(|z| z.norm() < 1e-15));
        // d_1 g_{2 1bar} = A^1_{12} = 1
        assert_eq!(jet.d_g[[0, 1, 0]], ONE);
        assert_eq!(jet.dd_g[[0, 1, 0, 0]], ZERO);
        assert!((jet.dd_g[[0, 0, 1, 1]] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hopf_at_unit_vector() {
        let spec = MetricSpec::hopf(2).unwrap();
        let jet = eval_jet2(&spec, &[ONE, ZERO], &FdScheme::default()).unwrap();
        assert_eq!(jet.d_g[[0, 0, 0]], c(-1.0, 0.0));
        assert!(eval_jet2(&spec, &[ZERO, ZERO], &FdScheme::default()).is_err());
    }

    #[test]
    fn exact_and_fd_agree_on_builtins() {
        let specs = [
            MetricSpec::poincare_polydisk(2).unwrap(),
            MetricSpec::fixture_f1(),
            MetricSpec::hopf(2).unwrap(),
            MetricSpec::example22(Example22Params::standard(3, 0.3).unwrap()).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for spec in &specs {
            for _ in 0..16 {
                let z = spec.region.sample(spec.n, &mut rng);
                let a = eval_jet2(spec, &z, &FdScheme::default()).unwrap();
                let b = eval_jet2(spec, &z, &FdScheme::default().without_exact()).unwrap();
                assert!(a.g.matrix().iter().zip(b.g.matrix().iter()).all(|(x, y)| (x - y).norm() < 1e-13));
                let scale = a.dd_g.max_abs().max(1.0);
                assert!(a.d_g.max_abs_diff(&b.d_g) < 1e-7 * scale, "{} d_g", spec);
                assert!(a.dbar_g.max_abs_diff(&b.dbar_g) < 1e-7 * scale, "{} dbar_g", spec);
                assert!(a.dd_g.max_abs_diff(&b.dd_g) < 1e-7 * scale, "{} dd_g", spec);
            }
        }
    }

    #[test]
    fn halving_h_reduces_error() {
        let spec = MetricSpec::poincare_polydisk(1).unwrap();
        let z = [c(0.4, 0.2)];
        let exact = eval_jet2(&spec, &z, &FdScheme::default()).unwrap();
        let err = |h: f64| {
            let s = FdScheme::new(h, 2, 0).unwrap().without_exact();
            eval_jet2(&spec, &z, &s).unwrap().dd_g.max_abs_diff(&exact.dd_g)
        };
        let (e1, e2) = (err(4e-2), err(2e-2));
        assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
        let err4 = |h: f64| {
            let s = FdScheme::new(h, 4, 0).unwrap().without_exact();
            eval_jet2(&spec, &z, &s).unwrap().dd_g.max_abs_diff(&exact.dd_g)
        };
        let (e1, e2) = (err4(4e-2), err4(2e-2));
        assert!(e1 / e2 > 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn deterministic() {
        let spec = MetricSpec::hopf(2).unwrap().without_exact();
        let z = [c(0.7, 0.1), c(0.2, -0.5)];
        let a = eval_jet2(&spec, &z, &FdScheme::default()).unwrap();
        let b = eval_jet2(&spec, &z, &FdScheme::default()).unwrap();
        assert_eq!(a.dd_g, b.dd_g);
        assert_eq!(a.d_g, b.d_g);
    }

    #[test]
    fn parse_and_hermitian_check() {
        let ok = r#"{"n": 2, "entries": [["2", "1 + z1*conj(z2)"], ["1 + z2*conj(z1)", "2"]], "region": {"type": "ball", "radius": 0.5}}"#;
        let spec = parse_metric_spec(ok).unwrap();
        assert_eq!(spec.n, 2);
        let bad = r#"{"n": 2, "entries": [["2", "1 + z1*conj(z2)"], ["1 + z1*conj(z2)", "2"]], "region": {"type": "ball", "radius": 0.5}}"#;
        assert!(matches!(parse_metric_spec(bad), Err(CurvError::NotHermitian(_))));
        let one = parse_metric_spec("1/(1 - abs2(z1))^2").unwrap();
        assert!((one.eval_matrix(&[c(0.5, 0.0)]).unwrap()[(0, 0)].re - 16.0 / 9.0).abs() < 1e-14);
        let again = MetricSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(again.entries, spec.entries);
    }

    #[test]
    fn builtin_names() {
        assert_eq!(MetricSpec::from_builtin("flat(3)").unwrap().n, 3);
        assert_eq!(MetricSpec::from_builtin("example22").unwrap().label, "example22(2, 0.1)");
        assert_eq!(MetricSpec::from_builtin("example22(2, 0.3)").unwrap().label, "example22(2, 0.3)");
        assert!(MetricSpec::from_builtin("nope(2)").is_err());
        assert!(MetricSpec::from_builtin("example22(2, -1)").is_err());
    }

    #[test]
    fn example22_rejects_symmetric_a() {
        let mut p = Example22Params::standard(2, 0.1).unwrap();
        p.a[4] = ONE; // A^1_{21} made equal to A^1_{12}
        assert!(MetricSpec::example22(p).is_err());
    }
}
