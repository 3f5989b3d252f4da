//! Curvature functionals in a unitary frame and a sampling extremizer that
//! produces bound certificates.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chern::ChernPackage;
use crate::error::{CurvError, Result};
use crate::fd::FdScheme;
use crate::metric::{eval_jet2, gaussian, MetricSpec, Region};
use crate::tensor::{psd_project, ComplexTensor, HermitianMatrix, PsdForm, Variance, C64, ZERO};

use Variance::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauRole {
    /// Tempered bisectional curvature of a target metric: `tau` in `[0, inf)`.
    Target,
    /// Tempered Ricci curvature of a source metric: `tau` in `(0, inf]`.
    Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauParam {
    value: f64,
    role: TauRole,
}

impl TauParam {
    pub fn new(value: f64, role: TauRole) -> Result<Self> {
        let ok = match role {
            TauRole::Target => value.is_finite() && value >= 0.0,
            TauRole::Source => value > 0.0 && !value.is_nan(),
        };
        if !ok {
            let role = match role {
                TauRole::Target => "target",
                TauRole::Source => "source",
            };
            return Err(CurvError::TauRole { value, role });
        }
        Ok(TauParam { value, role })
    }

    pub fn target(value: f64) -> Result<Self> {
        TauParam::new(value, TauRole::Target)
    }

    pub fn source(value: f64) -> Result<Self> {
        TauParam::new(value, TauRole::Source)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn role(&self) -> TauRole {
        self.role
    }

    /// `1 - 1/tau`, equal to 1 at `tau = inf`.
    pub fn one_minus_inverse(&self) -> f64 {
        if self.value.is_infinite() {
            1.0
        } else {
            1.0 - 1.0 / self.value
        }
    }

    fn require(&self, role: TauRole) -> Result<()> {
        if self.role != role {
            TauParam::new(self.value, role)?;
        }
        Ok(())
    }
}

fn check_real(v: C64, scale: f64) -> Result<f64> {
    if v.im.abs() > 1e-8 * scale.max(1.0) {
        return Err(CurvError::NotHermitian(v.im.abs()));
    }
    Ok(v.re)
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `sum R_{a bbar c dbar} zeta^a conj(zeta^b) zeta^c conj(zeta^d) / |zeta|^4`.
pub fn hsc(pkg: &ChernPackage, zeta: &[C64]) -> Result<f64> {
    hbc(pkg, zeta, zeta)
}

/// `R(zeta, conj zeta, nu, conj nu) / (|zeta|^2 |nu|^2)`.
pub fn hbc(pkg: &ChernPackage, zeta: &[C64], nu: &[C64]) -> Result<f64> {
    pkg.require_unitary()?;
    let n = pkg.n();
    if zeta.len() != n || nu.len() != n {
        return Err(CurvError::DimensionMismatch { expected: n, found: zeta.len().min(nu.len()) });
    }
    let (zz, nn) = (norm_sqr(zeta), norm_sqr(nu));
    if zz == 0.0 || nn == 0.0 {
        return Err(CurvError::ZeroVector);
    }
    let r = &pkg.curvature;
    let mut acc = ZERO;
    for a in 0..n {
        for b in 0..n {
            let ab = zeta[a] * zeta[b].conj();
            for c in 0..n {
                for d in 0..n {
                    acc += r[[a, b, c, d]] * ab * nu[c] * nu[d].conj();
                }
            }
        }
    }
    check_real(acc / (zz * nn), r.max_abs())
}

/// `sum X_{a b c d} xi^{a bbar} xi^{c dbar}` without normalization.
pub fn quartic_form(x: &ComplexTensor, xi: &DMatrix<C64>) -> C64 {
    let n = xi.nrows();
    let mut acc = ZERO;
    for a in 0..n {
        for b in 0..n {
            let xab = xi[(a, b)];
            if xab == ZERO {
                continue;
            }
            for c in 0..n {
                for d in 0..n {
                    acc += x[[a, b, c, d]] * xab * xi[(c, d)];
                }
            }
        }
    }
    acc
}

/// `TT_{a bbar c dbar} = sum_r T^r_{ac} conj(T^r_{bd})`.
pub fn torsion_square(t: &ComplexTensor) -> ComplexTensor {
    let n = t.shape()[0].dim;
    let shape = ComplexTensor::zeros_uniform(n, &[HoloDown, AntiDown, HoloDown, AntiDown]).shape().to_vec();
    ComplexTensor::from_fn(shape, |ix| {
        let (a, b, c, d) = (ix[0], ix[1], ix[2], ix[3]);
        (0..n).map(|r| t[[a, c, r]] * t[[b, d, r]].conj()).sum()
    })
}

/// `R_{a bbar c dbar} - (1 - tau)/4 sum_r T^r_{ac} conj(T^r_{bd})`.
pub fn tempered_tensor(pkg: &ChernPackage, tau: TauParam) -> Result<ComplexTensor> {
    pkg.require_unitary()?;
    tau.require(TauRole::Target)?;
    if tau.value() == 1.0 {
        return Ok(pkg.curvature.clone());
    }
    let tt = torsion_square(&pkg.torsion);
    pkg.curvature.sub(&tt.scale(C64::new((1.0 - tau.value()) / 4.0, 0.0)))
}

fn check_form(pkg: &ChernPackage, xi: &PsdForm) -> Result<()> {
    pkg.require_unitary()?;
    if xi.dim() != pkg.n() {
        return Err(CurvError::DimensionMismatch { expected: pkg.n(), found: xi.dim() });
    }
    if xi.norm() == 0.0 {
        return Err(CurvError::ZeroVector);
    }
    Ok(())
}

/// Real bisectional curvature `sum R xi xi / |xi|^2`.
pub fn rbc(pkg: &ChernPackage, xi: &PsdForm) -> Result<f64> {
    check_form(pkg, xi)?;
    form_value(pkg, FormKind::Rbc(1.0), xi.xi().matrix())
}

/// Tempered real bisectional curvature; equals [`rbc`] exactly at `tau = 1`.
pub fn rbc_tau(pkg: &ChernPackage, tau: TauParam, xi: &PsdForm) -> Result<f64> {
    check_form(pkg, xi)?;
    tau.require(TauRole::Target)?;
    form_value(pkg, FormKind::Rbc(tau.value()), xi.xi().matrix())
}

#[derive(Clone, Copy)]
enum FormKind {
    Rbc(f64),
    Altered,
    PluriclosedGap,
}

/// Form functionals on an arbitrary nonzero Hermitian `m`; the public
/// wrappers restrict to PSD forms, the ascent probes off that cone.
fn form_value(pkg: &ChernPackage, kind: FormKind, m: &DMatrix<C64>) -> Result<f64> {
    let norm2 = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if norm2 == 0.0 {
        return Err(CurvError::ZeroVector);
    }
    let r = &pkg.curvature;
    let v = match kind {
        FormKind::Rbc(1.0) => quartic_form(r, m),
        FormKind::Rbc(tau) => quartic_form(r, m) - (1.0 - tau) / 4.0 * torsion_quadratic(pkg, m),
        FormKind::Altered => quartic_form(r, m) + quartic_form(&r.permute(&[0, 3, 2, 1])?, m),
        FormKind::PluriclosedGap => {
            let r0 = form_value(pkg, FormKind::Rbc(0.0), m)?;
            let alt = form_value(pkg, FormKind::Altered, m)?;
            return Ok((r0 - 0.5 * alt).abs());
        }
    };
    check_real(v / norm2, r.max_abs())
}

/// `sum_r T^r_{ac} conj(T^r_{bd}) xi^{a bbar} xi^{c dbar}`; real and nonnegative for PSD `xi`.
pub fn torsion_quadratic(pkg: &ChernPackage, xi: &DMatrix<C64>) -> C64 {
    quartic_form(&torsion_square(&pkg.torsion), xi)
}

/// `sum (R_{a bbar c dbar} + R_{a dbar c bbar}) xi^{a bbar} xi^{c dbar} / |xi|^2`.
pub fn altered_hsc(pkg: &ChernPackage, xi: &PsdForm) -> Result<f64> {
    check_form(pkg, xi)?;
    form_value(pkg, FormKind::Altered, xi.xi().matrix())
}

/// `Ric^(2) + (1 - 1/tau)/4 Q°`; returns `Ric^(2)` itself at `tau = 1`.
pub fn ric_tau(pkg: &ChernPackage, tau: TauParam) -> Result<HermitianMatrix> {
    tau.require(TauRole::Source)?;
    if tau.value() == 1.0 {
        return Ok(pkg.ric.ric2.clone());
    }
    let c = tau.one_minus_inverse() / 4.0;
    Ok(HermitianMatrix::hermitian_part(&(pkg.ric.ric2.matrix() + pkg.q_circ.matrix().scale(c))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalId {
    Hsc,
    Hbc,
    RbcTau,
    AlteredHsc,
    /// Rayleigh quotient of the tempered Ricci form.
    RicTau,
    /// `|RBC^0(xi) - altered_hsc(xi) / 2|`.
    PluriclosedGap,
}

impl FunctionalId {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "hsc" => Ok(FunctionalId::Hsc),
            "hbc" => Ok(FunctionalId::Hbc),
            "rbc" | "rbc_tau" => Ok(FunctionalId::RbcTau),
            "altered_hsc" => Ok(FunctionalId::AlteredHsc),
            "ric_tau" => Ok(FunctionalId::RicTau),
            "pluriclosed_gap" => Ok(FunctionalId::PluriclosedGap),
            _ => Err(CurvError::InvalidParameter(format!("unknown functional '{}'", s))),
        }
    }

    fn needs_form(self) -> bool {
        matches!(self, FunctionalId::RbcTau | FunctionalId::AlteredHsc | FunctionalId::PluriclosedGap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Sup,
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub starts: usize,
    pub steps: usize,
    pub step: f64,
    pub fd_step: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { starts: 64, steps: 200, step: 1e-2, fd_step: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PointSource {
    Fixed(Vec<Vec<C64>>),
    Sampled(Region),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Witness {
    Vector(Vec<C64>),
    Pair(Vec<C64>, Vec<C64>),
    /// Row-major entries of a unit-norm PSD form.
    Form(Vec<C64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub functional: FunctionalId,
    pub kind: BoundKind,
    pub tau: Option<f64>,
    pub value: f64,
    pub point: Vec<C64>,
    pub witness: Witness,
    pub samples: usize,
    pub ascent_iterations: usize,
    pub tolerance: f64,
}

/// Evaluates `id` at a unitary package for a direction given as a witness.
pub fn evaluate_functional(id: FunctionalId, pkg: &ChernPackage, tau: Option<f64>, w: &Witness) -> Result<f64> {
    if let Witness::Form(entries) = w {
        let n = pkg.n();
        if entries.len() != n * n {
            return Err(CurvError::DimensionMismatch { expected: n * n, found: entries.len() });
        }
        PsdForm::new(HermitianMatrix::hermitian_part(&DMatrix::from_row_slice(n, n, entries)))?;
    }
    evaluate_raw(id, pkg, tau, w)
}

fn evaluate_raw(id: FunctionalId, pkg: &ChernPackage, tau: Option<f64>, w: &Witness) -> Result<f64> {
    pkg.require_unitary()?;
    let need_tau = |role| -> Result<TauParam> {
        TauParam::new(tau.ok_or_else(|| CurvError::InvalidParameter("tau is required".into()))?, role)
    };
    match (id, w) {
        (FunctionalId::Hsc, Witness::Vector(z)) => hsc(pkg, z),
        (FunctionalId::Hbc, Witness::Pair(z, v)) => hbc(pkg, z, v),
        (FunctionalId::RicTau, Witness::Vector(z)) => {
            let m = ric_tau(pkg, need_tau(TauRole::Source)?)?;
            let nz = norm_sqr(z);
            if nz == 0.0 {
                return Err(CurvError::ZeroVector);
            }
            Ok(m.quadratic_form(z) / nz)
        }
        (id, Witness::Form(entries)) if id.needs_form() => {
            let n = pkg.n();
            let m = HermitianMatrix::hermitian_part(&DMatrix::from_row_slice(n, n, entries)).into_matrix();
            let kind = match id {
                FunctionalId::RbcTau => FormKind::Rbc(need_tau(TauRole::Target)?.value()),
                FunctionalId::AlteredHsc => FormKind::Altered,
                _ => FormKind::PluriclosedGap,
            };
            form_value(pkg, kind, &m)
        }
        _ => Err(CurvError::InvalidParameter(format!("witness kind does not match functional {:?}", id))),
    }
}

/// Real parameterization of a direction, used by the ascent.
fn to_params(w: &Witness) -> Vec<f64> {
    let flat = |v: &[C64]| v.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>();
    match w {
        Witness::Vector(z) => flat(z),
        Witness::Pair(a, b) => [flat(a), flat(b)].concat(),
        Witness::Form(m) => flat(m),
    }
}

fn from_params(template: &Witness, x: &[f64]) -> Witness {
    let unflat = |x: &[f64]| x.chunks(2).map(|c| C64::new(c[0], c[1])).collect::<Vec<_>>();
    match template {
        Witness::Vector(_) => Witness::Vector(unflat(x)),
        Witness::Pair(a, _) => {
            let split = 2 * a.len();
            Witness::Pair(unflat(&x[..split]), unflat(&x[split..]))
        }
        Witness::Form(_) => Witness::Form(unflat(x)),
    }
}

fn normalize(v: &[C64]) -> Result<Vec<C64>> {
    let n = norm_sqr(v).sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(CurvError::ZeroVector);
    }
    Ok(v.iter().map(|z| z / n).collect())
}

/// Projects onto unit vectors or unit-norm PSD forms.
fn project(w: &Witness, n: usize) -> Result<Witness> {
    Ok(match w {
        Witness::Vector(z) => Witness::Vector(normalize(z)?),
        Witness::Pair(a, b) => Witness::Pair(normalize(a)?, normalize(b)?),
        Witness::Form(m) => {
            let m = DMatrix::from_row_slice(n, n, m);
            let p = psd_project(&HermitianMatrix::hermitian_part(&m))?;
            Witness::Form(p.xi().matrix().transpose().iter().copied().collect())
        }
    })
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| C64::new(gaussian(rng), gaussian(rng))).collect()
}

fn random_witness(id: FunctionalId, n: usize, rng: &mut ChaCha8Rng) -> Result<Witness> {
    for _ in 0..64 {
        let w = match id {
            FunctionalId::Hsc | FunctionalId::RicTau => Witness::Vector(random_vector(n, rng)),
            FunctionalId::Hbc => Witness::Pair(random_vector(n, rng), random_vector(n, rng)),
            _ => Witness::Form(random_vector(n * n, rng)),
        };
        match project(&w, n) {
            Ok(p) => return Ok(p),
            Err(CurvError::DegeneratePsd) | Err(CurvError::ZeroVector) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(CurvError::BudgetExhausted)
}

/// Extremization problem over points and directions.
#[derive(Debug, Clone)]
pub struct ExtremumProblem {
    pub functional: FunctionalId,
    pub kind: BoundKind,
    pub tau: Option<f64>,
    pub points: PointSource,
    pub budget: Budget,
    pub scheme: FdScheme,
    pub seed: u64,
}

impl ExtremumProblem {
    pub fn new(functional: FunctionalId, kind: BoundKind, points: PointSource) -> Self {
        ExtremumProblem {
            functional,
            kind,
            tau: None,
            points,
            budget: Budget::default(),
            scheme: FdScheme::default(),
            seed: 0,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }
}

struct StartOutcome {
    value: f64,
    point: Vec<C64>,
    witness: Witness,
    iterations: usize,
}

fn ascend(
    problem: &ExtremumProblem,
    pkg: &ChernPackage,
    start: Witness,
) -> Result<(f64, Witness, usize)> {
    let n = pkg.n();
    let sign = match problem.kind {
        BoundKind::Sup => 1.0,
        BoundKind::Inf => -1.0,
    };
    let f = |w: &Witness| evaluate_raw(problem.functional, pkg, problem.tau, w).map(|v| sign * v);
    let mut cur = start;
    let mut fcur = f(&cur)?;
    let mut step = problem.budget.step;
    let h = problem.budget.fd_step;
    let mut iterations = 0;
    for _ in 0..problem.budget.steps {
        if step < 1e-12 {
            break;
        }
        iterations += 1;
        let x = to_params(&cur);
        let mut grad = vec![0.0; x.len()];
        let mut probe = x.clone();
        for k in 0..x.len() {
            probe[k] = x[k] + h;
            let up = f(&from_params(&cur, &probe));
            probe[k] = x[k] - h;
            let down = f(&from_params(&cur, &probe));
            probe[k] = x[k];
            if let (Ok(u), Ok(d)) = (up, down) {
                grad[k] = (u - d) / (2.0 * h);
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-14 {
            break;
        }
        let moved: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a + step * g / gnorm).collect();
        let candidate = project(&from_params(&cur, &moved), n).and_then(|w| f(&w).map(|v| (v, w)));
        match candidate {
            Ok((v, w)) if v > fcur => {
                fcur = v;
                cur = w;
                step *= 2.0;
            }
            _ => step *= 0.5,
        }
    }
    Ok((sign * fcur, cur, iterations))
}

/// Multistart projected gradient ascent (or descent for `Inf`).
///
/// Starts run in parallel; each uses its own stream of a ChaCha generator
/// seeded with `problem.seed`, and the reduction breaks ties by start index,
/// so the certificate depends only on the problem.
pub fn estimate_extremum(spec: &MetricSpec, problem: &ExtremumProblem) -> Result<BoundCertificate> {
    if problem.budget.starts == 0 {
        return Err(CurvError::InvalidParameter("budget needs at least one start".into()));
    }
    let n = spec.n;
    let fixed: Option<Vec<(Vec<C64>, Result<ChernPackage>)>> = match &problem.points {
        PointSource::Fixed(points) if points.is_empty() => {
            return Err(CurvError::InvalidParameter("no points to sample".into()))
        }
        PointSource::Fixed(points) => Some(
            points
                .iter()
                .map(|p| {
                    let pkg = eval_jet2(spec, p, &problem.scheme).and_then(|j| ChernPackage::unitary_from_jet(&j));
                    (p.clone(), pkg)
                })
                .collect(),
        ),
        PointSource::Sampled(_) => None,
    };

    let outcomes: Vec<Option<StartOutcome>> = (0..problem.budget.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
            rng.set_stream(s as u64);
            let (point, pkg) = match (&fixed, &problem.points) {
                (Some(list), _) => {
                    let (p, pkg) = &list[s % list.len()];
                    (p.clone(), pkg.as_ref().ok()?.clone())
                }
                (None, PointSource::Sampled(region)) => {
                    let p = region.sample(n, &mut rng);
                    let jet = eval_jet2(spec, &p, &problem.scheme).ok()?;
                    (p, ChernPackage::unitary_from_jet(&jet).ok()?)
                }
                _ => unreachable!("fixed points are cached above"),
            };
            let start = random_witness(problem.functional, n, &mut rng).ok()?;
            let (value, witness, iterations) = ascend(problem, &pkg, start).ok()?;
            Some(StartOutcome { value, point, witness, iterations })
        })
        .collect();

    let mut best: Option<StartOutcome> = None;
    let mut samples = 0;
    let mut iterations = 0;
    for o in outcomes.into_iter().flatten() {
        samples += 1;
        iterations += o.iterations;
        let better = match (&best, problem.kind) {
            (None, _) => true,
            (Some(b), BoundKind::Sup) => o.value > b.value,
            (Some(b), BoundKind::Inf) => o.value < b.value,
        };
        if better {
            best = Some(o);
        }
    }
    let best = best.ok_or(CurvError::BudgetExhausted)?;
    Ok(BoundCertificate {
        functional: problem.functional,
        kind: problem.kind,
        tau: problem.tau,
        value: best.value,
        point: best.point,
        witness: best.witness,
        samples,
        ascent_iterations: iterations,
        tolerance: 1e-10,
    })
}

/// Re-evaluates a certificate's functional at its witness.
pub fn reevaluate(spec: &MetricSpec, cert: &BoundCertificate, scheme: &FdScheme) -> Result<f64> {
    let jet = eval_jet2(spec, &cert.point, scheme)?;
    let pkg = ChernPackage::unitary_from_jet(&jet)?;
    evaluate_functional(cert.functional, &pkg, cert.tau, &cert.witness)
}
