//! Tempered Hermitian curvature flow: the velocity field, the pointwise
//! parabolic Schwarz inequality for `tr_{omega_t} omega_h`, and an explicit
//! Euler stepper on a regular grid in chart coordinates.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chern::ChernPackage;
use crate::error::{CurvError, Result};
use crate::fd::{complex_laplacian, FdScheme};
use crate::functionals::{ric_tau, TauParam};
use crate::metric::{eval_jet2, MetricJet2, MetricSpec};
use crate::schwarz::trace;
use crate::tensor::{ComplexTensor, HermitianMatrix, Variance, C64, ZERO};

use Variance::*;

/// `-Ric^(2) - (1 - 1/tau)/4 Q^2 - g` in chart coordinates.
pub fn thcf_velocity(jet: &MetricJet2, tau: TauParam) -> Result<HermitianMatrix> {
    let tau = TauParam::source(tau.value())?;
    let pkg = ChernPackage::from_jet(jet)?;
    let mut v = -pkg.ric.ric2.matrix() - jet.g.matrix();
    if tau.value() != 1.0 {
        v -= pkg.q2.matrix().scale(tau.one_minus_inverse() / 4.0);
    }
    Ok(HermitianMatrix::hermitian_part(&v))
}

/// `d/dt tr_g h = -tr(G^{-1} V G^{-1} H)` for velocity `V`.
fn trace_rate(g: &DMatrix<C64>, h: &DMatrix<C64>, v: &DMatrix<C64>) -> Result<f64> {
    let gi = g.clone().try_inverse().ok_or(CurvError::Singular)?;
    Ok(-(&gi * v * &gi * h).trace().re)
}

/// Terms of `(d/dt - Delta) tr <= -(kappa0 / n) tr^2 + tr` at one point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParabolicResidual {
    pub trace: f64,
    /// From the velocity.
    pub dt_trace: f64,
    /// From one explicit step of size `fd_dt`, for comparison.
    pub dt_trace_fd: f64,
    pub laplacian_trace: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; the inequality predicts a nonpositive value.
    pub residual: f64,
    /// Minimum eigenvalue of `V - (-Ric^tau - g)`.
    pub supersolution_min_eigenvalue: f64,
    /// Trace of `V - (-Ric^tau - g)` against `g`.
    pub supersolution_trace: f64,
    pub supersolution_holds: bool,
}

const SUPERSOLUTION_TOL: f64 = 1e-9;
const FD_DT: f64 = 1e-6;

#[allow(clippy::too_many_arguments)]
fn assemble_residual(
    g_jet: &MetricJet2,
    h: &DMatrix<C64>,
    v: &HermitianMatrix,
    tau: TauParam,
    kappa0: f64,
    laplacian_trace: f64,
) -> Result<ParabolicResidual> {
    let n = g_jet.n() as f64;
    let g = g_jet.g.matrix();
    let tr = trace(g, h)?;
    let dt_trace = trace_rate(g, h, v.matrix())?;
    let dt_trace_fd = (trace(&(g + v.matrix().scale(FD_DT)), h)? - tr) / FD_DT;
    let lhs = dt_trace - laplacian_trace;
    let rhs = -(kappa0 / n) * tr * tr + tr;

    let pkg = ChernPackage::from_jet(g_jet)?;
    let rt = ric_tau(&pkg, tau)?;
    let lower = -rt.matrix() - g;
    let diff = HermitianMatrix::hermitian_part(&(v.matrix() - lower));
    let supersolution_min_eigenvalue = diff.min_eigenvalue();
    let supersolution_trace = trace(g, diff.matrix())?;
    Ok(ParabolicResidual {
        trace: tr,
        dt_trace,
        dt_trace_fd,
        laplacian_trace,
        lhs,
        rhs,
        residual: lhs - rhs,
        supersolution_min_eigenvalue,
        supersolution_trace,
        supersolution_holds: supersolution_min_eigenvalue >= -SUPERSOLUTION_TOL,
    })
}

/// Parabolic Schwarz residual with `omega_t` given by `omega` at the current
/// time and its time derivative by the flow velocity.
pub fn parabolic_schwarz_residual(
    omega: &MetricSpec,
    reference: &MetricSpec,
    tau: TauParam,
    kappa0: f64,
    point: &[C64],
    scheme: &FdScheme,
) -> Result<ParabolicResidual> {
    if omega.n != reference.n {
        return Err(CurvError::DimensionMismatch { expected: omega.n, found: reference.n });
    }
    let jet = eval_jet2(omega, point, scheme)?;
    let v = thcf_velocity(&jet, tau)?;
    let h = reference.eval_matrix(point)?;
    let lap = complex_laplacian(
        &|z: &[C64]| {
            if !omega.region.contains(z) || !reference.region.contains(z) {
                return Err(CurvError::StencilOutOfRegion(format!("{:?}", z)));
            }
            trace(&omega.eval_matrix(z)?, &reference.eval_matrix(z)?).map(|t| C64::new(t, 0.0))
        },
        point,
        &jet.ginv_rows(),
        scheme,
    )?;
    assemble_residual(&jet, &h, &v, tau, kappa0, lap.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Frozen,
    Periodic,
}

/// Regular lattice over `[extent[0], extent[1]]` in every real coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extent: [f64; 2],
    pub resolution: usize,
    pub boundary: Boundary,
}

/// Periodic by default: translation-invariant data then stays an exact
/// solution, while a frozen boundary injects curvature at the edges.
impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { extent: [-0.5, 0.5], resolution: 11, boundary: Boundary::Periodic }
    }
}

impl GridSpec {
    pub fn spacing(&self) -> f64 {
        let len = self.extent[1] - self.extent[0];
        match self.boundary {
            Boundary::Frozen => len / (self.resolution - 1) as f64,
            Boundary::Periodic => len / self.resolution as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.resolution < 3 || !(self.extent[1] > self.extent[0]) {
            return Err(CurvError::InvalidParameter(format!(
                "grid needs resolution >= 3 and a nonempty extent, got {:?}",
                self
            )));
        }
        Ok(())
    }
}

type GridJet = (Vec<Vec<C64>>, Vec<Vec<Vec<C64>>>);

/// Hermitian metric sampled on a grid of `resolution^(2n)` nodes.
#[derive(Debug, Clone)]
pub struct GridMetricField {
    pub n: usize,
    pub grid: GridSpec,
    pub values: Vec<DMatrix<C64>>,
}

impl GridMetricField {
    pub fn from_metric(spec: &MetricSpec, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        if spec.n != 1 && spec.n != 2 {
            return Err(CurvError::InvalidParameter(format!("grid flow supports n = 1 or 2, got {}", spec.n)));
        }
        let mut field = GridMetricField { n: spec.n, grid, values: Vec::new() };
        let values = (0..field.node_count())
            .into_par_iter()
            .map(|k| {
                let z = field.node_point(k);
                if !spec.region.contains(&z) {
                    return Err(CurvError::OutsideRegion(format!("grid node {:?}", z)));
                }
                let g = spec.eval_matrix(&z)?;
                if !HermitianMatrix::hermitian_part(&g).is_positive_definite() {
                    return Err(CurvError::NotPositiveDefinite);
                }
                Ok(g)
            })
            .collect::<Result<Vec<_>>>()?;
        field.values = values;
        Ok(field)
    }

    pub fn node_count(&self) -> usize {
        self.grid.resolution.pow(2 * self.n as u32)
    }

    fn axes(&self) -> usize {
        2 * self.n
    }

    fn index(&self, k: usize) -> Vec<usize> {
        let r = self.grid.resolution;
        let mut rest = k;
        let mut ix = vec![0; self.axes()];
        for a in (0..self.axes()).rev() {
            ix[a] = rest % r;
            rest /= r;
        }
        ix
    }

    fn flat(&self, ix: &[usize]) -> usize {
        ix.iter().fold(0, |acc, &i| acc * self.grid.resolution + i)
    }

    pub fn node_point(&self, k: usize) -> Vec<C64> {
        let ix = self.index(k);
        let h = self.grid.spacing();
        let x = |i: usize| self.grid.extent[0] + i as f64 * h;
        (0..self.n).map(|c| C64::new(x(ix[2 * c]), x(ix[2 * c + 1]))).collect()
    }

    /// The node nearest to `z`.
    pub fn nearest_node(&self, z: &[C64]) -> usize {
        let h = self.grid.spacing();
        let r = self.grid.resolution as f64;
        let coord = |x: f64| (((x - self.grid.extent[0]) / h).round()).clamp(0.0, r - 1.0) as usize;
        let ix: Vec<usize> = z.iter().flat_map(|c| [coord(c.re), coord(c.im)]).collect();
        self.flat(&ix)
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.grid.boundary == Boundary::Frozen
            && self.index(k).iter().any(|&i| i == 0 || i == self.grid.resolution - 1)
    }

    /// Node reached from `k` by the signed offsets `steps[axis]`.
    fn shifted(&self, k: usize, steps: &[(usize, i64)]) -> Result<usize> {
        let r = self.grid.resolution as i64;
        let mut ix = self.index(k);
        for &(axis, d) in steps {
            let j = ix[axis] as i64 + d;
            ix[axis] = match self.grid.boundary {
                Boundary::Periodic => j.rem_euclid(r) as usize,
                Boundary::Frozen if (0..r).contains(&j) => j as usize,
                Boundary::Frozen => return Err(CurvError::StencilOutOfRegion(format!("grid node {}", k))),
            };
        }
        Ok(self.flat(&ix))
    }

    /// Second-order central real jet of per-node values `u` (vector valued):
    /// first derivatives per axis and second derivatives per axis pair.
    fn real_jet(&self, u: &dyn Fn(usize) -> Vec<C64>, k: usize) -> Result<GridJet> {
        let h = self.grid.spacing();
        let d = self.axes();
        let u0 = u(k);
        let m = u0.len();
        let mut first = vec![vec![ZERO; m]; d];
        let mut second = vec![vec![vec![ZERO; m]; d]; d];
        for a in 0..d {
            let (up, dn) = (u(self.shifted(k, &[(a, 1)])?), u(self.shifted(k, &[(a, -1)])?));
            for c in 0..m {
                first[a][c] = (up[c] - dn[c]) / (2.0 * h);
                second[a][a][c] = ((up[c] - u0[c]) + (dn[c] - u0[c])) / (h * h);
            }
            for b in 0..a {
                let pp = u(self.shifted(k, &[(a, 1), (b, 1)])?);
                let pm = u(self.shifted(k, &[(a, 1), (b, -1)])?);
                let mp = u(self.shifted(k, &[(a, -1), (b, 1)])?);
                let mm = u(self.shifted(k, &[(a, -1), (b, -1)])?);
                for c in 0..m {
                    let v = ((pp[c] - pm[c]) - (mp[c] - mm[c])) / (4.0 * h * h);
                    second[a][b][c] = v;
                    second[b][a][c] = v;
                }
            }
        }
        Ok((first, second))
    }

    /// Metric 2-jet at node `k` from grid differences.
    pub fn jet_at(&self, k: usize) -> Result<MetricJet2> {
        let n = self.n;
        let vals = |j: usize| self.values[j].transpose().iter().copied().collect::<Vec<_>>();
        let (first, second) = self.real_jet(&vals, k)?;
        let i_unit = C64::new(0.0, 1.0);
        let mut d = ComplexTensor::zeros_uniform(n, &[HoloDown, HoloDown, AntiDown]);
        let mut dbar = ComplexTensor::zeros_uniform(n, &[AntiDown, HoloDown, AntiDown]);
        let mut dd = ComplexTensor::zeros_uniform(n, &[HoloDown, AntiDown, HoloDown, AntiDown]);
        for i in 0..n {
            for p in 0..n {
                for q in 0..n {
                    let c = p * n + q;
                    let (dx, dy) = (first[2 * i][c], first[2 * i + 1][c]);
                    d[[i, p, q]] = (dx - i_unit * dy) * 0.5;
                    dbar[[i, p, q]] = (dx + i_unit * dy) * 0.5;
                    for j in 0..n {
                        let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                        let re = second[xi][xj][c] + second[yi][yj][c];
                        let im = second[xi][yj][c] - second[yi][xj][c];
                        dd[[i, j, p, q]] = (re + i_unit * im) * 0.25;
                    }
                }
            }
        }
        let scheme = FdScheme { h: self.grid.spacing(), order: 2, richardson: 0, use_exact: false };
        MetricJet2::from_parts(self.node_point(k), self.values[k].clone(), d, dbar, dd, scheme, false, 1e-6)
    }

    /// `g^{i jbar} d_i dbar_j u` at node `k` for a scalar node field.
    pub fn laplacian(&self, u: &[f64], k: usize) -> Result<f64> {
        let n = self.n;
        let (_, second) = self.real_jet(&|j| vec![C64::new(u[j], 0.0)], k)?;
        let gi = self.values[k].clone().try_inverse().ok_or(CurvError::Singular)?;
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                let re = second[xi][xj][0] + second[yi][yj][0];
                let im = second[xi][yj][0] - second[yi][xj][0];
                // g^{i jbar} = Ginv[(j, i)]
                acc += gi[(j, i)] * (re + C64::new(0.0, 1.0) * im) * 0.25;
            }
        }
        Ok(acc.re)
    }

    /// Velocity at every node; frozen boundary nodes get `None`.
    pub fn velocity(&self, tau: TauParam) -> Result<Vec<Option<HermitianMatrix>>> {
        (0..self.node_count())
            .into_par_iter()
            .map(|k| {
                if self.is_boundary(k) {
                    return Ok(None);
                }
                thcf_velocity(&self.jet_at(k)?, tau).map(Some)
            })
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values
            .iter()
            .map(|g| HermitianMatrix::hermitian_part(g).min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }

    /// `tr_{g} h` at every node.
    pub fn trace_field(&self, reference: &MetricSpec) -> Result<Vec<f64>> {
        (0..self.node_count())
            .into_par_iter()
            .map(|k| trace(&self.values[k], &reference.eval_matrix(&self.node_point(k))?))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub substeps: usize,
    pub sup_trace: f64,
    pub min_eigenvalue: f64,
    pub max_velocity: f64,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub time: f64,
    pub field: GridMetricField,
    pub tau: TauParam,
    /// Metric `h` whose trace is monitored.
    pub reference: MetricSpec,
    pub history: Vec<FlowDiagnostics>,
}

/// Halvings of the requested step allowed before a step is rejected.
pub const MAX_HALVINGS: u32 = 8;

impl FlowState {
    pub fn new(initial: &MetricSpec, grid: GridSpec, tau: TauParam, reference: MetricSpec) -> Result<Self> {
        let tau = TauParam::source(tau.value())?;
        if reference.n != initial.n {
            return Err(CurvError::DimensionMismatch { expected: initial.n, found: reference.n });
        }
        let field = GridMetricField::from_metric(initial, grid)?;
        let mut state = FlowState { time: 0.0, field, tau, reference, history: Vec::new() };
        let diag = state.diagnostics(0, 0.0, 0, 0.0)?;
        state.history.push(diag);
        Ok(state)
    }

    fn diagnostics(&self, step: usize, dt: f64, substeps: usize, max_velocity: f64) -> Result<FlowDiagnostics> {
        let tr = self.field.trace_field(&self.reference)?;
        Ok(FlowDiagnostics {
            step,
            time: self.time,
            dt,
            substeps,
            sup_trace: tr.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_eigenvalue: self.field.min_eigenvalue(),
            max_velocity,
        })
    }

    /// Grid version of the parabolic Schwarz residual at node `k`.
    pub fn parabolic_residual(&self, kappa0: f64, k: usize) -> Result<ParabolicResidual> {
        let jet = self.field.jet_at(k)?;
        let v = thcf_velocity(&jet, self.tau)?;
        let tr = self.field.trace_field(&self.reference)?;
        let lap = self.field.laplacian(&tr, k)?;
        let h = self.reference.eval_matrix(&self.field.node_point(k))?;
        assemble_residual(&jet, &h, &v, self.tau, kappa0, lap)
    }
}

fn max_velocity(v: &[Option<HermitianMatrix>]) -> f64 {
    v.iter()
        .flatten()
        .map(|m| m.eigenvalues().iter().map(|e| e.abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn guard(field: &GridMetricField, vmax: f64) -> f64 {
    if vmax == 0.0 {
        return f64::INFINITY;
    }
    let h = field.grid.spacing();
    0.2 * h * h * field.min_eigenvalue() / vmax
}

/// Advances the flow by `dt`.
///
/// The step is split into `2^k` explicit Euler substeps, with `k` the
/// smallest number of halvings that satisfies
/// `dt_sub <= 0.2 dx^2 min_eig(g) / max|eig(V)|` and keeps every node
/// positive definite; more than [`MAX_HALVINGS`] halvings rejects the step.
pub fn step_euler(state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CurvError::InvalidParameter(format!("dt = {} must be positive", dt)));
    }
    let v0 = state.field.velocity(state.tau)?;
    let vmax0 = max_velocity(&v0);
    let g0 = guard(&state.field, vmax0);
    let mut halvings = (0..=MAX_HALVINGS).find(|&k| dt / f64::from(1u32 << k) <= g0).ok_or(CurvError::StepRejected(MAX_HALVINGS))?;
    'attempt: loop {
        let substeps = 1usize << halvings;
        let h = dt / substeps as f64;
        let mut field = state.field.clone();
        let mut vmax: f64 = 0.0;
        for s in 0..substeps {
            let v = if s == 0 { v0.clone() } else { field.velocity(state.tau)? };
            vmax = vmax.max(max_velocity(&v));
            for (g, vk) in field.values.iter_mut().zip(&v) {
                if let Some(vk) = vk {
                    *g += vk.matrix().scale(h);
                }
            }
            let pd = field.values.iter().all(|g| HermitianMatrix::hermitian_part(g).is_positive_definite());
            if !pd {
                if halvings == MAX_HALVINGS {
                    return Err(CurvError::StepRejected(MAX_HALVINGS));
                }
                halvings += 1;
                continue 'attempt;
            }
        }
        let mut next = FlowState {
            time: state.time + dt,
            field,
            tau: state.tau,
            reference: state.reference.clone(),
            history: state.history.clone(),
        };
        let step = state.history.last().map_or(1, |d| d.step + 1);
        let diag = next.diagnostics(step, h, substeps, vmax)?;
        next.history.push(diag);
        return Ok(next);
    }
}
