//! Chern connection data assembled from a metric 2-jet: torsion, curvature,
//! Ricci traces, the torsion (1,0)-form, quadratic torsion, identity residuals
//! and Chern normal coordinates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CurvError, Result};
use crate::fd::{wirtinger_jet, FdScheme};
use crate::metric::{eval_jet2, jet_from_function, MetricJet2, MetricSpec};
use crate::tensor::{to_unitary_frame, ComplexTensor, HermitianMatrix, UnitaryFrame, Variance, C64, ZERO};

use Variance::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameTag {
    Chart,
    Unitary,
}

/// The four traces of the curvature tensor.
///
/// `ric1` and `ric2` are Hermitian; `ric3` and `ric4` are adjoint to each other
/// and only their sum is Hermitian in general.
#[derive(Debug, Clone, PartialEq)]
pub struct RicciTraces {
    pub ric1: HermitianMatrix,
    pub ric2: HermitianMatrix,
    pub ric3: DMatrix<C64>,
    pub ric4: DMatrix<C64>,
}

#[derive(Debug, Clone)]
pub struct ChernPackage {
    pub frame: FrameTag,
    /// Metric matrix in `frame` (the identity in a unitary frame).
    pub g: HermitianMatrix,
    /// `torsion[i, j, k]` = `T^k_{ij}`.
    pub torsion: ComplexTensor,
    /// `curvature[i, j, k, l]` = `R_{i jbar k lbar}`.
    pub curvature: ComplexTensor,
    pub ric: RicciTraces,
    /// `eta_j = sum_i T^i_{ij}`.
    pub eta: Vec<C64>,
    pub q2: HermitianMatrix,
    pub q_circ: HermitianMatrix,
}

fn torsion_shape(n: usize) -> ComplexTensor {
    ComplexTensor::zeros_uniform(n, &[HoloDown, HoloDown, HoloUp])
}

/// `T^k_{ij} = g^{k lbar}(d_i g_{j lbar} - d_j g_{i lbar})` from the metric and its first derivatives.
pub fn torsion_from_first(g_inv: &DMatrix<C64>, d_g: &ComplexTensor) -> ComplexTensor {
    let n = g_inv.nrows();
    let mut t = torsion_shape(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = ZERO;
                for l in 0..n {
                    acc += g_inv[(l, k)] * (d_g[[i, j, l]] - d_g[[j, i, l]]);
                }
                t[[i, j, k]] = acc;
            }
        }
    }
    t
}

pub fn chern_torsion(jet: &MetricJet2) -> ComplexTensor {
    torsion_from_first(jet.g_inv.matrix(), &jet.d_g)
}

/// `Gamma^k_{ij} = g^{k lbar} d_i g_{j lbar}`, stored as `[i, j, k]`.
pub fn chern_christoffel(jet: &MetricJet2) -> ComplexTensor {
    let n = jet.n();
    let mut gamma = torsion_shape(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                gamma[[i, j, k]] = (0..n).map(|l| jet.ginv(k, l) * jet.d_g[[i, j, l]]).sum();
            }
        }
    }
    gamma
}

/// `R_{i jbar k lbar} = -d_i dbar_j g_{k lbar} + g^{p qbar} d_i g_{k qbar} dbar_j g_{p lbar}`.
pub fn chern_curvature(jet: &MetricJet2) -> ComplexTensor {
    let n = jet.n();
    let mut r = ComplexTensor::zeros_uniform(n, &[HoloDown, AntiDown, HoloDown, AntiDown]);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = -jet.dd_g[[i, j, k, l]];
                    for p in 0..n {
                        for q in 0..n {
                            acc += jet.ginv(p, q) * jet.d_g[[i, k, q]] * jet.dbar_g[[j, p, l]];
                        }
                    }
                    r[[i, j, k, l]] = acc;
                }
            }
        }
    }
    r
}

/// Traces of `r` against the inverse metric `ginv[i][j] = g^{i jbar}`.
pub fn ricci_traces(ginv: &[Vec<C64>], r: &ComplexTensor) -> RicciTraces {
    let n = ginv.len();
    let mut m = [DMatrix::<C64>::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for k in 0..n {
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let w = ginv[i][j];
                    if w == ZERO {
                        continue;
                    }
                    m[0][(k, l)] += w * r[[k, l, i, j]];
                    m[1][(k, l)] += w * r[[i, j, k, l]];
                    m[2][(k, l)] += w * r[[k, j, i, l]];
                    m[3][(k, l)] += w * r[[i, l, k, j]];
                }
            }
        }
    }
    let [m1, m2, m3, m4] = m;
    RicciTraces {
        ric1: HermitianMatrix::hermitian_part(&m1),
        ric2: HermitianMatrix::hermitian_part(&m2),
        ric3: m3,
        ric4: m4,
    }
}

/// `Q_{a bbar} = sum_{p,q} T^b_{pq} conj(T^a_{pq})` for torsion given in a unitary frame.
pub fn q_unitary(t: &ComplexTensor) -> HermitianMatrix {
    let n = t.shape()[0].dim;
    let m = DMatrix::from_fn(n, n, |a, b| {
        let mut acc = ZERO;
        for p in 0..n {
            for q in 0..n {
                acc += t[[p, q, b]] * t[[p, q, a]].conj();
            }
        }
        acc
    });
    HermitianMatrix::hermitian_part(&m)
}

/// Quadratic torsion tensors `(Q^2, Q°)` in the chart frame of `jet`.
///
/// Both are formed in the unitary frame and mapped back; the two coincide.
pub fn q_tensors(jet: &MetricJet2, t: &ComplexTensor) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let frame = UnitaryFrame::from_metric(jet.g.matrix())?;
    let tu = to_unitary_frame(t, &frame)?;
    let qu = q_unitary(&tu);
    let q = ComplexTensor::from_matrix(qu.matrix(), HoloDown, AntiDown);
    let chart = to_unitary_frame(&q, &frame.inverse())?.to_matrix()?;
    let q2 = HermitianMatrix::hermitian_part(&chart);
    Ok((q2.clone(), q2))
}

/// `eta_j = sum_i T^i_{ij}`; requires torsion in a unitary frame.
pub fn torsion_one_form(t: &ComplexTensor, frame: FrameTag) -> Result<Vec<C64>> {
    if frame != FrameTag::Unitary {
        return Err(CurvError::FrameMismatch { expected: "unitary" });
    }
    Ok(trace_torsion(t))
}

fn trace_torsion(t: &ComplexTensor) -> Vec<C64> {
    let n = t.shape()[0].dim;
    (0..n).map(|j| (0..n).map(|i| t[[i, j, i]]).sum()).collect()
}

impl ChernPackage {
    /// Package in the chart frame of `jet`.
    pub fn from_jet(jet: &MetricJet2) -> Result<Self> {
        let torsion = chern_torsion(jet);
        let curvature = chern_curvature(jet);
        let ric = ricci_traces(&jet.ginv_rows(), &curvature);
        let (q2, q_circ) = q_tensors(jet, &torsion)?;
        // The trace pairs an upper with a lower index, so it is frame independent.
        let eta = trace_torsion(&torsion);
        Ok(ChernPackage { frame: FrameTag::Chart, g: jet.g.clone(), torsion, curvature, ric, eta, q2, q_circ })
    }

    /// Package expressed in the Cholesky unitary frame of `jet`.
    pub fn unitary_from_jet(jet: &MetricJet2) -> Result<Self> {
        let frame = UnitaryFrame::from_metric(jet.g.matrix())?;
        ChernPackage::from_jet(jet)?.to_frame(&frame)
    }

    pub fn n(&self) -> usize {
        self.g.dim()
    }

    /// Converts a chart package with `frame` (built from its own metric).
    pub fn to_frame(&self, frame: &UnitaryFrame) -> Result<Self> {
        if self.frame != FrameTag::Chart {
            return Err(CurvError::FrameMismatch { expected: "chart" });
        }
        let n = self.n();
        let torsion = to_unitary_frame(&self.torsion, frame)?;
        let curvature = to_unitary_frame(&self.curvature, frame)?;
        let ginv: Vec<Vec<C64>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { C64::new(1.0, 0.0) } else { ZERO }).collect()).collect();
        let ric = ricci_traces(&ginv, &curvature);
        let q2 = q_unitary(&torsion);
        let eta = torsion_one_form(&torsion, FrameTag::Unitary)?;
        Ok(ChernPackage {
            frame: FrameTag::Unitary,
            g: HermitianMatrix::identity(n),
            torsion,
            curvature,
            ric,
            eta,
            q_circ: q2.clone(),
            q2,
        })
    }

    /// Requires a unitary-frame package.
    pub fn require_unitary(&self) -> Result<()> {
        if self.frame != FrameTag::Unitary {
            return Err(CurvError::FrameMismatch { expected: "unitary" });
        }
        Ok(())
    }

    /// `max |R_{i jbar k lbar} - conj(R_{j ibar l kbar})|`.
    pub fn curvature_hermitian_residual(&self) -> f64 {
        let n = self.n();
        let r = &self.curvature;
        let mut res: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        res = res.max((r[[i, j, k, l]] - r[[j, i, l, k]].conj()).norm());
                    }
                }
            }
        }
        res
    }

    /// `max |T^k_{ij} + T^k_{ji}|`.
    pub fn torsion_antisymmetry_residual(&self) -> f64 {
        let n = self.n();
        let mut res: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    res = res.max((self.torsion[[i, j, k]] + self.torsion[[j, i, k]]).norm());
                }
            }
        }
        res
    }
}

/// Metric value and first derivatives only, for differencing torsion.
fn torsion_at(spec: &MetricSpec, z: &[C64], scheme: &FdScheme) -> Result<ComplexTensor> {
    if spec.exact.is_some() && scheme.use_exact {
        return Ok(chern_torsion(&eval_jet2(spec, z, scheme)?));
    }
    let n = spec.n;
    let wj = wirtinger_jet(&|p: &[C64]| spec.eval_flat(p), z, scheme, false)?;
    let g = DMatrix::from_fn(n, n, |k, l| wj.value[k * n + l]);
    let g_inv = g.try_inverse().ok_or(CurvError::Singular)?;
    let mut d = ComplexTensor::zeros_uniform(n, &[HoloDown, HoloDown, AntiDown]);
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                d[[i, k, l]] = wj.d[i][k * n + l];
            }
        }
    }
    Ok(torsion_from_first(&g_inv, &d))
}

/// Max-norm of `dbar_l T^k_{ij} - g^{k mbar}(R_{j lbar i mbar} - R_{i lbar j mbar})` in the chart frame.
///
/// The left side differences the torsion at stencil points around `point`.
pub fn bianchi_residual(spec: &MetricSpec, point: &[C64], scheme: &FdScheme) -> Result<f64> {
    let n = spec.n;
    let jet = eval_jet2(spec, point, scheme)?;
    let r = chern_curvature(&jet);
    let flat_torsion = |z: &[C64]| torsion_at(spec, z, scheme).map(|t| t.data().to_vec());
    let dt = wirtinger_jet(&flat_torsion, point, scheme, false)?;
    let probe = torsion_shape(n);
    let mut res: f64 = 0.0;
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = dt.dbar[l][probe.offset(&[i, j, k])];
                    let mut rhs = ZERO;
                    for m in 0..n {
                        rhs += jet.ginv(k, m) * (r[[j, l, i, m]] - r[[i, l, j, m]]);
                    }
                    res = res.max((lhs - rhs).norm());
                }
            }
        }
    }
    Ok(res)
}

/// Residuals of the pluriclosed condition at `point`: `(r_direct, r_symmetry)`.
///
/// `r_direct` is the max-norm of the coefficients
/// `d_i dbar_j g_{k lbar} - d_k dbar_j g_{i lbar} - d_i dbar_l g_{k jbar} + d_k dbar_l g_{i jbar}`
/// of `i d dbar omega`, always from finite differences. `r_symmetry` is the
/// max-norm of
/// `R_{a bbar c dbar} - R_{c bbar a dbar} - R_{a dbar c bbar} + R_{c dbar a bbar} - T^r_{ac} conj(T^s_{bd}) g_{r sbar}`.
pub fn pluriclosed_residual(spec: &MetricSpec, point: &[C64], scheme: &FdScheme) -> Result<(f64, f64)> {
    let n = spec.n;
    let fd_jet = eval_jet2(spec, point, &scheme.without_exact())?;
    let dd = &fd_jet.dd_g;
    let mut r_direct: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let c = dd[[i, j, k, l]] - dd[[k, j, i, l]] - dd[[i, l, k, j]] + dd[[k, l, i, j]];
                    r_direct = r_direct.max(c.norm());
                }
            }
        }
    }
    let jet = eval_jet2(spec, point, scheme)?;
    let t = chern_torsion(&jet);
    let r = chern_curvature(&jet);
    let g = jet.g.matrix();
    let mut r_sym: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let lhs = r[[a, b, c, d]] - r[[c, b, a, d]] - r[[a, d, c, b]] + r[[c, d, a, b]];
                    let mut rhs = ZERO;
                    for p in 0..n {
                        for s in 0..n {
                            rhs += t[[a, c, p]] * t[[b, d, s]].conj() * g[(p, s)];
                        }
                    }
                    r_sym = r_sym.max((lhs - rhs).norm());
                }
            }
        }
    }
    Ok((r_direct, r_sym))
}

/// Holomorphic coordinates `z = p + F w + 1/2 c(w, w)` in which the metric is
/// the identity at `w = 0` with first and mixed second derivatives given by
/// torsion and curvature.
#[derive(Debug, Clone)]
pub struct NormalCoordinates {
    pub base: Vec<C64>,
    /// `linear[(k, a)]` = `F^k_a`.
    pub linear: DMatrix<C64>,
    /// `quadratic[(k * n + a) * n + b]` = `c^k_{ab}`, symmetric in `(a, b)`.
    pub quadratic: Vec<C64>,
    /// Finite-difference jet of the metric in the new coordinates at `w = 0`.
    pub jet: MetricJet2,
    /// Chern torsion and curvature of the original jet in the unitary frame `F`.
    pub torsion: ComplexTensor,
    pub curvature: ComplexTensor,
    /// Max-norm residuals of `g = delta`, `d_c g_{a bbar} = T^b_{ca} / 2` and
    /// `d_c dbar_d g_{a bbar} = -R_{c dbar a bbar} + 1/4 T^p_{ca} conj(T^p_{db})`.
    pub residuals: [f64; 3],
}

impl NormalCoordinates {
    pub fn n(&self) -> usize {
        self.base.len()
    }

    #[inline]
    fn c(&self, k: usize, a: usize, b: usize) -> C64 {
        let n = self.n();
        self.quadratic[(k * n + a) * n + b]
    }

    pub fn to_chart(&self, w: &[C64]) -> Vec<C64> {
        let n = self.n();
        (0..n)
            .map(|k| {
                let mut z = self.base[k];
                for a in 0..n {
                    z += self.linear[(k, a)] * w[a];
                    for b in 0..n {
                        z += 0.5 * self.c(k, a, b) * w[a] * w[b];
                    }
                }
                z
            })
            .collect()
    }

    /// `J[(k, a)] = dz^k / dw^a`.
    pub fn jacobian(&self, w: &[C64]) -> DMatrix<C64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |k, a| self.linear[(k, a)] + (0..n).map(|b| self.c(k, a, b) * w[b]).sum::<C64>())
    }

    /// Metric matrix in the `w` coordinates: `J^T G(z(w)) conj(J)`.
    pub fn metric_in_w(&self, spec: &MetricSpec, w: &[C64]) -> Result<DMatrix<C64>> {
        let g = spec.eval_matrix(&self.to_chart(w))?;
        let j = self.jacobian(w);
        Ok(j.transpose() * g * j.map(|z| z.conj()))
    }
}

/// Builds Chern normal coordinates of `spec` at `point` and verifies them by
/// differencing the pulled-back metric.
pub fn build_chern_normal_coordinates(
    spec: &MetricSpec,
    point: &[C64],
    scheme: &FdScheme,
) -> Result<NormalCoordinates> {
    let n = spec.n;
    let jet = eval_jet2(spec, point, scheme)?;
    let frame = UnitaryFrame::from_metric(jet.g.matrix())?;
    let l_inv = frame.cholesky_inverse();
    let linear = l_inv.transpose();

    // First derivatives in the frame, then the part symmetric in (c, a).
    let mut d = vec![ZERO; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut acc = ZERO;
                for m in 0..n {
                    for k in 0..n {
                        for q in 0..n {
                            acc += linear[(k, a)] * linear[(q, b)].conj() * linear[(m, c)] * jet.d_g[[m, k, q]];
                        }
                    }
                }
                d[(c * n + a) * n + b] = acc;
            }
        }
    }
    let sym = |c: usize, a: usize, b: usize| 0.5 * (d[(c * n + a) * n + b] + d[(a * n + c) * n + b]);
    let mut quadratic = vec![ZERO; n * n * n];
    for k in 0..n {
        for a in 0..n {
            for c in 0..n {
                quadratic[(k * n + a) * n + c] = -(0..n).map(|b| sym(c, a, b) * l_inv[(b, k)]).sum::<C64>();
            }
        }
    }

    let pkg = ChernPackage::from_jet(&jet)?.to_frame(&frame)?;
    let mut nc = NormalCoordinates {
        base: point.to_vec(),
        linear,
        quadratic,
        jet: jet.clone(),
        torsion: pkg.torsion,
        curvature: pkg.curvature,
        residuals: [0.0; 3],
    };
    let origin = vec![ZERO; n];
    let pulled = |w: &[C64]| nc.metric_in_w(spec, w).map(|m| m.transpose().iter().copied().collect::<Vec<_>>());
    let new_jet = jet_from_function(&pulled, &origin, n, &scheme.without_exact())?;

    let t = &nc.torsion;
    let r = &nc.curvature;
    let mut res = [0.0f64; 3];
    for a in 0..n {
        for b in 0..n {
            let delta = if a == b { 1.0 } else { 0.0 };
            res[0] = res[0].max((new_jet.g.matrix()[(a, b)] - C64::new(delta, 0.0)).norm());
            for c in 0..n {
                res[1] = res[1].max((new_jet.d_g[[c, a, b]] - 0.5 * t[[c, a, b]]).norm());
                for dd in 0..n {
                    let tt: C64 = (0..n).map(|p| t[[c, a, p]] * t[[dd, b, p]].conj()).sum();
                    let expect = -r[[c, dd, a, b]] + 0.25 * tt;
                    res[2] = res[2].max((new_jet.dd_g[[c, dd, a, b]] - expect).norm());
                }
            }
        }
    }
    nc.jet = new_jet;
    nc.residuals = res;
    Ok(nc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Example22Params;

    fn origin(n: usize) -> Vec<C64> {
        vec![ZERO; n]
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn flat_package_is_zero() {
        let spec = MetricSpec::flat(2).unwrap();
        let jet = eval_jet2(&spec, &[c(0.2, 0.1), c(0.0, -0.3)], &FdScheme::default()).unwrap();
        let pkg = ChernPackage::from_jet(&jet).unwrap();
        assert_eq!(pkg.torsion.max_abs(), 0.0);
        assert_eq!(pkg.curvature.max_abs(), 0.0);
        assert_eq!(pkg.q2.frobenius_norm(), 0.0);
        assert!(pkg.eta.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn fixture_f1_values() {
        let spec = MetricSpec::fixture_f1();
        let jet = eval_jet2(&spec, &origin(2), &FdScheme::default()).unwrap();
        let pkg = ChernPackage::unitary_from_jet(&jet).unwrap();
        let t = &pkg.torsion;
        assert_eq!(t[[0, 1, 0]], c(2.0, 0.0));
        assert_eq!(t[[1, 0, 0]], c(-2.0, 0.0));
        assert_eq!(t[[0, 1, 1]], ZERO);
        let r = &pkg.curvature;
        assert!((r[[0, 0, 1, 1]] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((r[[0, 0, 0, 0]] - c(-0.1, 0.0)).norm() < 1e-15);
        assert!((r[[1, 1, 0, 0]] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((pkg.ric.ric2.matrix()[(0, 0)] - c(0.4, 0.0)).norm() < 1e-15);
        assert!((pkg.q2.matrix()[(0, 0)] - c(8.0, 0.0)).norm() < 1e-14);
        assert_eq!(pkg.eta, vec![ZERO, c(2.0, 0.0)]);
        assert!(pkg.curvature_hermitian_residual() < 1e-15);
    }

    #[test]
    fn poincare_is_kahler() {
        let spec = MetricSpec::poincare_polydisk(2).unwrap();
        let jet = eval_jet2(&spec, &[c(0.3, -0.2), c(0.1, 0.5)], &FdScheme::default().without_exact()).unwrap();
        let pkg = ChernPackage::from_jet(&jet).unwrap();
        assert!(pkg.torsion.max_abs() < 1e-9);
        let jet0 = eval_jet2(&MetricSpec::poincare_polydisk(1).unwrap(), &origin(1), &FdScheme::default()).unwrap();
        let p0 = ChernPackage::from_jet(&jet0).unwrap();
        assert_eq!(p0.curvature[[0, 0, 0, 0]], c(-2.0, 0.0));
        for m in [p0.ric.ric1.matrix(), p0.ric.ric2.matrix(), &p0.ric.ric3, &p0.ric.ric4] {
            assert_eq!(m[(0, 0)], c(-2.0, 0.0));
        }
    }

    #[test]
    fn ricci_three_and_four_are_adjoint() {
        let spec = MetricSpec::example22(Example22Params::standard(3, 0.2).unwrap()).unwrap();
        let jet = eval_jet2(&spec, &[c(0.05, 0.02), c(-0.1, 0.0), c(0.03, 0.07)], &FdScheme::default()).unwrap();
        let pkg = ChernPackage::from_jet(&jet).unwrap();
        assert!((&pkg.ric.ric3 - pkg.ric.ric4.adjoint()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn torsion_one_form_needs_unitary_frame() {
        let t = torsion_shape(2);
        assert!(torsion_one_form(&t, FrameTag::Chart).is_err());
        assert!(torsion_one_form(&t, FrameTag::Unitary).is_ok());
    }

    #[test]
    fn hopf_is_not_balanced() {
        let spec = MetricSpec::hopf(2).unwrap();
        let jet = eval_jet2(&spec, &[c(1.0, 0.0), ZERO], &FdScheme::default()).unwrap();
        let pkg = ChernPackage::unitary_from_jet(&jet).unwrap();
        // At (1, 0): g = delta and T^k_{ij} = -(delta_jk conj(z_i) - delta_ik conj(z_j)) / |z|^2.
        assert!((pkg.torsion[[0, 1, 1]] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((pkg.eta[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(pkg.eta.iter().map(|z| z.norm()).sum::<f64>() > 0.5);
    }

    #[test]
    fn residuals_vanish_on_fixtures() {
        let s = FdScheme::default();
        let flat = MetricSpec::flat(2).unwrap();
        assert_eq!(bianchi_residual(&flat, &origin(2), &s).unwrap(), 0.0);
        assert_eq!(pluriclosed_residual(&flat, &origin(2), &s).unwrap(), (0.0, 0.0));
        let f1 = MetricSpec::fixture_f1();
        assert!(bianchi_residual(&f1, &origin(2), &s).unwrap() < 1e-6);
        let hopf = MetricSpec::hopf(2).unwrap();
        let p = [c(1.0, 0.0), ZERO];
        assert!(bianchi_residual(&hopf, &p, &s).unwrap() < 1e-6);
        let (a, b) = pluriclosed_residual(&hopf, &p, &s).unwrap();
        assert!(a < 1e-6 && b < 1e-6, "{} {}", a, b);
        let poincare = MetricSpec::poincare_polydisk(2).unwrap();
        let (a, b) = pluriclosed_residual(&poincare, &[c(0.2, 0.1), c(-0.3, 0.0)], &s).unwrap();
        assert!(a < 1e-9 && b < 1e-9, "{} {}", a, b);
    }

    #[test]
    fn hopf_in_three_dimensions_is_not_pluriclosed() {
        let spec = MetricSpec::hopf(3).unwrap();
        let (a, b) = pluriclosed_residual(&spec, &[c(1.0, 0.0), ZERO, ZERO], &FdScheme::default()).unwrap();
        assert!(a > 1e-3 && b > 1e-3);
    }

    #[test]
    fn normal_coordinates() {
        let s = FdScheme::default();
        let flat = build_chern_normal_coordinates(&MetricSpec::flat(2).unwrap(), &origin(2), &s).unwrap();
        assert!(flat.quadratic.iter().all(|z| *z == ZERO));
        assert_eq!(flat.linear, DMatrix::identity(2, 2));
        let f1 = build_chern_normal_coordinates(&MetricSpec::fixture_f1(), &origin(2), &s).unwrap();
        assert!(f1.quadratic.iter().all(|z| z.norm() < 1e-15));
        assert!(f1.residuals.iter().all(|r| *r < 1e-8), "{:?}", f1.residuals);
        let hopf = build_chern_normal_coordinates(&MetricSpec::hopf(2).unwrap(), &[c(0.8, 0.3), c(-0.2, 0.4)], &s)
            .unwrap();
        assert!(hopf.residuals.iter().all(|r| *r < 1e-7), "{:?}", hopf.residuals);
    }
}
