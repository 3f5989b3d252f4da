//! Gauduchon connections `t * Chern + (1 - t) * Lichnerowicz` in a unitary
//! frame: torsion and curvature, reconstruction of Chern curvature from
//! `t`-data, tempered quantities written in `t`-data, and the Bismut case
//! `t = -1`.
//!
//! Repeated indices `r` in quadratic torsion terms are summed over `0..n`.

use nalgebra::DMatrix;

use crate::chern::{ricci_traces, ChernPackage, FrameTag, RicciTraces};
use crate::error::{CurvError, Result};
use crate::functionals::{quartic_form, TauParam, TauRole};
use crate::tensor::{ComplexTensor, HermitianMatrix, PsdForm, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GauduchonParam(pub f64);

impl GauduchonParam {
    pub const BISMUT: GauduchonParam = GauduchonParam(-1.0);
    pub const CHERN: GauduchonParam = GauduchonParam(1.0);

    pub fn value(self) -> f64 {
        self.0
    }

    /// Rejects the poles of the reconstruction formulas.
    pub fn check_invertible(self) -> Result<()> {
        if self.0 == 0.0 || self.0 == 0.5 || !self.0.is_finite() {
            return Err(CurvError::GauduchonPole(self.0));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GauduchonPackage {
    pub t: f64,
    pub frame: FrameTag,
    /// `torsion[i, j, k]` = `tT^k_{ij}`.
    pub torsion: ComplexTensor,
    /// `curvature[i, j, k, l]` = `tR_{i jbar k lbar}`.
    pub curvature: ComplexTensor,
    pub ric: RicciTraces,
}

impl GauduchonPackage {
    pub fn n(&self) -> usize {
        self.torsion.shape()[0].dim
    }
}

fn identity_rows(n: usize) -> Vec<Vec<C64>> {
    (0..n).map(|i| (0..n).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect()).collect()
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `tT = t * T` and
/// `tR_{ijkl} = t R_{ijkl} + a (R_{kjil} + R_{ilkj}) + a^2 (T^r_{ik} conj T^r_{jl} - T^l_{ir} conj T^k_{jr})`
/// with `a = (1 - t)/2`.
pub fn gauduchon_forward(chern: &ChernPackage, t: GauduchonParam) -> Result<GauduchonPackage> {
    chern.require_unitary()?;
    let t = t.value();
    let n = chern.n();
    if t == 1.0 {
        return Ok(GauduchonPackage {
            t,
            frame: FrameTag::Unitary,
            torsion: chern.torsion.clone(),
            curvature: chern.curvature.clone(),
            ric: chern.ric.clone(),
        });
    }
    let (r, tt) = (&chern.curvature, &chern.torsion);
    let a = (1.0 - t) / 2.0;
    let curvature = ComplexTensor::from_fn(r.shape().to_vec(), |ix| {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        let mut quad = ZERO;
        for s in 0..n {
            // T^s_{ik} conj(T^s_{jl}) - T^l_{is} conj(T^k_{js})
            quad += tt[[i, k, s]] * tt[[j, l, s]].conj() - tt[[i, s, l]] * tt[[j, s, k]].conj();
        }
        re(t) * r[[i, j, k, l]] + re(a) * (r[[k, j, i, l]] + r[[i, l, k, j]]) + re(a * a) * quad
    });
    let ric = ricci_traces(&identity_rows(n), &curvature);
    Ok(GauduchonPackage { t, frame: FrameTag::Unitary, torsion: tt.scale(re(t)), curvature, ric })
}

/// Recovers Chern curvature from `(tT, tR)` by inverting the forward relation.
pub fn chern_from_gauduchon(g: &GauduchonPackage) -> Result<ComplexTensor> {
    if g.frame != FrameTag::Unitary {
        return Err(CurvError::FrameMismatch { expected: "unitary" });
    }
    let t = g.t;
    GauduchonParam(t).check_invertible()?;
    if t == 1.0 {
        return Ok(g.curvature.clone());
    }
    let n = g.n();
    let (r, tt) = (&g.curvature, &g.torsion);
    let d = 2.0 * t - 1.0;
    let c_r = (t * t + 2.0 * t - 1.0) / (2.0 * t * d);
    let c_swap = (t - 1.0).powi(2) / (2.0 * t * d);
    let c_mix = (t - 1.0) / (2.0 * d);
    let c1 = -(t - 1.0).powi(2) / (4.0 * t * t * d);
    let c2 = (t - 1.0).powi(2) * (t * t + 2.0 * t - 1.0) / (8.0 * t.powi(3) * d);
    let c3 = (t - 1.0).powi(4) / (8.0 * t.powi(3) * d);
    let c4 = (t - 1.0).powi(3) / (8.0 * t * t * d);
    Ok(ComplexTensor::from_fn(r.shape().to_vec(), |ix| {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        let (mut q1, mut q2, mut q3, mut q4) = (ZERO, ZERO, ZERO, ZERO);
        for s in 0..n {
            // T^s_{ik} conj(T^s_{jl})
            q1 += tt[[i, k, s]] * tt[[j, l, s]].conj();
            // T^l_{is} conj(T^k_{js})
            q2 += tt[[i, s, l]] * tt[[j, s, k]].conj();
            // T^j_{ks} conj(T^i_{ls})
            q3 += tt[[k, s, j]] * tt[[l, s, i]].conj();
            // T^l_{ks} conj(T^i_{js}) + T^j_{is} conj(T^k_{ls})
            q4 += tt[[k, s, l]] * tt[[j, s, i]].conj() + tt[[i, s, j]] * tt[[l, s, k]].conj();
        }
        re(c_r) * r[[i, j, k, l]]
            + re(c_swap) * r[[k, l, i, j]]
            + re(c_mix) * (r[[k, j, i, l]] + r[[i, l, k, j]])
            + re(c1) * q1
            + re(c2) * q2
            + re(c3) * q3
            + re(c4) * q4
    }))
}

/// `M_{k l} = sum_{i,r} T^l_{kr} conj(T^i_{ir})`.
fn torsion_trace_pairing(tt: &ComplexTensor) -> DMatrix<C64> {
    let n = tt.shape()[0].dim;
    let eta: Vec<C64> = (0..n).map(|r| (0..n).map(|i| tt[[i, r, i]]).sum()).collect();
    DMatrix::from_fn(n, n, |k, l| (0..n).map(|r| tt[[k, r, l]] * eta[r].conj()).sum())
}

/// Chern `Ric^tau` computed from `t`-Gauduchon data.
pub fn ric_tau_from_gauduchon(g: &GauduchonPackage, tau: TauParam) -> Result<HermitianMatrix> {
    if tau.role() != TauRole::Source {
        TauParam::source(tau.value())?;
    }
    let t = g.t;
    GauduchonParam(t).check_invertible()?;
    let n = g.n();
    let tt = &g.torsion;
    let d = 2.0 * t - 1.0;
    let c2 = (t * t + 2.0 * t - 1.0) / (2.0 * t * d);
    let c1 = (t - 1.0).powi(2) / (2.0 * t * d);
    let c34 = (t - 1.0) / (2.0 * d);
    let c_a = (t - 1.0).powi(2) * (t * t - 4.0 * t + 1.0) / (8.0 * t.powi(3) * d);
    let c_m = (t - 1.0).powi(3) / (4.0 * t * t * d);
    let c_b = (t - 1.0).powi(2) * (t * t + 2.0 * t - 1.0) / (8.0 * t.powi(3) * d)
        + tau.one_minus_inverse() / (4.0 * t * t);
    let m = torsion_trace_pairing(tt);
    let m_re = (&m + m.adjoint()).scale(0.5);
    let out = DMatrix::from_fn(n, n, |k, l| {
        let (mut a, mut b) = (ZERO, ZERO);
        for i in 0..n {
            for s in 0..n {
                // T^s_{ik} conj(T^s_{il})
                a += tt[[i, k, s]] * tt[[i, l, s]].conj();
                // T^l_{is} conj(T^k_{is})
                b += tt[[i, s, l]] * tt[[i, s, k]].conj();
            }
        }
        re(c2) * g.ric.ric2.matrix()[(k, l)]
            + re(c1) * g.ric.ric1.matrix()[(k, l)]
            + re(c34) * (g.ric.ric3[(k, l)] + g.ric.ric4[(k, l)])
            + re(c_a) * a
            + re(c_m) * m_re[(k, l)]
            + re(c_b) * b
    });
    Ok(HermitianMatrix::hermitian_part(&out))
}

/// Chern `RBC^tau(xi)` computed from `t`-Gauduchon data, including the
/// `t`-altered bisectional term `sum tR_{i lbar k jbar} xi^{i jbar} xi^{k lbar}`.
pub fn rbc_tau_from_gauduchon(g: &GauduchonPackage, tau: TauParam, xi: &PsdForm) -> Result<f64> {
    if tau.role() != TauRole::Target {
        TauParam::target(tau.value())?;
    }
    let t = g.t;
    GauduchonParam(t).check_invertible()?;
    let n = g.n();
    if xi.dim() != n {
        return Err(CurvError::DimensionMismatch { expected: n, found: xi.dim() });
    }
    if xi.norm() == 0.0 {
        return Err(CurvError::ZeroVector);
    }
    let tt = &g.torsion;
    let x = xi.xi().matrix();
    let rbc = quartic_form(&g.curvature, x);
    let altered = quartic_form(&g.curvature.permute(&[0, 3, 2, 1])?, x);
    let (mut tt1, mut tt2, mut tt3) = (ZERO, ZERO, ZERO);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let w = x[(i, j)] * x[(k, l)];
                    if w == ZERO {
                        continue;
                    }
                    for s in 0..n {
                        // T^s_{ik} conj(T^s_{jl}), T^l_{is} conj(T^k_{js}), T^j_{is} conj(T^k_{ls})
                        tt1 += w * tt[[i, k, s]] * tt[[j, l, s]].conj();
                        tt2 += w * tt[[i, s, l]] * tt[[j, s, k]].conj();
                        tt3 += w * tt[[i, s, j]] * tt[[l, s, k]].conj();
                    }
                }
            }
        }
    }
    let d = 2.0 * t - 1.0;
    let v = re(t / d) * rbc + re((t - 1.0) / d) * altered
        - re((t - 1.0).powi(2) / (4.0 * t * t * d) + (1.0 - tau.value()) / (4.0 * t * t)) * tt1
        + re((t - 1.0).powi(2) / (4.0 * t * d)) * tt2
        + re((t - 1.0).powi(3) / (4.0 * t * t * d)) * tt3;
    Ok(v.re / (xi.norm() * xi.norm()))
}

/// `tGamma^k_{ij} = Gamma^k_{ij} - (1 - t)/2 T^k_{ij}` in the `[i, j, k]` layout.
pub fn gauduchon_christoffel(chern_gamma: &ComplexTensor, torsion: &ComplexTensor, t: f64) -> Result<ComplexTensor> {
    chern_gamma.sub(&torsion.scale(re((1.0 - t) / 2.0)))
}

/// Mixed part of the `t`-Gauduchon torsion, `K[i, j, k] = (1 - t)/2 conj(T^j_{ik})`,
/// pairing `(ubar, v, wbar)` as `g(tT(ubar, v), wbar)`.
pub fn mixed_torsion(chern: &ChernPackage, t: f64) -> Result<ComplexTensor> {
    chern.require_unitary()?;
    let tt = &chern.torsion;
    let a = (1.0 - t) / 2.0;
    Ok(ComplexTensor::from_fn(tt.shape().to_vec(), |ix| re(a) * tt[[ix[0], ix[2], ix[1]]].conj()))
}

/// `|g(T(ubar, v), wbar) + g(T(wbar, v), ubar)|` for the mixed torsion.
pub fn skew_residual(k: &ComplexTensor, u: &[C64], v: &[C64], w: &[C64]) -> f64 {
    let n = u.len();
    let pair = |a: &[C64], c: &[C64]| -> C64 {
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    acc += k[[i, j, l]] * a[i].conj() * v[j] * c[l].conj();
                }
            }
        }
        acc
    };
    (pair(u, w) + pair(w, u)).norm()
}

/// The Bismut package and the Hermitian source matrix
/// `2 (bRic1 + Re M) - bRic2 + bRic3 + bRic4` with `Re M = (M + M^*)/2`.
pub fn bismut_package(chern: &ChernPackage) -> Result<(GauduchonPackage, HermitianMatrix)> {
    let b = gauduchon_forward(chern, GauduchonParam::BISMUT)?;
    let m = torsion_trace_pairing(&b.torsion);
    let s = (b.ric.ric1.matrix() + (&m + m.adjoint()).scale(0.5)).scale(2.0) - b.ric.ric2.matrix()
        + &b.ric.ric3
        + &b.ric.ric4;
    let source = HermitianMatrix::hermitian_part(&s);
    Ok((b, source))
}
