//! Holomorphic maps between Hermitian charts: energy density, the Laplacian
//! of the energy assembled from Hessian and curvature terms, the tempered
//! Schwarz inequality and its scalar ingredients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chern::{chern_christoffel, chern_curvature, chern_torsion, ricci_traces, ChernPackage};
use crate::error::{CurvError, Result};
use crate::expr::{parse_expr, Expr, Wirtinger};
use crate::fd::{complex_laplacian, wirtinger_jet, FdScheme};
use crate::functionals::{quartic_form, torsion_square, TauParam};
use crate::gauduchon::{
    bismut_package, gauduchon_christoffel, gauduchon_forward, rbc_tau_from_gauduchon, ric_tau_from_gauduchon,
    GauduchonParam,
};
use crate::metric::{eval_jet2, MetricJet2, MetricSpec};
use crate::tensor::{ComplexTensor, HermitianMatrix, PsdForm, UnitaryFrame, C64, ZERO};

/// A holomorphic map given by expressions in `z1..zm`, with symbolic
/// first and second derivatives.
#[derive(Debug, Clone)]
pub struct HoloMapSpec {
    pub m: usize,
    pub n: usize,
    pub components: Vec<Expr>,
    /// `first[a][i]` = d f^a / d z_i.
    first: Vec<Vec<Expr>>,
    /// `second[a][i][j]` = d^2 f^a / d z_i d z_j.
    second: Vec<Vec<Vec<Expr>>>,
}

impl HoloMapSpec {
    pub fn new(m: usize, components: Vec<Expr>) -> Result<Self> {
        for (a, c) in components.iter().enumerate() {
            if !c.is_syntactically_holomorphic() {
                return Err(CurvError::NotHolomorphic(format!("component {} = {}", a + 1, c)));
            }
            if c.arity() > m {
                return Err(CurvError::DimensionMismatch { expected: m, found: c.arity() });
            }
        }
        let first: Vec<Vec<Expr>> =
            components.iter().map(|c| (0..m).map(|i| c.derivative(i, Wirtinger::Holo)).collect()).collect();
        let second = first
            .iter()
            .map(|row| row.iter().map(|d| (0..m).map(|j| d.derivative(j, Wirtinger::Holo)).collect()).collect())
            .collect();
        Ok(HoloMapSpec { m, n: components.len(), components, first, second })
    }

    pub fn parse(m: usize, sources: &[&str]) -> Result<Self> {
        let comps = sources.iter().map(|s| parse_expr(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        HoloMapSpec::new(m, comps)
    }

    pub fn identity(m: usize) -> Self {
        HoloMapSpec::new(m, (0..m).map(Expr::Var).collect()).expect("identity map is holomorphic")
    }

    pub fn eval(&self, z: &[C64]) -> Result<Vec<C64>> {
        if z.len() != self.m {
            return Err(CurvError::DimensionMismatch { expected: self.m, found: z.len() });
        }
        self.components.iter().map(|c| c.eval(z)).collect()
    }

    /// Symbolic Jacobian with `jac[(a, i)]` = `f_i^a`.
    pub fn jacobian(&self, z: &[C64]) -> Result<DMatrix<C64>> {
        let mut jac = DMatrix::zeros(self.n, self.m);
        for a in 0..self.n {
            for i in 0..self.m {
                jac[(a, i)] = self.first[a][i].eval(z)?;
            }
        }
        Ok(jac)
    }

    pub fn jet(&self, z: &[C64]) -> Result<HoloMapJet> {
        let value = self.eval(z)?;
        let jacobian = self.jacobian(z)?;
        let mut second = vec![ZERO; self.m * self.m * self.n];
        for a in 0..self.n {
            for i in 0..self.m {
                for j in 0..self.m {
                    second[(i * self.m + j) * self.n + a] = self.second[a][i][j].eval(z)?;
                }
            }
        }
        Ok(HoloMapJet { point: z.to_vec(), value, jacobian, second, m: self.m, n: self.n })
    }

    /// Largest finite-difference `dbar` derivative of any component.
    pub fn cr_residual(&self, z: &[C64], scheme: &FdScheme) -> Result<f64> {
        let wj = wirtinger_jet(&|p: &[C64]| self.eval(p), z, scheme, false)?;
        Ok(wj.dbar.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone)]
pub struct HoloMapJet {
    pub point: Vec<C64>,
    pub value: Vec<C64>,
    /// `jacobian[(a, i)]` = `f_i^a`.
    pub jacobian: DMatrix<C64>,
    second: Vec<C64>,
    m: usize,
    n: usize,
}

impl HoloMapJet {
    /// `d_i d_j f^a`.
    pub fn second(&self, i: usize, j: usize, a: usize) -> C64 {
        self.second[(i * self.m + j) * self.n + a]
    }

    pub fn second_symmetry_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                for a in 0..self.n {
                    worst = worst.max((self.second(i, j, a) - self.second(j, i, a)).norm());
                }
            }
        }
        worst
    }
}

/// `|df|^2 = g^{i jbar} h_{a bbar} f_i^a conj(f_j^b)` for chart matrices `g`, `h`.
pub fn energy_density(jac: &DMatrix<C64>, g: &DMatrix<C64>, h: &DMatrix<C64>) -> Result<f64> {
    let (n, m) = jac.shape();
    if g.nrows() != m || h.nrows() != n {
        return Err(CurvError::DimensionMismatch { expected: m, found: g.nrows() });
    }
    let g_inv = g.clone().try_inverse().ok_or(CurvError::Singular)?;
    // tr(G^{-T} J^T H conj(J))
    let inner = jac.transpose() * h * jac.map(|c| c.conj());
    let mut acc = ZERO;
    for i in 0..m {
        for j in 0..m {
            acc += g_inv[(j, i)] * inner[(i, j)];
        }
    }
    Ok(acc.re.max(0.0))
}

/// `tr_g h = g^{k lbar} h_{k lbar}`.
pub fn trace(g: &DMatrix<C64>, h: &DMatrix<C64>) -> Result<f64> {
    if g.shape() != h.shape() {
        return Err(CurvError::DimensionMismatch { expected: g.nrows(), found: h.nrows() });
    }
    energy_density(&DMatrix::identity(g.nrows(), g.nrows()), g, h)
}

/// Jacobian in unitary frames: `fhat[(a, mu)]` = component `mu` of `df(e_a)`.
fn unitary_jacobian(jac: &DMatrix<C64>, fg: &UnitaryFrame, fh: &UnitaryFrame) -> DMatrix<C64> {
    // fhat_a^mu = sum_{i, alpha} Linv_g[a][i] f_i^alpha L_h[alpha][mu]
    fg.cholesky_inverse() * jac.transpose() * fh.cholesky_factor()
}

/// Numerical rank with threshold `1e-8` times the largest singular value.
pub fn numerical_rank(singular_values: &[f64]) -> usize {
    let max = singular_values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > 1e-8 * max).count()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchwarzReport {
    pub point: Vec<C64>,
    pub image: Vec<C64>,
    pub energy: f64,
    pub laplacian_fd: f64,
    pub laplacian_assembled: f64,
    /// `|fd - assembled|` over the sum of absolute values of the assembled terms.
    pub relative_error: f64,
    pub sym_norm2: f64,
    pub skew_norm2: f64,
    /// `|H_kl - H_lk - (T~(f_k, f_l) - df(T_kl))|` maximized over entries.
    pub skew_torsion_residual: f64,
    pub source_term: f64,
    pub target_term: f64,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub source_dim: usize,
}

/// Everything needed to assemble the Laplacian at a point.
struct MapGeometry {
    jet_g: MetricJet2,
    jet_h: MetricJet2,
    map: HoloMapJet,
    frame_g: UnitaryFrame,
    frame_h: UnitaryFrame,
    fhat: DMatrix<C64>,
}

impl MapGeometry {
    fn new(map: &HoloMapSpec, source: &MetricSpec, target: &MetricSpec, point: &[C64], scheme: &FdScheme) -> Result<Self> {
        if map.m != source.n || map.n != target.n {
            return Err(CurvError::DimensionMismatch { expected: source.n, found: map.m });
        }
        let jet = map.jet(point)?;
        if !target.region.contains(&jet.value) {
            return Err(CurvError::OutsideRegion(format!("image {:?}", jet.value)));
        }
        let jet_g = eval_jet2(source, point, scheme)?;
        let jet_h = eval_jet2(target, &jet.value, scheme)?;
        let frame_g = UnitaryFrame::from_metric(jet_g.g.matrix())?;
        let frame_h = UnitaryFrame::from_metric(jet_h.g.matrix())?;
        let fhat = unitary_jacobian(&jet.jacobian, &frame_g, &frame_h);
        Ok(MapGeometry { jet_g, jet_h, map: jet, frame_g, frame_h, fhat })
    }

    /// Chart Hessian `H[(i*m + j)][a]` built from the given Christoffel symbols
    /// (`[i, j, k]` = `Gamma^k_{ij}`).
    fn hessian(&self, gamma_g: &ComplexTensor, gamma_h: &ComplexTensor) -> Vec<Vec<C64>> {
        let (n, m) = self.map.jacobian.shape();
        let f = &self.map.jacobian;
        let mut h = vec![vec![ZERO; n]; m * m];
        for i in 0..m {
            for j in 0..m {
                for a in 0..n {
                    let mut v = self.map.second(i, j, a);
                    for c in 0..n {
                        for r in 0..n {
                            v += gamma_h[[c, r, a]] * f[(c, i)] * f[(r, j)];
                        }
                    }
                    for p in 0..m {
                        v -= gamma_g[[i, j, p]] * f[(a, p)];
                    }
                    h[i * m + j][a] = v;
                }
            }
        }
        h
    }

    /// Hessian in unitary frames, `[(a*m + b)][mu]`.
    fn unitary_hessian(&self, h: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let m = self.frame_g.dim();
        let n = self.frame_h.dim();
        let li = self.frame_g.cholesky_inverse();
        let lh = self.frame_h.cholesky_factor();
        let mut out = vec![vec![ZERO; n]; m * m];
        for a in 0..m {
            for b in 0..m {
                for mu in 0..n {
                    let mut acc = ZERO;
                    for i in 0..m {
                        for k in 0..m {
                            let w = li[(a, i)] * li[(b, k)];
                            for al in 0..n {
                                acc += w * h[i * m + k][al] * lh[(al, mu)];
                            }
                        }
                    }
                    out[a * m + b][mu] = acc;
                }
            }
        }
        out
    }

    fn sym_skew(&self, hu: &[Vec<C64>]) -> (f64, f64) {
        let m = self.frame_g.dim();
        let (mut sym, mut skew) = (0.0, 0.0);
        for a in 0..m {
            for b in 0..m {
                for (x, y) in hu[a * m + b].iter().zip(&hu[b * m + a]) {
                    sym += ((x + y) * 0.5).norm_sqr();
                    skew += ((x - y) * 0.5).norm_sqr();
                }
            }
        }
        (sym, skew)
    }

    /// `xi^{a bbar} = sum_i fhat_i^a conj(fhat_i^b)` on the target.
    fn pushed_form(&self) -> DMatrix<C64> {
        self.fhat.transpose() * self.fhat.map(|c| c.conj())
    }

    /// `A_{pq} = sum_a fhat_p^a conj(fhat_q^a)` on the source.
    fn pulled_form(&self) -> DMatrix<C64> {
        &self.fhat * self.fhat.adjoint()
    }

    /// `sum_{p,q} M_{q pbar} A_{pq}` for a source Hermitian matrix `M` in the unitary frame.
    fn source_pairing(&self, mat: &DMatrix<C64>) -> f64 {
        let a = self.pulled_form();
        let m = a.nrows();
        let mut acc = ZERO;
        for p in 0..m {
            for q in 0..m {
                acc += mat[(q, p)] * a[(p, q)];
            }
        }
        acc.re
    }

    fn unitary_packages(&self) -> Result<(ChernPackage, ChernPackage)> {
        Ok((
            ChernPackage::unitary_from_jet(&self.jet_g)?,
            ChernPackage::unitary_from_jet(&self.jet_h)?,
        ))
    }

    /// Torsion pieces in unitary frames: `a_{kl}^mu = T~(f_k, f_l)^mu` and `b_{kl}^mu = df(T_kl)^mu`.
    fn torsion_pieces(&self, src: &ChernPackage, tgt: &ChernPackage) -> (Vec<C64>, Vec<C64>) {
        let m = src.n();
        let n = tgt.n();
        let f = &self.fhat;
        let mut a = vec![ZERO; m * m * n];
        let mut b = vec![ZERO; m * m * n];
        for k in 0..m {
            for l in 0..m {
                for mu in 0..n {
                    let ix = (k * m + l) * n + mu;
                    for c in 0..n {
                        for r in 0..n {
                            a[ix] += f[(k, c)] * f[(l, r)] * tgt.torsion[[c, r, mu]];
                        }
                    }
                    for p in 0..m {
                        b[ix] += src.torsion[[k, l, p]] * f[(p, mu)];
                    }
                }
            }
        }
        (a, b)
    }
}

fn energy_at(map: &HoloMapSpec, source: &MetricSpec, target: &MetricSpec, z: &[C64]) -> Result<f64> {
    let w = map.eval(z)?;
    if !source.region.contains(z) || !target.region.contains(&w) {
        return Err(CurvError::StencilOutOfRegion(format!("{:?}", z)));
    }
    energy_density(&map.jacobian(z)?, &source.eval_matrix(z)?, &target.eval_matrix(&w)?)
}

/// Lu's identity at a point: a finite-difference Laplacian of `|df|^2` next
/// to `|Sym H|^2 + |Skew H|^2 + Ric^(2)(df, df) - R~(df, df, df, df)`.
pub fn laplacian_energy_assembled(
    map: &HoloMapSpec,
    source: &MetricSpec,
    target: &MetricSpec,
    point: &[C64],
    scheme: &FdScheme,
) -> Result<SchwarzReport> {
    let geo = MapGeometry::new(map, source, target, point, scheme)?;
    let (m, n) = (map.m, map.n);
    let gamma_g = chern_christoffel(&geo.jet_g);
    let gamma_h = chern_christoffel(&geo.jet_h);
    let hu = geo.unitary_hessian(&geo.hessian(&gamma_g, &gamma_h));
    let (sym, skew) = geo.sym_skew(&hu);

    let (src, tgt) = geo.unitary_packages()?;
    let (ta, tb) = geo.torsion_pieces(&src, &tgt);
    let mut skew_res: f64 = 0.0;
    for k in 0..m {
        for l in 0..m {
            for mu in 0..n {
                let lhs = hu[k * m + l][mu] - hu[l * m + k][mu];
                let ix = (k * m + l) * n + mu;
                skew_res = skew_res.max((lhs - (ta[ix] - tb[ix])).norm());
            }
        }
    }

    let source_term = geo.source_pairing(src.ric.ric2.matrix());
    let target_term = quartic_form(&tgt.curvature, &geo.pushed_form()).re;
    let assembled = sym + skew + source_term - target_term;

    let ginv = geo.jet_g.ginv_rows();
    let lap = complex_laplacian(
        &|z: &[C64]| energy_at(map, source, target, z).map(|e| C64::new(e, 0.0)),
        point,
        &ginv,
        scheme,
    )?;
    let scale = sym + skew + source_term.abs() + target_term.abs();
    let diff = (lap.re - assembled).abs();
    let relative_error = if scale > 0.0 { diff / scale } else { diff };

    let svd = geo.fhat.clone().svd(false, false);
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    Ok(SchwarzReport {
        point: point.to_vec(),
        image: geo.map.value.clone(),
        energy: energy_density(&geo.map.jacobian, geo.jet_g.g.matrix(), geo.jet_h.g.matrix())?,
        laplacian_fd: lap.re,
        laplacian_assembled: assembled,
        relative_error,
        sym_norm2: sym,
        skew_norm2: skew,
        skew_torsion_residual: skew_res,
        source_term,
        target_term,
        rank: numerical_rank(&singular_values),
        singular_values,
        source_dim: m,
    })
}

/// Constants of the tempered Schwarz inequality
/// `Delta |df|^2 >= -c1 |df|^2 + (kappa0 / r + c2 / n) |df|^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchwarzConstants {
    pub c1: f64,
    pub c2: f64,
    pub kappa0: f64,
    pub rank: usize,
}

impl SchwarzConstants {
    /// Sup bound `c1 / (kappa0 / r + c2 / n)` on `|df|^2` implied by the inequality.
    pub fn energy_bound(&self, n: usize) -> Result<f64> {
        if self.rank == 0 || n == 0 {
            return Err(CurvError::InvalidParameter("rank and dimension must be positive".into()));
        }
        let denom = self.kappa0 / self.rank as f64 + self.c2 / n as f64;
        if denom <= 0.0 {
            return Err(CurvError::InvalidParameter("kappa0 / r + c2 / n must be positive".into()));
        }
        Ok(self.c1 / denom)
    }
}

/// `Delta |df|^2 - (-c1 e + (kappa0 / r + c2 / n) e^2)` using the assembled Laplacian.
pub fn schwarz_inequality_slack(report: &SchwarzReport, k: &SchwarzConstants) -> Result<f64> {
    let e = report.energy;
    if e == 0.0 {
        return Ok(report.laplacian_assembled);
    }
    if k.rank == 0 {
        return Err(CurvError::InvalidParameter("rank 0 with nonzero energy".into()));
    }
    let rhs = -k.c1 * e + (k.kappa0 / k.rank as f64 + k.c2 / report.source_dim as f64) * e * e;
    Ok(report.laplacian_assembled - rhs)
}

/// Difference between the Chern assembly of `Delta |df|^2` and the one whose
/// symmetric Hessian uses the `t_source` / `t_target` Gauduchon connections.
pub fn connection_invariance_residual(
    map: &HoloMapSpec,
    source: &MetricSpec,
    target: &MetricSpec,
    point: &[C64],
    t_source: f64,
    t_target: f64,
    scheme: &FdScheme,
) -> Result<f64> {
    let geo = MapGeometry::new(map, source, target, point, scheme)?;
    let gamma_g = chern_christoffel(&geo.jet_g);
    let gamma_h = chern_christoffel(&geo.jet_h);
    let chern_h = geo.unitary_hessian(&geo.hessian(&gamma_g, &gamma_h));
    let (sym_c, skew_c) = geo.sym_skew(&chern_h);

    let tg = gauduchon_christoffel(&gamma_g, &chern_torsion(&geo.jet_g), t_source)?;
    let th = gauduchon_christoffel(&gamma_h, &chern_torsion(&geo.jet_h), t_target)?;
    let (sym_t, _) = geo.sym_skew(&geo.unitary_hessian(&geo.hessian(&tg, &th)));

    let (src, tgt) = geo.unitary_packages()?;
    let (a, b) = geo.torsion_pieces(&src, &tgt);
    let torsion_term: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / 4.0;
    let curv = geo.source_pairing(src.ric.ric2.matrix()) - quartic_form(&tgt.curvature, &geo.pushed_form()).re;
    Ok(((sym_t + torsion_term + curv) - (sym_c + skew_c + curv)).abs())
}

/// `1/4 |a - b|^2 - 1/4 (1 - tau) |a|^2 - 1/4 (1 - 1/tau) |b|^2`, nonnegative for `tau > 0`.
pub fn young_split_slack(a: &[C64], b: &[C64], tau: f64) -> f64 {
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    let nd: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    0.25 * nd - 0.25 * (1.0 - tau) * na - 0.25 * (1.0 - 1.0 / tau) * nb
}

/// `(-c1 sum l^2 + c2 sum l^4) - (-c1 e + c2 e^2 / n)` with `e = sum l^2`,
/// nonnegative when `c2 >= 0` and at most `n` values are given.
pub fn eigenvalue_estimate_slack(lambda: &[f64], c1: f64, c2: f64, n: usize) -> f64 {
    let e: f64 = lambda.iter().map(|l| l * l).sum();
    let quartic: f64 = lambda.iter().map(|l| l.powi(4)).sum();
    (-c1 * e + c2 * quartic) - (-c1 * e + c2 * e * e / n as f64)
}

/// Lower bound for `Delta |df|^2` in Bismut data, with its pieces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BismutSchwarzReport {
    pub tau: f64,
    /// `Ric^tau(df, df)` on the source, from Bismut data.
    pub source_ric_tau: f64,
    /// Unnormalized `RBC^tau` of the pushed-forward form, from Bismut data.
    pub target_rbc_tau: f64,
    pub sym_norm2: f64,
    /// `source_ric_tau - target_rbc_tau`.
    pub lower_bound: f64,
    pub laplacian_assembled: f64,
    pub margin: f64,
    /// Source-metric matrix `2(bRic1 + Re M) - bRic2 + bRic3 + bRic4`, row-major.
    pub source_bismut_matrix: Vec<C64>,
    pub source_bismut_min_eigenvalue: f64,
}

pub fn bismut_schwarz_report(
    map: &HoloMapSpec,
    source: &MetricSpec,
    target: &MetricSpec,
    point: &[C64],
    tau: f64,
    scheme: &FdScheme,
) -> Result<BismutSchwarzReport> {
    let tau_src = TauParam::source(tau)?;
    let tau_tgt = TauParam::target(tau)?;
    let report = laplacian_energy_assembled(map, source, target, point, scheme)?;
    let geo = MapGeometry::new(map, source, target, point, scheme)?;
    let (src, tgt) = geo.unitary_packages()?;
    let (b_src, s_matrix) = bismut_package(&src)?;
    let b_tgt = gauduchon_forward(&tgt, GauduchonParam::BISMUT)?;

    let ric = ric_tau_from_gauduchon(&b_src, tau_src)?;
    let source_ric_tau = geo.source_pairing(ric.matrix());
    let xi = geo.pushed_form();
    let target_rbc_tau = match PsdForm::new(HermitianMatrix::hermitian_part(&xi)) {
        Ok(form) if form.norm() > 0.0 => rbc_tau_from_gauduchon(&b_tgt, tau_tgt, &form)? * form.norm() * form.norm(),
        _ => 0.0,
    };
    let lower_bound = source_ric_tau - target_rbc_tau;
    Ok(BismutSchwarzReport {
        tau,
        source_ric_tau,
        target_rbc_tau,
        sym_norm2: report.sym_norm2,
        lower_bound,
        laplacian_assembled: report.laplacian_assembled,
        margin: report.laplacian_assembled - lower_bound,
        source_bismut_min_eigenvalue: s_matrix.min_eigenvalue(),
        source_bismut_matrix: s_matrix.matrix().transpose().iter().copied().collect(),
    })
}

/// Torsion quadratic form `sum T~ conj(T~) xi xi` of the pushed-forward form,
/// equal to `|T~(df, df)|^2`.
pub fn target_torsion_energy(map: &HoloMapSpec, source: &MetricSpec, target: &MetricSpec, point: &[C64], scheme: &FdScheme) -> Result<f64> {
    let geo = MapGeometry::new(map, source, target, point, scheme)?;
    let tgt = ChernPackage::unitary_from_jet(&geo.jet_h)?;
    Ok(quartic_form(&torsion_square(&tgt.torsion), &geo.pushed_form()).re)
}

/// Ricci form `Ric^(2)` of the source in chart coordinates; used by callers
/// that need `C1` for a Kähler-Einstein source.
pub fn source_ricci_chart(jet: &MetricJet2) -> HermitianMatrix {
    ricci_traces(&jet.ginv_rows(), &chern_curvature(jet)).ric2
}
