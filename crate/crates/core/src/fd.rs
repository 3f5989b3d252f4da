//! Central finite differences in real coordinates, combined into Wirtinger
//! derivatives.
//!
//! Real coordinate `2k` is `x_k = Re z_k` and `2k + 1` is `y_k = Im z_k`.
//! Functions are vector valued (`Vec<C64>`) so one stencil pass serves a whole
//! metric matrix or tensor.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CurvError, Result};

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdScheme {
    /// Base step, multiplied by `max(1, |z|_inf)` at the evaluation point.
    pub h: f64,
    /// Stencil order, 2 or 4.
    pub order: u8,
    /// Richardson extrapolation levels, 0 or 1.
    pub richardson: u8,
    /// Use a closed-form jet when the metric provides one.
    pub use_exact: bool,
}

impl Default for FdScheme {
    fn default() -> Self {
        FdScheme { h: 1e-3, order: 4, richardson: 1, use_exact: true }
    }
}

impl FdScheme {
    pub fn new(h: f64, order: u8, richardson: u8) -> Result<Self> {
        let s = FdScheme { h, order, richardson, use_exact: true };
        s.validate()?;
        Ok(s)
    }

    pub fn without_exact(mut self) -> Self {
        self.use_exact = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(CurvError::InvalidParameter(format!("step h = {} must be positive", self.h)));
        }
        if self.order != 2 && self.order != 4 {
            return Err(CurvError::InvalidParameter(format!("stencil order {} (expected 2 or 4)", self.order)));
        }
        if self.richardson > 1 {
            return Err(CurvError::InvalidParameter(format!(
                "richardson level {} (expected 0 or 1)",
                self.richardson
            )));
        }
        Ok(())
    }

    /// Effective order of accuracy after extrapolation.
    pub fn accuracy_order(&self) -> i32 {
        self.order as i32 + 2 * self.richardson as i32
    }

    /// Error scale used for jet invariant checks: truncation plus roundoff of
    /// a second derivative, floored at 1e-6.
    pub fn tolerance(&self) -> f64 {
        let trunc = self.h.powi(self.accuracy_order());
        let round = 1e-15 / (self.h * self.h);
        (100.0 * (trunc + round)).max(1e-6)
    }

    pub fn effective_step(&self, z: &[C64]) -> f64 {
        let scale = z.iter().map(|c| c.re.abs().max(c.im.abs())).fold(1.0, f64::max);
        self.h * scale
    }
}

/// Real partial derivatives of a vector-valued function.
#[derive(Debug, Clone)]
pub struct RealJet {
    pub value: Vec<C64>,
    /// `first[a][m]` = d/du_a of component m.
    pub first: Vec<Vec<C64>>,
    /// `second[a][b][m]` = d^2/du_a du_b of component m; empty when not requested.
    pub second: Vec<Vec<Vec<C64>>>,
}

// One-sided halves of the central stencils: offsets s > 0 with weights w_s.
// First derivative: sum_s w_s (f(+s) - f(-s)) / h.
// Second derivative: sum_s w_s ((f(+s) - f(0)) + (f(-s) - f(0))) / h^2.
// Differences are formed before weighting so constants differentiate to exactly zero.
const FIRST2: [(i32, f64); 1] = [(1, 0.5)];
const FIRST4: [(i32, f64); 2] = [(1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const SECOND2: [(i32, f64); 1] = [(1, 1.0)];
const SECOND4: [(i32, f64); 2] = [(1, 16.0 / 12.0), (2, -1.0 / 12.0)];

fn first_weights(order: u8) -> &'static [(i32, f64)] {
    if order == 2 {
        &FIRST2
    } else {
        &FIRST4
    }
}

fn second_weights(order: u8) -> &'static [(i32, f64)] {
    if order == 2 {
        &SECOND2
    } else {
        &SECOND4
    }
}

fn shifted(z: &[C64], moves: &[(usize, f64)]) -> Vec<C64> {
    let mut p = z.to_vec();
    for &(a, d) in moves {
        if a % 2 == 0 {
            p[a / 2].re += d;
        } else {
            p[a / 2].im += d;
        }
    }
    p
}

fn axpy(acc: &mut [C64], w: f64, v: &[C64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b * w;
    }
}

fn stencil_error(e: CurvError, p: &[C64]) -> CurvError {
    match e {
        CurvError::OutsideRegion(_) | CurvError::DivisionByZero | CurvError::NonFinite(_) => {
            CurvError::StencilOutOfRegion(format!("{:?}", p))
        }
        other => other,
    }
}

struct Evaluator<'a, F: Fn(&[C64]) -> Result<Vec<C64>>> {
    f: &'a F,
    z: &'a [C64],
    m: usize,
    order: u8,
}

impl<F: Fn(&[C64]) -> Result<Vec<C64>>> Evaluator<'_, F> {
    fn at(&self, moves: &[(usize, f64)]) -> Result<Vec<C64>> {
        let p = shifted(self.z, moves);
        let v = (self.f)(&p).map_err(|e| stencil_error(e, &p))?;
        if v.len() != self.m {
            return Err(CurvError::DimensionMismatch { expected: self.m, found: v.len() });
        }
        Ok(v)
    }

    fn first(&self, a: usize, h: f64) -> Result<Vec<C64>> {
        let mut acc = vec![C64::new(0.0, 0.0); self.m];
        for &(s, w) in first_weights(self.order) {
            let plus = self.at(&[(a, s as f64 * h)])?;
            let minus = self.at(&[(a, -s as f64 * h)])?;
            let diff: Vec<C64> = plus.iter().zip(&minus).map(|(p, q)| p - q).collect();
            axpy(&mut acc, w / h, &diff);
        }
        Ok(acc)
    }

    fn second(&self, a: usize, b: usize, h: f64, center: &[C64]) -> Result<Vec<C64>> {
        let mut acc = vec![C64::new(0.0, 0.0); self.m];
        if a == b {
            for &(s, w) in second_weights(self.order) {
                let plus = self.at(&[(a, s as f64 * h)])?;
                let minus = self.at(&[(a, -s as f64 * h)])?;
                let diff: Vec<C64> =
                    plus.iter().zip(&minus).zip(center).map(|((p, q), c)| (p - c) + (q - c)).collect();
                axpy(&mut acc, w / (h * h), &diff);
            }
        } else {
            for &(s, ws) in first_weights(self.order) {
                for &(t, wt) in first_weights(self.order) {
                    let (s, t) = (s as f64 * h, t as f64 * h);
                    let pp = self.at(&[(a, s), (b, t)])?;
                    let pm = self.at(&[(a, s), (b, -t)])?;
                    let mp = self.at(&[(a, -s), (b, t)])?;
                    let mm = self.at(&[(a, -s), (b, -t)])?;
                    let diff: Vec<C64> = (0..self.m).map(|k| (pp[k] - pm[k]) - (mp[k] - mm[k])).collect();
                    axpy(&mut acc, ws * wt / (h * h), &diff);
                }
            }
        }
        Ok(acc)
    }
}

fn extrapolate(coarse: Vec<C64>, fine: Vec<C64>, order: i32) -> Vec<C64> {
    let k = 2f64.powi(order);
    coarse.into_iter().zip(fine).map(|(c, f)| (f * k - c) / (k - 1.0)).collect()
}

/// Real first (and optionally second) partials of `f` at `z`.
pub fn real_jet<F>(f: &F, z: &[C64], scheme: &FdScheme, with_second: bool) -> Result<RealJet>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    scheme.validate()?;
    let value = f(z)?;
    let ev = Evaluator { f, z, m: value.len(), order: scheme.order };
    let h = scheme.effective_step(z);
    let dim = 2 * z.len();
    let p = scheme.order as i32;

    let mut first = Vec::with_capacity(dim);
    for a in 0..dim {
        let d = ev.first(a, h)?;
        first.push(if scheme.richardson == 1 { extrapolate(d, ev.first(a, h / 2.0)?, p) } else { d });
    }

    let mut second = Vec::new();
    if with_second {
        second = vec![vec![Vec::new(); dim]; dim];
        for a in 0..dim {
            for b in a..dim {
                let d = ev.second(a, b, h, &value)?;
                let d = if scheme.richardson == 1 { extrapolate(d, ev.second(a, b, h / 2.0, &value)?, p) } else { d };
                second[b][a] = d.clone();
                second[a][b] = d;
            }
        }
    }
    Ok(RealJet { value, first, second })
}

/// Wirtinger derivatives assembled from a real jet.
#[derive(Debug, Clone)]
pub struct WirtingerJet {
    pub value: Vec<C64>,
    /// `d[i][m]` = d/dz_i.
    pub d: Vec<Vec<C64>>,
    /// `dbar[j][m]` = d/dconj(z_j).
    pub dbar: Vec<Vec<C64>>,
    /// `ddbar[i][j][m]` = d^2/dz_i dconj(z_j); empty when not requested.
    pub ddbar: Vec<Vec<Vec<C64>>>,
}

pub fn wirtinger_jet<F>(f: &F, z: &[C64], scheme: &FdScheme, with_second: bool) -> Result<WirtingerJet>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let rj = real_jet(f, z, scheme, with_second)?;
    let n = z.len();
    let m = rj.value.len();
    let i_unit = C64::new(0.0, 1.0);
    let mut d = vec![vec![C64::new(0.0, 0.0); m]; n];
    let mut dbar = vec![vec![C64::new(0.0, 0.0); m]; n];
    for k in 0..n {
        for c in 0..m {
            let dx = rj.first[2 * k][c];
            let dy = rj.first[2 * k + 1][c];
            d[k][c] = (dx - i_unit * dy) * 0.5;
            dbar[k][c] = (dx + i_unit * dy) * 0.5;
        }
    }
    let mut ddbar = Vec::new();
    if with_second {
        ddbar = vec![vec![vec![C64::new(0.0, 0.0); m]; n]; n];
        for i in 0..n {
            for j in 0..n {
                let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
                for c in 0..m {
                    // d_i dbar_j = (1/4)(d_xi - i d_yi)(d_xj + i d_yj)
                    let re = rj.second[xi][xj][c] + rj.second[yi][yj][c];
                    let im = rj.second[xi][yj][c] - rj.second[yi][xj][c];
                    ddbar[i][j][c] = (re + i_unit * im) * 0.25;
                }
            }
        }
    }
    Ok(WirtingerJet { value: rj.value, d, dbar, ddbar })
}

/// `sum_{i,j} ginv[i][j] d_i dbar_j u` for a scalar `u`, where
/// `ginv[i][j]` is the inverse-metric component `g^{i jbar}`.
pub fn complex_laplacian<F>(u: &F, z: &[C64], ginv: &[Vec<C64>], scheme: &FdScheme) -> Result<C64>
where
    F: Fn(&[C64]) -> Result<C64>,
{
    let wrapped = |p: &[C64]| u(p).map(|v| vec![v]);
    let jet = wirtinger_jet(&wrapped, z, scheme, true)?;
    let n = z.len();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += ginv[i][j] * jet.ddbar[i][j][0];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(z: &[C64]) -> Result<Vec<C64>> {
        // f = z1^2 conj(z2) + 3 |z1|^2
        let (a, b) = (z[0], z[1]);
        Ok(vec![a * a * b.conj() + 3.0 * a.norm_sqr()])
    }

    #[test]
    fn wirtinger_of_polynomial() {
        let z = [C64::new(0.3, -0.2), C64::new(0.1, 0.5)];
        for scheme in [FdScheme::default(), FdScheme::new(1e-3, 2, 0).unwrap(), FdScheme::new(1e-2, 4, 0).unwrap()] {
            let j = wirtinger_jet(&poly, &z, &scheme, true).unwrap();
            let (a, b) = (z[0], z[1]);
            let tol = 1e-6;
            assert!((j.d[0][0] - (2.0 * a * b.conj() + 3.0 * a.conj())).norm() < tol);
            assert!(j.d[1][0].norm() < tol);
            assert!((j.dbar[0][0] - 3.0 * a).norm() < tol);
            assert!((j.dbar[1][0] - a * a).norm() < tol);
            assert!((j.ddbar[0][0][0] - C64::new(3.0, 0.0)).norm() < tol);
            assert!((j.ddbar[0][1][0] - 2.0 * a).norm() < tol);
            assert!(j.ddbar[1][0][0].norm() < tol);
        }
    }

    #[test]
    fn rejects_bad_scheme() {
        assert!(FdScheme::new(0.0, 4, 1).is_err());
        assert!(FdScheme::new(1e-3, 3, 1).is_err());
        assert!(FdScheme::new(1e-3, 4, 2).is_err());
    }

    #[test]
    fn laplacian_of_norm_squared() {
        let u = |z: &[C64]| Ok(C64::new(z.iter().map(|c| c.norm_sqr()).sum(), 0.0));
        let z = [C64::new(0.2, 0.1), C64::new(-0.4, 0.3)];
        let ginv = vec![vec![C64::new(2.0, 0.0), C64::new(0.0, 0.0)], vec![C64::new(0.0, 0.0), C64::new(0.5, 0.0)]];
        let lap = complex_laplacian(&u, &z, &ginv, &FdScheme::default()).unwrap();
        assert!((lap - C64::new(2.5, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn stencil_outside_domain_is_reported() {
        let f = |z: &[C64]| {
            if z[0].re > 0.0 {
                Err(CurvError::OutsideRegion("x > 0".into()))
            } else {
                Ok(vec![z[0]])
            }
        };
        let err = wirtinger_jet(&f, &[C64::new(0.0, 0.0)], &FdScheme::default(), false).unwrap_err();
        assert!(matches!(err, CurvError::StencilOutOfRegion(_)));
    }
}
