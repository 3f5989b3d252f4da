//! Dense complex multi-index tensors, Hermitian matrices and unitary frames.
//!
//! Every slot of a [`ComplexTensor`] carries a [`Variance`] tag telling which
//! bundle the index belongs to. Contraction only pairs an upper slot with the
//! lower slot of the same type; holomorphic/anti-holomorphic pairings go
//! through an explicit metric factor.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CurvError, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variance {
    HoloUp,
    HoloDown,
    AntiUp,
    AntiDown,
}

impl Variance {
    /// The slot type an index of this variance contracts against.
    pub fn dual(self) -> Variance {
        match self {
            Variance::HoloUp => Variance::HoloDown,
            Variance::HoloDown => Variance::HoloUp,
            Variance::AntiUp => Variance::AntiDown,
            Variance::AntiDown => Variance::AntiUp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub dim: usize,
    pub variance: Variance,
}

impl Slot {
    pub fn new(dim: usize, variance: Variance) -> Self {
        Slot { dim, variance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<Slot>,
    strides: Vec<usize>,
    data: Vec<C64>,
}

fn strides_for(shape: &[Slot]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1].dim;
    }
    strides
}

impl ComplexTensor {
    pub fn zeros(shape: Vec<Slot>) -> Self {
        let len = shape.iter().map(|s| s.dim).product();
        let strides = strides_for(&shape);
        ComplexTensor { shape, strides, data: vec![ZERO; len] }
    }

    /// All slots share dimension `n`; `variances` lists the slot tags in order.
    pub fn zeros_uniform(n: usize, variances: &[Variance]) -> Self {
        Self::zeros(variances.iter().map(|&v| Slot::new(n, v)).collect())
    }

    pub fn from_data(shape: Vec<Slot>, data: Vec<C64>) -> Result<Self> {
        let len: usize = shape.iter().map(|s| s.dim).product();
        if len != data.len() {
            return Err(CurvError::DimensionMismatch { expected: len, found: data.len() });
        }
        let strides = strides_for(&shape);
        Ok(ComplexTensor { shape, strides, data })
    }

    pub fn from_fn(shape: Vec<Slot>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0; t.rank()];
        for flat in 0..t.data.len() {
            t.unflatten(flat, &mut idx);
            t.data[flat] = f(&idx);
        }
        t
    }

    /// A rank-2 tensor from a matrix with the given slot tags.
    pub fn from_matrix(m: &DMatrix<C64>, row: Variance, col: Variance) -> Self {
        let shape = vec![Slot::new(m.nrows(), row), Slot::new(m.ncols(), col)];
        Self::from_fn(shape, |ix| m[(ix[0], ix[1])])
    }

    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        if self.rank() != 2 {
            return Err(CurvError::DimensionMismatch { expected: 2, found: self.rank() });
        }
        Ok(DMatrix::from_fn(self.shape[0].dim, self.shape[1].dim, |i, j| self[[i, j]]))
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[Slot] {
        &self.shape
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for (k, s) in self.strides.iter().enumerate() {
            out[k] = flat / s;
            flat %= s;
        }
    }

    /// Calls `f` with every multi-index in row-major order.
    pub fn for_each_index(&self, mut f: impl FnMut(&[usize], C64)) {
        let mut idx = vec![0; self.rank()];
        for flat in 0..self.data.len() {
            self.unflatten(flat, &mut idx);
            f(&idx, self.data[flat]);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-norm of the entrywise difference; shapes must match in dimension.
    pub fn max_abs_diff(&self, other: &ComplexTensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "tensor sizes differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, c: C64) -> ComplexTensor {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= c);
        out
    }

    pub fn add(&self, other: &ComplexTensor) -> Result<ComplexTensor> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &ComplexTensor) -> Result<ComplexTensor> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    fn check_same_shape(&self, other: &ComplexTensor) -> Result<()> {
        if self.shape.len() != other.shape.len() {
            return Err(CurvError::DimensionMismatch {
                expected: self.shape.len(),
                found: other.shape.len(),
            });
        }
        for (k, (a, b)) in self.shape.iter().zip(&other.shape).enumerate() {
            if a.dim != b.dim {
                return Err(CurvError::DimensionMismatch { expected: a.dim, found: b.dim });
            }
            if a.variance != b.variance {
                return Err(CurvError::VarianceMismatch { left: k, right: k });
            }
        }
        Ok(())
    }

    /// Reorders slots: slot `k` of the result is slot `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<ComplexTensor> {
        if perm.len() != self.rank() {
            return Err(CurvError::DimensionMismatch { expected: self.rank(), found: perm.len() });
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(CurvError::SlotOutOfRange(p));
            }
            seen[p] = true;
        }
        let shape: Vec<Slot> = perm.iter().map(|&p| self.shape[p]).collect();
        let mut src = vec![0; self.rank()];
        Ok(ComplexTensor::from_fn(shape, |ix| {
            for (k, &p) in perm.iter().enumerate() {
                src[p] = ix[k];
            }
            self.get(&src)
        }))
    }

    /// Applies `m` to one slot: `out[.., a, ..] = sum_k m[a, k] * self[.., k, ..]`.
    pub fn apply_to_slot(&self, slot: usize, m: &DMatrix<C64>) -> Result<ComplexTensor> {
        if slot >= self.rank() {
            return Err(CurvError::SlotOutOfRange(slot));
        }
        let n = self.shape[slot].dim;
        if m.ncols() != n || m.nrows() != n {
            return Err(CurvError::DimensionMismatch { expected: n, found: m.ncols() });
        }
        let stride = self.strides[slot];
        let mut out = ComplexTensor::zeros(self.shape.clone());
        let mut idx = vec![0; self.rank()];
        for flat in 0..self.data.len() {
            self.unflatten(flat, &mut idx);
            let a = idx[slot];
            let base = flat - a * stride;
            let mut acc = ZERO;
            for k in 0..n {
                acc += m[(a, k)] * self.data[base + k * stride];
            }
            out.data[flat] = acc;
        }
        Ok(out)
    }
}

impl<const N: usize> Index<[usize; N]> for ComplexTensor {
    type Output = C64;

    #[inline]
    fn index(&self, idx: [usize; N]) -> &C64 {
        &self.data[self.offset(&idx)]
    }
}

impl<const N: usize> IndexMut<[usize; N]> for ComplexTensor {
    #[inline]
    fn index_mut(&mut self, idx: [usize; N]) -> &mut C64 {
        let o = self.offset(&idx);
        &mut self.data[o]
    }
}

/// Contracts slot pairs `(slot of a, slot of b)`.
///
/// The result keeps the unpaired slots of `a` followed by the unpaired slots
/// of `b`, each in their original order.
pub fn contract(a: &ComplexTensor, b: &ComplexTensor, pairs: &[(usize, usize)]) -> Result<ComplexTensor> {
    for &(sa, sb) in pairs {
        let slot_a = *a.shape.get(sa).ok_or(CurvError::SlotOutOfRange(sa))?;
        let slot_b = *b.shape.get(sb).ok_or(CurvError::SlotOutOfRange(sb))?;
        if slot_a.dim != slot_b.dim {
            return Err(CurvError::DimensionMismatch { expected: slot_a.dim, found: slot_b.dim });
        }
        if slot_a.variance.dual() != slot_b.variance {
            return Err(CurvError::VarianceMismatch { left: sa, right: sb });
        }
    }
    let mut paired_a = vec![false; a.rank()];
    let mut paired_b = vec![false; b.rank()];
    for &(sa, sb) in pairs {
        if paired_a[sa] {
            return Err(CurvError::SlotOutOfRange(sa));
        }
        if paired_b[sb] {
            return Err(CurvError::SlotOutOfRange(sb));
        }
        paired_a[sa] = true;
        paired_b[sb] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&k| !paired_a[k]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&k| !paired_b[k]).collect();
    let shape: Vec<Slot> = free_a
        .iter()
        .map(|&k| a.shape[k])
        .chain(free_b.iter().map(|&k| b.shape[k]))
        .collect();

    let sum_dims: Vec<usize> = pairs.iter().map(|&(sa, _)| a.shape[sa].dim).collect();
    let sum_len: usize = sum_dims.iter().product();
    let mut ia = vec![0; a.rank()];
    let mut ib = vec![0; b.rank()];
    let mut sum_idx = vec![0; pairs.len()];

    let out = ComplexTensor::from_fn(shape, |ix| {
        for (p, &k) in free_a.iter().enumerate() {
            ia[k] = ix[p];
        }
        for (p, &k) in free_b.iter().enumerate() {
            ib[k] = ix[free_a.len() + p];
        }
        let mut acc = ZERO;
        for flat in 0..sum_len {
            let mut rem = flat;
            for q in (0..pairs.len()).rev() {
                sum_idx[q] = rem % sum_dims[q];
                rem /= sum_dims[q];
            }
            for (q, &(sa, sb)) in pairs.iter().enumerate() {
                ia[sa] = sum_idx[q];
                ib[sb] = sum_idx[q];
            }
            acc += a.get(&ia) * b.get(&ib);
        }
        acc
    });
    Ok(out)
}

/// Residual `max |m - m^*|` scaled to the largest entry.
pub fn hermitian_residual(m: &DMatrix<C64>) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let diff = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    diff / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<C64>);

impl HermitianMatrix {
    pub const TOLERANCE: f64 = 1e-12;

    /// Checks Hermitian symmetry to [`Self::TOLERANCE`] (relative to the largest entry).
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        Self::with_tolerance(m, Self::TOLERANCE)
    }

    pub fn with_tolerance(m: DMatrix<C64>, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(CurvError::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let r = hermitian_residual(&m);
        if r > tol {
            return Err(CurvError::NotHermitian(r));
        }
        Ok(HermitianMatrix(m))
    }

    /// Replaces `m` by its Hermitian part `(m + m^*) / 2`.
    pub fn hermitian_part(m: &DMatrix<C64>) -> Self {
        HermitianMatrix((m + m.adjoint()).scale(0.5))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.0[(k, k)].re).sum()
    }

    /// `sum_{k,l} m_{k l} v^k conj(v^l)`.
    pub fn quadratic_form(&self, v: &[C64]) -> f64 {
        let n = self.dim();
        let mut acc = ZERO;
        for k in 0..n {
            for l in 0..n {
                acc += self.0[(k, l)] * v[k] * v[l].conj();
            }
        }
        acc.re
    }

    pub fn is_positive_definite(&self) -> bool {
        self.dim() > 0 && self.min_eigenvalue() > 0.0
    }
}

/// A nonnegative Hermitian (1,1)-tensor together with its Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdForm {
    xi: HermitianMatrix,
    norm: f64,
}

impl PsdForm {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(xi: HermitianMatrix) -> Result<Self> {
        let norm = xi.frobenius_norm();
        let min = xi.min_eigenvalue();
        if min < -Self::TOLERANCE * norm.max(1.0) {
            return Err(CurvError::NotPsd(min));
        }
        Ok(PsdForm { xi, norm })
    }

    /// The rank-one form `zeta zeta^*`.
    pub fn rank_one(zeta: &[C64]) -> Result<Self> {
        let n = zeta.len();
        let m = DMatrix::from_fn(n, n, |a, b| zeta[a] * zeta[b].conj());
        PsdForm::new(HermitianMatrix::hermitian_part(&m))
    }

    pub fn xi(&self) -> &HermitianMatrix {
        &self.xi
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.xi.dim()
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> C64 {
        self.xi.0[(a, b)]
    }
}

/// Clips negative eigenvalues of `m` to zero and rescales to unit Frobenius norm.
pub fn psd_project(m: &HermitianMatrix) -> Result<PsdForm> {
    let n = m.dim();
    let eig = SymmetricEigen::new(m.matrix().clone());
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut out = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda <= 1e-14 * scale {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()).scale(lambda);
    }
    let norm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(CurvError::DegeneratePsd);
    }
    PsdForm::new(HermitianMatrix::hermitian_part(&out.unscale(norm)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameDirection {
    ChartToFrame,
    FrameToChart,
}

/// Unitary frame built from the Cholesky factor `g = L L^*`.
///
/// The frame vectors are `e_a = sum_k (L^{-1})_{a k} d/dz^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryFrame {
    l: DMatrix<C64>,
    l_inv: DMatrix<C64>,
    direction: FrameDirection,
}

impl UnitaryFrame {
    pub fn from_metric(g: &DMatrix<C64>) -> Result<Self> {
        if !g.is_square() {
            return Err(CurvError::DimensionMismatch { expected: g.nrows(), found: g.ncols() });
        }
        let r = hermitian_residual(g);
        if r > 1e-10 {
            return Err(CurvError::NotHermitian(r));
        }
        let sym = (g + g.adjoint()).scale(0.5);
        if !HermitianMatrix(sym.clone()).is_positive_definite() {
            return Err(CurvError::NotPositiveDefinite);
        }
        let chol = sym.cholesky().ok_or(CurvError::NotPositiveDefinite)?;
        let l = chol.l();
        let l_inv = l.clone().try_inverse().ok_or(CurvError::Singular)?;
        Ok(UnitaryFrame { l, l_inv, direction: FrameDirection::ChartToFrame })
    }

    pub fn identity(n: usize) -> Self {
        UnitaryFrame {
            l: DMatrix::identity(n, n),
            l_inv: DMatrix::identity(n, n),
            direction: FrameDirection::ChartToFrame,
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn cholesky_factor(&self) -> &DMatrix<C64> {
        &self.l
    }

    pub fn cholesky_inverse(&self) -> &DMatrix<C64> {
        &self.l_inv
    }

    pub fn direction(&self) -> FrameDirection {
        self.direction
    }

    pub fn inverse(&self) -> Self {
        let direction = match self.direction {
            FrameDirection::ChartToFrame => FrameDirection::FrameToChart,
            FrameDirection::FrameToChart => FrameDirection::ChartToFrame,
        };
        UnitaryFrame { direction, ..self.clone() }
    }

    /// Matrix applied to a slot of the given variance, in this frame's direction.
    pub fn slot_matrix(&self, variance: Variance) -> DMatrix<C64> {
        let to_frame = self.direction == FrameDirection::ChartToFrame;
        match (variance, to_frame) {
            (Variance::HoloDown, true) => self.l_inv.clone(),
            (Variance::AntiDown, true) => self.l_inv.map(|z| z.conj()),
            (Variance::HoloUp, true) => self.l.transpose(),
            (Variance::AntiUp, true) => self.l.adjoint(),
            (Variance::HoloDown, false) => self.l.clone(),
            (Variance::AntiDown, false) => self.l.map(|z| z.conj()),
            (Variance::HoloUp, false) => self.l_inv.transpose(),
            (Variance::AntiUp, false) => self.l_inv.adjoint(),
        }
    }
}

/// Transforms every slot of `t` with the frame (or its inverse, per direction).
pub fn to_unitary_frame(t: &ComplexTensor, frame: &UnitaryFrame) -> Result<ComplexTensor> {
    let mut out = t.clone();
    for (k, slot) in t.shape().iter().enumerate() {
        if slot.dim != frame.dim() {
            return Err(CurvError::DimensionMismatch { expected: frame.dim(), found: slot.dim });
        }
        out = out.apply_to_slot(k, &frame.slot_matrix(slot.variance))?;
    }
    Ok(out)
}
