//! The truncated Peter-Weyl basis `{t~^n_{ij}}` of the GNS space `h`,
//! vectors over it, and sparse operators that remember how many spin
//! shells of the truncation they can corrupt.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halfint::HalfInteger;
use crate::qarith::DeformationParameter;

/// Label `(n, i, j)` of a Peter-Weyl basis element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PWIndex {
    pub n: HalfInteger,
    pub i: HalfInteger,
    pub j: HalfInteger,
}

impl PWIndex {
    /// Returns `None` unless `|i|, |j| <= n` on the weight grid of `n`.
    pub fn new(n: HalfInteger, i: HalfInteger, j: HalfInteger) -> Option<Self> {
        let idx = PWIndex { n, i, j };
        idx.is_valid().then_some(idx)
    }

    pub fn from_doubled(n2: i64, i2: i64, j2: i64) -> Option<Self> {
        Self::new(
            HalfInteger::from_doubled(n2),
            HalfInteger::from_doubled(i2),
            HalfInteger::from_doubled(j2),
        )
    }

    pub fn is_valid(&self) -> bool {
        self.n >= HalfInteger::ZERO
            && self.i.abs() <= self.n
            && self.j.abs() <= self.n
            && (self.n - self.i).is_integral()
            && (self.n - self.j).is_integral()
    }

    /// The cyclic vector `t~^0_{00} = 1`.
    pub const fn vacuum() -> Self {
        PWIndex {
            n: HalfInteger::ZERO,
            i: HalfInteger::ZERO,
            j: HalfInteger::ZERO,
        }
    }
}

impl fmt::Display for PWIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.n, self.i, self.j)
    }
}

/// Retain every spin `n <= lmax`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Truncation {
    lmax: HalfInteger,
}

/// Number of basis cells with `2n < n2`, i.e. `sum_{k=1}^{n2} k^2`.
#[inline]
fn block_offset(n2: i64) -> usize {
    (n2 * (n2 + 1) * (2 * n2 + 1) / 6) as usize
}

impl Truncation {
    pub fn new(lmax: HalfInteger) -> Result<Self> {
        if lmax < HalfInteger::ZERO {
            return Err(Error::InvalidParameter(format!(
                "truncation spin must be non-negative (got {lmax})"
            )));
        }
        Ok(Truncation { lmax })
    }

    pub fn from_doubled(lmax_doubled: i64) -> Result<Self> {
        Self::new(HalfInteger::from_doubled(lmax_doubled))
    }

    #[inline]
    pub fn lmax(&self) -> HalfInteger {
        self.lmax
    }

    /// `sum_{2n = 0}^{2 Lmax} (2n + 1)^2`.
    #[inline]
    pub fn dim(&self) -> usize {
        block_offset(self.lmax.doubled() + 1)
    }

    /// Position of `idx` in [`Truncation::enumerate`]; `None` when outside.
    #[inline]
    pub fn position(&self, idx: PWIndex) -> Option<usize> {
        if !idx.is_valid() || idx.n > self.lmax {
            return None;
        }
        let n2 = idx.n.doubled();
        let row = ((idx.i.doubled() + n2) / 2) as usize;
        let col = ((idx.j.doubled() + n2) / 2) as usize;
        Some(block_offset(n2) + row * (n2 as usize + 1) + col)
    }

    /// Inverse of [`Truncation::position`].
    pub fn index_at(&self, pos: usize) -> PWIndex {
        debug_assert!(pos < self.dim());
        let mut n2 = 0i64;
        while block_offset(n2 + 1) <= pos {
            n2 += 1;
        }
        let within = pos - block_offset(n2);
        let side = n2 as usize + 1;
        let (row, col) = (within / side, within % side);
        PWIndex {
            n: HalfInteger::from_doubled(n2),
            i: HalfInteger::from_doubled(2 * row as i64 - n2),
            j: HalfInteger::from_doubled(2 * col as i64 - n2),
        }
    }

    /// Ascending `2n`, then `i`, then `j`.
    pub fn enumerate(&self) -> Vec<PWIndex> {
        let mut out = Vec::with_capacity(self.dim());
        for n in self.lmax.spins_up_to() {
            for i in n.weights() {
                for j in n.weights() {
                    out.push(PWIndex { n, i, j });
                }
            }
        }
        out
    }

    /// Range of positions occupied by spins `<= shell`.
    pub fn shell_range(&self, shell: HalfInteger) -> std::ops::Range<usize> {
        let top = shell.min(self.lmax);
        if top < HalfInteger::ZERO {
            return 0..0;
        }
        0..block_offset(top.doubled() + 1)
    }

    /// Range of positions of the single spin block `n`.
    pub fn block_range(&self, n: HalfInteger) -> std::ops::Range<usize> {
        let n2 = n.doubled();
        block_offset(n2)..block_offset(n2 + 1)
    }

    /// Largest spin on which a depth-`depth` operator acts exactly.
    pub fn safe_shell(&self, depth: HalfInteger) -> Option<HalfInteger> {
        let s = self.lmax - depth;
        (s >= HalfInteger::ZERO).then_some(s)
    }
}

/// `basis_enumerate`: the ordered Peter-Weyl labels of a truncation.
pub fn basis_enumerate(trunc: &Truncation) -> Vec<PWIndex> {
    trunc.enumerate()
}

/// `psi((t^m_{ij})^* t^n_{kl}) = delta [2n+1]_q^{-1} q^{2i}`.
pub fn pw_inner_unnormalized(a: PWIndex, b: PWIndex, q: &DeformationParameter) -> f64 {
    if a != b {
        return 0.0;
    }
    q.q().powf(a.i.to_f64() * 2.0) / q.qn(2.0 * a.n.to_f64() + 1.0)
}

/// `psi(t^m_{ij} (t^n_{kl})^*) = delta [2n+1]_q^{-1} q^{-2j}`.
pub fn pw_inner_adjoint_unnormalized(a: PWIndex, b: PWIndex, q: &DeformationParameter) -> f64 {
    if a != b {
        return 0.0;
    }
    q.q().powf(-a.j.to_f64() * 2.0) / q.qn(2.0 * a.n.to_f64() + 1.0)
}

/// `[2n+1]_q^{1/2} q^{-i}`, the factor turning `t^n_{ij}` into a unit vector.
pub fn normalization_factor(idx: PWIndex, q: &DeformationParameter) -> f64 {
    q.qn(2.0 * idx.n.to_f64() + 1.0).sqrt() * q.q().powf(-idx.i.to_f64())
}

/// Diagonal weight `q^{-2i-2j}` of the modular operator rho.
pub fn rho_weight(idx: PWIndex, q: &DeformationParameter) -> f64 {
    q.q().powf(-(idx.i + idx.j).to_f64() * 2.0)
}

/// A vector in the truncated `h`, stored densely in basis order.
#[derive(Clone, Debug, PartialEq)]
pub struct HilbertVector {
    trunc: Truncation,
    coeffs: Vec<Complex64>,
}

impl HilbertVector {
    pub fn zeros(trunc: Truncation) -> Self {
        HilbertVector {
            trunc,
            coeffs: vec![Complex64::new(0.0, 0.0); trunc.dim()],
        }
    }

    /// The unit vector `t~^idx`; `None` if `idx` is outside the truncation.
    pub fn basis(trunc: Truncation, idx: PWIndex) -> Option<Self> {
        let pos = trunc.position(idx)?;
        let mut v = Self::zeros(trunc);
        v.coeffs[pos] = Complex64::new(1.0, 0.0);
        Some(v)
    }

    pub fn from_coeffs(trunc: Truncation, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != trunc.dim() {
            return Err(Error::InvalidParameter(format!(
                "coefficient vector has length {}, truncation needs {}",
                coeffs.len(),
                trunc.dim()
            )));
        }
        Ok(HilbertVector { trunc, coeffs })
    }

    #[inline]
    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient on `t~^idx`; zero for labels outside the truncation or
    /// off the weight grid.
    pub fn get(&self, idx: PWIndex) -> Complex64 {
        self.trunc
            .position(idx)
            .map_or(Complex64::new(0.0, 0.0), |p| self.coeffs[p])
    }

    /// Adds `value` at `idx`; returns `false` (and drops the value) if the
    /// label is outside the truncation.
    pub fn add_at(&mut self, idx: PWIndex, value: Complex64) -> bool {
        match self.trunc.position(idx) {
            Some(p) => {
                self.coeffs[p] += value;
                true
            }
            None => false,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self, other>`, antilinear in `self`.
    pub fn inner(&self, other: &HilbertVector) -> Complex64 {
        debug_assert_eq!(self.trunc, other.trunc);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Largest spin carrying a nonzero coefficient.
    pub fn support_spin(&self) -> Option<HalfInteger> {
        let last = self.coeffs.iter().rposition(|c| *c != Complex64::new(0.0, 0.0))?;
        Some(self.trunc.index_at(last).n)
    }

    /// Re-expand in another truncation, dropping spins that do not fit.
    pub fn reembed(&self, trunc: Truncation) -> HilbertVector {
        let mut out = HilbertVector::zeros(trunc);
        let keep = self.trunc.shell_range(trunc.lmax());
        out.coeffs[keep.clone()].copy_from_slice(&self.coeffs[keep]);
        out
    }

    pub fn scale(&mut self, s: Complex64) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &HilbertVector) {
        debug_assert_eq!(self.trunc, other.trunc);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }
}

/// A sparse linear map on the truncated `h`, in compressed-row form.
///
/// `shell_depth` is the largest spin shift any term of the operator can
/// produce: the action on vectors supported on `n <= Lmax - shell_depth`
/// coincides with the untruncated operator.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    trunc: Truncation,
    shell_depth: HalfInteger,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOperator {
    /// Build from `(row, col, value)` triplets; repeated cells are summed.
    pub fn from_triplets(
        trunc: Truncation,
        shell_depth: HalfInteger,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        let dim = trunc.dim();
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator {
            trunc,
            shell_depth,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn identity(trunc: Truncation) -> Self {
        Self::diagonal(trunc, |_| Complex64::new(1.0, 0.0))
    }

    pub fn zero(trunc: Truncation) -> Self {
        Self::from_triplets(trunc, HalfInteger::ZERO, Vec::new())
    }

    /// Diagonal operator with the given weight on each basis label.
    pub fn diagonal(trunc: Truncation, weight: impl Fn(PWIndex) -> Complex64) -> Self {
        let trip = trunc
            .enumerate()
            .into_iter()
            .enumerate()
            .map(|(p, idx)| (p, p, weight(idx)))
            .collect();
        Self::from_triplets(trunc, HalfInteger::ZERO, trip)
    }

    #[inline]
    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    #[inline]
    pub fn shell_depth(&self) -> HalfInteger {
        self.shell_depth
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.trunc.dim()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Largest spin on which this operator is exact, if any.
    pub fn safe_shell(&self) -> Option<HalfInteger> {
        self.trunc.safe_shell(self.shell_depth)
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// Matrix entry `<t~^row, A t~^col>`.
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.row(row)
            .find(|&(c, _)| c == col)
            .map_or(Complex64::new(0.0, 0.0), |(_, v)| v)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn apply_slice(&self, x: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.dim());
        (0..self.dim())
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn apply(&self, v: &HilbertVector) -> HilbertVector {
        debug_assert_eq!(v.truncation(), self.trunc);
        HilbertVector {
            trunc: self.trunc,
            coeffs: self.apply_slice(v.coeffs()),
        }
    }

    /// `A^* x` without forming the adjoint.
    pub fn apply_adjoint_slice(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (r, &xr) in x.iter().enumerate().take(self.dim()) {
            if xr == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (c, v) in self.row(r) {
                out[c] += v.conj() * xr;
            }
        }
        out
    }

    pub fn adjoint(&self) -> SparseOperator {
        let trip = self.entries().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.trunc, self.shell_depth, trip)
    }

    /// `self * other`; depths add.
    pub fn compose(&self, other: &SparseOperator) -> SparseOperator {
        debug_assert_eq!(self.trunc, other.trunc);
        let dim = self.dim();
        let zero = Complex64::new(0.0, 0.0);
        let mut acc = vec![zero; dim];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; dim];
        let mut trip = Vec::new();
        for r in 0..dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                trip.push((r, c, acc[c]));
                acc[c] = zero;
                mark[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.trunc, self.shell_depth + other.shell_depth, trip)
    }

    /// `a * self + b * other`; the depth is the larger of the two.
    pub fn linear_combination(
        &self,
        a: Complex64,
        other: &SparseOperator,
        b: Complex64,
    ) -> SparseOperator {
        debug_assert_eq!(self.trunc, other.trunc);
        let trip = self
            .entries()
            .map(|(r, c, v)| (r, c, a * v))
            .chain(other.entries().map(|(r, c, v)| (r, c, b * v)))
            .collect();
        Self::from_triplets(
            self.trunc,
            self.shell_depth.max(other.shell_depth),
            trip,
        )
    }

    pub fn scaled(&self, s: Complex64) -> SparseOperator {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Conjugate by positive diagonal weights: `W A W^{-1}`.
    pub fn conjugate_by_diagonal(&self, weight: impl Fn(PWIndex) -> f64) -> SparseOperator {
        let w: Vec<f64> = self.trunc.enumerate().into_iter().map(weight).collect();
        let trip = self
            .entries()
            .map(|(r, c, v)| (r, c, v * (w[r] / w[c])))
            .collect();
        Self::from_triplets(self.trunc, self.shell_depth, trip)
    }

    /// Max `|(A - B)_{rc}|` over columns `c` in the common safe shell.
    ///
    /// Returns `None` when the safe shell is empty.
    pub fn safe_residual(&self, other: &SparseOperator) -> Option<f64> {
        debug_assert_eq!(self.trunc, other.trunc);
        let depth = self.shell_depth.max(other.shell_depth);
        let shell = self.trunc.safe_shell(depth)?;
        let cols = self.trunc.shell_range(shell);
        let diff = self.linear_combination(
            Complex64::new(1.0, 0.0),
            other,
            Complex64::new(-1.0, 0.0),
        );
        Some(
            diff.entries()
                .filter(|(_, c, _)| cols.contains(c))
                .map(|(_, _, v)| v.norm())
                .fold(0.0, f64::max),
        )
    }

    /// Dense row-major copy, for small cross-checks.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut m = vec![vec![Complex64::new(0.0, 0.0); self.dim()]; self.dim()];
        for (r, c, v) in self.entries() {
            m[r][c] += v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(q: f64) -> DeformationParameter {
        DeformationParameter::new(q).unwrap()
    }

    #[test]
    fn enumeration_dimensions() {
        let t0 = Truncation::from_doubled(0).unwrap();
        assert_eq!(basis_enumerate(&t0), vec![PWIndex::vacuum()]);
        assert_eq!(Truncation::from_doubled(1).unwrap().dim(), 5);
        let t2 = Truncation::from_doubled(4).unwrap();
        let brute: usize = (0..=4).map(|n2: usize| (n2 + 1) * (n2 + 1)).sum();
        assert_eq!(brute, 55);
        assert_eq!(t2.dim(), 55);
        assert_eq!(basis_enumerate(&t2).len(), 55);
        assert!(Truncation::from_doubled(-1).is_err());
    }

    #[test]
    fn enumeration_order_and_lookup() {
        let t = Truncation::from_doubled(7).unwrap();
        let list = basis_enumerate(&t);
        assert_eq!(list, basis_enumerate(&t));
        for w in list.windows(2) {
            assert!((w[0].n, w[0].i, w[0].j) < (w[1].n, w[1].i, w[1].j));
        }
        for (p, idx) in list.iter().enumerate() {
            assert_eq!(t.position(*idx), Some(p));
            assert_eq!(t.index_at(p), *idx);
        }
        assert_eq!(t.position(PWIndex::from_doubled(9, 1, 1).unwrap()), None);
        assert!(PWIndex::from_doubled(2, 1, 0).is_none());
        assert!(PWIndex::from_doubled(1, 3, 1).is_none());
    }

    #[test]
    fn inner_product_examples() {
        let q = d(2.0);
        let v = PWIndex::vacuum();
        assert!((pw_inner_unnormalized(v, v, &q) - 1.0).abs() < 1e-15);
        let a = PWIndex::from_doubled(1, 1, 1).unwrap();
        // q^{2*1/2} / [2]_2 = 2 / 2.5
        assert!((pw_inner_unnormalized(a, a, &q) - 0.8).abs() < 1e-15);
        let b = PWIndex::from_doubled(1, -1, 1).unwrap();
        assert_eq!(pw_inner_unnormalized(a, b, &q), 0.0);
        // q^{-2j}/[2] with j = 1/2
        assert!((pw_inner_adjoint_unnormalized(a, a, &q) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn normalization_examples() {
        let q = d(2.0);
        assert!((normalization_factor(PWIndex::vacuum(), &q) - 1.0).abs() < 1e-15);
        let a = PWIndex::from_doubled(1, 1, -1).unwrap();
        let expected = (2.5f64).sqrt() / 2f64.sqrt();
        assert!((normalization_factor(a, &q) - expected).abs() < 1e-14);
        assert!((expected - 1.118_033_988_749_895).abs() < 1e-12);
    }

    /// Gram matrix of the rescaled basis is the identity.
    #[test]
    fn orthonormality_sweep() {
        for q in [1.2, 2.0] {
            let dq = d(q);
            let t = Truncation::from_doubled(20).unwrap();
            let list = t.enumerate();
            for a in &list {
                let g = normalization_factor(*a, &dq).powi(2) * pw_inner_unnormalized(*a, *a, &dq);
                assert!((g - 1.0).abs() < 1e-12, "{a}");
            }
            let (a, b) = (list[7], list[8]);
            assert_eq!(pw_inner_unnormalized(a, b, &dq), 0.0);
        }
    }

    #[test]
    fn rho_weight_examples() {
        let q = d(1.7);
        assert_eq!(rho_weight(PWIndex::from_doubled(2, 2, -2).unwrap(), &q), 1.0);
        let w = rho_weight(PWIndex::from_doubled(1, 1, 1).unwrap(), &q);
        assert!((w - 1.7f64.powi(-2)).abs() < 1e-15);
        for n2 in 0..=20 {
            let n = HalfInteger::from_doubled(n2);
            let s: f64 = n
                .weights()
                .flat_map(|i| n.weights().map(move |j| PWIndex { n, i, j }))
                .map(|idx| rho_weight(idx, &q))
                .sum();
            let qn = q.qn(n2 as f64 + 1.0);
            assert!((s - qn * qn).abs() < 1e-11 * qn * qn);
        }
    }

    fn shift_op(t: Truncation) -> SparseOperator {
        // n -> n + 1/2 with i, j -> i + 1/2, j + 1/2, weights arbitrary but fixed
        let mut trip = Vec::new();
        for (p, idx) in t.enumerate().into_iter().enumerate() {
            let to = PWIndex {
                n: idx.n + HalfInteger::HALF,
                i: idx.i + HalfInteger::HALF,
                j: idx.j + HalfInteger::HALF,
            };
            if let Some(r) = t.position(to) {
                trip.push((r, p, Complex64::new(1.0 + idx.n.to_f64(), idx.i.to_f64())));
            }
        }
        SparseOperator::from_triplets(t, HalfInteger::HALF, trip)
    }

    #[test]
    fn depth_accumulates_and_truncation_is_exact() {
        let small = Truncation::from_doubled(6).unwrap();
        let large = Truncation::from_doubled(11).unwrap();
        let a = shift_op(small);
        let aa = a.compose(&a).compose(&a);
        assert_eq!(aa.shell_depth(), HalfInteger::from_doubled(3));
        assert_eq!(aa.safe_shell(), Some(HalfInteger::from_doubled(3)));

        let big = shift_op(large);
        let bigaa = big.compose(&big).compose(&big);
        // a vector supported on the safe shell of the small truncation
        let mut v = HilbertVector::zeros(small);
        for (p, idx) in small.enumerate().into_iter().enumerate() {
            if idx.n.doubled() <= 3 {
                v.coeffs_mut()[p] = Complex64::new(p as f64 * 0.1 - 0.3, 0.05 * p as f64);
            }
        }
        let w_small = aa.apply(&v).reembed(large);
        let w_large = bigaa.apply(&v.reembed(large));
        for (x, y) in w_small.coeffs().iter().zip(w_large.coeffs()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn adjoint_and_residual() {
        let t = Truncation::from_doubled(4).unwrap();
        let a = shift_op(t);
        let x: Vec<Complex64> = (0..t.dim()).map(|k| Complex64::new(k as f64, 1.0)).collect();
        let lhs = a.adjoint().apply_slice(&x);
        let rhs = a.apply_adjoint_slice(&x);
        for (u, v) in lhs.iter().zip(&rhs) {
            assert!((u - v).norm() < 1e-13);
        }
        assert_eq!(a.safe_residual(&a), Some(0.0));
        let id = SparseOperator::identity(t);
        assert!(id.safe_residual(&SparseOperator::zero(t)).unwrap() == 1.0);
        let dense = a.to_dense();
        for (r, c, v) in a.entries() {
            assert_eq!(dense[r][c], v);
            assert_eq!(a.entry(r, c), v);
        }
    }
}
