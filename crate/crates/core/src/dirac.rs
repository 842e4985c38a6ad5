//! The spinor space `C^2 (x) h`, the coupled eigenbasis `v^{l,+-}_{ij}`, and
//! the operators diagonal in it: the naive Dirac operator `Q`, the true
//! Dirac operator `D`, `|D|`, and the modular operator `R = I_2 (x) rho`.
//!
//! `v^{l,+}` exists for `|j| <= l + 1/2` and `v^{l,-}` for `|j| <= l - 1/2`,
//! so that level `l` carries `2(2l+1)^2` vectors; with `|j| <= l` for both
//! signs the family would not span the level.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{GeneratorTable, SpinHalfElement};
use crate::error::Result;
use crate::halfint::HalfInteger;
use crate::peterweyl::{rho_weight, HilbertVector, PWIndex, SparseOperator, Truncation};
use crate::qarith::{cg_half, Branch, DeformationParameter};

const H: HalfInteger = HalfInteger::HALF;

/// `plus (x) e_+ + minus (x) e_-`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorVector {
    pub plus: HilbertVector,
    pub minus: HilbertVector,
}

impl SpinorVector {
    pub fn zeros(trunc: Truncation) -> Self {
        SpinorVector {
            plus: HilbertVector::zeros(trunc),
            minus: HilbertVector::zeros(trunc),
        }
    }

    pub fn truncation(&self) -> Truncation {
        self.plus.truncation()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.plus.norm_sqr() + self.minus.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn inner(&self, other: &SpinorVector) -> Complex64 {
        self.plus.inner(&other.plus) + self.minus.inner(&other.minus)
    }

    pub fn axpy(&mut self, s: Complex64, other: &SpinorVector) {
        self.plus.axpy(s, &other.plus);
        self.minus.axpy(s, &other.minus);
    }

    /// `(I_2 (x) op) self`.
    pub fn apply_h(&self, op: &SparseOperator) -> SpinorVector {
        SpinorVector {
            plus: op.apply(&self.plus),
            minus: op.apply(&self.minus),
        }
    }

    pub fn reembed(&self, trunc: Truncation) -> SpinorVector {
        SpinorVector {
            plus: self.plus.reembed(trunc),
            minus: self.minus.reembed(trunc),
        }
    }
}

/// Label of `v^{l,sign}_{ij}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VIndex {
    pub l: HalfInteger,
    pub i: HalfInteger,
    pub j: HalfInteger,
    pub sign: Branch,
}

impl VIndex {
    pub fn new(l: HalfInteger, i: HalfInteger, j: HalfInteger, sign: Branch) -> Option<Self> {
        let v = VIndex { l, i, j, sign };
        v.is_valid().then_some(v)
    }

    pub fn is_valid(&self) -> bool {
        if self.l < HalfInteger::ZERO || self.i.abs() > self.l || !(self.l - self.i).is_integral() {
            return false;
        }
        let top = match self.sign {
            Branch::Plus => self.l + H,
            Branch::Minus => self.l - H,
        };
        top >= HalfInteger::ZERO && self.j.abs() <= top && (top - self.j).is_integral()
    }

    /// All labels at spin `l`: `(+)` first, then `(-)`, each by `i` then `j`.
    pub fn at_level(l: HalfInteger) -> Vec<VIndex> {
        let mut out = Vec::new();
        for sign in [Branch::Plus, Branch::Minus] {
            let top = sign.total(l);
            for i in l.weights() {
                for j in top.weights() {
                    out.push(VIndex { l, i, j, sign });
                }
            }
        }
        out
    }

    pub fn enumerate(trunc: &Truncation) -> Vec<VIndex> {
        trunc
            .lmax()
            .spins_up_to()
            .flat_map(VIndex::at_level)
            .collect()
    }
}

impl fmt::Display for VIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign == Branch::Plus { '+' } else { '-' };
        write!(f, "v^({},{s})_({},{})", self.l, self.i, self.j)
    }
}

/// The two product-basis cells a `v`-vector lives on and their coefficients:
/// `[(e_+ (x) t~^l_{i,j-1/2}, c_+), (e_- (x) t~^l_{i,j+1/2}, c_-)]`.
pub fn v_components(idx: VIndex, q: &DeformationParameter) -> [(PWIndex, f64); 2] {
    let up = PWIndex { n: idx.l, i: idx.i, j: idx.j - H };
    let down = PWIndex { n: idx.l, i: idx.i, j: idx.j + H };
    [
        (up, cg_half(H, idx.sign, idx.l, idx.j - H, q)),
        (down, cg_half(-H, idx.sign, idx.l, idx.j + H, q)),
    ]
}

/// `v^{l,+-}_{ij}` as a spinor vector; terms falling outside the weight
/// grid are dropped.
pub fn v_vector(idx: VIndex, q: &DeformationParameter, trunc: Truncation) -> SpinorVector {
    let mut out = SpinorVector::zeros(trunc);
    let [(up, cu), (down, cd)] = v_components(idx, q);
    if cu != 0.0 {
        out.plus.add_at(up, Complex64::new(cu, 0.0));
    }
    if cd != 0.0 {
        out.minus.add_at(down, Complex64::new(cd, 0.0));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiracKind {
    /// eigenvalues `+-(l + 1/2)`
    True,
    /// eigenvalues `[l]_{q^2}`, `-[l+1]_{q^2}`
    Naive,
    /// `|D| = I_2 (x) A`, `A t~^n_{ij} = (n + 1/2) t~^n_{ij}`
    Abs,
}

/// Eigenvalue of `kind` on `v^{l,sign}`.
pub fn eigenvalue(kind: DiracKind, idx: VIndex, q: &DeformationParameter) -> f64 {
    let l = idx.l.to_f64();
    match (kind, idx.sign) {
        (DiracKind::True, Branch::Plus) | (DiracKind::Abs, _) => l + 0.5,
        (DiracKind::True, Branch::Minus) => -(l + 0.5),
        (DiracKind::Naive, Branch::Plus) => q.qn_sq(l),
        (DiracKind::Naive, Branch::Minus) => -q.qn_sq(l + 1.0),
    }
}

/// Coefficients of `x` along every `v`-vector (real basis, so these are the
/// inner products `<v, x>`).
pub fn v_coefficients(x: &SpinorVector, q: &DeformationParameter) -> Vec<(VIndex, Complex64)> {
    let mut out = Vec::new();
    for_each_v(x, q, |idx, c| out.push((idx, c)));
    out
}

fn for_each_v(x: &SpinorVector, q: &DeformationParameter, mut f: impl FnMut(VIndex, Complex64)) {
    let trunc = x.truncation();
    for l in trunc.lmax().spins_up_to() {
        let range = trunc.block_range(l);
        let block_zero = x.plus.coeffs()[range.clone()].iter().all(|c| c.norm_sqr() == 0.0)
            && x.minus.coeffs()[range].iter().all(|c| c.norm_sqr() == 0.0);
        if block_zero {
            continue;
        }
        for sign in [Branch::Plus, Branch::Minus] {
            for i in l.weights() {
                for j in sign.total(l).weights() {
                    let idx = VIndex { l, i, j, sign };
                    let [(up, cu), (down, cd)] = v_components(idx, q);
                    let c = x.plus.get(up) * cu + x.minus.get(down) * cd;
                    f(idx, c);
                }
            }
        }
    }
}

/// Apply the operator that is diagonal in the `v`-basis with eigenvalue
/// `eig(idx)`.
pub fn apply_v_diagonal(
    x: &SpinorVector,
    q: &DeformationParameter,
    eig: impl Fn(VIndex) -> f64,
) -> SpinorVector {
    let mut out = SpinorVector::zeros(x.truncation());
    for_each_v(x, q, |idx, c| {
        let lam = eig(idx);
        if lam == 0.0 || c.norm_sqr() == 0.0 {
            return;
        }
        let [(up, cu), (down, cd)] = v_components(idx, q);
        if cu != 0.0 {
            out.plus.add_at(up, c * (lam * cu));
        }
        if cd != 0.0 {
            out.minus.add_at(down, c * (lam * cd));
        }
    });
    out
}

/// `A` on `h`: multiply spin-`n` coefficients by `n + 1/2`.
pub fn abs_apply_h(v: &HilbertVector) -> HilbertVector {
    let trunc = v.truncation();
    let mut out = v.clone();
    for n in trunc.lmax().spins_up_to() {
        let s = Complex64::new(n.to_f64() + 0.5, 0.0);
        out.coeffs_mut()[trunc.block_range(n)]
            .iter_mut()
            .for_each(|c| *c *= s);
    }
    out
}

/// `dirac_apply`: `True`/`Naive` through the `v`-basis, `Abs` directly in the
/// product basis.
pub fn dirac_apply(kind: DiracKind, x: &SpinorVector, q: &DeformationParameter) -> SpinorVector {
    match kind {
        DiracKind::Abs => SpinorVector {
            plus: abs_apply_h(&x.plus),
            minus: abs_apply_h(&x.minus),
        },
        _ => apply_v_diagonal(x, q, |idx| eigenvalue(kind, idx, q)),
    }
}

/// Max over the `v`-basis of `|[lambda_D - 1/2]_{q^2} - lambda_Q|`.
pub fn q_relation_check(q: &DeformationParameter, trunc: &Truncation) -> f64 {
    VIndex::enumerate(trunc)
        .into_iter()
        .map(|idx| {
            let d = eigenvalue(DiracKind::True, idx, q);
            let qv = eigenvalue(DiracKind::Naive, idx, q);
            (q.qn_sq(d - 0.5) - qv).abs()
        })
        .fold(0.0, f64::max)
}

/// `rho` on `h`.
pub fn rho_apply(v: &HilbertVector, q: &DeformationParameter) -> HilbertVector {
    let trunc = v.truncation();
    let mut out = v.clone();
    for (p, c) in out.coeffs_mut().iter_mut().enumerate() {
        *c *= rho_weight(trunc.index_at(p), q);
    }
    out
}

/// `R = I_2 (x) rho`.
pub fn r_apply(x: &SpinorVector, q: &DeformationParameter) -> SpinorVector {
    SpinorVector {
        plus: rho_apply(&x.plus, q),
        minus: rho_apply(&x.minus, q),
    }
}

/// `rho` as a diagonal operator.
pub fn rho_operator(trunc: Truncation, q: &DeformationParameter) -> SparseOperator {
    SparseOperator::diagonal(trunc, |idx| Complex64::new(rho_weight(idx, q), 0.0))
}

/// Norms of `R` and `R^{-1}` on the truncation (both `q^{4 Lmax}` for `q > 1`).
pub fn r_norms(trunc: &Truncation, q: &DeformationParameter) -> (f64, f64) {
    trunc
        .enumerate()
        .into_iter()
        .map(|idx| rho_weight(idx, q))
        .fold((0.0f64, 0.0f64), |(a, b), w| (a.max(w), b.max(w.recip())))
}

/// `b^eps_m(i,j)`: coefficient of `v^{m,eps}_{i+1/2,j+1/2}` in
/// `t~^{1/2}_{1/2,1/2} v^{l,+}_{ij}`, by the four-coefficient sum.
pub fn b_coefficient(
    l: HalfInteger,
    i: HalfInteger,
    j: HalfInteger,
    m: HalfInteger,
    eps: Branch,
    q: &DeformationParameter,
) -> f64 {
    let branch_m = if m == l + H {
        Branch::Plus
    } else if m == l - H {
        Branch::Minus
    } else {
        return 0.0;
    };
    if m < HalfInteger::ZERO {
        return 0.0;
    }
    let (lf, mf) = (l.to_f64(), m.to_f64());
    let nu = (q.qn(2.0) * q.qn(2.0 * lf + 1.0) / q.qn(2.0 * mf + 1.0)).sqrt();
    let sum: f64 = [H, -H]
        .into_iter()
        .map(|m1| {
            cg_half(m1, Branch::Plus, l, j - m1, q)
                * cg_half(H, branch_m, l, i, q)
                * cg_half(H, branch_m, l, j - m1, q)
                * cg_half(m1, eps, m, j + H - m1, q)
        })
        .sum();
    sum * nu
}

/// Closed form of `b^-_{l+1/2}(i,j)`.
pub fn b_minus_closed(l: HalfInteger, i: HalfInteger, j: HalfInteger, q: &DeformationParameter) -> f64 {
    let (lf, jf) = (l.to_f64(), j.to_f64());
    let qq = q.q();
    let lead = qq.powf((lf - 3.0 * jf - 0.5) / 2.0) * q.qn(lf - jf + 0.5).sqrt()
        / (q.qn(2.0 * lf + 1.0) * q.qn(2.0 * lf + 2.0).sqrt());
    let diff = q.qn(lf + jf + 0.5) - q.qn(lf + jf + 1.5);
    let tail = (q.qn(2.0) * q.qn(2.0 * lf + 1.0)).sqrt() / q.qn(2.0 * lf + 2.0).sqrt();
    lead * diff * cg_half(H, Branch::Plus, l, i, q) * tail
}

/// Max `|sum formula - closed form|` for `b^-_{l+1/2}(i,j)` over `l <= max_l`.
pub fn b_closed_defect(max_l: HalfInteger, q: &DeformationParameter) -> f64 {
    let mut worst = 0.0f64;
    for l in max_l.spins_up_to() {
        for i in l.weights() {
            for j in (l + H).weights() {
                let a = b_coefficient(l, i, j, l + H, Branch::Minus, q);
                worst = worst.max((a - b_minus_closed(l, i, j, q)).abs());
            }
        }
    }
    worst
}

/// Expand `t~^{1/2}_{1/2,1/2} v^{l,+}_{ij}` in the `v`-basis for every
/// `l <= max_l` and return the largest deviation from the b-coefficients
/// (which must also be the only nonzero coefficients).
pub fn b_operator_defect(max_l: HalfInteger, table: &GeneratorTable) -> Result<f64> {
    let tr = table.truncation();
    if max_l + H > tr.lmax() {
        return Err(crate::Error::InvalidParameter(format!(
            "b-coefficient check up to l = {max_l} needs Lmax >= {}",
            max_l + H
        )));
    }
    let q = table.q();
    let a = table.element_operator(SpinHalfElement::WITNESS);
    let mut worst = 0.0f64;
    for l in max_l.spins_up_to() {
        for i in l.weights() {
            for j in (l + H).weights() {
                let v = v_vector(VIndex { l, i, j, sign: Branch::Plus }, q, tr);
                let av = v.apply_h(a);
                for (idx, c) in v_coefficients(&av, q) {
                    let expected = if idx.i == i + H && idx.j == j + H && (idx.l - l).abs() == H {
                        b_coefficient(l, i, j, idx.l, idx.sign, q)
                    } else {
                        0.0
                    };
                    worst = worst.max((c - Complex64::new(expected, 0.0)).norm());
                }
            }
        }
    }
    Ok(worst)
}

/// Max deviation of `||v||` from 1 and of the Gram off-diagonal from 0 over
/// every `v`-vector of spin `<= max_spin`, computed from shared support.
pub fn v_basis_gram_defect(max_spin: HalfInteger, q: &DeformationParameter) -> Result<f64> {
    use std::collections::HashMap;
    let trunc = Truncation::new(max_spin)?;
    // product cell -> list of (v label, coefficient)
    let mut cells: HashMap<(bool, PWIndex), Vec<(VIndex, f64)>> = HashMap::new();
    let all = VIndex::enumerate(&trunc);
    for idx in &all {
        let [(up, cu), (down, cd)] = v_components(*idx, q);
        if cu != 0.0 {
            cells.entry((true, up)).or_default().push((*idx, cu));
        }
        if cd != 0.0 {
            cells.entry((false, down)).or_default().push((*idx, cd));
        }
    }
    let mut gram: HashMap<(VIndex, VIndex), f64> = HashMap::new();
    for list in cells.values() {
        for (a, ca) in list {
            for (b, cb) in list {
                *gram.entry((*a, *b)).or_insert(0.0) += ca * cb;
            }
        }
    }
    let mut worst = 0.0f64;
    for idx in &all {
        let diag = gram.get(&(*idx, *idx)).copied().unwrap_or(0.0);
        worst = worst.max((diag - 1.0).abs());
    }
    for ((a, b), g) in &gram {
        if a != b {
            worst = worst.max(g.abs());
        }
    }
    // every product cell must be covered for completeness
    let covered = cells.len();
    let expected = 2 * trunc.dim();
    if covered != expected {
        worst = worst.max(1.0);
    }
    Ok(worst)
}
