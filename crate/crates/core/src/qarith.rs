//! q-numbers and the spin-1/2 q-Clebsch-Gordan coefficients.
//!
//! All coefficients here use the convention in which the deformation
//! parameter `q > 1` enters directly (no `q -> q^{-2}` rewriting is needed
//! downstream). These four closed forms are the only coupling coefficients
//! the crate needs: every operator is generated by spin-1/2 elements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halfint::HalfInteger;

/// Bits of mantissa in an IEEE double; the only working precision available.
pub const DOUBLE_PRECISION_BITS: u32 = 53;

/// The deformation parameter `q` together with the working precision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationParameter {
    q: f64,
    precision_bits: u32,
}

impl DeformationParameter {
    /// Accepts any `q > 0, q != 1`. Values below one are allowed; see
    /// [`DeformationParameter::is_standard`].
    pub fn new(q: f64) -> Result<Self> {
        Self::with_precision(q, DOUBLE_PRECISION_BITS)
    }

    pub fn with_precision(q: f64, precision_bits: u32) -> Result<Self> {
        if !q.is_finite() || q <= 0.0 || q == 1.0 {
            return Err(Error::InvalidParameter(format!(
                "deformation parameter must satisfy q > 0, q != 1 (got {q})"
            )));
        }
        if precision_bits != DOUBLE_PRECISION_BITS {
            return Err(Error::InvalidParameter(format!(
                "precision of {precision_bits} bits is not supported; only {DOUBLE_PRECISION_BITS} (double) is available"
            )));
        }
        Ok(DeformationParameter { q, precision_bits })
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    /// `true` for the standing case `q > 1`. For `0 < q < 1` every routine
    /// still runs, but the growth statements (heat-trace band, norms of R)
    /// flip direction and callers should warn.
    pub fn is_standard(&self) -> bool {
        self.q > 1.0
    }

    /// `[r]_q`.
    #[inline]
    pub fn qn(&self, r: f64) -> f64 {
        qn_unchecked(r, self.q)
    }

    /// `[r]_{q^2}`.
    #[inline]
    pub fn qn_sq(&self, r: f64) -> f64 {
        qn_unchecked(r, self.q * self.q)
    }
}

/// `[r]_b = (b^r - b^{-r}) / (b - b^{-1})`.
pub fn q_number(r: f64, base: f64) -> Result<f64> {
    if !base.is_finite() || base <= 0.0 || base == 1.0 {
        return Err(Error::InvalidParameter(format!(
            "q-number base must be positive and different from 1 (got {base})"
        )));
    }
    Ok(qn_unchecked(r, base))
}

#[inline]
pub(crate) fn qn_unchecked(r: f64, base: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    (base.powf(r) - base.powf(-r)) / (base - base.recip())
}

/// Which irreducible summand of `1/2 (x) l` a coefficient couples to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    /// total spin `l + 1/2`
    Plus,
    /// total spin `l - 1/2`
    Minus,
}

impl Branch {
    pub fn sign(self) -> i64 {
        match self {
            Branch::Plus => 1,
            Branch::Minus => -1,
        }
    }

    /// Total spin `l +- 1/2` of this branch.
    pub fn total(self, l: HalfInteger) -> HalfInteger {
        match self {
            Branch::Plus => l + HalfInteger::HALF,
            Branch::Minus => l - HalfInteger::HALF,
        }
    }
}

/// `C^{1/2, l, l +- 1/2}_{m1, m, m + m1}`.
///
/// Returns 0 whenever `|m| > l`, `|m1| != 1/2`, `m` is not on the weight
/// grid of `l`, or the branch is `Minus` with `l = 0`.
pub fn cg_half(
    m1: HalfInteger,
    branch: Branch,
    l: HalfInteger,
    m: HalfInteger,
    q: &DeformationParameter,
) -> f64 {
    if l < HalfInteger::ZERO
        || m.abs() > l
        || !(l - m).is_integral()
        || m1.abs() != HalfInteger::HALF
    {
        return 0.0;
    }
    if branch == Branch::Minus && l == HalfInteger::ZERO {
        return 0.0;
    }
    let (lf, mf) = (l.to_f64(), m.to_f64());
    let qq = q.q();
    let dim = q.qn(2.0 * lf + 1.0);
    let up = m1 == HalfInteger::HALF;
    match (branch, up) {
        (Branch::Plus, true) => qq.powf((lf - mf) / 2.0) * (q.qn(lf + mf + 1.0) / dim).sqrt(),
        (Branch::Plus, false) => qq.powf(-(lf + mf) / 2.0) * (q.qn(lf - mf + 1.0) / dim).sqrt(),
        (Branch::Minus, true) => qq.powf(-(lf + mf + 1.0) / 2.0) * (q.qn(lf - mf) / dim).sqrt(),
        (Branch::Minus, false) => -qq.powf((lf - mf + 1.0) / 2.0) * (q.qn(lf + mf) / dim).sqrt(),
    }
}
