//! Exact half-integers for spin labels and weights.

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A half-integer stored as twice its value.
///
/// `HalfInteger::from_doubled(3)` represents `3/2`.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct HalfInteger(i64);

impl HalfInteger {
    pub const ZERO: HalfInteger = HalfInteger(0);
    pub const HALF: HalfInteger = HalfInteger(1);
    pub const ONE: HalfInteger = HalfInteger(2);

    #[inline]
    pub const fn from_doubled(doubled: i64) -> Self {
        HalfInteger(doubled)
    }

    #[inline]
    pub const fn from_int(value: i64) -> Self {
        HalfInteger(2 * value)
    }

    /// Twice the represented value.
    #[inline]
    pub const fn doubled(self) -> i64 {
        self.0
    }

    #[inline]
    pub const fn is_integral(self) -> bool {
        self.0 % 2 == 0
    }

    #[inline]
    pub fn abs(self) -> Self {
        HalfInteger(self.0.abs())
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// `-self, -self + 1, ..., self`; empty when `self < 0`.
    pub fn weights(self) -> impl DoubleEndedIterator<Item = HalfInteger> + Clone {
        let top = self.0;
        let count = if top >= 0 { top + 1 } else { 0 };
        (0..count).map(move |k| HalfInteger(-top + 2 * k))
    }

    /// Spins `0, 1/2, 1, ..., self`.
    pub fn spins_up_to(self) -> impl DoubleEndedIterator<Item = HalfInteger> + Clone {
        (0..=self.0.max(-1)).map(HalfInteger)
    }
}

impl Add for HalfInteger {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        HalfInteger(self.0 + rhs.0)
    }
}

impl Sub for HalfInteger {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        HalfInteger(self.0 - rhs.0)
    }
}

impl Neg for HalfInteger {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        HalfInteger(-self.0)
    }
}

impl AddAssign for HalfInteger {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl SubAssign for HalfInteger {
    fn sub_assign(&mut self, rhs: Self) {
        self.0 -= rhs.0;
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integral() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot parse half-integer from {0:?}")]
pub struct ParseHalfIntegerError(String);

impl FromStr for HalfInteger {
    type Err = ParseHalfIntegerError;

    /// Accepts `"3"`, `"-3/2"`, or `"1.5"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseHalfIntegerError(s.to_string());
        let t = s.trim();
        if let Some((num, den)) = t.split_once('/') {
            let num: i64 = num.trim().parse().map_err(|_| err())?;
            return match den.trim() {
                "1" => Ok(HalfInteger::from_int(num)),
                "2" => Ok(HalfInteger(num)),
                _ => Err(err()),
            };
        }
        if let Ok(v) = t.parse::<i64>() {
            return Ok(HalfInteger::from_int(v));
        }
        let v: f64 = t.parse().map_err(|_| err())?;
        let d = 2.0 * v;
        if d.fract() != 0.0 || !d.is_finite() {
            return Err(err());
        }
        Ok(HalfInteger(d as i64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_and_parse() {
        let h = HalfInteger::from_doubled(-3);
        assert_eq!(h.to_string(), "-3/2");
        assert_eq!("-3/2".parse::<HalfInteger>().unwrap(), h);
        assert_eq!("-1.5".parse::<HalfInteger>().unwrap(), h);
        assert_eq!("2".parse::<HalfInteger>().unwrap(), HalfInteger::from_int(2));
        assert!("1/3".parse::<HalfInteger>().is_err());
        assert!("0.25".parse::<HalfInteger>().is_err());
    }

    #[test]
    fn weight_ranges() {
        let w: Vec<i64> = HalfInteger::from_doubled(3).weights().map(|h| h.doubled()).collect();
        assert_eq!(w, vec![-3, -1, 1, 3]);
        assert_eq!(HalfInteger::ZERO.weights().count(), 1);
        assert_eq!(HalfInteger::from_doubled(-1).weights().count(), 0);
        assert_eq!(HalfInteger::ONE.spins_up_to().count(), 3);
    }

    proptest! {
        #[test]
        fn arithmetic_is_exact(a in -1000i64..1000, b in -1000i64..1000) {
            let (x, y) = (HalfInteger::from_doubled(a), HalfInteger::from_doubled(b));
            prop_assert_eq!((x + y) - y, x);
            prop_assert_eq!(-(-x), x);
            prop_assert_eq!((x + y).is_integral(), (a + b) % 2 == 0);
            prop_assert_eq!(x.to_string().parse::<HalfInteger>().unwrap(), x);
        }
    }
}
