//! Scalar field abstraction shared by the floating-point and exact-rational paths.
//!
//! Everything in [`crate::exterior`], [`crate::stable`] and [`crate::g2spin7`] is
//! generic over [`Scalar`]. Flows only ever run in `f64`; the rational
//! instantiation exists so the model identities can be checked exactly.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Num, Signed, ToPrimitive, Zero};

/// Exact rational scalar.
pub type Rational = Ratio<i128>;

pub trait Scalar:
    Copy + Debug + Display + PartialOrd + Num + Signed + Send + Sync + 'static
{
    /// `true` for exact arithmetic, where comparisons never use tolerances.
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn to_f64(self) -> f64;

    /// Square root of a non-negative value. Exact types return `None` when the
    /// root is irrational.
    fn sqrt_opt(self) -> Option<Self>;

    /// Real `n`-th root. Odd roots of negative numbers are negative; even roots
    /// of negative numbers are `None`.
    fn real_root(self, n: u32) -> Option<Self>;

    /// `|self| <= tol * scale` for floats, `self == 0` for exact types.
    fn negligible(self, scale: f64, tol: f64) -> bool;

    fn approx_eq(self, other: Self, tol: f64) -> bool {
        let scale = self.to_f64().abs().max(other.to_f64().abs()).max(1.0);
        (self - other).negligible(scale, tol)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn sqrt_opt(self) -> Option<Self> {
        if self < 0.0 {
            None
        } else {
            Some(self.sqrt())
        }
    }

    fn real_root(self, n: u32) -> Option<Self> {
        if n == 0 {
            return None;
        }
        if self < 0.0 {
            if n % 2 == 0 {
                return None;
            }
            return Some(-(-self).powf(1.0 / n as f64));
        }
        Some(self.powf(1.0 / n as f64))
    }

    fn negligible(self, scale: f64, tol: f64) -> bool {
        self.abs() <= tol * scale
    }
}

fn int_root(v: i128, n: u32) -> Option<i128> {
    if v < 0 {
        return None;
    }
    if v < 2 {
        return Some(v);
    }
    let guess = (v as f64).powf(1.0 / n as f64).round() as i128;
    for cand in guess.saturating_sub(2)..=guess + 2 {
        if cand < 0 {
            continue;
        }
        if let Some(p) = checked_pow(cand, n) {
            if p == v {
                return Some(cand);
            }
        }
    }
    None
}

fn checked_pow(base: i128, n: u32) -> Option<i128> {
    let mut acc: i128 = 1;
    for _ in 0..n {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(v as i128)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(num as i128, den as i128)
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn sqrt_opt(self) -> Option<Self> {
        self.real_root(2)
    }

    fn real_root(self, n: u32) -> Option<Self> {
        if n == 0 {
            return None;
        }
        if self.is_zero() {
            return Some(self);
        }
        let neg = self.is_negative();
        if neg && n % 2 == 0 {
            return None;
        }
        let a = self.abs();
        let num = int_root(*a.numer(), n)?;
        let den = int_root(*a.denom(), n)?;
        let r = Ratio::new(num, den);
        Some(if neg { -r } else { r })
    }

    fn negligible(self, _scale: f64, _tol: f64) -> bool {
        self.is_zero()
    }
}
