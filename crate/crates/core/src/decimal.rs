//! Exact base-10 arithmetic for generated values.
//!
//! Generated cells and tick values are short decimals (a few significant
//! digits times a power of ten). Doing the scaling and shifting in decimal and
//! converting once yields the double nearest to the intended decimal, which
//! binary multiplication by `10^k` does not guarantee.

use alloc::format;
use core::cmp::Ordering;

use crate::{Error, Result};

/// `mantissa * 10^exponent`, kept normalized (no trailing zeros in the
/// mantissa unless it is zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decimal {
    mantissa: i128,
    exponent: i32,
}

impl Decimal {
    pub const ZERO: Decimal = Decimal {
        mantissa: 0,
        exponent: 0,
    };

    pub fn new(mantissa: i128, exponent: i32) -> Self {
        let mut d = Decimal { mantissa, exponent };
        d.normalize();
        d
    }

    /// The shortest decimal that round-trips to `v`.
    pub fn from_f64(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::NonFinite(v));
        }
        // `{:e}` prints the shortest round-trip digits, e.g. "7.31e15".
        let text = format!("{:e}", v);
        let (digits, exp) = text.split_once('e').ok_or(Error::NonFinite(v))?;
        let exp: i32 = exp.parse().map_err(|_| Error::NonFinite(v))?;
        let negative = digits.starts_with('-');
        let digits = digits.trim_start_matches('-');
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        let mut mantissa: i128 = 0;
        for c in int_part.chars().chain(frac_part.chars()) {
            mantissa = mantissa * 10 + i128::from(c as u8 - b'0');
        }
        if negative {
            mantissa = -mantissa;
        }
        Ok(Decimal::new(mantissa, exp - frac_part.len() as i32))
    }

    /// Nearest double to this decimal.
    pub fn to_f64(self) -> f64 {
        format!("{}e{}", self.mantissa, self.exponent)
            .parse()
            .unwrap_or(f64::NAN)
    }

    pub fn mantissa(self) -> i128 {
        self.mantissa
    }

    pub fn exponent(self) -> i32 {
        self.exponent
    }

    pub fn is_zero(self) -> bool {
        self.mantissa == 0
    }

    /// Multiplies by `10^k`.
    pub fn shift(self, k: i32) -> Self {
        Decimal::new(self.mantissa, self.exponent + k)
    }

    pub fn mul_int(self, k: i128) -> Self {
        Decimal::new(self.mantissa * k, self.exponent)
    }

    /// Exact division by a small positive integer. Returns `None` when the
    /// quotient has no terminating decimal expansion.
    pub fn div_int(self, k: i128) -> Option<Self> {
        if k <= 0 {
            return None;
        }
        let mut m = self.mantissa;
        let mut e = self.exponent;
        for _ in 0..40 {
            if m % k == 0 {
                return Some(Decimal::new(m / k, e));
            }
            m = m.checked_mul(10)?;
            e -= 1;
        }
        None
    }

    pub fn plus(self, other: Decimal) -> Self {
        let e = self.exponent.min(other.exponent);
        let a = self.mantissa * 10i128.pow((self.exponent - e) as u32);
        let b = other.mantissa * 10i128.pow((other.exponent - e) as u32);
        Decimal::new(a + b, e)
    }

    pub fn negated(self) -> Self {
        Decimal::new(-self.mantissa, self.exponent)
    }

    /// `floor(log10(|self|))`; `None` for zero.
    pub fn magnitude(self) -> Option<i32> {
        if self.mantissa == 0 {
            return None;
        }
        let mut digits = 0;
        let mut m = self.mantissa.unsigned_abs();
        while m > 0 {
            digits += 1;
            m /= 10;
        }
        Some(self.exponent + digits - 1)
    }

    fn normalize(&mut self) {
        if self.mantissa == 0 {
            self.exponent = 0;
            return;
        }
        while self.mantissa % 10 == 0 {
            self.mantissa /= 10;
            self.exponent += 1;
        }
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self.plus(other.negated());
        diff.mantissa.cmp(&0)
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_f64_shortest() {
        assert_eq!(Decimal::from_f64(7.31e15).unwrap(), Decimal::new(731, 13));
        assert_eq!(Decimal::from_f64(0.73).unwrap(), Decimal::new(73, -2));
        assert_eq!(Decimal::from_f64(-250.0).unwrap(), Decimal::new(-25, 1));
        assert_eq!(Decimal::from_f64(0.0).unwrap(), Decimal::ZERO);
        assert!(Decimal::from_f64(f64::NAN).is_err());
    }

    #[test]
    fn arithmetic() {
        let a = Decimal::new(25, -1); // 2.5
        assert_eq!(a.div_int(2).unwrap().to_f64(), 1.25);
        assert_eq!(a.mul_int(3).to_f64(), 7.5);
        assert_eq!(a.plus(Decimal::new(6, 0)).to_f64(), 8.5);
        assert_eq!(a.shift(3).to_f64(), 2500.0);
        assert!(Decimal::new(1, 0).div_int(3).is_none());
        assert_eq!(Decimal::new(731, 13).magnitude(), Some(15));
        assert_eq!(Decimal::new(73, -2).magnitude(), Some(-1));
        assert!(Decimal::new(1, 1) > Decimal::new(91, -1));
        assert!(Decimal::new(-6, 0) < Decimal::ZERO);
    }

    #[test]
    fn decimal_shift_is_exact_where_binary_multiply_is_not() {
        // 0.1 * 3 != 0.3 in binary; the decimal route lands on the nearest double.
        assert_eq!(Decimal::new(1, -1).mul_int(3).to_f64(), 0.3);
        assert_eq!(Decimal::new(73, -1).shift(-1).to_f64(), 0.73);
    }
}
