//! Binary fixed-point reals backed by big integers.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};

/// The real number `mantissa · 2^-frac_bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixed {
    mantissa: BigInt,
    frac_bits: u32,
}

impl Fixed {
    pub fn new(mantissa: BigInt, frac_bits: u32) -> Self {
        Fixed { mantissa, frac_bits }
    }

    pub fn from_int(value: &BigInt, frac_bits: u32) -> Self {
        Fixed::new(value << frac_bits, frac_bits)
    }

    pub fn from_uint(value: &BigUint, frac_bits: u32) -> Self {
        Fixed::from_int(&BigInt::from(value.clone()), frac_bits)
    }

    /// `num / den` rounded toward negative infinity.
    pub fn from_ratio_floor(num: &BigInt, den: &BigInt, frac_bits: u32) -> Self {
        assert!(den.is_positive(), "denominator must be positive");
        Fixed::new((num << frac_bits).div_floor(den), frac_bits)
    }

    /// `num / den` rounded toward positive infinity.
    pub fn from_ratio_ceil(num: &BigInt, den: &BigInt, frac_bits: u32) -> Self {
        assert!(den.is_positive(), "denominator must be positive");
        Fixed::new((num << frac_bits).div_ceil(den), frac_bits)
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn abs(&self) -> Fixed {
        Fixed::new(self.mantissa.abs(), self.frac_bits)
    }

    /// Exact difference; both operands must share the same scale.
    pub fn sub(&self, other: &Fixed) -> Fixed {
        assert_eq!(self.frac_bits, other.frac_bits, "mismatched fixed-point scales");
        Fixed::new(&self.mantissa - &other.mantissa, self.frac_bits)
    }

    pub fn floor(&self) -> BigInt {
        self.mantissa.div_floor(&(BigInt::one() << self.frac_bits))
    }

    /// Exact comparison against an integer.
    pub fn cmp_int(&self, value: &BigInt) -> Ordering {
        self.mantissa.cmp(&(value << self.frac_bits))
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.mantissa.bits();
        let drop = bits.saturating_sub(64);
        let head = (&self.mantissa >> drop).to_f64().unwrap_or(0.0);
        head * (2f64).powi(drop as i32 - self.frac_bits as i32)
    }

    /// Decimal expansion truncated toward zero after `digits` fractional digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        let magnitude = self.mantissa.magnitude();
        let one = BigUint::one() << self.frac_bits;
        let (int_part, rem) = magnitude.div_rem(&one);
        let mut out = String::new();
        if self.mantissa.sign() == Sign::Minus {
            out.push('-');
        }
        out.push_str(&int_part.to_string());
        if digits > 0 {
            let frac = (rem * BigUint::from(10u32).pow(digits as u32)) >> self.frac_bits;
            let frac = frac.to_string();
            out.push('.');
            out.extend(std::iter::repeat_n('0', digits - frac.len()));
            out.push_str(&frac);
        }
        out
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(12);
        f.write_str(&self.to_decimal(digits))
    }
}
