//! Integer square roots.
//!
//! Both routines return `f` with `f² ≤ n < (f+1)²`. The machine-word version
//! seeds from `f64::sqrt` and corrects by at most a couple of unit steps; the
//! arbitrary-precision version runs integer Newton from an over-estimate
//! derived from the leading bits.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Floor square root of a `u128`.
pub fn isqrt_u128(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut s = (n as f64).sqrt() as u128;
    // The seed is within a few units of the answer; walk it into place.
    while s.checked_mul(s).is_none_or(|sq| sq > n) {
        s -= 1;
    }
    while (s + 1).checked_mul(s + 1).is_some_and(|sq| sq <= n) {
        s += 1;
    }
    debug_assert!(s * s <= n && (s + 1).checked_mul(s + 1).is_none_or(|sq| sq > n));
    s
}

/// Floor square root of a `u64`.
pub fn isqrt_u64(n: u64) -> u64 {
    isqrt_u128(n as u128) as u64
}

/// Floor square root of an arbitrary-precision unsigned integer.
pub fn isqrt_biguint(n: &BigUint) -> BigUint {
    let bits = n.bits();
    if bits <= 120 {
        return BigUint::from(isqrt_u128(n.to_u128().expect("fits in 120 bits")));
    }
    // Keep an even number of low bits out of the seed so the shift halves cleanly.
    let shift = (bits - 100) & !1;
    let top = (n >> shift).to_u128().expect("top bits fit");
    let mut x = BigUint::from(isqrt_u128(top) + 1) << (shift / 2);
    // x ≥ ⌊√n⌋ here, so the Newton sequence decreases monotonically to the floor.
    loop {
        let next = (&x + n / &x) >> 1u32;
        if next >= x {
            break;
        }
        x = next;
    }
    debug_assert!(&x * &x <= *n && (&x + 1u32) * (&x + 1u32) > *n);
    x
}

/// Floor square root of a signed big integer; negative inputs are rejected.
pub fn isqrt(n: &BigInt) -> Result<BigInt> {
    match n.sign() {
        Sign::Minus => Err(Error::Domain(format!("square root of negative integer {n}"))),
        _ if n.is_zero() => Ok(BigInt::zero()),
        _ => Ok(BigInt::from(isqrt_biguint(n.magnitude()))),
    }
}

/// Ceiling square root of a `u128`.
pub fn ceil_sqrt_u128(n: u128) -> u128 {
    let r = isqrt_u128(n);
    if r * r == n {
        r
    } else {
        r + 1
    }
}
