//! The sequence `a_n = |P_n - y_n²|` computed exactly.
//!
//! `P_n = n(n+1)(2n+1)/6` is the n-th square pyramidal number and `y_n²` the
//! closest square to it. Indices up to [`FAST_PATH_MAX_N`] are handled in
//! `u128`; larger ones fall back to arbitrary precision.
//!
//! Ties never occur: `2·P_n` is even while `f² + (f+1)²` is odd, and likewise
//! `4·P_n` is even while `(2f+1)²` is odd. So both the nearest square and the
//! nearest integer to `√P_n` are always unique.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::isqrt::{ceil_sqrt_u128, isqrt, isqrt_biguint, isqrt_u128};
use crate::parallel::Parallelism;

/// Default binary precision for fractional parts.
pub const DEFAULT_BITS: u32 = 96;
pub const MIN_FRAC_BITS: u32 = 32;

/// Largest index evaluated on the `u128` path. `n(n+1)(2n+1)` stays below
/// `2^122` up to here, leaving room for the `4·P_n` comparison.
pub const FAST_PATH_MAX_N: u64 = 1_000_000_000_000;

pub fn pyramidal(n: u64) -> BigUint {
    let n = BigUint::from(n);
    let twice_plus_one = &n * 2u32 + 1u32;
    (&n * (&n + 1u32) * twice_plus_one) / 6u32
}

pub fn pyramidal_u128(n: u64) -> Option<u128> {
    let n = n as u128;
    Some(n.checked_mul(n + 1)?.checked_mul(2 * n + 1)? / 6)
}

/// The root `y` minimising `|p - y²|`, the smaller one on a tie.
pub fn nearest_square_root(p: &BigInt) -> Result<BigInt> {
    let f = isqrt(p)?;
    let below = p - &f * &f;
    let above = (&f + 1) * (&f + 1) - p;
    Ok(if below <= above { f } else { f + 1 })
}

/// Which half of the unit interval `{√P_n}` falls in. Perfect squares count
/// as `BelowHalf`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    BelowHalf,
    AboveHalf,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::BelowHalf => "below",
            Side::AboveHalf => "above",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub n: u64,
    /// `P_n`
    pub p: BigUint,
    /// `⌊√P_n⌋`
    pub f: BigUint,
    /// root of the closest square
    pub y: BigUint,
    pub a: BigUint,
    pub side: Side,
}

/// A term on the machine-word path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SmallTerm {
    pub n: u64,
    pub p: u128,
    pub f: u128,
    pub a: u128,
    /// Whether the closest square is `(f+1)²` rather than `f²`.
    pub rounds_up: bool,
    pub side: Side,
}

impl SmallTerm {
    pub fn y(&self) -> u128 {
        self.f + self.rounds_up as u128
    }

    pub fn is_square(&self) -> bool {
        self.f * self.f == self.p
    }
}

impl From<SmallTerm> for Term {
    fn from(t: SmallTerm) -> Term {
        Term {
            n: t.n,
            p: BigUint::from(t.p),
            f: BigUint::from(t.f),
            y: BigUint::from(t.y()),
            a: BigUint::from(t.a),
            side: t.side,
        }
    }
}

impl Term {
    /// `⌈l·|√P_n - y_n|⌉`, the index of the bin `((j-1)/l, j/l]` holding the
    /// distance; 0 for perfect squares.
    pub fn distance_bin(&self, l: u64) -> u64 {
        let scaled = &self.p * (BigUint::from(l) * l);
        let l = BigUint::from(l);
        let j = match self.side {
            Side::BelowHalf => {
                let r = isqrt_biguint(&scaled);
                let ceil = if &r * &r == scaled { r } else { r + 1u32 };
                ceil - &l * &self.f
            }
            Side::AboveHalf => &l * (&self.f + 1u32) - isqrt_biguint(&scaled),
        };
        j.to_u64().expect("bin index fits in u64")
    }
}

impl SmallTerm {
    /// Same as [`Term::distance_bin`] on the machine-word path.
    pub fn distance_bin(&self, l: u64) -> u64 {
        let l128 = l as u128;
        let Some(scaled) = l128.checked_mul(l128).and_then(|l2| l2.checked_mul(self.p)) else {
            return Term::from(*self).distance_bin(l);
        };
        let j = match self.side {
            Side::BelowHalf => ceil_sqrt_u128(scaled) - l128 * self.f,
            Side::AboveHalf => l128 * (self.f + 1) - isqrt_u128(scaled),
        };
        j as u64
    }
}

/// Evaluates the term on the `u128` path, or `None` above [`FAST_PATH_MAX_N`].
pub fn small_term(n: u64) -> Option<SmallTerm> {
    if n > FAST_PATH_MAX_N {
        return None;
    }
    let p = pyramidal_u128(n)?;
    let f = isqrt_u128(p);
    let below = p - f * f;
    let above = (f + 1) * (f + 1) - p;
    let side = if 4 * p < (2 * f + 1) * (2 * f + 1) { Side::BelowHalf } else { Side::AboveHalf };
    let rounds_up = 2 * p > f * f + (f + 1) * (f + 1);
    Some(SmallTerm { n, p, f, a: below.min(above), rounds_up, side })
}

fn big_term(n: u64) -> Term {
    let p = pyramidal(n);
    let f = isqrt_biguint(&p);
    let f1 = &f + 1u32;
    let below = &p - &f * &f;
    let above = &f1 * &f1 - &p;
    let twice_f1 = &f * 2u32 + 1u32;
    let side = if &p * 4u32 < &twice_f1 * &twice_f1 { Side::BelowHalf } else { Side::AboveHalf };
    let (y, a) = if &p * 2u32 > &f * &f + &f1 * &f1 { (f1, above) } else { (f.clone(), below) };
    Term { n, p, f, y, a, side }
}

/// The fully resolved term for index `n` (`n = 0` gives the all-zero term).
pub fn term(n: u64) -> Term {
    match small_term(n) {
        Some(t) => t.into(),
        None => big_term(n),
    }
}

/// Fractional part of `√P_n` as `mantissa · 2^-bits`, within `err_ulps` units
/// in the last place of the true value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedFrac {
    pub mantissa: BigUint,
    pub bits: u32,
    pub err_ulps: u32,
}

impl FixedFrac {
    pub fn to_f64(&self) -> f64 {
        let drop = self.bits.saturating_sub(64);
        let head = (&self.mantissa >> drop).to_f64().unwrap_or(0.0);
        head * 2f64.powi(drop as i32 - self.bits as i32)
    }
}

/// `⌊2^bits·√p⌋ - f·2^bits`, i.e. the fractional part truncated to `bits` bits.
pub fn frac_mantissa(p: &BigUint, f: &BigUint, bits: u32) -> BigUint {
    isqrt_biguint(&(p << (2 * bits))) - (f << bits)
}

pub fn frac_sqrt(n: u64, bits: u32) -> Result<FixedFrac> {
    if bits < MIN_FRAC_BITS {
        return Err(Error::Config(format!("fractional precision must be at least {MIN_FRAC_BITS} bits, got {bits}")));
    }
    let t = term(n);
    Ok(FixedFrac { mantissa: frac_mantissa(&t.p, &t.f, bits), bits, err_ulps: 1 })
}

/// `√P_n - (n^{3/2}/√3 + (√3/4)·n^{1/2})`, the remainder of the two-term
/// expansion, from 80-bit fixed-point square roots (error below `2^-78`).
pub fn expansion_residual(n: u64) -> f64 {
    const B: u32 = 80;
    let n_big = BigUint::from(n);
    let root = |v: BigUint| BigInt::from(isqrt_biguint(&(v << (2 * B))));
    let full = root(pyramidal(n));
    let lead = BigInt::from(isqrt_biguint(&((n_big.pow(3) << (2 * B)) / 3u32)));
    let second = BigInt::from(isqrt_biguint(&(((&n_big * 3u32) << (2 * B)) / 16u32)));
    let diff = full - lead - second;
    diff.to_f64().unwrap_or(f64::NAN) * 2f64.powi(-(B as i32))
}

/// Whether the closest square root `y_n` differs from the integer nearest to
/// `√P_n`. The two choices come from separate exact comparisons:
/// `2P` against `f² + (f+1)²` and `4P` against `(2f+1)²`.
pub fn in_exceptional(n: u64) -> bool {
    match small_term(n) {
        Some(t) => t.rounds_up != (t.side == Side::AboveHalf),
        None => {
            let t = big_term(n);
            (t.y != t.f) != (t.side == Side::AboveHalf)
        }
    }
}

/// Whether `{√P_n}` lies within `1/√P_n` of `1/2`, the window any member of
/// the exceptional set must fall in. Decided on the 96-bit fractional part.
pub fn in_case_window(n: u64) -> bool {
    let t = term(n);
    if t.p.is_zero() {
        return false;
    }
    let bits = DEFAULT_BITS;
    let m = BigInt::from(frac_mantissa(&t.p, &t.f, bits));
    let half = BigInt::one() << (bits - 1);
    let dist = (m - half).magnitude().clone();
    // |v - 1/2| < 1/√P  ⇔  dist²·P < 4^bits
    &dist * &dist * &t.p < BigUint::one() << (2 * bits)
}

/// Indices `n ≤ x` in the exceptional set.
pub fn exceptional_set(x: u64, par: &Parallelism) -> Vec<u64> {
    par.map_chunks(1, x, |a, b| (a..=b).filter(|&n| in_exceptional(n)).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NearHalf {
    pub count: u64,
    /// Indices whose classification could flip within the error margin.
    pub borderline: u64,
}

/// Counts `n ≤ x` with `|{√P_n} - 1/2| ≤ x^{-3/4}`.
///
/// The test is carried out exactly on the truncated mantissa `m`: with
/// `d = |m - 2^(bits-1)|` the condition reads `d⁴·x³ ≤ 2^(4·bits)`. Every
/// mantissa within two units of `m` is tried; if they disagree the index is
/// counted as borderline instead.
pub fn near_half_count(x: u64, bits: u32) -> Result<NearHalf> {
    near_half_count_with(x, bits, &Parallelism::default())
}

pub fn near_half_count_with(x: u64, bits: u32, par: &Parallelism) -> Result<NearHalf> {
    if x == 0 {
        return Err(Error::Domain("x must be at least 1".into()));
    }
    if bits < MIN_FRAC_BITS {
        return Err(Error::Config(format!("fractional precision must be at least {MIN_FRAC_BITS} bits, got {bits}")));
    }
    let half = BigInt::one() << (bits - 1);
    let limit = BigUint::one() << (4 * bits);
    let x_cubed = BigUint::from(x).pow(3);
    let inside = |d: &BigUint| d.pow(4) * &x_cubed <= limit;
    let margin = BigInt::from(2);
    let parts = par.map_chunks(1, x, |lo, hi| {
        let mut acc = NearHalf { count: 0, borderline: 0 };
        for n in lo..=hi {
            let t = term(n);
            if &t.f * &t.f == t.p {
                continue;
            }
            let m = BigInt::from(frac_mantissa(&t.p, &t.f, bits));
            let lo_d = &m - &margin - &half;
            let hi_d = &m + &margin - &half;
            let far = lo_d.magnitude().max(hi_d.magnitude()).clone();
            let near = if lo_d.sign() != hi_d.sign() {
                BigUint::zero()
            } else {
                lo_d.magnitude().min(hi_d.magnitude()).clone()
            };
            match (inside(&near), inside(&far)) {
                (true, true) => acc.count += 1,
                (false, false) => {}
                _ => acc.borderline += 1,
            }
        }
        acc
    });
    Ok(parts.into_iter().fold(NearHalf { count: 0, borderline: 0 }, |acc, p| NearHalf {
        count: acc.count + p.count,
        borderline: acc.borderline + p.borderline,
    }))
}

/// An inclusive index range `[lo, hi]` processed in chunks of `chunk`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RangeSpec {
    pub lo: u64,
    pub hi: u64,
    pub chunk: u64,
}

impl RangeSpec {
    pub fn new(lo: u64, hi: u64, chunk: u64) -> Result<Self> {
        if lo == 0 {
            return Err(Error::Domain("range must start at 1 or above".into()));
        }
        if lo > hi {
            return Err(Error::Domain(format!("empty range {lo}:{hi}")));
        }
        if chunk == 0 {
            return Err(Error::Config("chunk size must be positive".into()));
        }
        Ok(RangeSpec { lo, hi, chunk })
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    /// Inclusive `(start, end)` pairs covering the range in order.
    pub fn chunks(&self) -> impl Iterator<Item = (u64, u64)> {
        let (hi, chunk) = (self.hi, self.chunk);
        let mut next = Some(self.lo).filter(|&lo| lo <= hi);
        std::iter::from_fn(move || {
            let start = next?;
            let end = start.saturating_add(chunk - 1).min(hi);
            next = if end < hi { Some(end + 1) } else { None };
            Some((start, end))
        })
    }
}

/// Terms for every index in the range, in order.
pub fn stream_terms(range: RangeSpec) -> impl Iterator<Item = Term> {
    range.chunks().flat_map(|(a, b)| (a..=b).map(term))
}

/// Terms computed chunk-wise in parallel and concatenated by index.
pub fn collect_terms(range: RangeSpec, par: &Parallelism) -> Vec<Term> {
    par.map_chunks(range.lo, range.hi, |a, b| (a..=b).map(term).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect()
}
