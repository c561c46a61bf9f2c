//! Exponential sums, discrepancy, and distribution diagnostics for `{√P_n}`
//! and for the nearest-square distance `|√P_n - y_n|`.
//!
//! Point sets are held as truncated binary fractions (`mantissa · 2^-bits`,
//! `bits ≤ 96`) so phases `{m·x_n}` reduce exactly as `m·mantissa mod 2^bits`
//! and star discrepancy is an exact integer computation on the stored set.

use std::f64::consts::TAU;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::exactseq::{frac_mantissa, small_term, term, Side, DEFAULT_BITS, MIN_FRAC_BITS};
use crate::parallel::Parallelism;

/// Widest mantissa a [`FixedPoints`] set may carry.
pub const MAX_POINT_BITS: u32 = 96;

/// Largest phase quantisation `|m|·2^-bits` accepted by [`exp_sum`].
pub const MAX_PHASE_QUANTUM: f64 = 1e-12;

const POINT_CHUNK: usize = 1 << 16;

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Points of the unit interval stored as `mantissa · 2^-bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedPoints {
    bits: u32,
    mantissas: Vec<u128>,
}

impl FixedPoints {
    pub fn new(bits: u32, mantissas: Vec<u128>) -> Result<Self> {
        if bits == 0 || bits > MAX_POINT_BITS {
            return Err(Error::Config(format!("point precision must be in 1..={MAX_POINT_BITS} bits, got {bits}")));
        }
        let limit = 1u128 << bits;
        if let Some(bad) = mantissas.iter().find(|&&m| m >= limit) {
            return Err(Error::Domain(format!("mantissa {bad} is not below 2^{bits}")));
        }
        Ok(FixedPoints { bits, mantissas })
    }

    /// Truncates each value in `[0, 1)` to `bits` binary places.
    pub fn from_unit_values(values: &[f64], bits: u32) -> Result<Self> {
        let scale = 2f64.powi(bits as i32);
        let mantissas = values
            .iter()
            .map(|&v| {
                if (0.0..1.0).contains(&v) {
                    Ok((v * scale).floor() as u128)
                } else {
                    Err(Error::Domain(format!("point {v} outside [0, 1)")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        FixedPoints::new(bits, mantissas)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.mantissas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mantissas.is_empty()
    }

    pub fn mantissas(&self) -> &[u128] {
        &self.mantissas
    }

    pub fn value(&self, i: usize) -> f64 {
        self.mantissas[i] as f64 / 2f64.powi(self.bits as i32)
    }

    /// Star discrepancy of the stored set, exact up to the final conversion
    /// to `f64`.
    ///
    /// With sorted points `u_(1) ≤ … ≤ u_(N)` the anchored-interval supremum
    /// is `max_i max(i - N·u_(i), N·u_(i) - (i-1))`, evaluated here on the
    /// integer mantissas.
    pub fn star_discrepancy(&self) -> Result<DiscrepancyResult> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Domain("discrepancy of an empty point set".into()));
        }
        if (n as u128).checked_shl(self.bits).is_none_or(|v| v >= 1u128 << 126) {
            return Err(Error::Config(format!("{n} points at {} bits overflow the exact scan", self.bits)));
        }
        let mut sorted = self.mantissas.clone();
        sorted.sort_unstable();
        let nn = n as i128;
        let one = 1i128 << self.bits;
        let mut best = 0i128;
        for (i, &m) in sorted.iter().enumerate() {
            let i = i as i128 + 1;
            let scaled = nn * m as i128;
            best = best.max(i * one - scaled).max(scaled - (i - 1) * one);
        }
        let d = best as f64 / one as f64;
        Ok(DiscrepancyResult::plain(n as u64, d))
    }

    /// `Σ e(m·x_n)` over the stored points.
    pub fn exp_sum(&self, m: i64, par: &Parallelism) -> PhaseSum {
        let mask = (1u128 << self.bits) - 1;
        let scale = 2f64.powi(-(self.bits as i32));
        let mult = m.unsigned_abs() as u128;
        let sign = if m < 0 { -1.0 } else { 1.0 };
        let chunks: Vec<&[u128]> = self.mantissas.chunks(POINT_CHUNK).collect();
        let parts = par.map_items(&chunks, |chunk| {
            let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
            for &mant in chunk.iter() {
                let phase = (mult.wrapping_mul(mant) & mask) as f64 * scale;
                let (s, c) = (TAU * phase).sin_cos();
                re.add(c);
                im.add(sign * s);
            }
            (re.value(), im.value())
        });
        let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
        for (r, i) in parts {
            re.add(r);
            im.add(i);
        }
        let count = self.len() as f64;
        let per_term = TAU * (m.unsigned_abs() as f64 * scale + f64::EPSILON / 2.0) + 4.0 * f64::EPSILON;
        PhaseSum { re: re.value(), im: im.value(), abs_error: count * per_term }
    }
}

/// A complex sum with its declared absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSum {
    pub re: f64,
    pub im: f64,
    /// Bound on the modulus error from mantissa truncation, phase rounding,
    /// and floating-point accumulation.
    pub abs_error: f64,
}

impl PhaseSum {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// `{√P_n}` for `n ∈ [lo, hi]`, truncated to `bits` places (error below one unit).
pub fn sqrt_frac_points(lo: u64, hi: u64, bits: u32, par: &Parallelism) -> Result<FixedPoints> {
    check_point_range(lo, hi, bits)?;
    let parts = par.map_chunks(lo, hi, |a, b| {
        (a..=b)
            .map(|n| {
                let t = term(n);
                frac_mantissa(&t.p, &t.f, bits).to_u128().expect("below 2^bits")
            })
            .collect::<Vec<_>>()
    });
    FixedPoints::new(bits, parts.into_iter().flatten().collect())
}

/// `2·|√P_n - y_n|` for `n ∈ [lo, hi]`, each within two units of the truth.
pub fn doubled_half_distances(lo: u64, hi: u64, bits: u32, par: &Parallelism) -> Result<FixedPoints> {
    check_point_range(lo, hi, bits)?;
    let one = 1u128 << bits;
    let parts = par.map_chunks(lo, hi, |a, b| {
        (a..=b)
            .map(|n| {
                let t = term(n);
                let m = frac_mantissa(&t.p, &t.f, bits).to_u128().expect("below 2^bits");
                match t.side {
                    Side::BelowHalf => 2 * m,
                    Side::AboveHalf => (2 * (one - m)).saturating_sub(2).min(one - 1),
                }
            })
            .collect::<Vec<_>>()
    });
    FixedPoints::new(bits, parts.into_iter().flatten().collect())
}

fn check_point_range(lo: u64, hi: u64, bits: u32) -> Result<()> {
    if lo == 0 || lo > hi {
        return Err(Error::Domain(format!("invalid index range {lo}:{hi}")));
    }
    if !(MIN_FRAC_BITS..=MAX_POINT_BITS).contains(&bits) {
        return Err(Error::Config(format!("precision must be in {MIN_FRAC_BITS}..={MAX_POINT_BITS} bits, got {bits}")));
    }
    Ok(())
}

/// `Σ_{n=lo}^{hi} e(m·√P_n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpSum {
    pub m: i64,
    pub lo: u64,
    pub hi: u64,
    pub re: f64,
    pub im: f64,
    pub abs_error: f64,
    /// Second-derivative bound for the same range, when `lo < hi`.
    pub kn_bound: Option<f64>,
}

impl ExpSum {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Smallest precision with `|m|·2^-bits < 1e-12`.
pub fn required_bits(m: i64) -> u32 {
    let mut bits = MIN_FRAC_BITS;
    while m.unsigned_abs() as f64 * 2f64.powi(-(bits as i32)) >= MAX_PHASE_QUANTUM {
        bits += 1;
    }
    bits
}

pub fn exp_sum(lo: u64, hi: u64, m: i64, bits: u32) -> Result<ExpSum> {
    exp_sum_with(lo, hi, m, bits, &Parallelism::default())
}

pub fn exp_sum_with(lo: u64, hi: u64, m: i64, bits: u32, par: &Parallelism) -> Result<ExpSum> {
    if m == 0 {
        return Err(Error::Domain("harmonic index must be nonzero".into()));
    }
    let need = required_bits(m);
    if bits < need || bits > MAX_POINT_BITS {
        return Err(Error::Precision { m, bits, required_bits: need });
    }
    let points = sqrt_frac_points(lo, hi, bits, par)?;
    let s = points.exp_sum(m, par);
    let kn = if lo < hi { Some(kn_bound(lo, hi, m.unsigned_abs())?) } else { None };
    Ok(ExpSum { m, lo, hi, re: s.re, im: s.im, abs_error: s.abs_error, kn_bound: kn })
}

/// `h(x) = √P_x` continued to real `x`.
pub fn h(x: f64) -> f64 {
    (x * (x + 1.0) * (2.0 * x + 1.0) / 6.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivBounds {
    pub n: f64,
    pub h1: f64,
    pub h2: f64,
}

/// First and second derivatives of `h`, from the closed forms in `x(x+1)(2x+1)`.
pub fn deriv_bounds(n: f64) -> Result<DerivBounds> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::Domain(format!("derivatives evaluated for n ≥ 1, got {n}")));
    }
    let x = n;
    let q = x * (x + 1.0) * (2.0 * x + 1.0);
    let q1 = 2.0 * x * (x + 1.0) + (2.0 * x + 1.0) * (x + 1.0) + x * (2.0 * x + 1.0);
    let q2 = 8.0 * x + 4.0 * (x + 1.0) + 2.0;
    let r6 = 6f64.sqrt();
    let h1 = q1 / (2.0 * r6 * q.sqrt());
    let h2 = q2 / (2.0 * r6 * q.sqrt()) - q1 * q1 / (4.0 * r6 * q.powf(1.5));
    Ok(DerivBounds { n, h1, h2 })
}

/// `(|m·h'(hi) - m·h'(lo)| + 2)·(4/√ρ + 3)` with `ρ = m·h''(hi)`.
pub fn kn_bound(lo: u64, hi: u64, m: u64) -> Result<f64> {
    if lo == 0 || lo >= hi {
        return Err(Error::Domain(format!("bound needs 1 ≤ lo < hi, got {lo}:{hi}")));
    }
    if m == 0 {
        return Err(Error::Domain("harmonic index must be positive".into()));
    }
    let m = m as f64;
    let a = deriv_bounds(lo as f64)?;
    let b = deriv_bounds(hi as f64)?;
    let rho = m * b.h2;
    Ok(((m * b.h1 - m * a.h1).abs() + 2.0) * (4.0 / rho.sqrt() + 3.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscrepancyResult {
    pub n: u64,
    /// `D(N) = sup_α |Z(N;α) - Nα|`
    pub d_unnormalized: f64,
    /// `D(N)/N`
    pub d_star: f64,
    /// Erdős–Turán truncation.
    pub k: Option<u64>,
    pub et_bound: Option<f64>,
    /// Accumulated numerical error allowed on `et_bound`.
    pub slack: f64,
}

impl DiscrepancyResult {
    fn plain(n: u64, d: f64) -> Self {
        DiscrepancyResult { n, d_unnormalized: d, d_star: d / n as f64, k: None, et_bound: None, slack: 0.0 }
    }

    /// Whether `D(N) ≤ et_bound + slack`; `None` without a bound.
    pub fn within_bound(&self) -> Option<bool> {
        self.et_bound.map(|b| self.d_unnormalized <= b + self.slack)
    }
}

/// Star discrepancy of arbitrary points in `[0, 1)` via the sorted-points formula.
pub fn star_discrepancy(points: &[f64]) -> Result<DiscrepancyResult> {
    if points.is_empty() {
        return Err(Error::Domain("discrepancy of an empty point set".into()));
    }
    if let Some(bad) = points.iter().find(|v| !(0.0..1.0).contains(*v)) {
        return Err(Error::Domain(format!("point {bad} outside [0, 1)")));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d_star = sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / n - u).max(u - i as f64 / n))
        .fold(0.0, f64::max);
    Ok(DiscrepancyResult { n: sorted.len() as u64, d_unnormalized: d_star * n, d_star, k: None, et_bound: None, slack: 0.0 })
}

/// `|Σ_n e(m·x_n)|` and its error for `m = 1..=k_max`.
pub fn harmonic_moduli(points: &FixedPoints, k_max: u64, par: &Parallelism) -> Vec<PhaseSum> {
    (1..=k_max as i64).map(|m| points.exp_sum(m, par)).collect()
}

/// Exact discrepancy of the set together with the Erdős–Turán bound
/// `N/(K+1) + 3·Σ_{m≤K} |S_m|/m`.
pub fn erdos_turan(points: &FixedPoints, k: u64, par: &Parallelism) -> Result<DiscrepancyResult> {
    if k == 0 {
        return Err(Error::Domain("truncation K must be at least 1".into()));
    }
    let sums = harmonic_moduli(points, k, par);
    Ok(et_sweep_from(points, &sums, &[k])?.remove(0))
}

/// [`erdos_turan`] on arbitrary values in `[0, 1)`, truncated to `bits` places first.
pub fn erdos_turan_values(values: &[f64], k: u64, bits: u32) -> Result<DiscrepancyResult> {
    let points = FixedPoints::from_unit_values(values, bits)?;
    erdos_turan(&points, k, &Parallelism::default())
}

/// The bound for each truncation in `ks`, sharing one set of harmonic sums.
pub fn erdos_turan_sweep(points: &FixedPoints, ks: &[u64], par: &Parallelism) -> Result<Vec<DiscrepancyResult>> {
    if ks.contains(&0) {
        return Err(Error::Domain("truncation K must be at least 1".into()));
    }
    let k_max = ks.iter().copied().max().unwrap_or(0);
    let sums = harmonic_moduli(points, k_max, par);
    et_sweep_from(points, &sums, ks)
}

fn et_sweep_from(points: &FixedPoints, sums: &[PhaseSum], ks: &[u64]) -> Result<Vec<DiscrepancyResult>> {
    let base = points.star_discrepancy()?;
    let n = points.len() as f64;
    Ok(ks
        .iter()
        .map(|&k| {
            let mut tail = CompensatedSum::default();
            let mut err = 0.0;
            for (i, s) in sums.iter().take(k as usize).enumerate() {
                let m = (i + 1) as f64;
                tail.add(s.modulus() / m);
                err += s.abs_error / m;
            }
            let bound = n / (k as f64 + 1.0) + 3.0 * tail.value();
            DiscrepancyResult {
                k: Some(k),
                et_bound: Some(bound),
                slack: 3.0 * err + 1e-12 * bound,
                ..base
            }
        })
        .collect())
}

/// Equal-width histogram of `|√P_n - y_n|` over `[0, 1/2]`.
///
/// Bins are `((b-1)/(2B), b/(2B)]`, decided exactly from integer square
/// roots; the zero distance of perfect squares lands in bin 1. Values whose
/// 96-bit doubled distance sits within four units of an interior edge are
/// counted as flagged, since a fixed-point classification could differ there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HalfDistanceHistogram {
    pub x: u64,
    pub counts: Vec<u64>,
    pub flagged: Vec<u64>,
}

impl HalfDistanceHistogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn flagged_total(&self) -> u64 {
        self.flagged.iter().sum()
    }

    /// `max_b |count_b/N - 1/bins|`
    pub fn max_deviation(&self) -> f64 {
        let n = self.x as f64;
        let expected = 1.0 / self.bins() as f64;
        self.counts.iter().map(|&c| (c as f64 / n - expected).abs()).fold(0.0, f64::max)
    }
}

pub fn half_distance_histogram(x: u64, bins: usize) -> Result<HalfDistanceHistogram> {
    half_distance_histogram_with(x, bins, &Parallelism::default())
}

pub fn half_distance_histogram_with(x: u64, bins: usize, par: &Parallelism) -> Result<HalfDistanceHistogram> {
    if x == 0 {
        return Err(Error::Domain("x must be at least 1".into()));
    }
    if !(2..=1 << 20).contains(&bins) {
        return Err(Error::Config(format!("bin count must be in 2..=2^20, got {bins}")));
    }
    let bits = DEFAULT_BITS;
    let one = 1u128 << bits;
    let l = 2 * bins as u64;
    let wide = bins as u128;
    let parts = par.map_chunks(1, x, |a, b| {
        let mut counts = vec![0u64; bins];
        let mut flagged = vec![0u64; bins];
        for n in a..=b {
            let t = small_term(n).map(Into::into).unwrap_or_else(|| term(n));
            let slot = (t.distance_bin(l).max(1) - 1) as usize;
            counts[slot] += 1;
            let m = frac_mantissa(&t.p, &t.f, bits).to_u128().expect("below 2^bits");
            let doubled = match t.side {
                Side::BelowHalf => 2 * m,
                Side::AboveHalf => 2 * (one - m),
            };
            if m != 0 {
                let scaled = doubled * wide;
                let edge = ((scaled + one / 2) >> bits).clamp(1, wide - 1);
                if scaled.abs_diff(edge << bits) <= 4 * wide {
                    flagged[slot] += 1;
                }
            }
        }
        (counts, flagged)
    });
    let mut counts = vec![0u64; bins];
    let mut flagged = vec![0u64; bins];
    for (c, f) in parts {
        for b in 0..bins {
            counts[b] += c[b];
            flagged[b] += f[b];
        }
    }
    Ok(HalfDistanceHistogram { x, counts, flagged })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeylRow {
    pub m: u64,
    /// `|S_m(N)|/N`
    pub ratio: f64,
    pub abs_error: f64,
}

/// `|Σ_{n≤N} e(m·√P_n)|/N` for `m = 1..=m_max`.
pub fn weyl_profile(n: u64, m_max: u64, par: &Parallelism) -> Result<Vec<WeylRow>> {
    if n == 0 || m_max == 0 {
        return Err(Error::Domain("N and m_max must be positive".into()));
    }
    let points = sqrt_frac_points(1, n, DEFAULT_BITS, par)?;
    Ok(harmonic_moduli(&points, m_max, par)
        .into_iter()
        .enumerate()
        .map(|(i, s)| WeylRow { m: i as u64 + 1, ratio: s.modulus() / n as f64, abs_error: s.abs_error / n as f64 })
        .collect())
}

/// Mantissa of `{√P_n}` as a big integer, for callers needing more than 96 bits.
pub fn sqrt_frac_mantissa(n: u64, bits: u32) -> BigUint {
    let t = term(n);
    frac_mantissa(&t.p, &t.f, bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Supremum of `|Z(α) - Nα|` over every candidate α: each point, the
    /// left limit at each point, and the endpoints.
    fn brute_discrepancy(mants: &[u128], bits: u32) -> f64 {
        let one = 1i128 << bits;
        let n = mants.len() as i128;
        let mut best = 0i128;
        let mut cands: Vec<u128> = mants.to_vec();
        cands.push(0);
        cands.push(1u128 << bits);
        for &a in &cands {
            let le = mants.iter().filter(|&&m| m <= a).count() as i128;
            let lt = mants.iter().filter(|&&m| m < a).count() as i128;
            let na = n * a as i128;
            best = best.max((le * one - na).abs()).max((na - lt * one).abs());
        }
        best as f64 / one as f64
    }

    #[test]
    fn discrepancy_examples() {
        let single = star_discrepancy(&[0.0]).unwrap();
        assert_eq!(single.d_star, 1.0);
        let n = 10;
        let pts: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 + 0.5 / n as f64).collect();
        let d = star_discrepancy(&pts).unwrap();
        assert!((d.d_star - 0.05).abs() < 1e-15);
        assert!(star_discrepancy(&[0.2, 1.0]).is_err());
        assert!(star_discrepancy(&[-0.1]).is_err());
        assert!(star_discrepancy(&[]).is_err());

        let fixed = FixedPoints::from_unit_values(&pts, 64).unwrap().star_discrepancy().unwrap();
        assert!((fixed.d_star - 0.05).abs() < 1e-15);
    }

    #[test]
    fn sqrt_points_discrepancy_decays() {
        let par = Parallelism::default();
        let d3 = sqrt_frac_points(1, 1000, 96, &par).unwrap().star_discrepancy().unwrap();
        let d4 = sqrt_frac_points(1, 10_000, 96, &par).unwrap().star_discrepancy().unwrap();
        assert!(d4.d_star < d3.d_star);
    }

    #[test]
    fn exp_sum_examples() {
        let s = exp_sum(24, 24, 7, 96).unwrap();
        assert_eq!((s.re, s.im), (1.0, 0.0));
        assert_eq!(s.kn_bound, None);

        let a = exp_sum(1, 5000, 3, 96).unwrap();
        let b = exp_sum(1, 5000, -3, 96).unwrap();
        assert_eq!(a.re, b.re);
        assert_eq!(a.im, -b.im);
        assert!(a.modulus() <= 5000.0);
        assert!(a.modulus() <= a.kn_bound.unwrap());

        assert!(matches!(exp_sum(1, 10, 0, 96), Err(Error::Domain(_))));
        match exp_sum(1, 10, 1 << 20, 40) {
            Err(Error::Precision { required_bits, .. }) => assert_eq!(required_bits, required_bits_oracle(1 << 20)),
            other => panic!("expected precision error, got {other:?}"),
        }
    }

    fn required_bits_oracle(m: i64) -> u32 {
        ((m as f64 * 1e12).log2().floor() as u32) + 1
    }

    #[test]
    fn weyl_averages_shrink() {
        let par = Parallelism::default();
        let small: Vec<f64> = (1..=4).map(|m| exp_sum(1, 1000, m, 96).unwrap().modulus() / 1000.0).collect();
        let large: Vec<f64> = (1..=4).map(|m| exp_sum(1, 100_000, m, 96).unwrap().modulus() / 100_000.0).collect();
        for (s, l) in small.iter().zip(&large) {
            assert!(l < s);
        }
        let one = weyl_profile(1, 3, &par).unwrap();
        assert!(one.iter().all(|r| (r.ratio - 1.0).abs() < 1e-15));
        assert!(weyl_profile(10, 0, &par).is_err());
    }

    #[test]
    fn kn_bound_examples() {
        let s = exp_sum(10, 11, 1, 96).unwrap();
        let b = kn_bound(10, 11, 1).unwrap();
        assert!(b >= 2.0 && b >= s.modulus());
        assert!(kn_bound(5, 5, 1).is_err());
        assert!(kn_bound(1, 5, 0).is_err());
        // growth like hi^{3/4}
        let his = [1_000u64, 3_000, 10_000, 30_000, 100_000];
        let vals: Vec<f64> = his.iter().map(|&hi| kn_bound(1, hi, 1).unwrap()).collect();
        let fit = crate::moments::FitReport::from_points(&his, &vals).unwrap();
        assert!((fit.slope - 0.75).abs() < 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for n in [1.0, 2.5, 10.0, 1e3, 1e5, 1e6] {
            let d = deriv_bounds(n).unwrap();
            let step = 1e-4 * n;
            let fd = (h(n + step) - h(n - step)) / (2.0 * step);
            assert!((d.h1 / fd - 1.0).abs() < 1e-6, "n={n}");
            assert!(d.h1 > 0.0 && d.h2 > 0.0);
        }
        let big = deriv_bounds(1e6).unwrap();
        assert!((big.h1 / (3f64.sqrt() / 2.0 * 1e3) - 1.0).abs() < 0.01);
        assert!(deriv_bounds(1e4).unwrap().h2 > big.h2);
        let grid: Vec<f64> = (0..200).map(|i| deriv_bounds(1.0 + i as f64 * 7.3).unwrap().h2).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
        assert!(deriv_bounds(0.5).is_err());
    }

    #[test]
    fn erdos_turan_examples() {
        let par = Parallelism::default();
        let pts = sqrt_frac_points(1, 10_000, 96, &par).unwrap();
        let r = erdos_turan(&pts, 10, &par).unwrap();
        assert_eq!(r.within_bound(), Some(true));
        let single = erdos_turan_values(&[0.3], 1, 64).unwrap();
        assert!(single.et_bound.unwrap() >= 3.5 - 1e-12);
        assert!(single.d_unnormalized <= 1.0);
        let sweep = erdos_turan_sweep(&pts, &[1, 2, 5, 10, 20, 50], &par).unwrap();
        assert!(sweep.iter().all(|r| r.et_bound.unwrap().is_finite() && r.within_bound() == Some(true)));
        assert!(erdos_turan(&pts, 0, &par).is_err());
    }

    #[test]
    fn histogram_small_cases() {
        let h1 = half_distance_histogram(1, 4).unwrap();
        assert_eq!(h1.counts, vec![1, 0, 0, 0]);
        let h24 = half_distance_histogram(24, 5).unwrap();
        assert_eq!(h24.counts.iter().sum::<u64>(), 24);
        assert!(h24.counts[0] >= 2);
        assert!(half_distance_histogram(10, 1).is_err());
    }

    #[test]
    fn doubled_distances_track_histogram_bins() {
        let par = Parallelism::default();
        let pts = doubled_half_distances(1, 5000, 96, &par).unwrap();
        let hist = half_distance_histogram(5000, 10).unwrap();
        let mut counts = vec![0u64; 10];
        for &m in pts.mantissas() {
            let v = m as f64 / 2f64.powi(96);
            counts[((v * 10.0).ceil() as usize).clamp(1, 10) - 1] += 1;
        }
        assert_eq!(counts, hist.counts);
    }

    proptest! {
        #[test]
        fn sorted_formula_matches_brute_force(mants in proptest::collection::vec(0u128..1 << 20, 1..200)) {
            let pts = FixedPoints::new(20, mants.clone()).unwrap();
            let fast = pts.star_discrepancy().unwrap().d_unnormalized;
            prop_assert_eq!(fast, brute_discrepancy(&mants, 20));
        }

        #[test]
        fn float_formula_matches_fixed(vals in proptest::collection::vec(0.0f64..1.0, 1..200)) {
            let f = star_discrepancy(&vals).unwrap();
            let fixed = FixedPoints::from_unit_values(&vals, 60).unwrap().star_discrepancy().unwrap();
            prop_assert!((f.d_star - fixed.d_star).abs() < 1e-12);
        }

        #[test]
        fn conjugate_symmetry(m in 1i64..200, lo in 1u64..500, len in 0u64..300) {
            let a = exp_sum(lo, lo + len, m, 96).unwrap();
            let b = exp_sum(lo, lo + len, -m, 96).unwrap();
            prop_assert_eq!(a.re, b.re);
            prop_assert_eq!(a.im, -b.im);
            prop_assert!(a.modulus() <= (len + 1) as f64 + a.abs_error);
        }
    }
}
