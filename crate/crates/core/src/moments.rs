//! Moments `M_k(x) = Σ_{n≤x} a_n^k`, their main terms, and the binned
//! lower/upper certificate.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactseq::{small_term, term, SmallTerm, Term};
use crate::fixed::Fixed;
use crate::isqrt::isqrt_biguint;
use crate::parallel::Parallelism;

/// Largest supported moment order.
pub const MAX_K: u32 = 12;

/// Fractional bits carried by main terms and residuals.
pub const MAIN_TERM_BITS: u32 = 128;

/// Fixed-point precision of `√P_n` inside the sandwich weights.
pub const SANDWICH_BITS: u32 = 64;

/// Fractional bits of the reported sandwich bounds.
pub const SANDWICH_REPORT_BITS: u32 = 64;

/// The error exponent `3k/2 + 11/12`.
pub fn error_exponent(k: u32) -> f64 {
    1.5 * k as f64 + 11.0 / 12.0
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 || k > MAX_K {
        return Err(Error::Config(format!("moment order k must be in 1..={MAX_K}, got {k}")));
    }
    Ok(())
}

/// A `u128` running sum that spills into a big integer on overflow.
#[derive(Clone, Debug, Default)]
struct WideSum {
    low: u128,
    high: BigUint,
}

impl WideSum {
    fn add_u128(&mut self, v: u128) {
        match self.low.checked_add(v) {
            Some(s) => self.low = s,
            None => {
                self.high += self.low;
                self.low = v;
            }
        }
    }

    fn add_big(&mut self, v: &BigUint) {
        self.high += v;
    }

    fn total(self) -> BigUint {
        self.high + self.low
    }
}

/// Exact power sums `Σ a_n^k` for several orders at once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowerSums {
    ks: Vec<u32>,
    sums: Vec<BigUint>,
}

impl PowerSums {
    pub fn new(ks: &[u32]) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::Config("at least one moment order is required".into()));
        }
        for &k in ks {
            check_k(k)?;
        }
        Ok(PowerSums { ks: ks.to_vec(), sums: vec![BigUint::zero(); ks.len()] })
    }

    /// Rebuilds from saved partial sums (e.g. a checkpoint).
    pub fn from_parts(ks: &[u32], sums: Vec<BigUint>) -> Result<Self> {
        let mut out = PowerSums::new(ks)?;
        if sums.len() != ks.len() {
            return Err(Error::Config("one partial sum per order is required".into()));
        }
        out.sums = sums;
        Ok(out)
    }

    pub fn ks(&self) -> &[u32] {
        &self.ks
    }

    pub fn sums(&self) -> &[BigUint] {
        &self.sums
    }

    pub fn sum(&self, k: u32) -> Option<&BigUint> {
        self.ks.iter().position(|&kk| kk == k).map(|i| &self.sums[i])
    }

    /// Adds `a_n^k` for `n ∈ [lo, hi]`, sequentially.
    pub fn add_range(&mut self, lo: u64, hi: u64) {
        let mut acc: Vec<WideSum> = vec![WideSum::default(); self.ks.len()];
        for n in lo..=hi {
            match small_term(n) {
                Some(t) => {
                    for (slot, &k) in acc.iter_mut().zip(&self.ks) {
                        match t.a.checked_pow(k) {
                            Some(v) => slot.add_u128(v),
                            None => slot.add_big(&BigUint::from(t.a).pow(k)),
                        }
                    }
                }
                None => {
                    let t = term(n);
                    for (slot, &k) in acc.iter_mut().zip(&self.ks) {
                        slot.add_big(&t.a.pow(k));
                    }
                }
            }
        }
        for (sum, part) in self.sums.iter_mut().zip(acc) {
            *sum += part.total();
        }
    }

    pub fn merge(&mut self, other: &PowerSums) {
        assert_eq!(self.ks, other.ks, "merging power sums of different orders");
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
    }

    /// Power sums over `[lo, hi]`, chunked in parallel and merged in index order.
    pub fn compute(ks: &[u32], lo: u64, hi: u64, par: &Parallelism) -> Result<Self> {
        let mut total = PowerSums::new(ks)?;
        let parts = par.map_chunks(lo, hi, |a, b| {
            let mut p = PowerSums { ks: ks.to_vec(), sums: vec![BigUint::zero(); ks.len()] };
            p.add_range(a, b);
            p
        });
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }
}

/// Power sums at each of the strictly increasing cut points `xs`, from a
/// single pass over `[1, max xs]`.
pub fn moments_at(xs: &[u64], ks: &[u32], par: &Parallelism) -> Result<Vec<PowerSums>> {
    if xs.first() == Some(&0) || xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("cut points must be positive and strictly increasing".into()));
    }
    let mut running = PowerSums::new(ks)?;
    let mut prev = 0;
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        running.merge(&PowerSums::compute(ks, prev + 1, x, par)?);
        out.push(running.clone());
        prev = x;
    }
    Ok(out)
}

/// `x^{3k/2+1} / (3^{k/2}·(3k/2+1)·(k+1))` to [`MAIN_TERM_BITS`] fractional bits.
///
/// Written as `2·x^{k+1}·√(3^k x^k) / (3^k·(3k+2)·(k+1))` so the only
/// irrational step is one integer square root, taken with enough guard bits
/// that the final floor is off by at most one unit.
pub fn main_term(x: u64, k: u32) -> Fixed {
    let bits = MAIN_TERM_BITS;
    let three_k = BigUint::from(3u32).pow(k);
    let lead = BigUint::from(2u32) * BigUint::from(x).pow(k + 1);
    let guard = lead.bits() as u32;
    let root = isqrt_biguint(&((&three_k * BigUint::from(x).pow(k)) << (2 * (bits + guard))));
    let num = lead * root;
    let den = (three_k * BigUint::from(3 * k + 2) * BigUint::from(k + 1)) << guard;
    Fixed::new(BigInt::from(num / den), bits)
}

/// The main-term coefficient, i.e. [`main_term`] at `x = 1`.
pub fn main_coefficient(k: u32) -> Fixed {
    main_term(1, k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentSummary {
    pub x: u64,
    pub k: u32,
    pub exact: BigUint,
    pub main: Fixed,
    /// `exact - main`
    pub residual: Fixed,
    /// `residual / x^{3k/2 + 11/12}`
    pub normalized: f64,
}

impl MomentSummary {
    pub fn new(x: u64, k: u32, exact: BigUint) -> Self {
        let main = main_term(x, k);
        let residual = Fixed::from_uint(&exact, MAIN_TERM_BITS).sub(&main);
        let normalized = residual.to_f64() / (error_exponent(k) * (x as f64).ln()).exp();
        MomentSummary { x, k, exact, main, residual, normalized }
    }
}

pub fn moment(x: u64, k: u32) -> Result<MomentSummary> {
    moment_with(x, k, &Parallelism::default())
}

pub fn moment_with(x: u64, k: u32, par: &Parallelism) -> Result<MomentSummary> {
    if x == 0 {
        return Err(Error::Domain("x must be at least 1".into()));
    }
    let sums = PowerSums::compute(&[k], 1, x, par)?;
    Ok(MomentSummary::new(x, k, sums.sums[0].clone()))
}

/// `A(x) = M_1(x)/x` together with its main term `x^{3/2}/(5√3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Average {
    pub x: u64,
    pub exact: BigRational,
    pub value: Fixed,
    pub main: Fixed,
}

impl Average {
    pub fn new(x: u64, m1: BigUint) -> Self {
        let xb = BigInt::from(x);
        let m1 = BigInt::from(m1);
        let value = Fixed::from_ratio_floor(&m1, &xb, MAIN_TERM_BITS);
        let main = main_term(x, 1);
        let main = Fixed::new(main.mantissa() / &xb, MAIN_TERM_BITS);
        Average { x, exact: BigRational::new(m1, xb), value, main }
    }

    /// `A(x)` divided by its main term.
    pub fn ratio(&self) -> f64 {
        self.value.to_f64() / self.main.to_f64()
    }
}

pub fn average(x: u64) -> Result<Average> {
    average_with(x, &Parallelism::default())
}

pub fn average_with(x: u64, par: &Parallelism) -> Result<Average> {
    if x == 0 {
        return Err(Error::Domain("x must be at least 1".into()));
    }
    let sums = PowerSums::compute(&[1], 1, x, par)?;
    Ok(Average::new(x, sums.sums[0].clone()))
}

/// Binned partial sums for the lower/upper moment certificate.
///
/// Every `a_n = d_n·(√P_n + y_n)` with `d_n = |√P_n - y_n|` in the bin
/// `((j-1)/L, j/L]`. Bin `j` keeps `Σ s_lo^k` and `Σ s_hi^k` where
/// `s_lo ≤ 2^B(√P_n + y_n) ≤ s_hi` are integers, so
/// `Σ_j (j-1)^k·lo_j ≤ L^k·2^{Bk}·M_k ≤ Σ_j j^k·hi_j` holds exactly.
/// Perfect squares (`d_n = 0`, so `a_n = 0`) belong to bin 1 but add
/// nothing to either bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SandwichAccumulator {
    k: u32,
    l: u64,
    bits: u32,
    exact: BigUint,
    lower_bins: Vec<BigUint>,
    upper_bins: Vec<BigUint>,
}

impl SandwichAccumulator {
    pub fn new(k: u32, l: u64, bits: u32) -> Result<Self> {
        check_k(k)?;
        if l < 2 || !l.is_multiple_of(2) {
            return Err(Error::Config(format!("bin count L must be even and at least 2, got {l}")));
        }
        if bits == 0 {
            return Err(Error::Config("sandwich precision must be positive".into()));
        }
        let half = (l / 2) as usize;
        Ok(SandwichAccumulator {
            k,
            l,
            bits,
            exact: BigUint::zero(),
            lower_bins: vec![BigUint::zero(); half],
            upper_bins: vec![BigUint::zero(); half],
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn l(&self) -> u64 {
        self.l
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// `(exact, lower_bins, upper_bins)` for serialisation.
    pub fn parts(&self) -> (&BigUint, &[BigUint], &[BigUint]) {
        (&self.exact, &self.lower_bins, &self.upper_bins)
    }

    pub fn from_parts(k: u32, l: u64, bits: u32, exact: BigUint, lower: Vec<BigUint>, upper: Vec<BigUint>) -> Result<Self> {
        let mut acc = SandwichAccumulator::new(k, l, bits)?;
        if lower.len() != acc.lower_bins.len() || upper.len() != acc.upper_bins.len() {
            return Err(Error::Config(format!("expected {} bins", acc.lower_bins.len())));
        }
        acc.exact = exact;
        acc.lower_bins = lower;
        acc.upper_bins = upper;
        Ok(acc)
    }

    fn add_term(&mut self, j: u64, p: &BigUint, y: &BigUint, a: &BigUint) {
        if j == 0 {
            return;
        }
        let slot = (j - 1) as usize;
        let s = isqrt_biguint(&(p << (2 * self.bits)));
        let lo = s + (y << self.bits);
        let hi = &lo + 1u32;
        self.lower_bins[slot] += lo.pow(self.k);
        self.upper_bins[slot] += hi.pow(self.k);
        self.exact += a.pow(self.k);
    }

    pub fn add_range(&mut self, lo: u64, hi: u64) {
        for n in lo..=hi {
            match small_term(n) {
                Some(t) => {
                    let j = t.distance_bin(self.l);
                    self.add_small(j, &t);
                }
                None => {
                    let t = term(n);
                    let j = t.distance_bin(self.l);
                    self.add_big(j, &t);
                }
            }
        }
    }

    fn add_small(&mut self, j: u64, t: &SmallTerm) {
        self.add_term(j, &BigUint::from(t.p), &BigUint::from(t.y()), &BigUint::from(t.a));
    }

    fn add_big(&mut self, j: u64, t: &Term) {
        self.add_term(j, &t.p, &t.y, &t.a);
    }

    pub fn merge(&mut self, other: &SandwichAccumulator) {
        assert_eq!((self.k, self.l, self.bits), (other.k, other.l, other.bits), "incompatible sandwich accumulators");
        self.exact += &other.exact;
        for (a, b) in self.lower_bins.iter_mut().zip(&other.lower_bins) {
            *a += b;
        }
        for (a, b) in self.upper_bins.iter_mut().zip(&other.upper_bins) {
            *a += b;
        }
    }

    pub fn finish(&self, x: u64) -> SandwichResult {
        let k = self.k;
        let mut lower_scaled = BigUint::zero();
        let mut upper_scaled = BigUint::zero();
        for (i, (lo, hi)) in self.lower_bins.iter().zip(&self.upper_bins).enumerate() {
            let j = i as u64 + 1;
            lower_scaled += BigUint::from(j - 1).pow(k) * lo;
            upper_scaled += BigUint::from(j).pow(k) * hi;
        }
        let scale = BigUint::from(self.l).pow(k) << (self.bits * k);
        let den = BigInt::from(scale.clone());
        let lower = Fixed::from_ratio_floor(&BigInt::from(lower_scaled.clone()), &den, SANDWICH_REPORT_BITS);
        let upper = Fixed::from_ratio_ceil(&BigInt::from(upper_scaled.clone()), &den, SANDWICH_REPORT_BITS);
        SandwichResult {
            x,
            k,
            l: self.l,
            lower,
            upper,
            exact: self.exact.clone(),
            lower_scaled,
            upper_scaled,
            scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichResult {
    pub x: u64,
    pub k: u32,
    pub l: u64,
    /// Lower bound, rounded down.
    pub lower: Fixed,
    /// Upper bound, rounded up.
    pub upper: Fixed,
    pub exact: BigUint,
    lower_scaled: BigUint,
    upper_scaled: BigUint,
    scale: BigUint,
}

impl SandwichResult {
    /// `lower ≤ exact ≤ upper`, checked in integers before any rounding.
    pub fn certified(&self) -> bool {
        let e = &self.exact * &self.scale;
        self.lower_scaled <= e && e <= self.upper_scaled
    }

    /// `(upper - lower) / upper`, or 0 when both bounds vanish.
    pub fn gap_ratio(&self) -> f64 {
        if self.upper_scaled.is_zero() {
            return 0.0;
        }
        let gap = &self.upper_scaled - &self.lower_scaled;
        let shift = self.upper_scaled.bits().saturating_sub(60);
        let g = (gap >> shift).to_f64().unwrap_or(0.0);
        let u = (&self.upper_scaled >> shift).to_f64().unwrap_or(1.0);
        g / u
    }
}

pub fn sandwich(x: u64, k: u32, l: u64) -> Result<SandwichResult> {
    sandwich_with(x, k, l, &Parallelism::default())
}

pub fn sandwich_with(x: u64, k: u32, l: u64, par: &Parallelism) -> Result<SandwichResult> {
    if x == 0 {
        return Err(Error::Domain("x must be at least 1".into()));
    }
    let mut total = SandwichAccumulator::new(k, l, SANDWICH_BITS)?;
    let template = total.clone();
    let parts = par.map_chunks(1, x, |a, b| {
        let mut acc = template.clone();
        acc.add_range(a, b);
        acc
    });
    for p in &parts {
        total.merge(p);
    }
    Ok(total.finish(x))
}

/// Least-squares line through `(ln x, ln |value|)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub xs: Vec<u64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

impl FitReport {
    /// Fits the points with nonzero value; at least three are required.
    pub fn from_points(xs: &[u64], values: &[f64]) -> Result<Self> {
        if xs.len() != values.len() {
            return Err(Error::InsufficientData("xs and values differ in length".into()));
        }
        let pts: Vec<(u64, f64)> =
            xs.iter().zip(values).filter(|(x, v)| **x > 0 && **v != 0.0 && v.is_finite()).map(|(x, v)| (*x, *v)).collect();
        if pts.len() < 3 {
            return Err(Error::InsufficientData(format!("{} usable points, need at least 3", pts.len())));
        }
        let n = pts.len() as f64;
        let lx: Vec<f64> = pts.iter().map(|(x, _)| (*x as f64).ln()).collect();
        let ly: Vec<f64> = pts.iter().map(|(_, v)| v.abs().ln()).collect();
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        if sxx == 0.0 {
            return Err(Error::InsufficientData("all abscissae coincide".into()));
        }
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        Ok(FitReport {
            xs: pts.iter().map(|p| p.0).collect(),
            values: pts.iter().map(|p| p.1).collect(),
            slope,
            intercept: my - slope * mx,
        })
    }
}

/// Log-log fit of `|M_k(x) - main_term(x, k)|` over `xs`.
pub fn fit_residual(xs: &[u64], k: u32) -> Result<FitReport> {
    fit_residual_with(xs, k, &Parallelism::default())
}

pub fn fit_residual_with(xs: &[u64], k: u32, par: &Parallelism) -> Result<FitReport> {
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points given, need at least 3", xs.len())));
    }
    let snaps = moments_at(xs, &[k], par)?;
    let residuals: Vec<f64> =
        xs.iter().zip(&snaps).map(|(&x, s)| MomentSummary::new(x, k, s.sums[0].clone()).residual.abs().to_f64()).collect();
    FitReport::from_points(xs, &residuals)
}
