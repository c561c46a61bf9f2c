//! Monomials `c · Π v^e` in named variables with exact rational exponents.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    /// Natural logarithm of the positive coefficient.
    pub coeff_log: f64,
    exponents: BTreeMap<String, Rational64>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial { coeff_log: 0.0, exponents: BTreeMap::new() }
    }

    pub fn var(name: &str, exponent: Rational64) -> Self {
        Monomial::one().with(name, exponent)
    }

    /// Sets the exponent of `name`, dropping it when zero.
    pub fn with(mut self, name: &str, exponent: Rational64) -> Self {
        if exponent.is_zero() {
            self.exponents.remove(name);
        } else {
            self.exponents.insert(name.to_string(), exponent);
        }
        self
    }

    pub fn with_coeff_log(mut self, coeff_log: f64) -> Self {
        self.coeff_log = coeff_log;
        self
    }

    pub fn exponent(&self, name: &str) -> Rational64 {
        self.exponents.get(name).copied().unwrap_or_else(Rational64::zero)
    }

    pub fn exponents(&self) -> &BTreeMap<String, Rational64> {
        &self.exponents
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.exponents.keys().map(String::as_str)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.clone();
        out.coeff_log += other.coeff_log;
        for (v, e) in &other.exponents {
            let sum = out.exponent(v) + e;
            out = out.with(v, sum);
        }
        out
    }

    pub fn pow(&self, e: Rational64) -> Monomial {
        let mut out = Monomial::one().with_coeff_log(self.coeff_log * ratio_f64(e));
        for (v, x) in &self.exponents {
            out = out.with(v, x * e);
        }
        out
    }

    pub fn div(&self, other: &Monomial) -> Monomial {
        self.mul(&other.pow(-Rational64::one()))
    }

    /// Replaces `name` by `value`: `self|_{name=value}`.
    pub fn substitute(&self, name: &str, value: &Monomial) -> Monomial {
        let e = self.exponent(name);
        self.clone().with(name, Rational64::zero()).mul(&value.pow(e))
    }

    /// Same exponent vector, ignoring coefficients.
    pub fn same_exponents(&self, other: &Monomial) -> bool {
        self.exponents == other.exponents
    }

    /// Order valid for every assignment with all variables `≥ 1`, ignoring
    /// coefficients: `Less` when `self ≤ other` everywhere, `None` when the
    /// two cross somewhere.
    pub fn dominance(&self, other: &Monomial) -> Option<Ordering> {
        let diff = other.div(self);
        let (mut pos, mut neg) = (false, false);
        for e in diff.exponents.values() {
            if e.is_positive() {
                pos = true;
            } else {
                neg = true;
            }
        }
        match (pos, neg) {
            (false, false) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (true, true) => None,
        }
    }

    pub fn log_eval(&self, env: &BTreeMap<String, f64>) -> Result<f64> {
        let mut acc = self.coeff_log;
        for (v, e) in &self.exponents {
            let x = *env.get(v).ok_or_else(|| Error::Domain(format!("no value for variable {v}")))?;
            if !(x > 0.0) {
                return Err(Error::Domain(format!("variable {v} must be positive, got {x}")));
            }
            acc += ratio_f64(*e) * x.ln();
        }
        Ok(acc)
    }

    pub fn eval(&self, env: &BTreeMap<String, f64>) -> Result<f64> {
        self.log_eval(env).map(f64::exp)
    }

    /// Parses `"x:3/2+1,K:-1/2"`: comma-separated `variable:exponent` items
    /// where each exponent is a sum of rationals. A repeated variable adds up.
    pub fn parse(text: &str) -> Result<Monomial> {
        let mut out = Monomial::one();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, expr) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("expected variable:exponent, got {item:?}")))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(Error::Parse(format!("bad variable name {name:?}")));
            }
            let e = parse_rational_sum(expr)?;
            let sum = out.exponent(name) + e;
            out = out.with(name, sum);
        }
        Ok(out)
    }

    /// Inverse of [`Monomial::parse`] (coefficient omitted).
    pub fn to_spec(&self) -> String {
        self.exponents.iter().map(|(v, e)| format!("{v}:{e}")).collect::<Vec<_>>().join(",")
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.coeff_log != 0.0 {
            parts.push(format!("{}", self.coeff_log.exp()));
        }
        for (v, e) in &self.exponents {
            if e.is_one() {
                parts.push(v.clone());
            } else if e.is_integer() {
                parts.push(format!("{v}^{e}"));
            } else {
                parts.push(format!("{v}^({e})"));
            }
        }
        if parts.is_empty() {
            return write!(f, "1");
        }
        write!(f, "{}", parts.join("·"))
    }
}

pub fn ratio_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `"3/2+1"`, `"-1/2"`, `"1-1/12"`.
pub fn parse_rational_sum(expr: &str) -> Result<Rational64> {
    let expr: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if expr.is_empty() {
        return Err(Error::Parse("empty exponent".into()));
    }
    let mut total = Rational64::zero();
    let mut start = 0;
    let bytes = expr.as_bytes();
    for i in 1..=bytes.len() {
        if i == bytes.len() || ((bytes[i] == b'+' || bytes[i] == b'-') && bytes[i - 1] != b'/') {
            let piece = expr[start..i].trim_start_matches('+');
            let r: Rational64 = piece.parse().map_err(|_| Error::Parse(format!("bad rational {piece:?} in {expr:?}")))?;
            total += r;
            start = i;
        }
    }
    Ok(total)
}
