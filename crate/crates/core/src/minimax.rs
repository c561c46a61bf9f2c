//! Balancing a decreasing `F` against increasing `G_1, …, G_i`.
//!
//! The minimum over `t` of `max(F, G_1, …, G_i)` sits at `min_j M_j`, where
//! `M_j` is the crossing of `F` and `G_j`. Numeric problems are solved by
//! bisection in `log t`; monomial problems exactly on rational exponents.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::Rational64;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::monomial::Monomial;

/// Points at which monotonicity is checked.
pub const MONOTONE_SAMPLES: usize = 16;

const MAX_BISECTIONS: usize = 400;

pub type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

pub struct MinMaxProblem {
    f: ScalarFn,
    gs: Vec<ScalarFn>,
    lo: f64,
    hi: f64,
}

impl MinMaxProblem {
    /// Validates the domain `[lo, hi] ⊂ (0, ∞)` and samples monotonicity at
    /// [`MONOTONE_SAMPLES`] geometric points. Limits at the ends of the domain
    /// are not checked.
    pub fn new(f: ScalarFn, gs: Vec<ScalarFn>, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidProblem(format!("domain must satisfy 0 < lo < hi < ∞, got [{lo}, {hi}]")));
        }
        if gs.is_empty() {
            return Err(Error::InvalidProblem("at least one increasing function is required".into()));
        }
        let p = MinMaxProblem { f, gs, lo, hi };
        let grid = p.grid(MONOTONE_SAMPLES);
        let fv: Vec<f64> = grid.iter().map(|&t| (p.f)(t)).collect();
        if !strictly(&fv, Ordering::Greater) {
            return Err(Error::InvalidProblem("F is not decreasing on the sampled grid".into()));
        }
        for (j, g) in p.gs.iter().enumerate() {
            let gv: Vec<f64> = grid.iter().map(|&t| g(t)).collect();
            if !strictly(&gv, Ordering::Less) {
                return Err(Error::InvalidProblem(format!("G_{} is not increasing on the sampled grid", j + 1)));
            }
        }
        Ok(p)
    }

    /// `F` and `G_j` given as monomials in `var`, with the other variables
    /// fixed by `env`.
    pub fn from_monomials(
        f: &Monomial,
        gs: &[Monomial],
        var: &str,
        env: &BTreeMap<String, f64>,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        let bind = |m: &Monomial| -> Result<ScalarFn> {
            let mut rest = env.clone();
            rest.remove(var);
            let base = m.clone().with(var, Rational64::zero()).log_eval(&rest)?;
            let e = crate::monomial::ratio_f64(m.exponent(var));
            Ok(Box::new(move |t: f64| (base + e * t.ln()).exp()))
        };
        let gs = gs.iter().map(bind).collect::<Result<Vec<_>>>()?;
        MinMaxProblem::new(bind(f)?, gs, lo, hi)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn f(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn max_g(&self, t: f64) -> f64 {
        self.gs.iter().map(|g| g(t)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max(F(t), G_1(t), …)`
    pub fn objective(&self, t: f64) -> f64 {
        self.f(t).max(self.max_g(t))
    }

    fn grid(&self, samples: usize) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let last = samples.max(2) - 1;
        (0..=last).map(|i| (a + (b - a) * i as f64 / last as f64).exp()).collect()
    }
}

fn strictly(values: &[f64], ord: Ordering) -> bool {
    values.iter().all(|v| v.is_finite()) && values.windows(2).all(|w| w[0].partial_cmp(&w[1]) == Some(ord))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxSolution {
    pub argmin: f64,
    pub value: f64,
    /// `M_j`, in the order of the `G_j`.
    pub crossings: Vec<f64>,
    /// `|F(argmin) - max_j G_j(argmin)|`
    pub residual: f64,
    pub tol: f64,
}

/// Locates every crossing to relative tolerance `tol` by bisection.
pub fn solve_numeric(problem: &MinMaxProblem, tol: f64) -> Result<MinMaxSolution> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!("tolerance must be in (0, 1), got {tol}")));
    }
    let crossings = problem
        .gs
        .iter()
        .enumerate()
        .map(|(j, g)| bisect(problem, g, tol).ok_or(Error::NoCrossing { index: j + 1 }))
        .collect::<Result<Vec<_>>>()?;
    let argmin = crossings.iter().copied().fold(f64::INFINITY, f64::min);
    let value = problem.f(argmin);
    let residual = (value - problem.max_g(argmin)).abs();
    Ok(MinMaxSolution { argmin, value, crossings, residual, tol })
}

fn bisect(p: &MinMaxProblem, g: &ScalarFn, tol: f64) -> Option<f64> {
    let diff = |t: f64| p.f(t) - g(t);
    let (mut a, mut b) = (p.lo.ln(), p.hi.ln());
    let (da, db) = (diff(p.lo), diff(p.hi));
    if da == 0.0 {
        return Some(p.lo);
    }
    if db == 0.0 {
        return Some(p.hi);
    }
    if !(da > 0.0 && db < 0.0) {
        return None;
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        let t = mid.exp();
        let d = diff(t);
        let scale = p.f(t).abs().max(g(t).abs());
        if (b - a) <= tol && d.abs() <= tol * scale {
            return Some(t);
        }
        if d == 0.0 || mid == a || mid == b {
            return Some(t);
        }
        if d > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some((0.5 * (a + b)).exp())
}

/// Whether `solution.value` is the objective at `solution.argmin` and no
/// sample of the objective across the domain falls below `value·(1 - tol)`.
pub fn verify_solution(problem: &MinMaxProblem, solution: &MinMaxSolution, samples: usize) -> bool {
    let tol = solution.tol;
    let at = problem.objective(solution.argmin);
    if (at - solution.value).abs() > tol * solution.value.abs().max(f64::MIN_POSITIVE) * 4.0 {
        return false;
    }
    let floor = solution.value * (1.0 - tol);
    problem.grid(samples).into_iter().all(|t| problem.objective(t) >= floor)
}

/// Exact crossing of `f` and `g` in `var`, as a monomial in the other variables.
pub fn crossing(f: &Monomial, g: &Monomial, var: &str) -> Result<Monomial> {
    let de = f.exponent(var) - g.exponent(var);
    if de.is_zero() {
        return if f.same_exponents(g) {
            if f.coeff_log == g.coeff_log {
                Err(Error::InvalidProblem(format!("identical terms: every value of {var} is a crossing")))
            } else {
                Err(Error::NoCrossing { index: 1 })
            }
        } else {
            Err(Error::InvalidProblem(format!("zero exponent difference in {var}: the balance sits on the boundary")))
        };
    }
    // f_rest·t^{e_f} = g_rest·t^{e_g}  ⇒  t = (g_rest/f_rest)^{1/(e_f - e_g)}
    let rest = |m: &Monomial| m.clone().with(var, Rational64::zero());
    Ok(rest(g).div(&rest(f)).pow(de.recip()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentSolution {
    pub variable: String,
    pub crossings: Vec<Monomial>,
    /// The crossing below every other one for all variables `≥ 1`; absent
    /// when the crossings are not totally ordered.
    pub argmin: Option<Monomial>,
    /// Candidates for the optimum; the value is their maximum. A single entry
    /// whenever `argmin` is present.
    pub value: Vec<Monomial>,
}

impl ExponentSolution {
    /// Exponent of `name` in the single value term.
    pub fn value_exponent(&self, name: &str) -> Option<Rational64> {
        match self.value.as_slice() {
            [v] => Some(v.exponent(name)),
            _ => None,
        }
    }
}

pub fn solve_exponents(f: &Monomial, gs: &[Monomial], var: &str) -> Result<ExponentSolution> {
    if !f.exponent(var).is_negative() {
        return Err(Error::InvalidProblem(format!("F must have a negative exponent in {var}")));
    }
    if gs.is_empty() {
        return Err(Error::InvalidProblem("at least one increasing term is required".into()));
    }
    for (j, g) in gs.iter().enumerate() {
        if g.exponent(var).is_negative() {
            return Err(Error::InvalidProblem(format!("G_{} must have a nonnegative exponent in {var}", j + 1)));
        }
    }
    let crossings = gs
        .iter()
        .enumerate()
        .map(|(j, g)| {
            crossing(f, g, var).map_err(|e| match e {
                Error::NoCrossing { .. } => Error::NoCrossing { index: j + 1 },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmin = least(&crossings).cloned();
    let value = match &argmin {
        Some(m) => vec![f.substitute(var, m)],
        None => maximal(crossings.iter().map(|m| f.substitute(var, m)).collect()),
    };
    Ok(ExponentSolution { variable: var.to_string(), crossings, argmin, value })
}

fn least(items: &[Monomial]) -> Option<&Monomial> {
    items.iter().find(|a| items.iter().all(|b| matches!(a.dominance(b), Some(Ordering::Less | Ordering::Equal))))
}

/// Drops every term bounded by another for all variables `≥ 1`; the first of
/// equal-exponent terms is kept.
pub fn maximal(terms: Vec<Monomial>) -> Vec<Monomial> {
    let mut keep: Vec<Monomial> = Vec::new();
    for (i, t) in terms.iter().enumerate() {
        let dominated = terms.iter().enumerate().any(|(j, o)| match t.dominance(o) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => j < i,
            _ => false,
        });
        if !dominated {
            keep.push(t.clone());
        }
    }
    keep
}

#[derive(Clone, Debug, PartialEq)]
pub struct Elimination {
    pub solution: ExponentSolution,
    /// Terms of the bound after the variable is optimized out.
    pub remaining: Vec<Monomial>,
}

/// Optimizes `var` out of a sum of monomial terms.
///
/// Terms decreasing in `var` play `F`, increasing ones the `G_j`; terms free
/// of `var` pass through. With several decreasing terms the optimum is the
/// largest pairwise balance, since the crossing of `max F_i` and `max G_j`
/// is itself the crossing of one pair.
pub fn eliminate(terms: &[Monomial], var: &str) -> Result<Elimination> {
    let (mut fs, mut gs, mut free) = (Vec::new(), Vec::new(), Vec::new());
    for t in terms {
        let e = t.exponent(var);
        if e.is_negative() {
            fs.push(t.clone());
        } else if e.is_positive() {
            gs.push(t.clone());
        } else {
            free.push(t.clone());
        }
    }
    if fs.is_empty() || gs.is_empty() {
        return Err(Error::InvalidProblem(format!("{var} needs both decreasing and increasing terms to balance")));
    }
    let solution = if let [f] = fs.as_slice() {
        solve_exponents(f, &gs, var)?
    } else {
        let mut crossings = Vec::new();
        let mut values = Vec::new();
        for f in &fs {
            for g in &gs {
                let m = crossing(f, g, var)?;
                values.push(f.substitute(var, &m));
                crossings.push(m);
            }
        }
        ExponentSolution { variable: var.to_string(), crossings, argmin: None, value: maximal(values) }
    };
    free.extend(solution.value.iter().cloned());
    Ok(Elimination { remaining: maximal(free), solution })
}

/// Eliminates `vars` in order.
pub fn eliminate_chain(terms: &[Monomial], vars: &[&str]) -> Result<Vec<Elimination>> {
    let mut current = terms.to_vec();
    let mut steps = Vec::new();
    for var in vars {
        let step = eliminate(&current, var)?;
        current = step.remaining.clone();
        steps.push(step);
    }
    Ok(steps)
}

/// Error terms of the `k`-th moment bound in `x` and the parameters `M`, `L`, `K`.
pub fn moment_error_terms(k: u32) -> Vec<Monomial> {
    let a = Rational64::new(3 * k as i64, 2);
    let q = |n: i64, d: i64| Rational64::new(n, d);
    let m = |pairs: &[(&str, Rational64)]| pairs.iter().fold(Monomial::one(), |acc, (v, e)| acc.with(v, *e));
    vec![
        m(&[("x", a + 1), ("L", q(-1, 1))]),
        m(&[("L", q(1, 1)), ("x", a + 1), ("K", q(-1, 1))]),
        m(&[("L", q(1, 1)), ("K", q(1, 2)), ("x", a + q(3, 4))]),
        m(&[("L", q(1, 1)), ("K", q(1, 1)), ("x", a + q(1, 2))]),
        m(&[("L", q(1, 1)), ("M", q(1, 1)), ("x", a + q(1, 4)), ("K", q(-1, 2))]),
        m(&[("L", q(1, 1)), ("x", a + q(1, 4))]),
        m(&[("x", a + 1), ("M", q(-1, 1))]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn boxed(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
        Box::new(f)
    }

    fn grid_min(p: &MinMaxProblem, n: usize) -> f64 {
        p.grid(n).into_iter().map(|t| p.objective(t)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn symmetric_crossing() {
        let p = MinMaxProblem::new(boxed(|t| 1.0 / t), vec![boxed(|t| t)], 1e-6, 1e6).unwrap();
        let s = solve_numeric(&p, 1e-10).unwrap();
        assert!((s.argmin - 1.0).abs() < 1e-9);
        assert!((s.value - 1.0).abs() < 1e-9);
        assert!(s.residual <= 1e-10 * s.value * 4.0);
        assert!(verify_solution(&p, &s, 1000));

        let off = MinMaxSolution { argmin: s.argmin * 1.5, value: p.objective(s.argmin * 1.5), ..s.clone() };
        assert!(!verify_solution(&p, &off, 1000));
    }

    #[test]
    fn earliest_crossing_wins() {
        let p = MinMaxProblem::new(boxed(|t| 1.0 / t), vec![boxed(|t| t / 10.0), boxed(|t| t)], 1e-6, 1e6).unwrap();
        let s = solve_numeric(&p, 1e-10).unwrap();
        assert!((s.crossings[0] - 10f64.sqrt()).abs() < 1e-8);
        assert!((s.argmin - 1.0).abs() < 1e-9);
        assert!(s.value >= s.argmin / 10.0);
        assert!((s.value / grid_min(&p, 100_000) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn numeric_matches_closed_form_balance() {
        let (x, k, kk, l) = (1e6f64, 1.0f64, 50.0f64, 8.0f64);
        let a = 1.5 * k;
        let p = MinMaxProblem::new(
            boxed(move |m| x.powf(a + 1.0) / m),
            vec![boxed(move |m| l * m * x.powf(a + 0.25) / kk.sqrt())],
            1e-3,
            1e9,
        )
        .unwrap();
        let s = solve_numeric(&p, 1e-12).unwrap();
        let expected = kk.powf(0.25) * x.powf(0.375) / l.sqrt();
        assert!((s.argmin / expected - 1.0).abs() < 1e-9);
        assert!((s.value / grid_min(&p, 100_000) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn scale_covariance() {
        let base = solve_numeric(&MinMaxProblem::new(boxed(|t| 3.0 / t), vec![boxed(|t| t * t)], 1e-3, 1e3).unwrap(), 1e-12).unwrap();
        let c = 7.5;
        let scaled =
            solve_numeric(&MinMaxProblem::new(boxed(move |t| c * 3.0 / t), vec![boxed(move |t| c * t * t)], 1e-3, 1e3).unwrap(), 1e-12)
                .unwrap();
        assert!((scaled.argmin / base.argmin - 1.0).abs() < 1e-10);
        assert!((scaled.value / (c * base.value) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn numeric_failures() {
        let no_cross = MinMaxProblem::new(boxed(|t| 1.0 / t), vec![boxed(|t| t), boxed(|t| 1e9 + t)], 1e-3, 1e3).unwrap();
        assert_eq!(solve_numeric(&no_cross, 1e-9), Err(Error::NoCrossing { index: 2 }));
        assert!(matches!(
            MinMaxProblem::new(boxed(|t| t), vec![boxed(|t| t)], 1e-3, 1e3),
            Err(Error::InvalidProblem(_))
        ));
        assert!(matches!(
            MinMaxProblem::new(boxed(|t| 1.0 / t), vec![boxed(|t| (t - 1.0).abs())], 1e-3, 1e3),
            Err(Error::InvalidProblem(_))
        ));
        assert!(MinMaxProblem::new(boxed(|t| 1.0 / t), vec![], 1e-3, 1e3).is_err());
        assert!(MinMaxProblem::new(boxed(|t| 1.0 / t), vec![boxed(|t| t)], 0.0, 1e3).is_err());
    }

    #[test]
    fn exponent_examples() {
        for k in 1..=3i64 {
            let a = q(3 * k, 2);
            let f = Monomial::one().with("x", a + 1).with("K", q(-1, 2));
            let g = Monomial::one().with("x", a + q(7, 8)).with("K", q(1, 4));
            let s = solve_exponents(&f, std::slice::from_ref(&g), "K").unwrap();
            let arg = s.argmin.clone().unwrap();
            assert_eq!(arg, Monomial::var("x", q(1, 6)));
            assert_eq!(s.value_exponent("x"), Some(a + q(11, 12)));
            assert_eq!(f.substitute("K", &arg).exponents(), g.substitute("K", &arg).exponents());
        }

        let t = solve_exponents(&Monomial::parse("x:1,t:-1").unwrap(), &[Monomial::parse("x:1,t:1").unwrap()], "t").unwrap();
        assert_eq!(t.argmin.unwrap(), Monomial::one());
        assert_eq!(t.value, vec![Monomial::var("x", q(1, 1))]);

        let k = 1;
        let a = q(3 * k, 2);
        let f = Monomial::one().with("x", a + 1).with("M", q(-1, 1));
        let g = Monomial::parse("L:1,M:1,K:-1/2").unwrap().with("x", a + q(1, 4));
        let m = solve_exponents(&f, &[g], "M").unwrap().argmin.unwrap();
        assert_eq!(m, Monomial::parse("K:1/4,x:3/8,L:-1/2").unwrap());
    }

    #[test]
    fn exponent_failures() {
        let f = Monomial::parse("x:1,t:-1").unwrap();
        assert!(matches!(solve_exponents(&f, &[Monomial::parse("t:-1").unwrap()], "t"), Err(Error::InvalidProblem(_))));
        assert!(matches!(solve_exponents(&Monomial::parse("t:1").unwrap(), std::slice::from_ref(&f), "t"), Err(Error::InvalidProblem(_))));
        assert_eq!(crossing(&f, &f.clone().with_coeff_log(1.0), "t"), Err(Error::NoCrossing { index: 1 }));
        assert!(matches!(crossing(&f, &f, "t"), Err(Error::InvalidProblem(_))));
        assert!(matches!(crossing(&f, &Monomial::parse("x:2,t:-1").unwrap(), "t"), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn chain_yields_eleven_twelfths() {
        for k in 1..=3u32 {
            let steps = eliminate_chain(&moment_error_terms(k), &["M", "L", "K"]).unwrap();
            assert_eq!(steps[0].solution.argmin.clone().unwrap(), Monomial::parse("K:1/4,x:3/8,L:-1/2").unwrap());
            assert!(steps[1].solution.argmin.is_none());
            assert_eq!(steps[1].remaining.len(), 3);
            assert_eq!(steps[2].solution.argmin.clone().unwrap(), Monomial::var("x", q(1, 6)));
            assert_eq!(steps[2].remaining, vec![Monomial::var("x", q(3 * k as i64, 2) + q(11, 12))]);
        }
    }

    #[test]
    fn balanced_instance_verifies_numerically() {
        let k = 1;
        let a = q(3 * k, 2);
        let f = Monomial::one().with("x", a + 1).with("K", q(-1, 2));
        let g = Monomial::one().with("x", a + q(7, 8)).with("K", q(1, 4));
        let env: BTreeMap<String, f64> = [("x".to_string(), 1e6)].into();
        let p = MinMaxProblem::from_monomials(&f, &[g], "K", &env, 1.0, 1e6).unwrap();
        let s = solve_numeric(&p, 1e-10).unwrap();
        assert!((s.argmin / 1e6f64.powf(1.0 / 6.0) - 1.0).abs() < 1e-8);
        assert!(verify_solution(&p, &s, 10_000));
    }
}
