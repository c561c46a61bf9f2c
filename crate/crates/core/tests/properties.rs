use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::Zero;
use proptest::prelude::*;

use cannonball::equidist::{exp_sum, kn_bound, star_discrepancy, FixedPoints};
use cannonball::exactseq::{pyramidal, term, Side};
use cannonball::minimax::{solve_exponents, solve_numeric, verify_solution, MinMaxProblem};
use cannonball::moments::{sandwich_with, PowerSums};
use cannonball::monomial::Monomial;
use cannonball::Parallelism;

fn small_par(workers: usize, chunk: u64) -> Parallelism {
    Parallelism::new(workers, chunk).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn term_invariants(n in 1u64..u64::MAX / 4) {
        let t = term(n);
        prop_assert_eq!(&t.p, &pyramidal(n));
        let f1 = &t.f + 1u32;
        prop_assert!(&t.f * &t.f <= t.p && t.p < &f1 * &f1);
        let below = &t.p - &t.f * &t.f;
        let above = &f1 * &f1 - &t.p;
        prop_assert_eq!(&t.a, if below <= above { &below } else { &above });
        prop_assert!(t.y == t.f || t.y == f1);
        // {√P} < 1/2 ⇔ 4P < (2f+1)²
        let twice = &t.f * 2u32 + 1u32;
        prop_assert_eq!(t.side == Side::BelowHalf, &t.p * 4u32 < &twice * &twice);
    }

    #[test]
    fn chunked_sums_match_sequential(lo in 1u64..5_000, len in 0u64..3_000, chunk in 1u64..700, k in 1u32..5) {
        let hi = lo + len;
        let par = PowerSums::compute(&[k], lo, hi, &small_par(3, chunk)).unwrap();
        let direct: BigUint = (lo..=hi).map(|n| term(n).a.pow(k)).sum();
        prop_assert_eq!(par.sums()[0].clone(), direct);
    }

    #[test]
    fn sandwich_always_certifies(x in 1u64..3_000, k in 1u32..6, half in 1u64..40) {
        let r = sandwich_with(x, k, 2 * half, &small_par(2, 257)).unwrap();
        prop_assert!(r.certified());
        prop_assert!(r.lower.cmp_int(&r.exact.clone().into()).is_le());
        prop_assert!(r.upper.cmp_int(&r.exact.clone().into()).is_ge());
    }

    #[test]
    fn exp_sums_respect_bounds(lo in 1u64..10_000, len in 1u64..2_000, m in 1i64..20) {
        let s = exp_sum(lo, lo + len, m, 96).unwrap();
        prop_assert!(s.modulus() <= (len + 1) as f64 + s.abs_error);
        prop_assert!(s.modulus() <= kn_bound(lo, lo + len, m as u64).unwrap() + s.abs_error);
    }

    #[test]
    fn discrepancy_in_unit_range(vals in proptest::collection::vec(0.0f64..1.0, 1..500)) {
        let d = star_discrepancy(&vals).unwrap();
        prop_assert!(d.d_star > 0.0 && d.d_star <= 1.0);
        prop_assert!(d.d_star >= 0.5 / vals.len() as f64 - 1e-15);
    }

    #[test]
    fn fixed_points_reject_out_of_range(bits in 1u32..=96) {
        let limit = 1u128 << bits;
        prop_assert!(FixedPoints::new(bits, vec![limit - 1]).is_ok());
        prop_assert!(FixedPoints::new(bits, vec![limit]).is_err());
    }

    #[test]
    fn exponent_mode_is_sound(
        fe in -6i64..-1, ge in 1i64..6, fd in 1i64..5, gd in 1i64..5,
        fx in -8i64..8, gx in -8i64..8, fy in -3i64..3, gy in -3i64..3,
    ) {
        let f = Monomial::one().with("t", Rational64::new(fe, fd)).with("x", Rational64::new(fx, 4)).with("y", Rational64::new(fy, 2));
        let g = Monomial::one().with("t", Rational64::new(ge, gd)).with("x", Rational64::new(gx, 4)).with("y", Rational64::new(gy, 2));
        let s = solve_exponents(&f, std::slice::from_ref(&g), "t").unwrap();
        let arg = s.argmin.unwrap();
        prop_assert!(arg.exponent("t").is_zero());
        let (fa, ga) = (f.substitute("t", &arg), g.substitute("t", &arg));
        prop_assert_eq!(fa.exponents(), ga.exponents());
        prop_assert_eq!(s.value[0].exponents(), fa.exponents());
    }

    #[test]
    fn numeric_mode_matches_grid(a in 0.2f64..3.0, b in 0.2f64..3.0, c in 0.1f64..10.0, d in 0.1f64..10.0) {
        let p = MinMaxProblem::new(
            Box::new(move |t: f64| c * t.powf(-a)),
            vec![Box::new(move |t: f64| d * t.powf(b))],
            1e-4,
            1e4,
        ).unwrap();
        let s = solve_numeric(&p, 1e-10).unwrap();
        prop_assert!(s.residual <= 1e-8 * s.value);
        prop_assert!(verify_solution(&p, &s, 2_000));
        let (lo, hi) = p.domain();
        let grid_min = (0..100_000)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / 99_999.0).exp())
            .map(|t| p.objective(t))
            .fold(f64::INFINITY, f64::min);
        if s.argmin > lo && s.argmin < hi {
            prop_assert!((s.value / grid_min - 1.0).abs() < 1e-3);
        }
    }
}

#[test]
fn monomial_problems_evaluate_like_closures() {
    let f = Monomial::parse("x:5/2,M:-1").unwrap();
    let g = Monomial::parse("L:1,M:1,x:7/4,K:-1/2").unwrap();
    let env: BTreeMap<String, f64> = [("x", 1e6), ("K", 40.0), ("L", 12.0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let p = MinMaxProblem::from_monomials(&f, &[g], "M", &env, 1e-2, 1e8).unwrap();
    let s = solve_numeric(&p, 1e-12).unwrap();
    let expected = 40f64.powf(0.25) * 1e6f64.powf(0.375) / 12f64.sqrt();
    assert!((s.argmin / expected - 1.0).abs() < 1e-9);
}
