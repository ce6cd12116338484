//! Property tests: enclosure containment, precision monotonicity, determinism.

use proptest::prelude::*;
use rug::Rational;

use stochcert::certificate::check;
use stochcert::tuner::CandidateInputs;
use stochcert::{Decimal, FormulaMode, Precision, RInterval, Verdict};

fn p(bits: u32) -> Precision {
    Precision::new(bits).unwrap()
}

fn ratio() -> impl Strategy<Value = (i64, i64)> {
    (-1_000_000i64..=1_000_000, 1i64..=1_000_000)
}

fn q((n, d): (i64, i64)) -> Rational {
    Rational::from((n, d))
}

fn iv((n, d): (i64, i64), prec: Precision) -> RInterval {
    RInterval::from_ratio(n, d, prec).unwrap()
}

proptest! {
    #[test]
    fn field_ops_contain_exact_result(a in ratio(), b in ratio(), bits in 64u32..400) {
        let prec = p(bits);
        let (x, y) = (iv(a, prec), iv(b, prec));
        prop_assert!((&x + &y).contains_rational(&(q(a) + q(b))));
        prop_assert!((&x - &y).contains_rational(&(q(a) - q(b))));
        prop_assert!((&x * &y).contains_rational(&(q(a) * q(b))));
        if a.0 != 0 {
            prop_assert!(y.div(&x).unwrap().contains_rational(&(q(b) / q(a))));
        }
    }

    #[test]
    fn powi_contains_exact_power(a in ratio(), n in 0i64..12) {
        let x = iv(a, p(128));
        let mut exact = Rational::from(1);
        for _ in 0..n {
            exact *= q(a);
        }
        prop_assert!(x.powi(n).unwrap().contains_rational(&exact));
    }

    #[test]
    fn elementary_inverses_contain_input(a in (1i64..=1_000_000, 1i64..=1000)) {
        let x = iv(a, p(200));
        prop_assert!(x.ln().unwrap().exp().unwrap().intersects(&x));
        prop_assert!(x.sqrt().unwrap().sqr().intersects(&x));
        prop_assert!(x.ln_1p().unwrap().exp_m1().unwrap().intersects(&x));
    }

    #[test]
    fn exp_and_ln_are_monotone(a in ratio(), b in ratio()) {
        prop_assume!(q(a) < q(b));
        let prec = p(128);
        let (x, y) = (iv(a, prec), iv(b, prec));
        prop_assert!(x.exp().unwrap().lo() <= y.exp().unwrap().hi());
        if a.0 > 0 {
            prop_assert!(x.ln().unwrap().lo() <= y.ln().unwrap().hi());
        }
    }

    #[test]
    fn doubling_precision_never_widens(a in (1i64..=1_000_000, 1i64..=1000), bits in 64u32..300) {
        let lo = iv(a, p(bits));
        let hi = iv(a, p(bits).doubled());
        let f = |x: &RInterval| x.ln().unwrap().exp().unwrap().sqrt().unwrap();
        prop_assert!(hi.width() <= lo.width());
        prop_assert!(f(&hi).width() <= f(&lo).width());
        prop_assert!(f(&hi).intersects(&f(&lo)));
    }

    #[test]
    fn repr_round_trip_is_exact(a in ratio(), bits in 64u32..600) {
        let prec = p(bits);
        let x = iv(a, prec).exp().unwrap();
        let back = RInterval::from_repr(&x.to_repr(), prec).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn decimal_display_round_trips(m in -10_000_000i128..10_000_000, e in -40i32..40) {
        let d = Decimal::new(m, e);
        let back: Decimal = d.to_string().parse().unwrap();
        prop_assert_eq!(back, d);
    }
}

fn inputs() -> impl Strategy<Value = CandidateInputs> {
    let frac = || (5i128..=95).prop_map(|m| Decimal::new(m, -2));
    (
        2u32..=1200,
        1u32..=3000,
        (50i128..=95),
        frac(),
        frac(),
        frac(),
    )
        .prop_map(|(d, extra, iota, sa, sg1, sg2)| CandidateInputs {
            delta_exp: d,
            iota: Decimal::new(iota, -2),
            eps_exp: 2 * d + extra,
            s_alpha1: sa,
            s_gamma1: sg1,
            s_gamma2: sg2,
            ..CandidateInputs::reference()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_verdicts_are_stable_and_deterministic(c in inputs(), mode in prop_oneof![Just(FormulaMode::Compat), Just(FormulaMode::Strict)]) {
        let a = check(&c, mode, Precision::chain());
        let b = check(&c, mode, Precision::chain());
        prop_assert_eq!(&a, &b);
        let hi = check(&c, mode, Precision::chain().doubled());
        if let (Ok(a), Ok(hi)) = (a, hi) {
            for (x, y) in a.conditions.iter().zip(&hi.conditions) {
                let flip = matches!(
                    (x.holds, y.holds),
                    (Verdict::Proved, Verdict::Refuted) | (Verdict::Refuted, Verdict::Proved)
                );
                prop_assert!(!flip, "{} flipped", x.name);
            }
        }
    }
}
