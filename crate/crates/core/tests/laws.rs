//! Algebraic laws and structural invariants, checked on random samples.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

use ertkit::ert::{ert_eval, ert_series, kleene_iterates, ErtConfig, Unrolling};
use ertkit::gen::{rng, Gen, GenConfig};
use ertkit::invariants::{check_omega_invariant, check_upper_invariant, refine, Bound, Direction, OmegaSpec};
use ertkit::kernel::{q_add, q_div, q_mul, q_sub};
use ertkit::lang::{eval_dist, eval_rt, parse_program, parse_rt, pretty, Expr, Program, RtExpr};
use ertkit::mdp::{build_mdp, label_reward};
use ertkit::props::full_domain;
use ertkit::{Rational, State, XReal};

fn rational() -> impl Strategy<Value = Rational> {
    (0i64..40, 1i64..12).prop_map(|(n, d)| Rational::new(n.into(), d.into()))
}

fn signed_rational() -> impl Strategy<Value = Rational> {
    (-50i64..50, 1i64..12).prop_map(|(n, d)| Rational::new(n.into(), d.into()))
}

fn xreal() -> impl Strategy<Value = XReal> {
    prop_oneof![
        1 => Just(XReal::Infinity),
        1 => Just(XReal::zero()),
        6 => rational().prop_map(XReal::Finite),
    ]
}

fn sample<T>(seed: u64, cfg: GenConfig, f: impl FnOnce(&mut Gen<'_, rand_chacha::ChaCha8Rng>) -> T) -> T {
    let mut r = rng(seed, 0);
    let mut g = Gen { rng: &mut r, cfg };
    f(&mut g)
}

fn first_loop(p: &Program) -> Option<Program> {
    p.loop_paths()
        .into_iter()
        .filter_map(|path| p.at_path(&path).cloned())
        .find(|w| matches!(w, Program::While(..)))
}

fn assignments<'p>(p: &'p Program, out: &mut Vec<&'p ertkit::lang::DistExpr>) {
    match p {
        Program::Assign(_, d) | Program::If(d, ..) | Program::While(d, ..) | Program::Bounded(_, d, _) => out.push(d),
        _ => {}
    }
    for c in p.children() {
        assignments(c, out);
    }
}

fn solving() -> ErtConfig {
    ErtConfig::default().solving()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn order_is_total(a in xreal(), b in xreal(), c in xreal()) {
        prop_assert!(a <= a);
        prop_assert!(a <= b || b <= a);
        if a <= b && b <= a {
            prop_assert_eq!(&a, &b);
        }
        if a <= b && b <= c {
            prop_assert!(a <= c);
        }
    }

    #[test]
    fn addition_and_multiplication(a in xreal(), b in xreal(), c in xreal()) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&a + &XReal::zero(), a.clone());
        prop_assert_eq!(&a * &XReal::one(), a.clone());
        prop_assert_eq!(&a * &XReal::zero(), XReal::zero());
    }

    #[test]
    fn operations_are_monotone(a in xreal(), b in xreal(), x in xreal(), y in xreal()) {
        let (a, a2) = (a.clone().min(x.clone()), a.max(x));
        let (b, b2) = (b.clone().min(y.clone()), b.max(y));
        prop_assert!(&a + &b <= &a2 + &b2);
        prop_assert!(&a * &b <= &a2 * &b2);
    }

    #[test]
    fn rational_helpers_agree(a in signed_rational(), b in signed_rational()) {
        prop_assert_eq!(q_add(&a, &b), &a + &b);
        prop_assert_eq!(q_sub(&a, &b), &a - &b);
        prop_assert_eq!(q_mul(&a, &b), &a * &b);
        if !b.is_zero() {
            prop_assert_eq!(q_div(&a, &b), &a / &b);
        }
    }

    #[test]
    fn monus_stays_nonnegative(a in xreal(), b in xreal()) {
        if let Ok(d) = a.monus(&b) {
            prop_assert!(d >= XReal::zero());
            if !b.is_infinite() {
                prop_assert!(d <= a);
            }
        }
    }

    #[test]
    fn xreal_prints_and_parses(a in xreal()) {
        prop_assert_eq!(XReal::parse(&a.to_string()), Some(a));
    }

    #[test]
    fn states_print_and_parse(seed in any::<u64>()) {
        let s = sample(seed, GenConfig::default(), |g| g.state());
        let s = s.with_array("cp", vec![ertkit::kernel::Value::int(0), ertkit::kernel::Value::int(1)]);
        prop_assert_eq!(State::parse(&s.to_string()).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distributions_have_mass_one(seed in any::<u64>()) {
        let (p, s) = sample(seed, GenConfig::default(), |g| (g.program(4, &[], false), g.state()));
        let mut ds = Vec::new();
        assignments(&p, &mut ds);
        for d in ds {
            let out = eval_dist(d, &s).unwrap();
            let total: Rational = out.iter().map(|(_, q)| q.clone()).sum();
            prop_assert!(total.is_one(), "{} sums to {}", pretty::dist(d), total);
            prop_assert!(out.iter().all(|(_, q)| q.is_positive()));
        }
    }

    #[test]
    fn programs_print_and_parse(seed in any::<u64>()) {
        let p = sample(seed, GenConfig::default(), |g| g.program(4, &[], false));
        prop_assert_eq!(&parse_program(&pretty::program(&p)).unwrap(), &p);
        prop_assert_eq!(&parse_program(&pretty::program_inline(&p)).unwrap(), &p);
    }

    #[test]
    fn runtimes_print_and_parse(seed in any::<u64>()) {
        let f = sample(seed, GenConfig::default(), |g| g.rt());
        prop_assert_eq!(parse_rt(&pretty::rt(&f)).unwrap(), f);
    }

    #[test]
    fn indicators_are_zero_or_one(seed in any::<u64>()) {
        let (f, s) = sample(seed, GenConfig::default(), |g| (g.rt(), g.state()));
        let mut found = Vec::new();
        collect_indicators(&f, &mut found);
        for b in found {
            let v = eval_rt(&RtExpr::Indicator(b), &s, None).unwrap();
            prop_assert!(v == XReal::zero() || v == XReal::one());
        }
    }

    #[test]
    fn geometric_series_closed_form(n in 0i64..30, d in 1i64..30) {
        let r = XReal::ratio(n, d);
        let g = eval_rt(&RtExpr::Geo(Box::new(RtExpr::Const(r.clone()))), &State::new(), None).unwrap();
        if n < d {
            let one_minus = XReal::Finite(Rational::one() - r.finite().unwrap());
            prop_assert_eq!(&g * &one_minus, XReal::one());
        } else {
            prop_assert_eq!(g, XReal::Infinity);
        }
    }

    #[test]
    fn geo_family_grows_with_n(a in rational(), c in 0i64..3) {
        let src = format!("1 + [c = 1]*(({a}) - ({a})*(1/2)^n)");
        let i = parse_rt(&src).unwrap();
        let s = State::new().with_int("c", c);
        let mut prev = XReal::zero();
        for n in 0..20 {
            let v = eval_rt(&i, &s, Some(n)).unwrap();
            prop_assert!(v >= prev);
            prev = v;
        }
    }
}

fn collect_indicators(f: &RtExpr, out: &mut Vec<Expr>) {
    if let RtExpr::Indicator(b) = f {
        out.push(b.clone());
    }
    for c in f.children() {
        collect_indicators(c, out);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kleene_chain_is_increasing(seed in any::<u64>()) {
        let (p, f, s) = sample(seed, GenConfig::default(), |g| (g.program(3, &[], false), g.rt(), g.state()));
        let Some(w) = first_loop(&p) else { return Ok(()) };
        let xs = kleene_iterates(&w, &f, 12, &s, &ErtConfig::default()).unwrap();
        for k in 1..xs.len() {
            prop_assert!(xs[k - 1] <= xs[k], "iterate {} of {}", k, pretty::program_inline(&w));
        }
    }

    #[test]
    fn unrolling_approaches_from_below(seed in any::<u64>()) {
        let cfg = GenConfig { choice: false, ..GenConfig::default() };
        let (p, f, s) = sample(seed, cfg, |g| (g.program(3, &[], false), g.rt(), g.state()));
        let exact = ert_eval(&p, &f, &s, &solving()).unwrap();
        let fixed = ErtConfig { unrolling: Unrolling::Fixed, ..ErtConfig::default() };
        let series = ert_series(&p, &f, &s, &fixed, &[1, 2, 4, 8, 16]).unwrap();
        for k in 1..series.len() {
            prop_assert!(series[k - 1].value <= series[k].value);
        }
        if exact.kind.is_exact() {
            for r in &series {
                prop_assert!(r.value <= exact.value, "{} > {}", r.value, exact.value);
            }
        }
    }

    #[test]
    fn least_fixed_point_is_an_upper_invariant(seed in any::<u64>()) {
        let cfg = GenConfig { choice: false, ..GenConfig::default() };
        let (p, f) = sample(seed, cfg, |g| (g.program(3, &[], false), g.rt()));
        let Some(w) = first_loop(&p) else { return Ok(()) };
        let d = full_domain();
        let mut table = ertkit::invariants::Table::new();
        for s in d.states() {
            let r = ert_eval(&w, &f, &s, &solving()).unwrap();
            prop_assume!(r.kind.is_exact());
            table.insert(s, r.value);
        }
        let v = check_upper_invariant(&w, &f, &Bound::Table(table), &d, &solving()).unwrap();
        prop_assert!(v.holds(), "{}: {}", pretty::program_inline(&w), v);
    }

    #[test]
    fn upper_invariants_bound_the_runtime(seed in any::<u64>(), k in 1i64..12) {
        let cfg = GenConfig { choice: false, ..GenConfig::default() };
        let (p, f, extra) = sample(seed, cfg, |g| (g.program(3, &[], false), g.rt(), g.rt()));
        let Some(w) = first_loop(&p) else { return Ok(()) };
        let i = RtExpr::add(RtExpr::mul(RtExpr::int(k), parse_rt("1 + a + b + c").unwrap()), extra);
        let d = full_domain();
        let v = check_upper_invariant(&w, &f, &Bound::Expr(i.clone()), &d, &solving()).unwrap();
        if v.holds() {
            for s in d.states() {
                let r = ert_eval(&w, &f, &s, &solving()).unwrap();
                if r.kind.is_exact() {
                    prop_assert!(r.value <= eval_rt(&i, &s, None).unwrap());
                }
            }
        }
    }

    #[test]
    fn refinement_is_monotone(seed in any::<u64>(), k in 1i64..12, upper in any::<bool>()) {
        let cfg = GenConfig { choice: false, ..GenConfig::default() };
        let (p, f) = sample(seed, cfg, |g| (g.program(3, &[], false), g.rt()));
        let Some(w) = first_loop(&p) else { return Ok(()) };
        let (start, dir) = if upper {
            (RtExpr::mul(RtExpr::int(k), parse_rt("4 + a + b + c").unwrap()), Direction::Upper)
        } else {
            (RtExpr::int(0), Direction::Lower)
        };
        let d = full_domain();
        let Ok(tables) = refine(&w, &f, Bound::Expr(start), &d, 4, dir, &solving()) else { return Ok(()) };
        for pair in tables.windows(2) {
            for (s, x) in &pair[0] {
                let y = &pair[1][s];
                match dir {
                    Direction::Upper => prop_assert!(y <= x),
                    Direction::Lower => prop_assert!(y >= x),
                }
            }
        }
    }

    #[test]
    fn lower_omega_invariants_stay_below_iterates(a in rational()) {
        let w = parse_program("while (c = 1) { c :~ 1/2*<0> + 1/2*<1> }").unwrap();
        let f = RtExpr::int(0);
        let i = parse_rt(&format!("1 + [c = 1]*(({a}) - ({a})*(1/2)^n)")).unwrap();
        let spec = OmegaSpec { invariant: i.clone(), direction: Direction::Lower, limit: None };
        let d = ertkit::invariants::StateDomain::ranges(&[("c", 0, 1)]).unwrap();
        let n_max = 10;
        let v = check_omega_invariant(&w, &f, &spec, n_max, &d, &ErtConfig::default()).unwrap();
        // At c = 1: F(I_n) = 3 + a/2 - a/2^(n+1), which covers I_(n+1) iff a <= 4.
        prop_assert_eq!(v.holds(), a <= Rational::from_integer(BigInt::from(4)));
        if v.holds() {
            for s in d.states() {
                let xs = kleene_iterates(&w, &f, n_max as usize + 2, &s, &ErtConfig::default()).unwrap();
                for n in 0..=n_max {
                    prop_assert!(eval_rt(&i, &s, Some(n)).unwrap() <= xs[n as usize + 1]);
                }
            }
        }
    }

    #[test]
    fn mdp_rows_and_rewards(seed in any::<u64>(), choice in any::<bool>()) {
        let cfg = GenConfig { choice, ..GenConfig::default() };
        let (p, f, s) = sample(seed, cfg, |g| (g.program(3, &[], false), g.rt(), g.state()));
        let m = build_mdp(&p, &f, &s, 20_000).unwrap();
        for node in &m.nodes {
            prop_assert!(!node.actions.is_empty());
            if !p.has_choice() {
                prop_assert_eq!(node.actions.len(), 1);
            }
            for (_, row) in &node.actions {
                let total: Rational = row.iter().map(|(_, q)| q.clone()).sum();
                prop_assert!(total.is_one());
            }
            prop_assert_eq!(&label_reward(&m, &node.key, &f).unwrap(), &node.reward);
        }
    }
}
