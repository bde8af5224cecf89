//! Acceptance gate: one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};

use ertkit::corpus;
use ertkit::ert::{ert_eval, ert_series, kleene_until, ErtConfig, Kind, Mutation};
use ertkit::invariants::{
    check_limit, check_omega_invariant, check_upper_invariant, rw_closed_form, rw_coefficients, Bound, Direction,
    OmegaSpec, StateDomain,
};
use ertkit::lang::{parse_rt, RtExpr};
use ertkit::mdp::{build_mdp, cross_check, expected_reward, CrossCheckConfig, Method, RewardConfig, Verdict};
use ertkit::props::{run_deterministic, run_props, Property, PropsConfig};
use ertkit::{Error, Rational, State, XReal};

type Outcome = Result<Vec<String>, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e(err: Error) -> String {
    err.to_string()
}

fn rt(s: &str) -> RtExpr {
    parse_rt(s).expect("run-time expression")
}

fn no_params() -> BTreeMap<String, i64> {
    BTreeMap::new()
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn criterion_1() -> Outcome {
    let p = corpus::program("trunc", &no_params()).map_err(e)?;
    let r = ert_eval(&p, &rt("0"), &State::new(), &ErtConfig::default()).map_err(e)?;
    ensure(r.kind == Kind::Exact && r.value == XReal::ratio(5, 2), format!("ert = {} ({})", r.value, r.kind))?;
    let c = cross_check(&p, &rt("0"), &State::new(), &CrossCheckConfig::default()).map_err(e)?;
    ensure(
        c.verdict == Verdict::Agree && c.mdp.method == Method::Exact && c.mdp.value == XReal::ratio(5, 2),
        format!("MDP {} by {:?}", c.mdp.value, c.mdp.method),
    )?;
    Ok(vec![format!("ert 5/2 exact, MDP 5/2 by linear solve ({} nodes)", c.nodes)])
}

fn criterion_2() -> Outcome {
    let p = corpus::program("geo", &no_params()).map_err(e)?;
    let c1 = State::new().with_int("c", 1);
    let c0 = State::new().with_int("c", 0);
    let r = ert_eval(&p, &rt("0"), &c1, &ErtConfig::default()).map_err(e)?;
    let floor = XReal::int(5).monus(&XReal::Finite(rat(1, 1 << 50))).map_err(|x| x.to_string())?;
    ensure(
        r.kind == (Kind::LowerBound { depth: 64 }) && r.value >= floor && r.value < XReal::int(5),
        format!("ert at c=1 = {} ({})", r.value, r.kind),
    )?;
    let spec = rt("1 + [c = 1]*4");
    let mut mdp_vals = Vec::new();
    for s in [&c1, &c0] {
        let m = build_mdp(&p, &rt("0"), s, 10_000).map_err(e)?;
        let a = expected_reward(&m, &RewardConfig::default()).map_err(e)?;
        let want = ertkit::lang::eval_rt(&spec, s, None).map_err(|x| x.to_string())?;
        ensure(a.method == Method::Exact && a.value == want, format!("MDP at {s} = {} by {:?}", a.value, a.method))?;
        mdp_vals.push(a.value.to_string());
    }
    Ok(vec![format!(
        "ert(c=1) = {:.15} lower bound at depth 64; MDP exact {} and {}",
        r.value.to_f64(),
        mdp_vals[0],
        mdp_vals[1]
    )])
}

fn criterion_3() -> Outcome {
    let p = corpus::program("geo", &no_params()).map_err(e)?;
    let cfg = ErtConfig::default();
    let d = StateDomain::ranges(&[("c", 0, 1)]).map_err(e)?;
    let zero = rt("0");
    let v = check_upper_invariant(&p, &zero, &Bound::Expr(rt("1 + [c = 1]*4")), &d, &cfg).map_err(e)?;
    ensure(v.holds(), format!("upper invariant: {v}"))?;
    let mut notes = vec![format!("upper invariant {v}")];
    for direction in [Direction::Lower, Direction::Upper] {
        let spec = OmegaSpec {
            invariant: rt("1 + [c = 1]*(4 - 3/2^n)"),
            direction,
            limit: Some(rt("1 + [c = 1]*4")),
        };
        let v = check_omega_invariant(&p, &zero, &spec, 50, &d, &cfg).map_err(e)?;
        ensure(v.holds(), format!("{direction:?} omega-invariant: {v}"))?;
        let tol = rat(1, 1_000_000_000_000);
        let lim = check_limit(&spec, &d, 60, &tol, &Rational::from_integer(1_000_000.into())).map_err(e)?;
        ensure(!lim.fails(), format!("limit: {lim}"))?;
        notes.push(format!("{direction:?} omega n<=50 {v}; limit {lim}"));
    }
    Ok(notes)
}

fn criterion_4() -> Outcome {
    let mut notes = Vec::new();
    for n in [2i64, 3] {
        let params: BTreeMap<String, i64> = [("N".to_string(), n)].into();
        let p = corpus::program("coupon", &params).map_err(e)?;
        let want = XReal::Finite(corpus::coupon_closed_form(n as u64));
        let m = build_mdp(&p, &rt("0"), &State::new(), 200_000).map_err(e)?;
        let a = expected_reward(&m, &RewardConfig::default()).map_err(e)?;
        ensure(a.method == Method::Exact && a.value == want, format!("N={n}: MDP {} vs closed form {want}", a.value))?;
        let depths = [8, 16, 32, 64, 128, 256, 500];
        let series = ert_series(&p, &rt("0"), &State::new(), &ErtConfig::default(), &depths).map_err(e)?;
        let monotone = series.windows(2).all(|w| w[0].value <= w[1].value);
        let below = series.iter().all(|r| r.value <= want);
        let last = &series.last().expect("nonempty").value;
        let gap = want.distance(last);
        ensure(monotone && below && gap <= 1e-6, format!("N={n}: monotone {monotone}, below {below}, gap {gap:e}"))?;
        notes.push(format!("N={n}: MDP {} = closed form, ert gap {gap:.1e} at depth 500", a.value));
    }
    Ok(notes)
}

fn criterion_5() -> Outcome {
    let p = corpus::program("rwalk", &no_params()).map_err(e)?;
    let s = State::new().with_int("x", 1);
    let it = kleene_until(&p, &rt("0"), &s, &XReal::int(10), 2000, &ErtConfig::default()).map_err(e)?;
    let strictly = it.windows(2).all(|w| w[0] < w[1]);
    let last = it.last().cloned().unwrap_or_default();
    ensure(strictly && last > XReal::int(10), format!("{} iterates, last {last}", it.len()))?;
    let rows = rw_coefficients(40);
    for (n, row) in rows.iter().enumerate().take(21) {
        for (k, a) in row.iter().enumerate() {
            ensure(*a == rw_closed_form(n, k), format!("a({n},{k}) = {a} but closed form {}", rw_closed_form(n, k)))?;
        }
    }
    for (n, row) in rows.iter().enumerate().skip(2) {
        let h: Rational = (1..=n / 2).map(|k| rat(1, k as i64)).fold(Rational::zero(), |a, b| a + b);
        ensure(row[0] >= Rational::one() + h.clone(), format!("a({n},0) = {} < 1 + H({})", row[0], n / 2))?;
    }
    Ok(vec![format!(
        "F^{}(0) = {} > 10, strictly increasing; a(n,k) closed form for n <= 20; harmonic bound for n <= 40",
        it.len(),
        last
    )])
}

fn criterion_6() -> Outcome {
    let solve = ErtConfig::default().solving();
    let c1 = corpus::program("npast-c1", &no_params()).map_err(e)?;
    let r = ert_eval(&c1, &rt("0"), &State::new(), &solve).map_err(e)?;
    ensure(r.kind == Kind::Exact && r.value == XReal::int(9), format!("C1: {} ({})", r.value, r.kind))?;
    let c2 = corpus::program("npast-c2", &no_params()).map_err(e)?;
    for x in 0..=8 {
        let r = ert_eval(&c2, &rt("0"), &State::new().with_int("x", x), &ErtConfig::default()).map_err(e)?;
        ensure(r.kind == Kind::Exact && r.value == XReal::int(1 + 2 * x), format!("C2 at x={x}: {}", r.value))?;
    }
    let checks = corpus::run_checks("npast", &no_params(), &corpus::CorpusOptions::default()).map_err(e)?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c.status == corpus::CheckStatus::Fail)
        .map(|c| c.name.as_str())
        .collect();
    ensure(failed.is_empty(), format!("failed corpus checks: {failed:?}"))?;
    let p = corpus::program("npast", &no_params()).map_err(e)?;
    let top = ert_eval(&p, &rt("0"), &State::new(), &ErtConfig::default()).map_err(e)?;
    ensure(
        matches!(top.kind, Kind::LowerBound { .. }) && top.value > XReal::int(100),
        format!("C1; C2: {} ({})", top.value, top.kind),
    )?;
    Ok(vec![format!(
        "C1 = 9 exact, C2 = 1 + 2x exact on x in 0..8, C1; C2 >= {:.3} ({})",
        top.value.to_f64(),
        top.kind
    )])
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    for entry in corpus::ENTRIES {
        let p = corpus::program(entry.name, &no_params()).map_err(e)?;
        let s = corpus::default_state(entry.name, &no_params()).map_err(e)?;
        let cfg = CrossCheckConfig {
            bound_loops: entry.crosscheck_bound,
            ..CrossCheckConfig::default()
        };
        let c = cross_check(&p, &rt("0"), &s, &cfg).map_err(e)?;
        ensure(
            c.verdict == Verdict::Agree,
            format!("{}: ert {} ({}) vs MDP {}", entry.name, c.ert.value, c.ert.kind, c.mdp.value),
        )?;
    }
    notes.push(format!("{} corpus entries agree", corpus::ENTRIES.len()));
    let cfg = PropsConfig {
        seed: 7,
        count: 500,
        properties: vec![Property::CrossCheck],
        ..PropsConfig::default()
    };
    let r = run_props(&cfg);
    let passed = r.passed(Property::CrossCheck);
    ensure(r.ok() && passed >= 500, format!("{passed} passed, failures {:?}", r.failures.first()))?;
    notes.push(format!("{passed} random programs agree"));
    Ok(notes)
}

fn criterion_8() -> Outcome {
    let laws = [
        Property::Monotonicity,
        Property::Constants,
        Property::Infinity,
        Property::SubAdditivity,
        Property::Scaling,
        Property::Unrolling,
        Property::UpperInvariant,
    ];
    let cfg = PropsConfig {
        seed: 42,
        count: 500,
        properties: laws.to_vec(),
        ..PropsConfig::default()
    };
    let r = run_props(&cfg);
    ensure(r.ok(), format!("failure: {:?}", r.failures.first()))?;
    for p in laws {
        ensure(r.passed(p) > 0, format!("{} never applied", p.name()))?;
    }
    let counts: Vec<String> = laws.iter().map(|p| format!("{} {}", p.name(), r.passed(*p))).collect();
    let mutant = PropsConfig {
        seed: 42,
        count: 100,
        mutation: Mutation::FreeIfGuard,
        ..PropsConfig::default()
    };
    let m = run_props(&mutant);
    ensure(!m.ok(), "the free-if-guard mutant went unnoticed")?;
    let w = &m.failures[0];
    Ok(vec![
        format!("500 programs: {}", counts.join(", ")),
        format!("mutant caught by {} ({} failures), e.g. {}", w.property.name(), m.failures.len(), w.shrunk),
    ])
}

fn criterion_9() -> Outcome {
    let cfg = PropsConfig {
        seed: 9,
        count: 250,
        ..PropsConfig::default()
    };
    let r = run_deterministic(&cfg);
    let n = r.passed(Property::Deterministic);
    ensure(r.ok() && n >= 200, format!("{n} passed, failures {:?}", r.failures.first()))?;
    Ok(vec![format!("det_step_count = ert(0) on {n} programs")])
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("truncated geometric", criterion_1, Duration::from_secs(1)),
        ("geometric loop", criterion_2, Duration::from_secs(1)),
        ("invariant suite", criterion_3, Duration::from_secs(1)),
        ("coupon collector", criterion_4, Duration::from_secs(30)),
        ("random walk", criterion_5, Duration::from_secs(10)),
        ("non-PAST sequence", criterion_6, Duration::from_secs(10)),
        ("soundness sweep", criterion_7, Duration::from_secs(120)),
        ("property suite", criterion_8, Duration::from_secs(120)),
        ("deterministic correspondence", criterion_9, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        let took = t.elapsed();
        let (ok, detail) = match out {
            Ok(notes) if took <= *limit => (true, notes.join("; ")),
            Ok(notes) => (false, format!("too slow; {}", notes.join("; "))),
            Err(msg) => (false, msg),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {}. {name} ({:.2}s, limit {}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
