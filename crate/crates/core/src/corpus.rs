//! Case-study programs with their scripted checks.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::ert::{ert_eval, ert_series, kleene_iterates, kleene_until, ErtConfig, Kind};
use crate::error::Error;
use crate::invariants::{
    check_limit, check_omega_invariant, check_upper_invariant, select_loop, Bound, Direction, OmegaSpec, StateDomain,
    Verdict,
};
use crate::kernel::{Rational, State, XReal};
use crate::lang::{parse_program, parse_rt, Program, RtExpr};
use crate::mdp::{build_mdp, cross_check, expected_reward, CrossCheckConfig, RewardConfig, Verdict as CcVerdict};

pub struct Entry {
    pub name: &'static str,
    pub summary: &'static str,
    /// Parameters and their defaults.
    pub params: &'static [(&'static str, i64)],
    /// Every `while` is replaced by `while<k>` before cross-checking, for
    /// entries whose reachable state space is infinite.
    pub crosscheck_bound: Option<u32>,
}

pub const ENTRIES: &[Entry] = &[
    Entry {
        name: "trunc",
        summary: "truncated geometric: flip up to two coins",
        params: &[],
        crosscheck_bound: None,
    },
    Entry {
        name: "geo",
        summary: "geometric loop: flip a coin until it shows 0",
        params: &[],
        crosscheck_bound: None,
    },
    Entry {
        name: "race",
        summary: "tortoise and hare race",
        params: &[("lead", 5)],
        crosscheck_bound: Some(12),
    },
    Entry {
        name: "rwalk",
        summary: "symmetric random walk until the origin",
        params: &[("start", 1)],
        crosscheck_bound: Some(12),
    },
    Entry {
        name: "coupon",
        summary: "coupon collector with N coupons",
        params: &[("N", 3)],
        crosscheck_bound: None,
    },
    Entry {
        name: "npast",
        summary: "C1; C2: both terminate in finite expected time, the sequence does not",
        params: &[],
        crosscheck_bound: Some(8),
    },
    Entry {
        name: "npast-c1",
        summary: "the doubling loop C1 alone",
        params: &[],
        crosscheck_bound: Some(8),
    },
    Entry {
        name: "npast-c2",
        summary: "the countdown loop C2 alone",
        params: &[],
        crosscheck_bound: None,
    },
];

const GEO: &str = "while (c = 1) { c :~ 1/2*<0> + 1/2*<1> }";
const C1: &str = "x := 1; b := 1; while (b = 1) { b :~ 1/2*<0> + 1/2*<1>; x := 2*x }";
const C2: &str = "while (x > 0) { x := x - 1 }";
/// `ert[C2]` for any continuation.
const C2_ERT: &str = "1 + [x > 0]*(2*x + cont[x := 0]) + [x <= 0]*cont";

pub fn entry(name: &str) -> Result<&'static Entry, Error> {
    ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Spec(format!("unknown corpus entry `{name}`")))
}

/// Parameter values with defaults filled in; unknown names are rejected.
pub fn resolve_params(e: &Entry, given: &BTreeMap<String, i64>) -> Result<BTreeMap<String, i64>, Error> {
    for k in given.keys() {
        if !e.params.iter().any(|(p, _)| p == k) {
            return Err(Error::Spec(format!("`{}` has no parameter `{k}`", e.name)));
        }
    }
    Ok(e.params
        .iter()
        .map(|(p, d)| (p.to_string(), given.get(*p).copied().unwrap_or(*d)))
        .collect())
}

fn param(ps: &BTreeMap<String, i64>, name: &str) -> i64 {
    ps[name]
}

pub fn source(name: &str, given: &BTreeMap<String, i64>) -> Result<String, Error> {
    let e = entry(name)?;
    let ps = resolve_params(e, given)?;
    Ok(match name {
        "trunc" => "if (1/2*<true> + 1/2*<false>) { succ := true } else {\n  \
                    if (1/2*<true> + 1/2*<false>) { succ := true } else { succ := false }\n}\n"
            .to_string(),
        "geo" => format!("{GEO}\n"),
        "race" => format!(
            "h := 0;\nt := {};\nwhile (h <= t) {{\n  if (1/2*<true> + 1/2*<false>) {{ h :~ unif(h, h + 10) }} else {{ empty }};\n  t := t + 1\n}}\n",
            param(&ps, "lead")
        ),
        "rwalk" => "while (x > 0) { x :~ 1/2*<x - 1> + 1/2*<x + 1> }\n".to_string(),
        "coupon" => {
            let n = param(&ps, "N");
            if n < 1 {
                return Err(Error::Spec("coupon needs N >= 1".into()));
            }
            let zeros = vec!["0"; n as usize].join(", ");
            format!(
                "cp := [{zeros}];\ni := 1;\nx := {n};\nwhile (x > 0) {{\n  while (cp[i] != 0) {{ i :~ unif(1, {n}) }};\n  cp[i] := 1;\n  x := x - 1\n}}\n"
            )
        }
        "npast" => format!("{C1};\nwhile (x > 0) @exact({C2_ERT}) {{ x := x - 1 }}\n"),
        "npast-c1" => format!("{C1}\n"),
        "npast-c2" => format!("{C2}\n"),
        _ => unreachable!(),
    })
}

pub fn program(name: &str, given: &BTreeMap<String, i64>) -> Result<Program, Error> {
    Ok(parse_program(&source(name, given)?)?)
}

/// Initial state used by `eval` and the scripted checks.
pub fn default_state(name: &str, given: &BTreeMap<String, i64>) -> Result<State, Error> {
    let ps = resolve_params(entry(name)?, given)?;
    Ok(match name {
        "geo" => State::new().with_int("c", 1),
        "rwalk" => State::new().with_int("x", param(&ps, "start")),
        "npast-c2" => State::new().with_int("x", 5),
        _ => State::new(),
    })
}

/// `4 + 2N (2 + H_{N-1})`.
pub fn coupon_closed_form(n: u64) -> Rational {
    let mut h = Rational::zero();
    for k in 1..n {
        h += Rational::new(1.into(), k.into());
    }
    Rational::from_integer(4.into()) + Rational::from_integer((2 * n).into()) * (Rational::from_integer(2.into()) + h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Inconclusive by design, e.g. limit consistency.
    Consistent,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct CorpusOptions {
    pub ert: ErtConfig,
    pub node_cap: usize,
    /// Divergence threshold for `rwalk` and `npast`.
    pub threshold: Option<f64>,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            ert: ErtConfig::default(),
            node_cap: crate::mdp::crosscheck::default_node_cap(),
            threshold: None,
        }
    }
}

struct Script {
    checks: Vec<Check>,
}

impl Script {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            detail,
        });
    }

    fn verdict(&mut self, name: &str, v: &Verdict) {
        let status = if v.holds() {
            CheckStatus::Pass
        } else if v.fails() {
            CheckStatus::Fail
        } else if matches!(&v.status, crate::invariants::Status::Inconclusive { reason } if reason.starts_with("consistent")) {
            CheckStatus::Consistent
        } else {
            CheckStatus::Fail
        };
        self.checks.push(Check {
            name: name.to_string(),
            status,
            detail: v.to_string(),
        });
    }
}

fn rt(s: &str) -> RtExpr {
    parse_rt(s).expect("corpus run-time expressions parse")
}

fn xr(s: &XReal) -> String {
    match s {
        XReal::Finite(r) if r.is_integer() => s.to_string(),
        XReal::Finite(_) if s.to_string().len() > 24 => format!("~{}", s.to_f64()),
        XReal::Finite(_) => format!("{s} ~ {}", s.to_f64()),
        XReal::Infinity => s.to_string(),
    }
}

fn crosscheck_cfg(e: &Entry, opts: &CorpusOptions) -> CrossCheckConfig {
    CrossCheckConfig {
        ert: opts.ert.clone(),
        node_cap: opts.node_cap,
        bound_loops: e.crosscheck_bound,
        ..CrossCheckConfig::default()
    }
}

fn crosscheck_step(sc: &mut Script, e: &Entry, p: &Program, f: &RtExpr, s: &State, opts: &CorpusOptions) -> Result<(), Error> {
    let cfg = crosscheck_cfg(e, opts);
    let r = cross_check(p, f, s, &cfg)?;
    let label = match e.crosscheck_bound {
        Some(k) => format!("crosscheck with loops bounded by {k} at {s}"),
        None => format!("crosscheck at {s}"),
    };
    sc.check(
        &label,
        r.verdict == CcVerdict::Agree,
        format!(
            "ert {} ({}), mdp {} ({:?}, {} nodes)",
            xr(&r.ert.value),
            r.ert.kind,
            xr(&r.mdp.value),
            r.mdp.method,
            r.nodes
        ),
    );
    Ok(())
}

/// Runs the entry's checks. Errors are returned only for inputs that do not
/// make sense; failing checks are reported in the list.
pub fn run_checks(name: &str, given: &BTreeMap<String, i64>, opts: &CorpusOptions) -> Result<Vec<Check>, Error> {
    let e = entry(name)?;
    let ps = resolve_params(e, given)?;
    let p = program(name, given)?;
    let s0 = default_state(name, given)?;
    let zero = RtExpr::int(0);
    let cfg = &opts.ert;
    let mut sc = Script { checks: Vec::new() };
    match name {
        "trunc" => {
            let r = ert_eval(&p, &zero, &s0, cfg)?;
            sc.check(
                "ert is exactly 5/2",
                r.value == XReal::ratio(5, 2) && r.kind.is_exact(),
                format!("{} ({})", r.value, r.kind),
            );
            crosscheck_step(&mut sc, e, &p, &zero, &s0, opts)?;
        }
        "geo" => {
            let c1 = State::new().with_int("c", 1);
            let c0 = State::new().with_int("c", 0);
            let r = ert_eval(&p, &zero, &c1, cfg)?;
            let floor = XReal::int(5).monus(&XReal::from_rational(Rational::new(1.into(), num_bigint::BigInt::one() << 50))?)?;
            sc.check(
                "ert at c=1 is a lower bound within 2^-50 of 5",
                r.kind.is_lower() && !r.kind.is_exact() && r.value >= floor && r.value <= XReal::int(5),
                format!("{} ({}), gap {:e}", xr(&r.value), r.kind, r.value.distance(&XReal::int(5))),
            );
            let r = ert_eval(&p, &zero, &c0, cfg)?;
            sc.check(
                "ert at c=0 is exactly 1",
                r.value == XReal::one() && r.kind.is_exact(),
                format!("{} ({})", r.value, r.kind),
            );
            for (s, want) in [(&c1, 5), (&c0, 1)] {
                let m = build_mdp(&p, &zero, s, opts.node_cap)?;
                let a = expected_reward(&m, &RewardConfig::default())?;
                sc.check(
                    &format!("MDP expected reward at {s} is {want}"),
                    a.value == XReal::int(want),
                    format!("{} ({:?})", a.value, a.method),
                );
            }
            let d = StateDomain::ranges(&[("c", 0, 1)])?;
            let v = check_upper_invariant(&p, &zero, &Bound::Expr(rt("1 + [c = 1]*4")), &d, cfg)?;
            sc.verdict("upper invariant 1 + [c = 1]*4", &v);
            for direction in [Direction::Lower, Direction::Upper] {
                let spec = OmegaSpec {
                    invariant: rt("1 + [c = 1]*(4 - 3/2^n)"),
                    direction,
                    limit: Some(rt("1 + [c = 1]*4")),
                };
                let v = check_omega_invariant(&p, &zero, &spec, 50, &d, cfg)?;
                sc.verdict(&format!("{direction:?} omega-invariant 1 + [c = 1]*(4 - 3/2^n), n <= 50").to_lowercase(), &v);
                if direction == Direction::Lower {
                    let tol = Rational::new(1.into(), 10u64.pow(12).into());
                    let v = check_limit(&spec, &d, 60, &tol, &Rational::from_integer(1_000_000.into()))?;
                    sc.verdict("limit 1 + [c = 1]*4 at n = 60 within 1e-12", &v);
                }
            }
            let it = kleene_iterates(&p, &zero, 12, &c1, cfg)?;
            let want: Vec<XReal> = (0..12).map(|n| crate::lang::eval_rt(&rt("1 + [c = 1]*(4 - 3/2^n)"), &c1, Some(n)).unwrap()).collect();
            sc.check(
                "Kleene iterates F^(n+1)(0) equal I_n at c=1",
                it == want,
                it.iter().take(5).map(|v| v.to_string()).collect::<Vec<_>>().join(", ") + ", ...",
            );
            crosscheck_step(&mut sc, e, &p, &zero, &c1, opts)?;
            crosscheck_step(&mut sc, e, &p, &zero, &c0, opts)?;
        }
        "race" => {
            let r = ert_eval(&p, &zero, &s0, cfg)?;
            sc.check(
                "ert is a lower bound",
                r.kind.is_lower(),
                format!("{} ({})", xr(&r.value), r.kind),
            );
            let k = e.crosscheck_bound.unwrap();
            let bounded = ert_series(&p, &zero, &s0, cfg, &[k])?.remove(0);
            let m = build_mdp(&p.bound_loops(k), &zero, &s0, opts.node_cap)?;
            let a = expected_reward(&m, &RewardConfig::default())?;
            sc.check(
                &format!("ert unrolled to depth {k} equals the MDP of the bounded program"),
                bounded.value == a.value,
                format!("{} vs {}", xr(&bounded.value), xr(&a.value)),
            );
            crosscheck_step(&mut sc, e, &p, &zero, &s0, opts)?;
        }
        "rwalk" => {
            let threshold = opts.threshold.unwrap_or(10.0);
            let t = XReal::from_f64(threshold);
            let it = kleene_until(&p, &zero, &s0, &t, 2000, cfg)?;
            let increasing = it.windows(2).all(|w| w[0] < w[1]);
            let last = it.last().cloned().unwrap_or_default();
            sc.check(
                &format!("Kleene iterates at {s0} increase strictly and exceed {threshold} within 2000 steps"),
                increasing && last > t,
                format!("F^{}(0) = {}", it.len(), xr(&last)),
            );
            let spec = OmegaSpec {
                invariant: rt("1 + sum(k, 0, n, [x > k]*rwcoef(n, k))"),
                direction: Direction::Lower,
                limit: Some(rt("1 + [x > 0]*inf")),
            };
            let d = StateDomain::ranges(&[("x", 0, 6)])?;
            let v = check_omega_invariant(&p, &zero, &spec, 12, &d, cfg)?;
            sc.verdict("lower omega-invariant 1 + sum_k [x > k] a(n,k), n <= 12, x in 0..6", &v);
            crosscheck_step(&mut sc, e, &p, &zero, &s0, opts)?;
        }
        "coupon" => {
            let n = param(&ps, "N");
            let want = XReal::Finite(coupon_closed_form(n as u64));
            let m = build_mdp(&p, &zero, &s0, opts.node_cap)?;
            let a = expected_reward(&m, &RewardConfig::default())?;
            sc.check(
                &format!("MDP expected reward equals 4 + 2N(2 + H(N-1)) = {want}"),
                a.value == want,
                format!("{} ({:?}, {} nodes)", a.value, a.method, m.len()),
            );
            let depths = [8, 16, 32, 64, 128, 256, 500];
            let series = ert_series(&p, &zero, &s0, cfg, &depths)?;
            let monotone = series.windows(2).all(|w| w[0].value <= w[1].value);
            let below = series.iter().all(|r| r.value <= want && r.kind.is_lower());
            let last = &series.last().unwrap().value;
            let gap = last.distance(&want);
            sc.check(
                "ert lower bounds approach it monotonically, within 1e-6 at depth 500",
                monotone && below && gap <= 1e-6,
                series
                    .iter()
                    .map(|r| format!("{}:{:.9}", r.depth, r.value.to_f64()))
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            crosscheck_step(&mut sc, e, &p, &zero, &s0, opts)?;
        }
        "npast" => npast(&mut sc, e, &p, opts)?,
        "npast-c1" => {
            let r = ert_eval(&p, &zero, &s0, &cfg.clone().solving())?;
            sc.check(
                "ert of C1 is exactly 9",
                r.value == XReal::int(9) && r.kind.is_exact(),
                format!("{} ({})", r.value, r.kind),
            );
            crosscheck_step(&mut sc, e, &p, &zero, &s0, opts)?;
        }
        "npast-c2" => {
            let r = ert_eval(&p, &zero, &s0, cfg)?;
            sc.check(
                "ert of C2 at x=5 is exactly 11",
                r.value == XReal::int(11) && r.kind.is_exact(),
                format!("{} ({})", r.value, r.kind),
            );
            crosscheck_step(&mut sc, e, &p, &zero, &s0, opts)?;
        }
        _ => unreachable!(),
    }
    Ok(sc.checks)
}

fn npast(sc: &mut Script, e: &Entry, p: &Program, opts: &CorpusOptions) -> Result<(), Error> {
    let cfg = &opts.ert;
    let zero = RtExpr::int(0);
    let none = BTreeMap::new();
    let c1 = program("npast-c1", &none)?;
    let c2 = program("npast-c2", &none)?;

    let r = ert_eval(&c1, &zero, &State::new(), &cfg.clone().solving())?;
    sc.check(
        "C1 alone: exact and finite",
        r.kind.is_exact() && r.value == XReal::int(9),
        format!("{} ({})", r.value, r.kind),
    );
    let mut ok = true;
    let mut vals = Vec::new();
    for x in 0..=8 {
        let r = ert_eval(&c2, &zero, &State::new().with_int("x", x), cfg)?;
        ok &= r.kind.is_exact() && r.value == XReal::int(1 + 2 * x);
        vals.push(r.value.to_string());
    }
    sc.check("C2 alone: exact and finite (1 + 2x) for x in 0..8", ok, vals.join(", "));

    // The annotation on C2 inside the sequence is justified by an upper
    // invariant and an exact lower omega-invariant with the same limit.
    let d = StateDomain::ranges(&[("x", -2, 20)])?;
    let v = check_upper_invariant(&c2, &zero, &Bound::Expr(rt(C2_ERT)), &d, cfg)?;
    sc.verdict("C2 upper invariant 1 + [x > 0]*2x", &v);
    let f = rt("x + 1");
    let v = check_upper_invariant(&c2, &f, &Bound::Expr(rt(C2_ERT)), &StateDomain::ranges(&[("x", 0, 20)])?, cfg)?;
    sc.verdict("C2 upper invariant for f = x + 1", &v);
    let spec = OmegaSpec {
        invariant: rt("1 + [x > 0 && x <= n]*2*x + [x > n]*2*n"),
        direction: Direction::Lower,
        limit: Some(rt("1 + [x > 0]*2*x")),
    };
    let v = check_omega_invariant(&c2, &zero, &spec, 30, &d, cfg)?;
    sc.verdict("C2 lower omega-invariant, n <= 30", &v);
    let tol = Rational::new(1.into(), 10u64.pow(12).into());
    let big = Rational::from_integer(1_000_000.into());
    let v = check_limit(&spec, &StateDomain::ranges(&[("x", 0, 10)])?, 60, &tol, &big)?;
    sc.verdict("C2 omega-invariant limit 1 + [x > 0]*2x", &v);

    // The doubling loop w.r.t. the run-time of C2.
    let bloop = select_loop(&c1, 0, None)?.clone();
    let f2 = rt("1 + [x > 0]*2*x");
    let spec = OmegaSpec {
        invariant: rt("1 + [b != 1]*(1 + [x > 0]*2*x) + [b = 1]*(7 - 5/2^n + n*[x > 0]*2*x)"),
        direction: Direction::Lower,
        limit: Some(rt("1 + [b != 1]*(1 + [x > 0]*2*x) + [b = 1]*(7 + [x > 0]*inf)")),
    };
    let d = StateDomain::ranges(&[("b", 0, 1), ("x", 0, 4)])?;
    let v = check_omega_invariant(&bloop, &f2, &spec, 20, &d, cfg)?;
    sc.verdict("doubling loop lower omega-invariant w.r.t. ert[C2], n <= 20", &v);
    let d = StateDomain::explicit(vec![
        State::new().with_int("b", 1).with_int("x", 1),
        State::new().with_int("b", 1).with_int("x", 2),
    ])?;
    let v = check_limit(&spec, &d, 1_000_000, &tol, &big)?;
    sc.verdict("its limit is infinite at b = 1, x > 0", &v);

    let threshold = opts.threshold.unwrap_or(100.0);
    let max = cfg.max_unroll_depth;
    let depths: Vec<u32> = std::iter::successors(Some(1u32), |d| if *d < max { Some((d * 2).min(max)) } else { None }).collect();
    let series = ert_series(p, &zero, &State::new(), cfg, &depths)?;
    let monotone = series.windows(2).all(|w| w[0].value <= w[1].value);
    let last = series.last().unwrap();
    sc.check(
        &format!("C1; C2 lower bounds grow past {threshold}"),
        monotone && matches!(last.kind, Kind::LowerBound { .. }) && last.value > XReal::from_f64(threshold),
        series
            .iter()
            .map(|r| format!("{}:{}", r.depth, r.value.to_f64()))
            .collect::<Vec<_>>()
            .join(" "),
    );
    crosscheck_step(sc, e, p, &zero, &State::new(), opts)?;
    for (name, prog) in [("npast-c1", &c1), ("npast-c2", &c2)] {
        let sub = entry(name)?;
        crosscheck_step(sc, sub, prog, &zero, &default_state(name, &none)?, opts)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_parses() {
        for e in ENTRIES {
            program(e.name, &BTreeMap::new()).unwrap();
        }
    }

    #[test]
    fn closed_form() {
        assert_eq!(coupon_closed_form(1), crate::kernel::rat(8, 1));
        assert_eq!(coupon_closed_form(2), crate::kernel::rat(16, 1));
        assert_eq!(coupon_closed_form(3), crate::kernel::rat(25, 1));
    }

    #[test]
    fn unknown_parameter() {
        let mut ps = BTreeMap::new();
        ps.insert("M".to_string(), 2);
        assert!(source("coupon", &ps).is_err());
    }
}
