//! Pointwise checks of loop invariants over finite state domains.
//!
//! Every check evaluates the characteristic functional `F_f` of a loop at
//! each state of a declared domain and compares. A `Holds` verdict covers the
//! listed states only; it is evidence about those points, not a proof over
//! all states.

pub mod domain;
pub mod rwalk;
pub mod specfile;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ert::{ErtConfig, LoopCtx, Outcome};
use crate::error::Error;
use crate::kernel::{Rational, State, XReal};
use crate::lang::{Program, RtEnv, RtExpr};

pub use domain::{Component, StateDomain};
pub use rwalk::{rw_closed_form, rw_coefficient, rw_coefficients};

pub type Table = BTreeMap<State, XReal>;

/// A candidate run-time bound: an expression or a finite table.
#[derive(Clone, Debug)]
pub enum Bound {
    Expr(RtExpr),
    Table(Table),
}

impl Bound {
    /// Value at `s`; inside an expression `cont` means `f`.
    pub fn eval(&self, s: &State, n: Option<u64>, f: &RtExpr) -> Result<XReal, Error> {
        match self {
            Bound::Expr(e) => {
                let mut k = |u: &State| RtEnv::new(u).eval(f);
                let mut env = RtEnv::new(s).with_cont(&mut k);
                match n {
                    Some(n) => env.with_n(n).eval(e),
                    None => env.eval(e),
                }
            }
            Bound::Table(t) => t
                .get(s)
                .cloned()
                .ok_or_else(|| crate::error::EvalError::OutsideTable(s.clone()).into()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Upper,
}

#[derive(Clone, Debug)]
pub struct OmegaSpec {
    /// `I_n`, may mention `n`.
    pub invariant: RtExpr,
    pub direction: Direction,
    /// Declared `lim I_n`, without `n`. Only `check_limit` needs it.
    pub limit: Option<RtExpr>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Status {
    /// `exact_equality` records whether every comparison was an equation.
    Holds { exact_equality: bool },
    Fails {
        witness: State,
        #[serde(skip_serializing_if = "Option::is_none")]
        n: Option<u64>,
        lhs: XReal,
        rhs: XReal,
    },
    Inconclusive { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub status: Status,
    /// The states checked, in order.
    pub domain: Vec<State>,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self.status, Status::Holds { .. })
    }

    pub fn fails(&self) -> bool {
        matches!(self.status, Status::Fails { .. })
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.status {
            Status::Holds { exact_equality } => {
                write!(f, "holds on {} states", self.domain.len())?;
                if *exact_equality {
                    write!(f, " (with equality)")?;
                }
                Ok(())
            }
            Status::Fails { witness, n, lhs, rhs } => {
                write!(f, "fails at {witness}")?;
                if let Some(n) = n {
                    write!(f, ", n = {n}")?;
                }
                write!(f, ": lhs {lhs}, rhs {rhs}")
            }
            Status::Inconclusive { reason } => write!(f, "inconclusive: {reason}"),
        }
    }
}

/// Finds the loop at `path`, or the `k`-th loop (0-based, pre-order) when
/// `path` is `None`.
pub fn select_loop<'p>(p: &'p Program, ordinal: usize, path: Option<&[usize]>) -> Result<&'p Program, Error> {
    let target = match path {
        Some(path) => path.to_vec(),
        None => p
            .loop_paths()
            .get(ordinal)
            .cloned()
            .ok_or_else(|| Error::NoSuchLoop(format!("loop #{ordinal}")))?,
    };
    match p.at_path(&target) {
        Some(w @ Program::While(..)) => Ok(w),
        _ => Err(Error::NoSuchLoop(format!("path {target:?}"))),
    }
}

/// `F_f(X)(σ)`.
pub fn apply(ctx: &LoopCtx, f: &RtExpr, x: &Bound, n: Option<u64>, s: &State, cfg: &ErtConfig) -> Result<Outcome, Error> {
    let mut xf = |t: &State| Ok(Outcome::exact(x.eval(t, n, f)?));
    ctx.apply(f, &mut xf, s, cfg).map_err(|e| e.at(s))
}

enum Cmp {
    Ok { equal: bool },
    Fail,
    Unknown,
}

/// Compares a possibly one-sided `lhs` with an exact `rhs`.
fn compare(lhs: &Outcome, rhs: &XReal, want: Direction) -> Cmp {
    let kind = lhs.prov.kind(0);
    let v = &lhs.value;
    match want {
        // want lhs <= rhs
        Direction::Upper => {
            if kind.is_upper() && v <= rhs {
                Cmp::Ok { equal: v == rhs }
            } else if kind.is_lower() && v > rhs {
                Cmp::Fail
            } else {
                Cmp::Unknown
            }
        }
        Direction::Lower => {
            if kind.is_lower() && v >= rhs {
                Cmp::Ok { equal: v == rhs }
            } else if kind.is_upper() && v < rhs {
                Cmp::Fail
            } else {
                Cmp::Unknown
            }
        }
    }
}

struct Tally {
    equal: bool,
    unknown: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            equal: true,
            unknown: None,
        }
    }

    /// Returns a failing status, if any.
    fn record(&mut self, lhs: Outcome, rhs: XReal, want: Direction, s: &State, n: Option<u64>) -> Option<Status> {
        match compare(&lhs, &rhs, want) {
            Cmp::Ok { equal } => {
                self.equal &= equal;
                None
            }
            Cmp::Fail => Some(Status::Fails {
                witness: s.clone(),
                n,
                lhs: lhs.value,
                rhs,
            }),
            Cmp::Unknown => {
                if self.unknown.is_none() {
                    let at = n.map(|n| format!(", n = {n}")).unwrap_or_default();
                    self.unknown = Some(format!(
                        "loop body value {} at {s}{at} is only a {} and cannot decide against {rhs}",
                        lhs.value,
                        lhs.prov.kind(0)
                    ));
                }
                None
            }
        }
    }

    fn finish(self) -> Status {
        match self.unknown {
            Some(reason) => Status::Inconclusive { reason },
            None => Status::Holds {
                exact_equality: self.equal,
            },
        }
    }
}

/// `F_f(I) ⪯ I` on `D`.
pub fn check_upper_invariant(
    w: &Program,
    f: &RtExpr,
    i: &Bound,
    d: &StateDomain,
    cfg: &ErtConfig,
) -> Result<Verdict, Error> {
    if let Bound::Expr(e) = i {
        if e.uses_omega() {
            return Err(Error::Spec("an upper invariant must not mention `n`".into()));
        }
    }
    let ctx = LoopCtx::new(w)?;
    let states = d.states();
    let mut tally = Tally::new();
    for s in &states {
        let lhs = apply(&ctx, f, i, None, s, cfg)?;
        let rhs = i.eval(s, None, f).map_err(|e| e.at(s))?;
        if let Some(fail) = tally.record(lhs, rhs, Direction::Upper, s, None) {
            return Ok(Verdict { status: fail, domain: states });
        }
    }
    Ok(Verdict {
        status: tally.finish(),
        domain: states,
    })
}

/// Lower: `F_f(0) ⪰ I_0` and `F_f(I_n) ⪰ I_{n+1}` for `n < n_max`; upper
/// dually.
pub fn check_omega_invariant(
    w: &Program,
    f: &RtExpr,
    spec: &OmegaSpec,
    n_max: u64,
    d: &StateDomain,
    cfg: &ErtConfig,
) -> Result<Verdict, Error> {
    let ctx = LoopCtx::new(w)?;
    let states = d.states();
    let want = spec.direction;
    let i = Bound::Expr(spec.invariant.clone());
    let zero = Bound::Expr(RtExpr::int(0));
    let mut tally = Tally::new();
    for s in &states {
        let lhs = apply(&ctx, f, &zero, None, s, cfg)?;
        let rhs = i.eval(s, Some(0), f).map_err(|e| e.at(s))?;
        if let Some(fail) = tally.record(lhs, rhs, want, s, Some(0)) {
            return Ok(Verdict { status: fail, domain: states });
        }
    }
    for n in 0..n_max {
        for s in &states {
            let lhs = apply(&ctx, f, &i, Some(n), s, cfg)?;
            let rhs = i.eval(s, Some(n + 1), f).map_err(|e| e.at(s))?;
            if let Some(fail) = tally.record(lhs, rhs, want, s, Some(n + 1)) {
                return Ok(Verdict { status: fail, domain: states });
            }
        }
    }
    Ok(Verdict {
        status: tally.finish(),
        domain: states,
    })
}

fn deviation(a: &XReal, b: &XReal) -> Option<Rational> {
    match (a, b) {
        (XReal::Finite(x), XReal::Finite(y)) => Some(if x >= y { x - y } else { y - x }),
        (XReal::Infinity, XReal::Infinity) => Some(Rational::from_integer(0.into())),
        _ => None,
    }
}

/// Numeric evidence that `I_n` approaches the declared limit. Never returns
/// `Holds`: limits are not finitely checkable.
pub fn check_limit(spec: &OmegaSpec, d: &StateDomain, n_probe: u64, tol: &Rational, big: &Rational) -> Result<Verdict, Error> {
    let limit = spec
        .limit
        .as_ref()
        .ok_or_else(|| Error::Spec("no limit declared".into()))?;
    if limit.uses_omega() {
        return Err(Error::Spec("the limit must not mention `n`".into()));
    }
    let states = d.states();
    let inv = Bound::Expr(spec.invariant.clone());
    let lim = Bound::Expr(limit.clone());
    let zero = RtExpr::int(0);
    let probes = [n_probe / 4, n_probe / 2, n_probe];
    let fail = |s: &State, lhs: XReal, rhs: XReal| Status::Fails {
        witness: s.clone(),
        n: Some(n_probe),
        lhs,
        rhs,
    };
    for s in &states {
        let l = lim.eval(s, None, &zero).map_err(|e| e.at(s))?;
        let at = inv.eval(s, Some(n_probe), &zero).map_err(|e| e.at(s))?;
        match &l {
            XReal::Infinity => {
                if at < XReal::Finite(big.clone()) {
                    return Ok(Verdict {
                        status: fail(s, at, l),
                        domain: states,
                    });
                }
            }
            XReal::Finite(_) => {
                let mut prev: Option<Rational> = None;
                for &n in &probes {
                    let v = inv.eval(s, Some(n), &zero).map_err(|e| e.at(s))?;
                    let dev = match deviation(&v, &l) {
                        Some(dev) => dev,
                        None => {
                            return Ok(Verdict {
                                status: fail(s, v, l),
                                domain: states,
                            })
                        }
                    };
                    if prev.as_ref().is_some_and(|p| dev > *p) {
                        return Ok(Verdict {
                            status: fail(s, v, l),
                            domain: states,
                        });
                    }
                    prev = Some(dev);
                }
                if prev.as_ref().is_some_and(|dev| dev > tol) {
                    return Ok(Verdict {
                        status: fail(s, at, l),
                        domain: states,
                    });
                }
            }
        }
    }
    Ok(Verdict {
        status: Status::Inconclusive {
            reason: format!("consistent with declared limit at n = {n_probe}"),
        },
        domain: states,
    })
}

/// Rounds of `X ← F_f(X)` starting from `I`, each tabulated on `D`. Before
/// every round the direction is re-checked (`F_f(X) ⪯ X` for upper).
/// Returns one table per round.
pub fn refine(
    w: &Program,
    f: &RtExpr,
    i: Bound,
    d: &StateDomain,
    rounds: usize,
    direction: Direction,
    cfg: &ErtConfig,
) -> Result<Vec<Table>, Error> {
    let ctx = LoopCtx::new(w)?;
    let states = d.states();
    let mut x = i;
    let mut out = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let mut next = Table::new();
        for s in &states {
            let lhs = apply(&ctx, f, &x, None, s, cfg)?;
            let rhs = x.eval(s, None, f).map_err(|e| e.at(s))?;
            match compare(&lhs, &rhs, direction) {
                Cmp::Ok { .. } => {}
                Cmp::Fail | Cmp::Unknown => {
                    return Err(Error::PreconditionFailed { state: s.clone(), round });
                }
            }
            next.insert(s.clone(), lhs.value);
        }
        out.push(next.clone());
        x = Bound::Table(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_program, parse_rt};

    fn geo() -> Program {
        parse_program("while (c = 1) { c :~ 1/2*<0> + 1/2*<1> }").unwrap()
    }

    fn dom() -> StateDomain {
        StateDomain::ranges(&[("c", 0, 1)]).unwrap()
    }

    fn rt(s: &str) -> RtExpr {
        parse_rt(s).unwrap()
    }

    fn cfg() -> ErtConfig {
        ErtConfig::default()
    }

    #[test]
    fn geometric_upper_invariant() {
        let v = check_upper_invariant(&geo(), &rt("0"), &Bound::Expr(rt("1 + [c = 1]*4")), &dom(), &cfg()).unwrap();
        assert_eq!(v.status, Status::Holds { exact_equality: true });
        let v = check_upper_invariant(&geo(), &rt("0"), &Bound::Expr(rt("inf")), &dom(), &cfg()).unwrap();
        assert!(v.holds());
    }

    #[test]
    fn too_small_invariant_fails() {
        let v = check_upper_invariant(&geo(), &rt("0"), &Bound::Expr(rt("1 + [c = 1]*3")), &dom(), &cfg()).unwrap();
        assert_eq!(
            v.status,
            Status::Fails {
                witness: State::new().with_int("c", 1),
                n: None,
                lhs: XReal::ratio(9, 2),
                rhs: XReal::int(4),
            }
        );
    }

    #[test]
    fn geometric_omega_invariant_both_ways() {
        for direction in [Direction::Lower, Direction::Upper] {
            let spec = OmegaSpec {
                invariant: rt("1 + [c = 1]*(4 - 3/2^n)"),
                direction,
                limit: Some(rt("1 + [c = 1]*4")),
            };
            let v = check_omega_invariant(&geo(), &rt("0"), &spec, 50, &dom(), &cfg()).unwrap();
            assert_eq!(v.status, Status::Holds { exact_equality: true });
        }
    }

    #[test]
    fn wrong_omega_invariant_names_n() {
        let spec = OmegaSpec {
            invariant: rt("1 + [c = 1]*4"),
            direction: Direction::Lower,
            limit: Some(rt("1 + [c = 1]*4")),
        };
        let v = check_omega_invariant(&geo(), &rt("0"), &spec, 5, &dom(), &cfg()).unwrap();
        match v.status {
            Status::Fails { n, witness, .. } => {
                assert_eq!(n, Some(0));
                assert_eq!(witness, State::new().with_int("c", 1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn limits() {
        let spec = OmegaSpec {
            invariant: rt("1 + [c = 1]*(4 - 3/2^n)"),
            direction: Direction::Lower,
            limit: Some(rt("1 + [c = 1]*4")),
        };
        let tol = Rational::new(1.into(), 10u64.pow(12).into());
        let big = Rational::from_integer(1_000_000.into());
        let v = check_limit(&spec, &dom(), 60, &tol, &big).unwrap();
        assert!(matches!(v.status, Status::Inconclusive { .. }));
        let bad = OmegaSpec {
            limit: Some(rt("inf")),
            ..spec
        };
        assert!(check_limit(&bad, &dom(), 60, &tol, &big).unwrap().fails());
    }

    #[test]
    fn refinement() {
        let t = refine(&geo(), &rt("0"), Bound::Expr(rt("1 + [c = 1]*4")), &dom(), 3, Direction::Upper, &cfg()).unwrap();
        let c0 = State::new().with_int("c", 0);
        let c1 = State::new().with_int("c", 1);
        for table in &t {
            assert_eq!(table[&c0], XReal::int(1));
            assert_eq!(table[&c1], XReal::int(5));
        }
        let t = refine(&geo(), &rt("0"), Bound::Expr(rt("1 + [c = 1]*6")), &dom(), 1, Direction::Upper, &cfg()).unwrap();
        assert_eq!(t[0][&c1], XReal::int(6));
        let err = refine(&geo(), &rt("0"), Bound::Expr(rt("1 + [c = 1]*3")), &dom(), 1, Direction::Upper, &cfg());
        assert!(matches!(err, Err(Error::PreconditionFailed { round: 1, .. })));
    }

    #[test]
    fn random_walk_omega_invariant() {
        let w = parse_program("while (x > 0) { x :~ 1/2*<x-1> + 1/2*<x+1> }").unwrap();
        let spec = OmegaSpec {
            invariant: rt("1 + sum(k, 0, n, [x > k]*rwcoef(n, k))"),
            direction: Direction::Lower,
            limit: Some(rt("1 + [x > 0]*inf")),
        };
        let d = StateDomain::ranges(&[("x", 0, 6)]).unwrap();
        let v = check_omega_invariant(&w, &rt("0"), &spec, 12, &d, &cfg()).unwrap();
        assert!(v.holds(), "{v}");
    }
}
