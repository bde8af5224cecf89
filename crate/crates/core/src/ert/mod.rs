//! The expected run-time transformer.
//!
//! `ert[C](f)(σ)` is computed by memoised recursion over continuation
//! stacks. Unannotated loops are unrolled to `while^{<k}` for growing `k`; a
//! result is `Exact` exactly when no unrolling bound was ever reached.

pub mod compile;
pub mod det;
pub mod engine;
pub mod kleene;
pub mod solve;

use num_traits::Zero;
use serde::Serialize;

use crate::error::Error;
use crate::kernel::{State, XReal};
use crate::lang::eval::guard_probs;
use crate::lang::{DistExpr, Program, RtEnv, RtExpr};
use compile::{Compiled, Node, NodeId};
use engine::{Base, BaseFn, Engine, Frame};

pub use det::{det_step_count, DetRun};
pub use kleene::{kleene_iterates, kleene_until};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Unrolling {
    /// Depths 1, 2, 4, ... up to the maximum, stopping once exact.
    Doubling,
    /// Only the maximum depth.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LoopPolicy {
    Unroll,
    /// Solve loops with loop-free, choice-free bodies exactly when their
    /// reachable head states (modulo dead variables) are finite; otherwise
    /// unroll.
    Solve,
}

/// Deliberate faults, used to check that the property harness notices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mutation {
    None,
    /// `if` guards cost nothing.
    FreeIfGuard,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErtConfig {
    pub max_unroll_depth: u32,
    pub unrolling: Unrolling,
    pub loops: LoopPolicy,
    pub use_annotations: bool,
    /// Maximum number of non-memoised evaluations per run.
    pub eval_budget: u64,
    /// Maximum number of head states for `LoopPolicy::Solve`.
    pub solve_cap: usize,
    pub mutation: Mutation,
}

impl Default for ErtConfig {
    fn default() -> Self {
        ErtConfig {
            max_unroll_depth: 64,
            unrolling: Unrolling::Doubling,
            loops: LoopPolicy::Unroll,
            use_annotations: true,
            eval_budget: 20_000_000,
            solve_cap: 20_000,
            mutation: Mutation::None,
        }
    }
}

impl ErtConfig {
    pub fn with_depth(mut self, k: u32) -> Self {
        self.max_unroll_depth = k;
        self
    }

    pub fn solving(mut self) -> Self {
        self.loops = LoopPolicy::Solve;
        self
    }

    pub(crate) fn if_tick(&self) -> XReal {
        match self.mutation {
            Mutation::None => XReal::one(),
            Mutation::FreeIfGuard => XReal::zero(),
        }
    }
}

/// How a value was obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Prov {
    /// An unrolling bound was reached somewhere.
    pub cutoff: bool,
    /// An upper-bound annotation was used.
    pub upper: bool,
    /// A lower-bound annotation was used.
    pub lower: bool,
    /// Some annotation was used.
    pub annotated: bool,
}

impl Prov {
    pub fn merge(self, o: Prov) -> Prov {
        Prov {
            cutoff: self.cutoff || o.cutoff,
            upper: self.upper || o.upper,
            lower: self.lower || o.lower,
            annotated: self.annotated || o.annotated,
        }
    }

    pub fn kind(self, depth: u32) -> Kind {
        match (self.cutoff || self.lower, self.upper) {
            (false, false) => Kind::Exact,
            (true, false) => Kind::LowerBound { depth },
            (false, true) => Kind::UpperBound,
            (true, true) => Kind::Approximate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub value: XReal,
    pub prov: Prov,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Kind {
    Exact,
    LowerBound { depth: u32 },
    UpperBound,
    /// Mixed lower and upper approximations; no guarantee either way.
    Approximate,
}

impl Kind {
    pub fn is_exact(self) -> bool {
        self == Kind::Exact
    }

    pub fn is_lower(self) -> bool {
        matches!(self, Kind::Exact | Kind::LowerBound { .. })
    }

    pub fn is_upper(self) -> bool {
        matches!(self, Kind::Exact | Kind::UpperBound)
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kind::Exact => write!(f, "exact"),
            Kind::LowerBound { depth } => write!(f, "lower bound, depth {depth}"),
            Kind::UpperBound => write!(f, "upper bound"),
            Kind::Approximate => write!(f, "approximate"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErtResult {
    pub value: XReal,
    pub kind: Kind,
    pub depth: u32,
    pub evaluations: u64,
    pub annotations_used: bool,
}

impl ErtResult {
    fn from_outcome(o: Outcome, depth: u32, evaluations: u64) -> Self {
        ErtResult {
            kind: o.prov.kind(depth),
            value: o.value,
            depth,
            evaluations,
            annotations_used: o.prov.annotated,
        }
    }
}

fn run_at_depth(c: &Compiled, f: &RtExpr, s: &State, cfg: &ErtConfig, depth: u32) -> Result<(Outcome, u64), Error> {
    let mut eng = Engine::new(c, cfg, depth, Base::Rt(f));
    let o = eng.run(Frame::Node(c.root), s)?;
    Ok((o, eng.evals))
}

/// `ert[C](f)(σ)`, exact or a lower bound from bounded unrolling.
pub fn ert_eval(p: &Program, f: &RtExpr, s: &State, cfg: &ErtConfig) -> Result<ErtResult, Error> {
    let c = Compiled::new(p);
    let max = cfg.max_unroll_depth;
    if !p.has_unbounded_loops() {
        let (o, n) = run_at_depth(&c, f, s, cfg, max)?;
        return Ok(ErtResult::from_outcome(o, max, n));
    }
    let mut k = match cfg.unrolling {
        Unrolling::Doubling => max.min(1),
        Unrolling::Fixed => max,
    };
    let mut total = 0;
    loop {
        let (o, n) = run_at_depth(&c, f, s, cfg, k)?;
        total += n;
        if !o.prov.cutoff || k >= max {
            return Ok(ErtResult::from_outcome(o, k, total));
        }
        k = k.saturating_mul(2).min(max);
    }
}

/// Values at each of the given unrolling depths.
pub fn ert_series(p: &Program, f: &RtExpr, s: &State, cfg: &ErtConfig, depths: &[u32]) -> Result<Vec<ErtResult>, Error> {
    let c = Compiled::new(p);
    depths
        .iter()
        .map(|&k| {
            let (o, n) = run_at_depth(&c, f, s, cfg, k)?;
            Ok(ErtResult::from_outcome(o, k, n))
        })
        .collect()
}

/// A `while` loop prepared for repeated application of its characteristic
/// functional `F_f(X) = 1 + [¬ξ] f + [ξ] ert[body](X)`.
pub struct LoopCtx {
    compiled: Compiled,
    guard: DistExpr,
    body: NodeId,
    pub program: Program,
}

impl LoopCtx {
    pub fn new(w: &Program) -> Result<LoopCtx, Error> {
        let compiled = Compiled::new(w);
        match compiled.node(compiled.root) {
            Node::While { guard, body, .. } => Ok(LoopCtx {
                guard: guard.clone(),
                body: *body,
                program: w.clone(),
                compiled: compiled.clone(),
            }),
            _ => Err(Error::NoSuchLoop("program is not a while loop".into())),
        }
    }

    /// `F_f(X)(σ)`.
    pub fn apply(&self, f: &RtExpr, x: &mut BaseFn<'_>, s: &State, cfg: &ErtConfig) -> Result<Outcome, Error> {
        let (pt, pf) = guard_probs(&self.guard, s)?;
        let mut acc = Outcome::exact(XReal::one());
        if !pf.is_zero() {
            let v = RtEnv::new(s).eval(f)?;
            acc.add_scaled(&Outcome::exact(v), &pf);
        }
        if !pt.is_zero() {
            let mut eng = Engine::new(&self.compiled, cfg, cfg.max_unroll_depth, Base::Fn(x));
            let o = eng.run(Frame::Node(self.body), s)?;
            acc.add_scaled(&o, &pt);
        }
        Ok(acc)
    }

    /// Probability that the guard holds at `σ`.
    pub fn guard_true(&self, s: &State) -> Result<crate::kernel::Rational, Error> {
        Ok(guard_probs(&self.guard, s)?.0)
    }
}

/// `F_f(X)(σ)` with `X` a run-time expression (whose `cont` means `f`).
pub fn char_functional(w: &Program, f: &RtExpr, x: &RtExpr, s: &State, cfg: &ErtConfig) -> Result<ErtResult, Error> {
    let ctx = LoopCtx::new(w)?;
    let mut xf = |t: &State| -> Result<Outcome, Error> {
        let mut k = |u: &State| RtEnv::new(u).eval(f);
        Ok(Outcome::exact(RtEnv::new(t).with_cont(&mut k).eval(x)?))
    };
    let o = ctx.apply(f, &mut xf, s, cfg)?;
    Ok(ErtResult::from_outcome(o, cfg.max_unroll_depth, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_program, parse_rt};

    fn geo() -> Program {
        parse_program("while (c = 1) { c :~ 1/2*<0> + 1/2*<1> }").unwrap()
    }

    #[test]
    fn truncation_example() {
        let p = parse_program(
            "if (1/2*<true> + 1/2*<false>) { succ := true } else { \
               if (1/2*<true> + 1/2*<false>) { succ := true } else { succ := false } }",
        )
        .unwrap();
        let r = ert_eval(&p, &RtExpr::int(0), &State::new(), &ErtConfig::default()).unwrap();
        assert_eq!(r.value, XReal::ratio(5, 2));
        assert_eq!(r.kind, Kind::Exact);
    }

    #[test]
    fn geometric_loop_is_a_lower_bound() {
        let s = State::new().with_int("c", 1);
        let r = ert_eval(&geo(), &RtExpr::int(0), &s, &ErtConfig::default()).unwrap();
        assert_eq!(r.kind, Kind::LowerBound { depth: 64 });
        assert!(r.value < XReal::int(5));
        let gap = XReal::int(5).monus(&r.value).unwrap();
        assert!(gap.to_f64() <= 2f64.powi(-60));
    }

    #[test]
    fn geometric_loop_solved_exactly() {
        let cfg = ErtConfig::default().solving();
        for (c, v) in [(1, 5), (0, 1)] {
            let r = ert_eval(&geo(), &RtExpr::int(0), &State::new().with_int("c", c), &cfg).unwrap();
            assert_eq!((r.value, r.kind), (XReal::int(v), Kind::Exact));
        }
    }

    #[test]
    fn characteristic_functional_at_fixed_point() {
        let s = State::new().with_int("c", 1);
        let x = parse_rt("1 + [c = 1]*4").unwrap();
        let r = char_functional(&geo(), &RtExpr::int(0), &x, &s, &ErtConfig::default()).unwrap();
        assert_eq!(r.value, XReal::int(5));
    }

    #[test]
    fn terminating_loop_is_exact() {
        let p = parse_program("while (x > 0) { x := x - 1 }").unwrap();
        let r = ert_eval(&p, &RtExpr::int(0), &State::new().with_int("x", 5), &ErtConfig::default()).unwrap();
        assert_eq!((r.value, r.kind), (XReal::int(11), Kind::Exact));
    }

    #[test]
    fn halt_discards_continuation() {
        let p = parse_program("skip; halt").unwrap();
        let r = ert_eval(&p, &RtExpr::int(100), &State::new(), &ErtConfig::default()).unwrap();
        assert_eq!(r.value, XReal::one());
    }

    #[test]
    fn budget_is_enforced() {
        let p = parse_program("x := 0; while (x < 1000) { x := x + 1 }").unwrap();
        let cfg = ErtConfig {
            eval_budget: 100,
            ..ErtConfig::default().with_depth(2048)
        };
        assert!(matches!(
            ert_eval(&p, &RtExpr::int(0), &State::new(), &cfg),
            Err(Error::BudgetExceeded(100))
        ));
    }
}
