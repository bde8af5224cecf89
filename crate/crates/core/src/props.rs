//! Randomised checks of the transformer's algebraic laws, of its agreement
//! with the operational MDP, and of the deterministic step counter.
//!
//! Every case draws its program, states and run-time expressions from its
//! own ChaCha stream `(seed, case id)`, so a case can be replayed alone and
//! the cases can run in parallel with a deterministic report.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::ert::{det_step_count, ert_eval, ErtConfig, Mutation, Unrolling};
use crate::gen::{rng, shrink, Gen, GenConfig, VARS};
use crate::invariants::{check_upper_invariant, Bound, Status, StateDomain, Table};
use crate::kernel::{Rational, State, XReal};
use crate::lang::{pretty, Program, RtExpr};
use crate::mdp::{cross_check, CrossCheckConfig, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Monotonicity,
    Constants,
    Infinity,
    SubAdditivity,
    Scaling,
    Unrolling,
    UpperInvariant,
    CrossCheck,
    Deterministic,
}

impl Property {
    pub const ALL: [Property; 9] = [
        Property::Monotonicity,
        Property::Constants,
        Property::Infinity,
        Property::SubAdditivity,
        Property::Scaling,
        Property::Unrolling,
        Property::UpperInvariant,
        Property::CrossCheck,
        Property::Deterministic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Monotonicity => "monotonicity",
            Property::Constants => "constants",
            Property::Infinity => "infinity",
            Property::SubAdditivity => "sub-additivity",
            Property::Scaling => "scaling",
            Property::Unrolling => "unrolling",
            Property::UpperInvariant => "upper-invariant",
            Property::CrossCheck => "crosscheck",
            Property::Deterministic => "deterministic",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PropsConfig {
    pub seed: u64,
    pub count: usize,
    pub max_depth: u32,
    /// Unrolling depth for the laws checked on `while^{<k}` approximants.
    pub fixed_depth: u32,
    pub states_per_case: usize,
    pub mutation: Mutation,
    pub node_cap: usize,
    pub tol: f64,
    pub properties: Vec<Property>,
}

impl Default for PropsConfig {
    fn default() -> Self {
        PropsConfig {
            seed: 42,
            count: 500,
            max_depth: 4,
            fixed_depth: 6,
            states_per_case: 3,
            mutation: Mutation::None,
            node_cap: crate::mdp::crosscheck::default_node_cap(),
            tol: 1e-9,
            properties: Property::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub property: Property,
    pub case: usize,
    pub program: String,
    /// The program after shrinking.
    pub shrunk: String,
    pub state: State,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub passed: usize,
    pub skipped: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropsReport {
    pub seed: u64,
    pub count: usize,
    pub max_depth: u32,
    pub tallies: BTreeMap<Property, Tally>,
    pub failures: Vec<Failure>,
}

impl PropsReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn passed(&self, p: Property) -> usize {
        self.tallies.get(&p).map_or(0, |t| t.passed)
    }
}

enum Check {
    Pass,
    Skip,
    Fail(String),
}

impl From<Result<Check, Error>> for Check {
    fn from(r: Result<Check, Error>) -> Check {
        r.unwrap_or_else(|e| Check::Fail(format!("error: {e}")))
    }
}

fn expect(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Check::Pass
    } else {
        Check::Fail(msg())
    }
}

/// Random inputs of one case besides the program.
#[derive(Clone)]
struct Inputs {
    states: Vec<State>,
    f: RtExpr,
    g: RtExpr,
    r: Rational,
}

struct Checker<'c> {
    cfg: &'c PropsConfig,
}

impl Checker<'_> {
    fn fixed(&self) -> ErtConfig {
        ErtConfig {
            max_unroll_depth: self.cfg.fixed_depth,
            unrolling: Unrolling::Fixed,
            mutation: self.cfg.mutation,
            ..ErtConfig::default()
        }
    }

    /// For laws stated on exact values. Loops that `Solve` cannot handle are
    /// only exact here if they exit within a few rounds, so a shallow
    /// unrolling depth loses nothing on generated programs.
    fn solving(&self) -> ErtConfig {
        ErtConfig {
            max_unroll_depth: 8,
            mutation: self.cfg.mutation,
            ..ErtConfig::default().solving()
        }
    }

    fn plain(&self) -> ErtConfig {
        ErtConfig {
            mutation: self.cfg.mutation,
            ..ErtConfig::default()
        }
    }

    fn check(&self, prop: Property, p: &Program, x: &Inputs, s: &State) -> Check {
        let r = match prop {
            Property::Monotonicity => self.monotonicity(p, x, s),
            Property::Constants => self.constants(p, x, s),
            Property::Infinity => self.infinity(p, s),
            Property::SubAdditivity => self.sub_additivity(p, x, s),
            Property::Scaling => self.scaling(p, x, s),
            Property::Unrolling => self.unrolling(p, x, s),
            Property::CrossCheck => self.crosscheck(p, x, s),
            Property::Deterministic => self.deterministic(p, s),
            Property::UpperInvariant => self.upper_invariant(p, x),
        };
        r.into()
    }

    /// `f ⪯ f + g` implies `ert[C](f) ⪯ ert[C](f + g)`.
    fn monotonicity(&self, p: &Program, x: &Inputs, s: &State) -> Result<Check, Error> {
        let cfg = self.fixed();
        let a = ert_eval(p, &x.f, s, &cfg)?.value;
        let b = ert_eval(p, &RtExpr::add(x.f.clone(), x.g.clone()), s, &cfg)?.value;
        Ok(expect(a <= b, || format!("ert(f) = {a} > ert(f + g) = {b}")))
    }

    /// `ert[C](k + f) = k + ert[C](f)` for halt-free `C`.
    fn constants(&self, p: &Program, x: &Inputs, s: &State) -> Result<Check, Error> {
        if p.has_halt() || has_bounded(p) {
            return Ok(Check::Skip);
        }
        let cfg = self.solving();
        let k = XReal::Finite(x.r.clone());
        let a = ert_eval(p, &x.f, s, &cfg)?;
        let b = ert_eval(p, &RtExpr::add(RtExpr::Const(k.clone()), x.f.clone()), s, &cfg)?;
        if !a.kind.is_exact() || !b.kind.is_exact() {
            return Ok(Check::Skip);
        }
        let want = a.value.clone() + k;
        Ok(expect(b.value == want, || format!("ert(k + f) = {} but k + ert(f) = {want}", b.value)))
    }

    /// `ert[C](∞) = ∞` for halt-free `C`; any lower bound of ∞ is ∞ itself.
    fn infinity(&self, p: &Program, s: &State) -> Result<Check, Error> {
        if p.has_halt() || has_bounded(p) {
            return Ok(Check::Skip);
        }
        let cfg = ErtConfig {
            max_unroll_depth: 8,
            ..self.plain()
        };
        let v = ert_eval(p, &RtExpr::Const(XReal::Infinity), s, &cfg)?.value;
        Ok(expect(v.is_infinite(), || format!("ert(∞) = {v}")))
    }

    /// For fully probabilistic `C`: `ert(f + g) ⪯ ert(f) + ert(g)`, and in
    /// fact `ert(f + g) + ert(0) = ert(f) + ert(g)`.
    fn sub_additivity(&self, p: &Program, x: &Inputs, s: &State) -> Result<Check, Error> {
        if p.has_choice() {
            return Ok(Check::Skip);
        }
        let cfg = self.fixed();
        let fg = ert_eval(p, &RtExpr::add(x.f.clone(), x.g.clone()), s, &cfg)?.value;
        let f = ert_eval(p, &x.f, s, &cfg)?.value;
        let g = ert_eval(p, &x.g, s, &cfg)?.value;
        let z = ert_eval(p, &RtExpr::int(0), s, &cfg)?.value;
        let sum = f + g;
        if fg > sum {
            return Ok(Check::Fail(format!("ert(f + g) = {fg} > ert(f) + ert(g) = {sum}")));
        }
        let lhs = fg.clone() + z;
        Ok(expect(lhs == sum, || format!("ert(f + g) + ert(0) = {lhs} but ert(f) + ert(g) = {sum}")))
    }

    /// `min(1, r)·ert(f) ⪯ ert(r·f) ⪯ max(1, r)·ert(f)`.
    fn scaling(&self, p: &Program, x: &Inputs, s: &State) -> Result<Check, Error> {
        let cfg = self.fixed();
        let one = Rational::from_integer(1.into());
        let base = ert_eval(p, &x.f, s, &cfg)?.value;
        let rf = RtExpr::mul(RtExpr::Const(XReal::Finite(x.r.clone())), x.f.clone());
        let scaled = ert_eval(p, &rf, s, &cfg)?.value;
        let lo = base.scale(&x.r.clone().min(one.clone()));
        let hi = base.scale(&x.r.clone().max(one));
        Ok(expect(lo <= scaled && scaled <= hi, || {
            format!("r = {}: ert(r·f) = {scaled} outside [{lo}, {hi}]", x.r)
        }))
    }

    /// Replacing the first loop by one unfolding leaves ert unchanged.
    fn unrolling(&self, p: &Program, x: &Inputs, s: &State) -> Result<Check, Error> {
        let Some(path) = first_loop(p) else {
            return Ok(Check::Skip);
        };
        let q = replace_at(p, &path, &unfold(p.at_path(&path).unwrap()));
        let cfg = self.solving();
        let a = ert_eval(p, &x.f, s, &cfg)?;
        let b = ert_eval(&q, &x.f, s, &cfg)?;
        if !a.kind.is_exact() || !b.kind.is_exact() {
            return Ok(Check::Skip);
        }
        Ok(expect(a.value == b.value, || {
            format!("{} before unfolding, {} after: {}", a.value, b.value, pretty::program_inline(&q))
        }))
    }

    /// The exact ert of a loop, tabulated on every state, is an upper
    /// invariant of that loop and a fixed point of its functional.
    fn upper_invariant(&self, p: &Program, x: &Inputs) -> Result<Check, Error> {
        let Some(w) = first_while(p) else {
            return Ok(Check::Skip);
        };
        let cfg = self.solving();
        let d = full_domain();
        let mut table = Table::new();
        for s in d.states() {
            let r = ert_eval(w, &x.f, &s, &cfg)?;
            if !r.kind.is_exact() || r.value.is_infinite() {
                return Ok(Check::Skip);
            }
            table.insert(s, r.value);
        }
        let v = check_upper_invariant(w, &x.f, &Bound::Table(table), &d, &cfg)?;
        Ok(match v.status {
            Status::Holds { exact_equality: true } => Check::Pass,
            Status::Holds { exact_equality: false } => Check::Fail("holds, but not as a fixed point".into()),
            Status::Inconclusive { .. } => Check::Skip,
            Status::Fails { .. } => Check::Fail(format!("loop {}: {v}", pretty::program_inline(w))),
        })
    }

    fn crosscheck(&self, p: &Program, x: &Inputs, s: &State) -> Result<Check, Error> {
        let cfg = CrossCheckConfig {
            ert: ErtConfig {
                mutation: self.cfg.mutation,
                ..ErtConfig::default().solving()
            },
            node_cap: self.cfg.node_cap,
            tol: self.cfg.tol,
            ..CrossCheckConfig::default()
        };
        let c = cross_check(p, &x.f, s, &cfg)?;
        Ok(match c.verdict {
            Verdict::Agree => Check::Pass,
            Verdict::Unchecked => Check::Skip,
            Verdict::Disagree => Check::Fail(format!("ert {} ({}) vs MDP {}", c.ert.value, c.ert.kind, c.mdp.value)),
        })
    }

    /// Step count of the deterministic interpreter equals `ert[C](0)`.
    fn deterministic(&self, p: &Program, s: &State) -> Result<Check, Error> {
        if !p.is_syntactically_deterministic() {
            return Ok(Check::Skip);
        }
        let run = det_step_count(p, s, 1_000_000)?;
        let e = ert_eval(p, &RtExpr::int(0), s, &self.plain())?;
        if !e.kind.is_exact() {
            return Ok(Check::Fail(format!("terminating program but ert is {}", e.kind)));
        }
        let steps = XReal::Finite(Rational::from_integer(run.steps.into()));
        Ok(expect(e.value == steps, || format!("{} steps, ert {}", run.steps, e.value)))
    }
}

fn has_bounded(p: &Program) -> bool {
    matches!(p, Program::Bounded(..)) || p.children().iter().any(|c| has_bounded(c))
}

fn first_loop(p: &Program) -> Option<Vec<usize>> {
    fn go(p: &Program, path: &mut Vec<usize>) -> bool {
        if matches!(p, Program::While(..) | Program::Bounded(..)) {
            return true;
        }
        for (i, c) in p.children().into_iter().enumerate() {
            path.push(i);
            if go(c, path) {
                return true;
            }
            path.pop();
        }
        false
    }
    let mut path = Vec::new();
    go(p, &mut path).then_some(path)
}

fn first_while(p: &Program) -> Option<&Program> {
    p.loop_paths().first().and_then(|path| p.at_path(path))
}

/// `while (ξ) {C}` becomes `if (ξ) {C; while (ξ) {C}} else {empty}`, and
/// `while^{<k}` likewise with `k - 1` (or `halt` when `k = 0`).
pub fn unfold(w: &Program) -> Program {
    match w {
        Program::While(g, body, _) => Program::ite(g.clone(), Program::seq((**body).clone(), w.clone()), Program::Empty),
        Program::Bounded(0, _, _) => Program::Halt,
        Program::Bounded(k, g, body) => Program::ite(
            g.clone(),
            Program::seq((**body).clone(), Program::Bounded(k - 1, g.clone(), body.clone())),
            Program::Empty,
        ),
        p => p.clone(),
    }
}

pub fn replace_at(p: &Program, path: &[usize], q: &Program) -> Program {
    let Some((&i, rest)) = path.split_first() else {
        return q.clone();
    };
    let sub = |c: &Program| replace_at(c, rest, q);
    match (p, i) {
        (Program::Seq(a, b), 0) => Program::seq(sub(a), (**b).clone()),
        (Program::Seq(a, b), _) => Program::seq((**a).clone(), sub(b)),
        (Program::Choice(a, b), 0) => Program::choice(sub(a), (**b).clone()),
        (Program::Choice(a, b), _) => Program::choice((**a).clone(), sub(b)),
        (Program::If(g, a, b), 0) => Program::ite(g.clone(), sub(a), (**b).clone()),
        (Program::If(g, a, b), _) => Program::ite(g.clone(), (**a).clone(), sub(b)),
        (Program::While(g, b, ann), _) => Program::While(g.clone(), Box::new(sub(b)), ann.clone()),
        (Program::Bounded(k, g, b), _) => Program::Bounded(*k, g.clone(), Box::new(sub(b))),
        (p, _) => p.clone(),
    }
}

/// All 64 states over `a, b, c ∈ 0..=3`.
pub fn full_domain() -> StateDomain {
    let r: Vec<(&str, i64, i64)> = VARS.iter().map(|v| (*v, 0, 3)).collect();
    StateDomain::ranges(&r).expect("nonempty ranges")
}

struct Case {
    program: Program,
    inputs: Inputs,
}

fn draw(cfg: &PropsConfig, gen_cfg: &GenConfig, id: usize) -> Case {
    let mut r = rng(cfg.seed, id as u64);
    let mut g = Gen {
        rng: &mut r,
        cfg: gen_cfg.clone(),
    };
    let program = g.program(cfg.max_depth, &[], false);
    let states = (0..cfg.states_per_case).map(|_| g.state()).collect();
    let inputs = Inputs {
        states,
        f: g.rt(),
        g: g.rt(),
        r: g.ratio(),
    };
    Case { program, inputs }
}

type CaseOutcome = Vec<(Property, Result<bool, Failure>)>;

fn run_case(cfg: &PropsConfig, props: &[Property], id: usize, case: &Case) -> CaseOutcome {
    let chk = Checker { cfg };
    let p = &case.program;
    let mut out = Vec::new();
    for &prop in props {
        // The invariant law looks at all states at once.
        let states: Vec<State> = if prop == Property::UpperInvariant {
            vec![State::new()]
        } else {
            case.inputs.states.clone()
        };
        let mut ran = false;
        let mut failure = None;
        for s in &states {
            match chk.check(prop, p, &case.inputs, s) {
                Check::Pass => ran = true,
                Check::Skip => {}
                Check::Fail(detail) => {
                    let small = shrink(p.clone(), |q| matches!(chk.check(prop, q, &case.inputs, s), Check::Fail(_)));
                    let detail = match chk.check(prop, &small, &case.inputs, s) {
                        Check::Fail(d) => d,
                        _ => detail,
                    };
                    failure = Some(Failure {
                        property: prop,
                        case: id,
                        program: pretty::program_inline(p),
                        shrunk: pretty::program_inline(&small),
                        state: s.clone(),
                        detail: format!("{detail} [f = {}, g = {}, r = {}]", pretty::rt(&case.inputs.f), pretty::rt(&case.inputs.g), case.inputs.r),
                    });
                    break;
                }
            }
        }
        out.push((prop, failure.map_or(Ok(ran), Err)));
    }
    out
}

fn assemble(cfg: &PropsConfig, results: Vec<CaseOutcome>) -> PropsReport {
    let mut tallies: BTreeMap<Property, Tally> = BTreeMap::new();
    let mut failures = Vec::new();
    for case in results {
        for (prop, r) in case {
            let t = tallies.entry(prop).or_default();
            match r {
                Ok(true) => t.passed += 1,
                Ok(false) => t.skipped += 1,
                Err(f) => {
                    t.failed += 1;
                    failures.push(f);
                }
            }
        }
    }
    PropsReport {
        seed: cfg.seed,
        count: cfg.count,
        max_depth: cfg.max_depth,
        tallies,
        failures,
    }
}

fn run_with(cfg: &PropsConfig, gen_cfg: &GenConfig, props: &[Property], offset: usize) -> PropsReport {
    let results: Vec<CaseOutcome> = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let id = offset + i;
            run_case(cfg, props, id, &draw(cfg, gen_cfg, id))
        })
        .collect();
    assemble(cfg, results)
}

/// The laws and the cross-check on general random programs, plus the
/// deterministic correspondence on programs from the deterministic
/// generator (case ids `count..2·count`).
pub fn run_props(cfg: &PropsConfig) -> PropsReport {
    let general: Vec<Property> = cfg.properties.iter().copied().filter(|p| *p != Property::Deterministic).collect();
    let mut report = run_with(cfg, &GenConfig::default(), &general, 0);
    if cfg.properties.contains(&Property::Deterministic) {
        let det = run_deterministic(cfg);
        for (k, v) in det.tallies {
            report.tallies.insert(k, v);
        }
        report.failures.extend(det.failures);
    }
    report
}

/// `det_step_count` against ert on random deterministic programs.
pub fn run_deterministic(cfg: &PropsConfig) -> PropsReport {
    run_with(cfg, &GenConfig::deterministic(cfg.max_depth), &[Property::Deterministic], cfg.count)
}

/// Replays one case, for reproducing a reported failure.
pub fn case_program(cfg: &PropsConfig, id: usize) -> Program {
    let gen_cfg = if id >= cfg.count {
        GenConfig::deterministic(cfg.max_depth)
    } else {
        GenConfig::default()
    };
    draw(cfg, &gen_cfg, id).program
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn small(count: usize) -> PropsConfig {
        PropsConfig {
            count,
            seed: 3,
            ..PropsConfig::default()
        }
    }

    #[test]
    fn unfold_keeps_value() {
        let p = parse_program("while (c = 1) { c :~ 1/2*<0> + 1/2*<1> }").unwrap();
        let q = unfold(&p);
        let s = State::new().with_int("c", 1);
        let cfg = ErtConfig::default().solving();
        let a = ert_eval(&p, &RtExpr::int(0), &s, &cfg).unwrap().value;
        let b = ert_eval(&q, &RtExpr::int(0), &s, &cfg).unwrap().value;
        assert_eq!(a, XReal::int(5));
        assert_eq!(a, b);
    }

    #[test]
    fn replace_reaches_nested_loop() {
        let p = parse_program("a := 1; if (a = 1) { skip } else { while (a < 3) { a := a + 1 } }").unwrap();
        let path = first_loop(&p).unwrap();
        assert_eq!(path, vec![1, 1]);
        let q = replace_at(&p, &path, &Program::Skip);
        assert!(!q.has_loops());
    }

    #[test]
    fn small_run_passes() {
        let r = run_props(&small(40));
        assert!(r.ok(), "{:#?}", r.failures);
        for p in Property::ALL {
            assert!(r.passed(p) > 0, "{} never exercised", p.name());
        }
    }

    #[test]
    fn mutant_is_caught() {
        let cfg = PropsConfig {
            mutation: Mutation::FreeIfGuard,
            ..small(40)
        };
        let r = run_props(&cfg);
        assert!(!r.ok());
        let f = &r.failures[0];
        assert!(f.shrunk.len() <= f.program.len());
    }

    #[test]
    fn report_is_reproducible() {
        assert_eq!(run_props(&small(15)), run_props(&small(15)));
    }
}
