//! Random programs, run-time expressions and states for property testing.
//!
//! Programs range over the variables `a`, `b`, `c` with values kept in
//! `0..=3`, so every reachable state space is finite. Distributions have at
//! most four support points and probabilities with denominators up to 8.
//! Loops count a variable up to a bound and leave that variable alone in
//! their loop-free body, so they terminate almost surely.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kernel::{Rational, State, XReal};
use crate::lang::{BinOp, DistExpr, Expr, Program, RtExpr, Target};

pub const VARS: [&str; 3] = ["a", "b", "c"];
const MAX: i64 = 3;

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_depth: u32,
    pub loops: bool,
    pub choice: bool,
    pub halt: bool,
    /// Point-mass distributions only, no `[]`.
    pub deterministic: bool,
    /// Allow coin-flip loop guards, whose loops need not be certified exact
    /// by unrolling.
    pub coin_loops: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_depth: 4,
            loops: true,
            choice: true,
            halt: true,
            deterministic: false,
            coin_loops: true,
        }
    }
}

impl GenConfig {
    pub fn deterministic(max_depth: u32) -> Self {
        GenConfig {
            max_depth,
            loops: true,
            choice: false,
            halt: true,
            deterministic: true,
            coin_loops: false,
        }
    }
}

pub fn rng(seed: u64, case: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(case);
    r
}

pub struct Gen<'r, R: Rng> {
    pub rng: &'r mut R,
    pub cfg: GenConfig,
}

impl<R: Rng> Gen<'_, R> {
    fn var(&mut self, avoid: &[&str]) -> &'static str {
        let pool: Vec<&'static str> = VARS.iter().copied().filter(|v| !avoid.contains(v)).collect();
        pool.choose(self.rng).copied().unwrap_or("a")
    }

    /// An integer expression staying in `0..=3` on states in range.
    fn value(&mut self) -> Expr {
        match self.rng.gen_range(0..4) {
            0 => Expr::int(self.rng.gen_range(0..=MAX)),
            1 => Expr::var(self.var(&[])),
            2 => {
                let v = self.var(&[]);
                let k = self.rng.gen_range(1..=MAX);
                Expr::bin(BinOp::Mod, Expr::bin(BinOp::Add, Expr::var(v), Expr::int(k)), Expr::int(MAX + 1))
            }
            _ => {
                let v = self.var(&[]);
                let w = self.var(&[]);
                Expr::bin(BinOp::Mod, Expr::bin(BinOp::Add, Expr::bin(BinOp::Mul, Expr::var(v), Expr::int(2)), Expr::var(w)), Expr::int(MAX + 1))
            }
        }
    }

    fn cond(&mut self) -> Expr {
        let v = Expr::var(self.var(&[]));
        let op = *[BinOp::Lt, BinOp::Le, BinOp::Eq, BinOp::Ne, BinOp::Gt].choose(self.rng).unwrap();
        let rhs = if self.rng.gen_bool(0.7) {
            Expr::int(self.rng.gen_range(0..=MAX))
        } else {
            Expr::var(self.var(&[]))
        };
        let c = Expr::bin(op, v, rhs);
        match self.rng.gen_range(0..8) {
            0 => Expr::Not(Box::new(c)),
            1 => Expr::bin(BinOp::And, c, Expr::bin(BinOp::Lt, Expr::var(self.var(&[])), Expr::int(MAX))),
            _ => c,
        }
    }

    /// Random positive weights with a common denominator `d <= 8`.
    pub fn weights(&mut self, k: usize) -> Vec<Rational> {
        let d = self.rng.gen_range(k.max(2)..=8) as i64;
        let mut cuts: Vec<i64> = (1..d).collect();
        cuts.shuffle(self.rng);
        let mut cuts: Vec<i64> = cuts.into_iter().take(k - 1).collect();
        cuts.sort();
        let mut prev = 0;
        let mut out = Vec::with_capacity(k);
        for c in cuts.into_iter().chain(std::iter::once(d)) {
            out.push(Rational::new((c - prev).into(), d.into()));
            prev = c;
        }
        out
    }

    fn dist(&mut self) -> DistExpr {
        if self.cfg.deterministic || self.rng.gen_bool(0.4) {
            return DistExpr::Dirac(self.value());
        }
        if self.rng.gen_bool(0.15) {
            let lo = self.rng.gen_range(0..MAX);
            return DistExpr::Uniform(Expr::int(lo), Expr::int(self.rng.gen_range(lo..=MAX)));
        }
        let k = self.rng.gen_range(2..=4);
        let ws = self.weights(k);
        DistExpr::Weighted(ws.into_iter().map(|p| (p, self.value())).collect())
    }

    fn guard(&mut self) -> DistExpr {
        if self.cfg.deterministic || self.rng.gen_bool(0.5) {
            return DistExpr::Dirac(self.cond());
        }
        let ws = self.weights(2);
        let a = if self.rng.gen_bool(0.6) { Expr::Bool(true) } else { self.cond() };
        let b = if self.rng.gen_bool(0.6) { Expr::Bool(false) } else { self.cond() };
        DistExpr::Weighted(vec![(ws[0].clone(), a), (ws[1].clone(), b)])
    }

    fn assign(&mut self, avoid: &[&str]) -> Program {
        let v = self.var(avoid);
        Program::Assign(Target::Var(v.into()), self.dist())
    }

    /// A program of nesting depth at most `depth`. Variables in `avoid` are
    /// never assigned.
    pub fn program(&mut self, depth: u32, avoid: &[&str], in_loop: bool) -> Program {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.leaf(avoid);
        }
        let mut menu = vec![0, 0, 1, 1, 2];
        if self.cfg.choice && !self.cfg.deterministic {
            menu.push(3);
        }
        if self.cfg.loops && !in_loop {
            menu.extend([4, 4, 5]);
        }
        match *menu.choose(self.rng).unwrap() {
            0 | 2 => {
                let a = self.program(depth - 1, avoid, in_loop);
                let b = self.program(depth - 1, avoid, in_loop);
                Program::seq(a, b)
            }
            1 => {
                let g = self.guard();
                let a = self.program(depth - 1, avoid, in_loop);
                let b = self.program(depth - 1, avoid, in_loop);
                Program::ite(g, a, b)
            }
            3 => {
                let a = self.program(depth - 1, avoid, in_loop);
                let b = self.program(depth - 1, avoid, in_loop);
                Program::choice(a, b)
            }
            4 => self.counting_loop(depth, avoid),
            _ => {
                let k = self.rng.gen_range(0..=3);
                let g = self.guard();
                let body = self.program(depth - 1, avoid, true);
                Program::Bounded(k, g, Box::new(body))
            }
        }
    }

    fn leaf(&mut self, avoid: &[&str]) -> Program {
        match self.rng.gen_range(0..10) {
            0 => Program::Skip,
            1 => Program::Empty,
            2 if self.cfg.halt && self.rng.gen_bool(0.3) => Program::Halt,
            _ => self.assign(avoid),
        }
    }

    /// `while (v < K) { body; v :~ p*<v + 1> + (1-p)*<v> }`, or with a coin
    /// guard, `while (p*<true> + ...) { body }`.
    fn counting_loop(&mut self, depth: u32, avoid: &[&str]) -> Program {
        if self.cfg.coin_loops && !self.cfg.deterministic && self.rng.gen_bool(0.2) {
            let ws = self.weights(2);
            let g = DistExpr::Weighted(vec![(ws[0].clone(), Expr::Bool(true)), (ws[1].clone(), Expr::Bool(false))]);
            let body = self.program(depth - 1, avoid, true);
            return Program::while_loop(g, body);
        }
        let v = self.var(avoid);
        let k = self.rng.gen_range(1..=MAX);
        let g = DistExpr::Dirac(Expr::bin(BinOp::Lt, Expr::var(v), Expr::int(k)));
        let mut inner: Vec<&str> = avoid.to_vec();
        inner.push(v);
        let body = self.program(depth - 1, &inner, true);
        let step = Expr::bin(BinOp::Add, Expr::var(v), Expr::int(1));
        let inc = if self.cfg.deterministic || self.rng.gen_bool(0.5) {
            DistExpr::Dirac(step)
        } else {
            let ws = self.weights(2);
            DistExpr::Weighted(vec![(ws[0].clone(), step), (ws[1].clone(), Expr::var(v))])
        };
        Program::while_loop(g, Program::seq(body, Program::Assign(Target::Var(v.into()), inc)))
    }

    pub fn state(&mut self) -> State {
        VARS.iter().fold(State::new(), |s, v| s.with_int(v, self.rng.gen_range(0..=MAX)))
    }

    /// A finite nonnegative run-time expression over the variables.
    pub fn rt(&mut self) -> RtExpr {
        let v = RtExpr::Var(self.var(&[]).into());
        match self.rng.gen_range(0..5) {
            0 => RtExpr::int(self.rng.gen_range(0..=4)),
            1 => v,
            2 => RtExpr::mul(RtExpr::int(self.rng.gen_range(1..=3)), v),
            3 => RtExpr::add(RtExpr::Indicator(self.cond()), RtExpr::mul(v, RtExpr::Var(self.var(&[]).into()))),
            _ => RtExpr::add(
                RtExpr::mul(RtExpr::Indicator(self.cond()), RtExpr::Const(XReal::ratio(self.rng.gen_range(1..=7), 2))),
                v,
            ),
        }
    }

    pub fn ratio(&mut self) -> Rational {
        Rational::new(self.rng.gen_range(0..=12).into(), self.rng.gen_range(1..=4).into())
    }
}

/// Every simplification of `p` one step away: a subtree replaced by `skip`,
/// `empty`, or one of its children.
pub fn shrink_candidates(p: &Program) -> Vec<Program> {
    let mut out = Vec::new();
    if !matches!(p, Program::Skip | Program::Empty) {
        out.push(Program::Empty);
        out.push(Program::Skip);
    }
    for c in p.children() {
        out.push(c.clone());
    }
    let rebuild = |i: usize, q: Program| -> Program {
        match (p, i) {
            (Program::Seq(_, b), 0) => Program::seq(q, (**b).clone()),
            (Program::Seq(a, _), _) => Program::seq((**a).clone(), q),
            (Program::Choice(_, b), 0) => Program::choice(q, (**b).clone()),
            (Program::Choice(a, _), _) => Program::choice((**a).clone(), q),
            (Program::If(g, _, b), 0) => Program::ite(g.clone(), q, (**b).clone()),
            (Program::If(g, a, _), _) => Program::ite(g.clone(), (**a).clone(), q),
            (Program::While(g, _, ann), _) => Program::While(g.clone(), Box::new(q), ann.clone()),
            (Program::Bounded(k, g, _), _) => Program::Bounded(*k, g.clone(), Box::new(q)),
            _ => unreachable!(),
        }
    };
    for (i, c) in p.children().into_iter().enumerate() {
        for q in shrink_candidates(c) {
            out.push(rebuild(i, q));
        }
    }
    out
}

/// Greedy shrinking: repeatedly take the first smaller candidate on which
/// `fails` still holds.
pub fn shrink(p: Program, mut fails: impl FnMut(&Program) -> bool) -> Program {
    let mut cur = p;
    let mut rounds = 0;
    'outer: while rounds < 200 {
        rounds += 1;
        for q in shrink_candidates(&cur) {
            if q.size() < cur.size() && fails(&q) {
                cur = q;
                continue 'outer;
            }
        }
        break;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::eval::eval_dist;
    use num_bigint::BigInt;

    #[test]
    fn weights_sum_to_one() {
        let mut r = rng(1, 0);
        let mut g = Gen {
            rng: &mut r,
            cfg: GenConfig::default(),
        };
        for k in 2..=4 {
            for _ in 0..50 {
                let ws = g.weights(k);
                assert_eq!(ws.len(), k);
                assert_eq!(ws.iter().sum::<Rational>(), crate::kernel::rat(1, 1));
                assert!(ws.iter().all(|w| *w > crate::kernel::rat(0, 1)));
            }
        }
    }

    #[test]
    fn values_stay_in_range() {
        let mut r = rng(2, 0);
        let mut g = Gen {
            rng: &mut r,
            cfg: GenConfig::default(),
        };
        for _ in 0..200 {
            let s = g.state();
            let d = g.dist();
            for (v, _) in eval_dist(&d, &s).unwrap() {
                let n = v.as_int().unwrap().clone();
                assert!(n >= BigInt::from(0) && n <= BigInt::from(MAX));
            }
        }
    }

    #[test]
    fn shrinking_reaches_a_minimum() {
        let p = crate::lang::parse_program("a := 1; { skip } [] { b := 2; halt }; c := 0").unwrap();
        let small = shrink(p, |q| q.has_halt());
        assert_eq!(small, Program::Halt);
    }

    #[test]
    fn same_seed_same_program() {
        let mk = || {
            let mut r = rng(7, 3);
            Gen {
                rng: &mut r,
                cfg: GenConfig::default(),
            }
            .program(4, &[], false)
        };
        assert_eq!(mk(), mk());
    }
}
