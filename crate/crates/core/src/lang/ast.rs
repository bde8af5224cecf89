use std::collections::BTreeSet;

use num_bigint::BigInt;

use crate::kernel::{Rational, XReal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

/// Deterministic program expression over the current state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(BigInt),
    Bool(bool),
    Var(String),
    Cell(String, Box<Expr>),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Int(BigInt::from(n))
    }

    pub fn var(x: &str) -> Expr {
        Expr::Var(x.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Int(_) | Expr::Bool(_) => {}
            Expr::Var(x) => {
                out.insert(x.clone());
            }
            Expr::Cell(a, i) => {
                out.insert(a.clone());
                i.free_vars(out);
            }
            Expr::Neg(e) | Expr::Not(e) => e.free_vars(out),
            Expr::Bin(_, a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
        }
    }
}

/// Distribution expression; its support values are computed at a state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DistExpr {
    Dirac(Expr),
    Weighted(Vec<(Rational, Expr)>),
    /// Uniform over the integers `lo..=hi`.
    Uniform(Expr, Expr),
}

impl DistExpr {
    pub fn is_dirac(&self) -> bool {
        matches!(self, DistExpr::Dirac(_))
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            DistExpr::Dirac(e) => e.free_vars(out),
            DistExpr::Weighted(ws) => ws.iter().for_each(|(_, e)| e.free_vars(out)),
            DistExpr::Uniform(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Var(String),
    Cell(String, Expr),
}

impl Target {
    pub fn name(&self) -> &str {
        match self {
            Target::Var(x) | Target::Cell(x, _) => x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Upper,
    Lower,
    Exact,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Upper => "upper",
            Direction::Lower => "lower",
            Direction::Exact => "exact",
        }
    }
}

/// A claimed bound on a loop's run-time w.r.t. its continuation, written with
/// `cont` for the continuation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Annotation {
    pub direction: Direction,
    pub bound: RtExpr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Program {
    Empty,
    Skip,
    Halt,
    Assign(Target, DistExpr),
    /// Whole-array literal assignment `a := [e1, ..., ek]`.
    AssignArray(String, Vec<Expr>),
    Seq(Box<Program>, Box<Program>),
    Choice(Box<Program>, Box<Program>),
    If(DistExpr, Box<Program>, Box<Program>),
    While(DistExpr, Box<Program>, Option<Annotation>),
    /// `while^{<k}`: at most `k` guard evaluations, then `halt`.
    Bounded(u32, DistExpr, Box<Program>),
}

impl Program {
    pub fn seq(a: Program, b: Program) -> Program {
        Program::Seq(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence of the given statements (`empty` if none).
    pub fn seq_all(mut items: Vec<Program>) -> Program {
        let mut acc = match items.pop() {
            Some(p) => p,
            None => return Program::Empty,
        };
        while let Some(p) = items.pop() {
            acc = Program::seq(p, acc);
        }
        acc
    }

    pub fn choice(a: Program, b: Program) -> Program {
        Program::Choice(Box::new(a), Box::new(b))
    }

    pub fn ite(g: DistExpr, a: Program, b: Program) -> Program {
        Program::If(g, Box::new(a), Box::new(b))
    }

    pub fn while_loop(g: DistExpr, body: Program) -> Program {
        Program::While(g, Box::new(body), None)
    }

    pub fn children(&self) -> Vec<&Program> {
        match self {
            Program::Seq(a, b) | Program::Choice(a, b) | Program::If(_, a, b) => vec![a, b],
            Program::While(_, b, _) | Program::Bounded(_, _, b) => vec![b],
            _ => vec![],
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn has_loops(&self) -> bool {
        matches!(self, Program::While(..) | Program::Bounded(..))
            || self.children().iter().any(|c| c.has_loops())
    }

    pub fn has_unbounded_loops(&self) -> bool {
        matches!(self, Program::While(..)) || self.children().iter().any(|c| c.has_unbounded_loops())
    }

    pub fn has_choice(&self) -> bool {
        matches!(self, Program::Choice(..)) || self.children().iter().any(|c| c.has_choice())
    }

    pub fn has_halt(&self) -> bool {
        matches!(self, Program::Halt) || self.children().iter().any(|c| c.has_halt())
    }

    /// True if every distribution is a point mass and there is no `[]`.
    pub fn is_syntactically_deterministic(&self) -> bool {
        let here = match self {
            Program::Choice(..) => false,
            Program::Assign(_, d) | Program::If(d, _, _) | Program::While(d, _, _) | Program::Bounded(_, d, _) => {
                d.is_dirac()
            }
            _ => true,
        };
        here && self.children().iter().all(|c| c.is_syntactically_deterministic())
    }

    /// Every variable or array name the program reads or writes.
    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Program::Assign(t, d) => {
                out.insert(t.name().to_string());
                if let Target::Cell(_, i) = t {
                    i.free_vars(out);
                }
                d.free_vars(out);
            }
            Program::AssignArray(a, es) => {
                out.insert(a.clone());
                es.iter().for_each(|e| e.free_vars(out));
            }
            Program::If(d, _, _) | Program::While(d, _, _) | Program::Bounded(_, d, _) => d.free_vars(out),
            _ => {}
        }
        if let Program::While(_, _, Some(a)) = self {
            a.bound.free_vars(out);
        }
        for c in self.children() {
            c.vars(out);
        }
    }

    /// Pre-order list of loop paths (child indices from the root).
    pub fn loop_paths(&self) -> Vec<Vec<usize>> {
        fn go(p: &Program, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if matches!(p, Program::While(..)) {
                out.push(path.clone());
            }
            for (i, c) in p.children().into_iter().enumerate() {
                path.push(i);
                go(c, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn at_path(&self, path: &[usize]) -> Option<&Program> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.children().get(*i).and_then(|c| c.at_path(rest)),
        }
    }

    /// Replaces every unbounded `while` by `while^{<k}`.
    pub fn bound_loops(&self, k: u32) -> Program {
        match self {
            Program::Seq(a, b) => Program::seq(a.bound_loops(k), b.bound_loops(k)),
            Program::Choice(a, b) => Program::choice(a.bound_loops(k), b.bound_loops(k)),
            Program::If(g, a, b) => Program::ite(g.clone(), a.bound_loops(k), b.bound_loops(k)),
            Program::While(g, b, _) => Program::Bounded(k, g.clone(), Box::new(b.bound_loops(k))),
            Program::Bounded(j, g, b) => Program::Bounded(*j, g.clone(), Box::new(b.bound_loops(k))),
            p => p.clone(),
        }
    }

    /// Drops all loop annotations.
    pub fn strip_annotations(&self) -> Program {
        match self {
            Program::Seq(a, b) => Program::seq(a.strip_annotations(), b.strip_annotations()),
            Program::Choice(a, b) => Program::choice(a.strip_annotations(), b.strip_annotations()),
            Program::If(g, a, b) => Program::ite(g.clone(), a.strip_annotations(), b.strip_annotations()),
            Program::While(g, b, _) => Program::while_loop(g.clone(), b.strip_annotations()),
            Program::Bounded(j, g, b) => Program::Bounded(*j, g.clone(), Box::new(b.strip_annotations())),
            p => p.clone(),
        }
    }
}

/// Run-time expression: a map from states to `XReal`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RtExpr {
    Const(XReal),
    Var(String),
    Cell(String, Expr),
    /// The symbol `n` of an omega-invariant family.
    Omega,
    /// Iverson bracket `[b]`.
    Indicator(Expr),
    Add(Box<RtExpr>, Box<RtExpr>),
    Mul(Box<RtExpr>, Box<RtExpr>),
    Monus(Box<RtExpr>, Box<RtExpr>),
    Div(Box<RtExpr>, Box<RtExpr>),
    /// Exponent must evaluate to a natural number.
    Pow(Box<RtExpr>, Box<RtExpr>),
    Min(Box<RtExpr>, Box<RtExpr>),
    Max(Box<RtExpr>, Box<RtExpr>),
    /// `sum(k, lo, hi, body)` over the integers `lo..=hi`.
    Sum(String, Box<RtExpr>, Box<RtExpr>, Box<RtExpr>),
    /// `geo(r) = sum_{k>=0} r^k`, infinite for `r >= 1`.
    Geo(Box<RtExpr>),
    /// `harmonic(m) = sum_{k=1}^{m} 1/k`.
    Harmonic(Box<RtExpr>),
    /// Random-walk invariant coefficient `a_{n,k}`.
    RwCoef(Box<RtExpr>, Box<RtExpr>),
    /// Continuation at the state updated simultaneously by the substitutions.
    Cont(Vec<(Target, Expr)>),
}

impl RtExpr {
    pub fn int(n: i64) -> RtExpr {
        RtExpr::Const(XReal::int(n))
    }

    pub fn add(a: RtExpr, b: RtExpr) -> RtExpr {
        RtExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn mul(a: RtExpr, b: RtExpr) -> RtExpr {
        RtExpr::Mul(Box::new(a), Box::new(b))
    }

    pub fn children(&self) -> Vec<&RtExpr> {
        match self {
            RtExpr::Add(a, b)
            | RtExpr::Mul(a, b)
            | RtExpr::Monus(a, b)
            | RtExpr::Div(a, b)
            | RtExpr::Pow(a, b)
            | RtExpr::Min(a, b)
            | RtExpr::Max(a, b)
            | RtExpr::RwCoef(a, b) => vec![a, b],
            RtExpr::Sum(_, a, b, c) => vec![a, b, c],
            RtExpr::Geo(a) | RtExpr::Harmonic(a) => vec![a],
            _ => vec![],
        }
    }

    pub fn uses_cont(&self) -> bool {
        matches!(self, RtExpr::Cont(_)) || self.children().iter().any(|c| c.uses_cont())
    }

    pub fn uses_omega(&self) -> bool {
        let here = match self {
            RtExpr::Omega => true,
            RtExpr::Indicator(e) | RtExpr::Cell(_, e) => {
                let mut fv = BTreeSet::new();
                e.free_vars(&mut fv);
                fv.contains("n")
            }
            _ => false,
        };
        here || self.children().iter().any(|c| c.uses_omega())
    }

    /// Program variables read (sum indices excluded). `cont` is not followed.
    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            RtExpr::Var(x) => {
                out.insert(x.clone());
            }
            RtExpr::Cell(a, i) => {
                out.insert(a.clone());
                i.free_vars(out);
            }
            RtExpr::Indicator(e) => e.free_vars(out),
            RtExpr::Sum(k, lo, hi, body) => {
                lo.free_vars(out);
                hi.free_vars(out);
                let mut inner = BTreeSet::new();
                body.free_vars(&mut inner);
                inner.remove(k);
                out.extend(inner);
            }
            RtExpr::Cont(subs) => {
                for (t, e) in subs {
                    if let Target::Cell(_, i) = t {
                        i.free_vars(out);
                    }
                    e.free_vars(out);
                }
            }
            _ => self.children().iter().for_each(|c| c.free_vars(out)),
        }
    }
}
