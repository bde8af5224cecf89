//! Recursive-descent parser for programs, distribution expressions and
//! run-time expressions.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

use super::ast::*;
use crate::kernel::{Rational, XReal};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

// longest first
const SYMBOLS: &[&str] = &[
    ":~", ":=", "<=", ">=", "==", "!=", "&&", "||", "[]", "(", ")", "{", "}", "[", "]", ";", ",", "+", "-",
    "*", "/", "%", "^", "<", ">", "=", "!", "@",
];

const KEYWORDS: &[&str] = &["empty", "skip", "halt", "if", "else", "while", "unif", "true", "false"];

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, SyntaxError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n: BigInt = src[start..i].parse().expect("digits");
            col += i - start;
            out.push((Tok::Int(n), l0, c0));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            col += i - start;
            out.push((Tok::Ident(src[start..i].to_string()), l0, c0));
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push((Tok::Sym(s), l0, c0));
            }
            None => {
                return Err(SyntaxError {
                    line,
                    col,
                    message: format!("unexpected character `{}`", src[i..].chars().next().unwrap()),
                })
            }
        }
    }
    out.push((Tok::Eof, line, col));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (_, line, col) = self.toks[self.pos];
        Err(SyntaxError {
            line,
            col,
            message: message.into(),
        })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected identifier, found {t}")),
        }
    }

    fn int_lit(&mut self) -> PResult<BigInt> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            t => self.err(format!("expected integer, found {t}")),
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.err(format!("unexpected {}", self.peek()))
        }
    }

    // ---- programs ----

    fn program(&mut self) -> PResult<Program> {
        let mut items = Vec::new();
        loop {
            if self.is_sym("}") || matches!(self.peek(), Tok::Eof) {
                break;
            }
            items.push(self.stmt()?);
            if !self.eat_sym(";") {
                break;
            }
        }
        if items.is_empty() {
            return self.err("expected a statement");
        }
        Ok(Program::seq_all(items))
    }

    fn block(&mut self) -> PResult<Program> {
        self.expect_sym("{")?;
        let p = self.program()?;
        self.expect_sym("}")?;
        Ok(p)
    }

    fn stmt(&mut self) -> PResult<Program> {
        if self.is_sym("{") {
            let mut p = self.block()?;
            while self.eat_sym("[]") {
                let q = self.block()?;
                p = Program::choice(p, q);
            }
            return Ok(p);
        }
        match self.peek().clone() {
            Tok::Ident(k) if k == "empty" => {
                self.bump();
                Ok(Program::Empty)
            }
            Tok::Ident(k) if k == "skip" => {
                self.bump();
                Ok(Program::Skip)
            }
            Tok::Ident(k) if k == "halt" => {
                self.bump();
                Ok(Program::Halt)
            }
            Tok::Ident(k) if k == "if" => {
                self.bump();
                self.expect_sym("(")?;
                let g = self.dist()?;
                self.expect_sym(")")?;
                let a = self.block()?;
                let b = if self.is_kw("else") {
                    self.bump();
                    if self.is_kw("if") {
                        self.stmt()?
                    } else {
                        self.block()?
                    }
                } else {
                    Program::Empty
                };
                Ok(Program::ite(g, a, b))
            }
            Tok::Ident(k) if k == "while" => {
                self.bump();
                if self.eat_sym("<") {
                    let k = self.int_lit()?;
                    let k: u32 = match u32::try_from(&k) {
                        Ok(k) => k,
                        Err(_) => return self.err("loop bound too large"),
                    };
                    self.expect_sym(">")?;
                    self.expect_sym("(")?;
                    let g = self.dist()?;
                    self.expect_sym(")")?;
                    let body = self.block()?;
                    return Ok(Program::Bounded(k, g, Box::new(body)));
                }
                self.expect_sym("(")?;
                let g = self.dist()?;
                self.expect_sym(")")?;
                let ann = if self.eat_sym("@") {
                    let direction = match self.ident()?.as_str() {
                        "upper" => Direction::Upper,
                        "lower" => Direction::Lower,
                        "exact" => Direction::Exact,
                        other => return self.err(format!("unknown annotation `@{other}`")),
                    };
                    self.expect_sym("(")?;
                    let bound = self.rt()?;
                    self.expect_sym(")")?;
                    Some(Annotation { direction, bound })
                } else {
                    None
                };
                let body = self.block()?;
                Ok(Program::While(g, Box::new(body), ann))
            }
            Tok::Ident(_) => {
                let target = self.target()?;
                if self.eat_sym(":~") {
                    let d = self.dist()?;
                    Ok(Program::Assign(target, d))
                } else if self.eat_sym(":=") {
                    if self.is_sym("[") {
                        let name = match target {
                            Target::Var(x) => x,
                            Target::Cell(..) => return self.err("array literal assigned to a cell"),
                        };
                        self.bump();
                        let mut es = vec![self.expr()?];
                        while self.eat_sym(",") {
                            es.push(self.expr()?);
                        }
                        self.expect_sym("]")?;
                        Ok(Program::AssignArray(name, es))
                    } else {
                        Ok(Program::Assign(target, DistExpr::Dirac(self.expr()?)))
                    }
                } else {
                    self.err(format!("expected `:=` or `:~`, found {}", self.peek()))
                }
            }
            t => self.err(format!("expected a statement, found {t}")),
        }
    }

    fn target(&mut self) -> PResult<Target> {
        let x = self.ident()?;
        if self.eat_sym("[") {
            let i = self.expr()?;
            self.expect_sym("]")?;
            Ok(Target::Cell(x, i))
        } else {
            Ok(Target::Var(x))
        }
    }

    // ---- distributions ----

    fn starts_weighted(&self) -> bool {
        if !matches!(self.peek(), Tok::Int(_)) {
            return false;
        }
        let mut k = 1;
        if matches!(self.peek_at(1), Tok::Sym("/")) && matches!(self.peek_at(2), Tok::Int(_)) {
            k = 3;
        }
        matches!(self.peek_at(k), Tok::Sym("*")) && matches!(self.peek_at(k + 1), Tok::Sym("<"))
    }

    fn prob(&mut self) -> PResult<Rational> {
        let n = self.int_lit()?;
        if self.eat_sym("/") {
            let d = self.int_lit()?;
            if d.is_zero() {
                return self.err("zero denominator");
            }
            Ok(Rational::new(n, d))
        } else {
            Ok(Rational::from_integer(n))
        }
    }

    fn dist(&mut self) -> PResult<DistExpr> {
        if self.is_kw("unif") {
            self.bump();
            self.expect_sym("(")?;
            let lo = self.expr()?;
            self.expect_sym(",")?;
            let hi = self.expr()?;
            self.expect_sym(")")?;
            return Ok(DistExpr::Uniform(lo, hi));
        }
        if !self.starts_weighted() {
            return Ok(DistExpr::Dirac(self.expr()?));
        }
        let mut terms = Vec::new();
        loop {
            let p = self.prob()?;
            self.expect_sym("*")?;
            self.expect_sym("<")?;
            let e = self.expr_arith()?;
            self.expect_sym(">")?;
            terms.push((p, e));
            if !self.eat_sym("+") {
                break;
            }
        }
        Ok(DistExpr::Weighted(terms))
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        let mut a = self.expr_and()?;
        while self.eat_sym("||") {
            let b = self.expr_and()?;
            a = Expr::bin(BinOp::Or, a, b);
        }
        Ok(a)
    }

    fn expr_and(&mut self) -> PResult<Expr> {
        let mut a = self.expr_not()?;
        while self.eat_sym("&&") {
            let b = self.expr_not()?;
            a = Expr::bin(BinOp::And, a, b);
        }
        Ok(a)
    }

    fn expr_not(&mut self) -> PResult<Expr> {
        if self.eat_sym("!") {
            Ok(Expr::Not(Box::new(self.expr_not()?)))
        } else {
            self.expr_cmp()
        }
    }

    fn expr_cmp(&mut self) -> PResult<Expr> {
        let a = self.expr_arith()?;
        let op = match self.peek() {
            Tok::Sym("=") | Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            _ => return Ok(a),
        };
        self.bump();
        let b = self.expr_arith()?;
        Ok(Expr::bin(op, a, b))
    }

    /// Additive level; used inside `<...>` where `>` closes the bracket.
    fn expr_arith(&mut self) -> PResult<Expr> {
        let mut a = self.expr_mul()?;
        loop {
            let op = if self.is_sym("+") {
                BinOp::Add
            } else if self.is_sym("-") {
                BinOp::Sub
            } else {
                return Ok(a);
            };
            self.bump();
            let b = self.expr_mul()?;
            a = Expr::bin(op, a, b);
        }
    }

    fn expr_mul(&mut self) -> PResult<Expr> {
        let mut a = self.expr_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                Tok::Sym("%") => BinOp::Mod,
                _ => return Ok(a),
            };
            self.bump();
            let b = self.expr_unary()?;
            a = Expr::bin(op, a, b);
        }
    }

    fn expr_unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            if let Tok::Int(n) = self.peek().clone() {
                self.bump();
                return Ok(Expr::Int(-n));
            }
            return Ok(Expr::Neg(Box::new(self.expr_unary()?)));
        }
        self.expr_atom()
    }

    fn expr_atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Ident(k) if k == "true" => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::Ident(k) if k == "false" => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(_) => {
                let x = self.ident()?;
                if self.eat_sym("[") {
                    let i = self.expr()?;
                    self.expect_sym("]")?;
                    Ok(Expr::Cell(x, Box::new(i)))
                } else {
                    Ok(Expr::Var(x))
                }
            }
            t => self.err(format!("expected an expression, found {t}")),
        }
    }

    // ---- run-time expressions ----

    fn rt(&mut self) -> PResult<RtExpr> {
        let mut a = self.rt_mul()?;
        loop {
            if self.eat_sym("+") {
                let b = self.rt_mul()?;
                a = RtExpr::Add(Box::new(a), Box::new(b));
            } else if self.eat_sym("-") {
                let b = self.rt_mul()?;
                a = RtExpr::Monus(Box::new(a), Box::new(b));
            } else {
                return Ok(a);
            }
        }
    }

    /// Next token is an integer literal not raised to a power.
    fn bare_int_next(&self) -> bool {
        matches!(self.peek(), Tok::Int(_)) && !matches!(self.peek_at(1), Tok::Sym("^"))
    }

    fn rt_mul(&mut self) -> PResult<RtExpr> {
        let mut lit = self.bare_int_next();
        let mut a = self.rt_pow()?;
        loop {
            if self.eat_sym("*") {
                let b = self.rt_pow()?;
                a = RtExpr::Mul(Box::new(a), Box::new(b));
            } else if self.eat_sym("/") {
                let rhs_lit = self.bare_int_next();
                let b = self.rt_pow()?;
                a = match (&a, &b) {
                    // a literal fraction `p/q` is a constant
                    (RtExpr::Const(XReal::Finite(p)), RtExpr::Const(XReal::Finite(q)))
                        if lit && rhs_lit && q.is_positive() =>
                    {
                        RtExpr::Const(XReal::Finite(p / q))
                    }
                    _ => RtExpr::Div(Box::new(a), Box::new(b)),
                };
            } else {
                return Ok(a);
            }
            lit = false;
        }
    }

    fn rt_pow(&mut self) -> PResult<RtExpr> {
        let a = self.rt_atom()?;
        if self.eat_sym("^") {
            let b = self.rt_atom()?;
            Ok(RtExpr::Pow(Box::new(a), Box::new(b)))
        } else {
            Ok(a)
        }
    }

    fn rt_args(&mut self, n: usize) -> PResult<Vec<RtExpr>> {
        self.expect_sym("(")?;
        let mut args = vec![self.rt()?];
        for _ in 1..n {
            self.expect_sym(",")?;
            args.push(self.rt()?);
        }
        self.expect_sym(")")?;
        Ok(args)
    }

    fn rt_atom(&mut self) -> PResult<RtExpr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(RtExpr::Const(XReal::Finite(Rational::from_integer(n))))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.rt()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("[") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym("]")?;
                Ok(RtExpr::Indicator(e))
            }
            Tok::Ident(k) => {
                let is_call = matches!(self.peek_at(1), Tok::Sym("("));
                match k.as_str() {
                    "inf" => {
                        self.bump();
                        Ok(RtExpr::Const(XReal::Infinity))
                    }
                    "n" => {
                        self.bump();
                        Ok(RtExpr::Omega)
                    }
                    "cont" => {
                        self.bump();
                        let mut subs = Vec::new();
                        if self.eat_sym("[") {
                            loop {
                                let t = self.target()?;
                                self.expect_sym(":=")?;
                                let e = self.expr()?;
                                subs.push((t, e));
                                if !self.eat_sym(",") {
                                    break;
                                }
                            }
                            self.expect_sym("]")?;
                        }
                        Ok(RtExpr::Cont(subs))
                    }
                    "min" | "max" | "rwcoef" if is_call => {
                        self.bump();
                        let mut a = self.rt_args(2)?;
                        let b = Box::new(a.pop().unwrap());
                        let a = Box::new(a.pop().unwrap());
                        Ok(match k.as_str() {
                            "min" => RtExpr::Min(a, b),
                            "max" => RtExpr::Max(a, b),
                            _ => RtExpr::RwCoef(a, b),
                        })
                    }
                    "geo" | "harmonic" if is_call => {
                        self.bump();
                        let a = Box::new(self.rt_args(1)?.pop().unwrap());
                        Ok(if k == "geo" { RtExpr::Geo(a) } else { RtExpr::Harmonic(a) })
                    }
                    "sum" if is_call => {
                        self.bump();
                        self.expect_sym("(")?;
                        let var = self.ident()?;
                        self.expect_sym(",")?;
                        let lo = self.rt()?;
                        self.expect_sym(",")?;
                        let hi = self.rt()?;
                        self.expect_sym(",")?;
                        let body = self.rt()?;
                        self.expect_sym(")")?;
                        Ok(RtExpr::Sum(var, Box::new(lo), Box::new(hi), Box::new(body)))
                    }
                    _ => {
                        let x = self.ident()?;
                        if self.eat_sym("[") {
                            let i = self.expr()?;
                            self.expect_sym("]")?;
                            Ok(RtExpr::Cell(x, i))
                        } else {
                            Ok(RtExpr::Var(x))
                        }
                    }
                }
            }
            t => self.err(format!("expected a run-time expression, found {t}")),
        }
    }
}

pub fn parse_program(src: &str) -> Result<Program, SyntaxError> {
    let mut p = Parser::new(src)?;
    let prog = p.program()?;
    p.expect_eof()?;
    Ok(prog)
}

pub fn parse_rt(src: &str) -> Result<RtExpr, SyntaxError> {
    let mut p = Parser::new(src)?;
    let e = p.rt()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_expr(src: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_dist(src: &str) -> Result<DistExpr, SyntaxError> {
    let mut p = Parser::new(src)?;
    let e = p.dist()?;
    p.expect_eof()?;
    Ok(e)
}
