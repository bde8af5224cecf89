//! Pretty-printer. Output parses back to the same AST.

use std::fmt::Write;

use num_traits::Signed;

use super::ast::*;
use crate::kernel::{Rational, XReal};

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Int(n) if n.is_negative() => 7,
        Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::Cell(..) => 8,
        Expr::Neg(_) => 7,
        Expr::Not(_) => 3,
        Expr::Bin(op, ..) => match op {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        },
    }
}

fn op_str(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Mod => "%",
        BinOp::Eq => "=",
        BinOp::Ne => "!=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::And => "&&",
        BinOp::Or => "||",
    }
}

fn expr_at(e: &Expr, min: u8) -> String {
    let s = match e {
        Expr::Int(n) => n.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Var(x) => x.clone(),
        Expr::Cell(a, i) => format!("{a}[{}]", expr_at(i, 0)),
        Expr::Neg(inner) => match **inner {
            Expr::Int(ref n) if !n.is_negative() => format!("-({n})"),
            _ => format!("-{}", expr_at(inner, 7)),
        },
        Expr::Not(inner) => format!("!{}", expr_at(inner, 3)),
        Expr::Bin(op, a, b) => {
            let p = expr_prec(e);
            let (lp, rp) = match op {
                BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => (5, 5),
                _ => (p, p + 1),
            };
            format!("{} {} {}", expr_at(a, lp), op_str(*op), expr_at(b, rp))
        }
    };
    if expr_prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

pub fn expr(e: &Expr) -> String {
    expr_at(e, 0)
}

fn rational(r: &Rational) -> String {
    r.to_string()
}

pub fn dist(d: &DistExpr) -> String {
    match d {
        DistExpr::Dirac(e) => expr(e),
        DistExpr::Uniform(a, b) => format!("unif({}, {})", expr(a), expr(b)),
        DistExpr::Weighted(ws) => ws
            .iter()
            .map(|(p, e)| format!("{}*<{}>", rational(p), expr_at(e, 5)))
            .collect::<Vec<_>>()
            .join(" + "),
    }
}

fn target(t: &Target) -> String {
    match t {
        Target::Var(x) => x.clone(),
        Target::Cell(a, i) => format!("{a}[{}]", expr(i)),
    }
}

fn rt_prec(e: &RtExpr) -> u8 {
    match e {
        RtExpr::Add(..) | RtExpr::Monus(..) => 1,
        RtExpr::Mul(..) | RtExpr::Div(..) => 2,
        RtExpr::Const(XReal::Finite(r)) if !r.is_integer() => 2,
        RtExpr::Pow(..) => 3,
        _ => 4,
    }
}

fn is_int_const(e: &RtExpr) -> bool {
    matches!(e, RtExpr::Const(XReal::Finite(r)) if r.is_integer())
}

fn rt_at(e: &RtExpr, min: u8) -> String {
    let s = match e {
        RtExpr::Const(c) => c.to_string(),
        RtExpr::Var(x) => x.clone(),
        RtExpr::Cell(a, i) => format!("{a}[{}]", expr(i)),
        RtExpr::Omega => "n".to_string(),
        RtExpr::Indicator(b) => format!("[{}]", expr(b)),
        RtExpr::Add(a, b) => format!("{} + {}", rt_at(a, 1), rt_at(b, 2)),
        RtExpr::Monus(a, b) => format!("{} - {}", rt_at(a, 1), rt_at(b, 2)),
        RtExpr::Mul(a, b) => format!("{}*{}", rt_at(a, 2), rt_at(b, 3)),
        RtExpr::Div(a, b) => {
            // keep `p/q` of two literals from folding into a constant
            let lhs = if is_int_const(a) && is_int_const(b) {
                format!("({})", rt_at(a, 0))
            } else {
                rt_at(a, 2)
            };
            format!("{}/{}", lhs, rt_at(b, 3))
        }
        RtExpr::Pow(a, b) => format!("{}^{}", rt_at(a, 4), rt_at(b, 4)),
        RtExpr::Min(a, b) => format!("min({}, {})", rt(a), rt(b)),
        RtExpr::Max(a, b) => format!("max({}, {})", rt(a), rt(b)),
        RtExpr::RwCoef(a, b) => format!("rwcoef({}, {})", rt(a), rt(b)),
        RtExpr::Sum(k, lo, hi, body) => format!("sum({k}, {}, {}, {})", rt(lo), rt(hi), rt(body)),
        RtExpr::Geo(a) => format!("geo({})", rt(a)),
        RtExpr::Harmonic(a) => format!("harmonic({})", rt(a)),
        RtExpr::Cont(subs) if subs.is_empty() => "cont".to_string(),
        RtExpr::Cont(subs) => {
            let items: Vec<String> = subs.iter().map(|(t, e)| format!("{} := {}", target(t), expr(e))).collect();
            format!("cont[{}]", items.join(", "))
        }
    };
    if rt_prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

pub fn rt(e: &RtExpr) -> String {
    rt_at(e, 0)
}

/// Multi-line program text.
pub fn program(p: &Program) -> String {
    let mut out = String::new();
    stmts(p, 0, &mut out);
    out
}

/// Single-line program text.
pub fn program_inline(p: &Program) -> String {
    program(p).split_whitespace().collect::<Vec<_>>().join(" ")
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

fn stmts(p: &Program, indent: usize, out: &mut String) {
    let mut cur = p;
    loop {
        match cur {
            Program::Seq(a, b) => {
                pad(out, indent);
                if matches!(**a, Program::Seq(..)) {
                    out.push_str("{\n");
                    stmts(a, indent + 1, out);
                    pad(out, indent);
                    out.push('}');
                } else {
                    stmt(a, indent, out);
                }
                out.push_str(";\n");
                cur = b;
            }
            other => {
                pad(out, indent);
                stmt(other, indent, out);
                out.push('\n');
                return;
            }
        }
    }
}

fn block(p: &Program, indent: usize, out: &mut String) {
    out.push_str("{\n");
    stmts(p, indent + 1, out);
    pad(out, indent);
    out.push('}');
}

fn stmt(p: &Program, indent: usize, out: &mut String) {
    match p {
        Program::Empty => out.push_str("empty"),
        Program::Skip => out.push_str("skip"),
        Program::Halt => out.push_str("halt"),
        Program::Assign(t, DistExpr::Dirac(e)) => {
            let _ = write!(out, "{} := {}", target(t), expr(e));
        }
        Program::Assign(t, d) => {
            let _ = write!(out, "{} :~ {}", target(t), dist(d));
        }
        Program::AssignArray(a, es) => {
            let items: Vec<String> = es.iter().map(expr).collect();
            let _ = write!(out, "{a} := [{}]", items.join(", "));
        }
        Program::Seq(..) => block(p, indent, out),
        Program::Choice(a, b) => {
            block(a, indent, out);
            out.push_str(" [] ");
            block(b, indent, out);
        }
        Program::If(g, a, b) => {
            let _ = write!(out, "if ({}) ", dist(g));
            block(a, indent, out);
            out.push_str(" else ");
            block(b, indent, out);
        }
        Program::While(g, body, ann) => {
            let _ = write!(out, "while ({}) ", dist(g));
            if let Some(a) = ann {
                let _ = write!(out, "@{}({}) ", a.direction.keyword(), rt(&a.bound));
            }
            block(body, indent, out);
        }
        Program::Bounded(k, g, body) => {
            let _ = write!(out, "while<{k}> ({}) ", dist(g));
            block(body, indent, out);
        }
    }
}

/// Short label for a statement head, used in MDP node labels.
pub fn head(p: &Program) -> String {
    match p {
        Program::Seq(a, b) => format!("{}; {}", head(a), head(b)),
        Program::Choice(..) => "{..} [] {..}".to_string(),
        Program::If(g, ..) => format!("if ({})", dist(g)),
        Program::While(g, ..) => format!("while ({})", dist(g)),
        Program::Bounded(k, g, _) => format!("while<{k}> ({})", dist(g)),
        other => program_inline(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::{parse_program, parse_rt};

    #[test]
    fn roundtrip_samples() {
        for src in [
            "while (c = 1) { c :~ 1/2*<0> + 1/2*<1> }",
            "{ x := 1; y := 2 }; skip",
            "if (1/3*<true> + 2/3*<false>) { skip } else { { halt } [] { x := -3 } }",
            "while<4> (x > 0 && !(y = 2)) { x := x - -1 }",
            "cp := [0, 0]; i :~ unif(1, 2); cp[i] := (i + 1) % 2",
            "while (x > 0) @upper(1 + [x > 0]*2*x) { x := x - 1 }",
            "x :~ 1/2*<(x < 2)> + 1/2*<true>",
        ] {
            let p = parse_program(src).unwrap();
            let again = parse_program(&program(&p)).unwrap();
            assert_eq!(p, again, "{src}");
        }
    }

    #[test]
    fn rt_roundtrip_keeps_division_of_literals() {
        let e = RtExpr::Div(Box::new(RtExpr::int(1)), Box::new(RtExpr::int(2)));
        assert_eq!(parse_rt(&rt(&e)).unwrap(), e);
        let c = parse_rt("1 + [b != 1]*(1 + [x > 0]*2*x) + [b = 1]*(7 - 5/2^n + n*[x > 0]*2*x)").unwrap();
        assert_eq!(parse_rt(&rt(&c)).unwrap(), c);
    }
}
