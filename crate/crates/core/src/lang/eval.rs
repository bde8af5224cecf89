//! Evaluation of program expressions and distribution expressions.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::ast::{BinOp, DistExpr, Expr, Target};
use crate::error::EvalError;
use crate::kernel::{Rational, Slot, State, Value};

/// Read access to variables, so expressions can see bound names (sum
/// indices, `n`) layered over a state.
pub trait Lookup {
    fn scalar(&self, name: &str) -> Option<&Value>;
    fn array(&self, name: &str) -> Option<&[Value]>;
}

impl Lookup for State {
    fn scalar(&self, name: &str) -> Option<&Value> {
        self.scalars.get(name)
    }

    fn array(&self, name: &str) -> Option<&[Value]> {
        self.arrays.get(name).map(|v| v.as_slice())
    }
}

pub fn eval_expr(e: &Expr, env: &dyn Lookup) -> Result<Value, EvalError> {
    match e {
        Expr::Int(n) => Ok(Value::Int(n.clone())),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Var(x) => env
            .scalar(x)
            .cloned()
            .ok_or_else(|| EvalError::UnboundVariable(x.clone())),
        Expr::Cell(a, i) => {
            let arr = env.array(a).ok_or_else(|| EvalError::UnboundVariable(a.clone()))?;
            let idx = eval_expr(i, env)?;
            let idx = idx.as_int()?;
            let out = || EvalError::IndexOutOfBounds {
                array: a.clone(),
                index: idx.to_string(),
                len: arr.len(),
            };
            let k = idx.to_usize().ok_or_else(out)?;
            if k == 0 || k > arr.len() {
                return Err(out());
            }
            Ok(arr[k - 1].clone())
        }
        Expr::Neg(a) => Ok(Value::Int(-eval_expr(a, env)?.as_int()?.clone())),
        Expr::Not(a) => Ok(Value::Bool(!eval_expr(a, env)?.as_bool()?)),
        Expr::Bin(BinOp::And, a, b) => {
            if !eval_expr(a, env)?.as_bool()? {
                return Ok(Value::Bool(false));
            }
            Ok(Value::Bool(eval_expr(b, env)?.as_bool()?))
        }
        Expr::Bin(BinOp::Or, a, b) => {
            if eval_expr(a, env)?.as_bool()? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(eval_expr(b, env)?.as_bool()?))
        }
        Expr::Bin(op, a, b) => {
            let va = eval_expr(a, env)?;
            let vb = eval_expr(b, env)?;
            match op {
                BinOp::Eq | BinOp::Ne => {
                    if va.kind() != vb.kind() {
                        return Err(EvalError::KindMismatch {
                            expected: va.kind(),
                            found: vb.kind(),
                        });
                    }
                    Ok(Value::Bool((va == vb) == (*op == BinOp::Eq)))
                }
                _ => {
                    let (x, y) = (va.as_int()?, vb.as_int()?);
                    Ok(match op {
                        BinOp::Add => Value::Int(x + y),
                        BinOp::Sub => Value::Int(x - y),
                        BinOp::Mul => Value::Int(x * y),
                        BinOp::Div => {
                            if y.is_zero() {
                                return Err(EvalError::DivByZero);
                            }
                            Value::Int(x.div_floor(y))
                        }
                        BinOp::Mod => {
                            if y.is_zero() {
                                return Err(EvalError::DivByZero);
                            }
                            Value::Int(x.mod_floor(y))
                        }
                        BinOp::Lt => Value::Bool(x < y),
                        BinOp::Le => Value::Bool(x <= y),
                        BinOp::Gt => Value::Bool(x > y),
                        BinOp::Ge => Value::Bool(x >= y),
                        _ => unreachable!(),
                    })
                }
            }
        }
    }
}

/// Support of a distribution at a state: distinct values with positive
/// probabilities summing to one, sorted by value.
pub fn eval_dist(d: &DistExpr, env: &dyn Lookup) -> Result<Vec<(Value, Rational)>, EvalError> {
    match d {
        DistExpr::Dirac(e) => Ok(vec![(eval_expr(e, env)?, Rational::one())]),
        DistExpr::Uniform(lo, hi) => {
            let lo = eval_expr(lo, env)?.as_int()?.clone();
            let hi = eval_expr(hi, env)?.as_int()?.clone();
            if hi < lo {
                return Err(EvalError::EmptyUniformRange {
                    lo: lo.to_string(),
                    hi: hi.to_string(),
                });
            }
            let count: BigInt = &hi - &lo + 1;
            let p = Rational::new(BigInt::one(), count);
            let mut out = Vec::new();
            let mut v = lo;
            while v <= hi {
                out.push((Value::Int(v.clone()), p.clone()));
                v += 1;
            }
            Ok(out)
        }
        DistExpr::Weighted(ws) => {
            let mut total = Rational::zero();
            let mut out: Vec<(Value, Rational)> = Vec::new();
            for (p, e) in ws {
                if p.is_negative() {
                    return Err(EvalError::ProbabilityMass(format!("negative weight {p}")));
                }
                total += p;
                if p.is_zero() {
                    continue;
                }
                let v = eval_expr(e, env)?;
                if let Some(first) = out.first() {
                    if first.0.kind() != v.kind() {
                        return Err(EvalError::KindMismatch {
                            expected: first.0.kind(),
                            found: v.kind(),
                        });
                    }
                }
                match out.iter_mut().find(|(w, _)| *w == v) {
                    Some(entry) => entry.1 += p,
                    None => out.push((v, p.clone())),
                }
            }
            if !total.is_one() {
                return Err(EvalError::ProbabilityMass(total.to_string()));
            }
            out.sort_by(|a, b| a.0.cmp(&b.0));
            Ok(out)
        }
    }
}

/// `(P[guard = true], P[guard = false])`.
pub fn guard_probs(d: &DistExpr, env: &dyn Lookup) -> Result<(Rational, Rational), EvalError> {
    let mut t = Rational::zero();
    let mut f = Rational::zero();
    for (v, p) in eval_dist(d, env)? {
        if v.as_bool()? {
            t += p;
        } else {
            f += p;
        }
    }
    Ok((t, f))
}

pub fn resolve_target(t: &Target, env: &dyn Lookup) -> Result<Slot, EvalError> {
    match t {
        Target::Var(x) => Ok(Slot::Var(x.clone())),
        Target::Cell(a, i) => Ok(Slot::Cell(a.clone(), eval_expr(i, env)?.as_int()?.clone())),
    }
}

/// Successor states of `t :~ d` with their probabilities.
pub fn assign_outcomes(t: &Target, d: &DistExpr, s: &State) -> Result<Vec<(State, Rational)>, EvalError> {
    let slot = resolve_target(t, s)?;
    eval_dist(d, s)?
        .into_iter()
        .map(|(v, p)| Ok((s.update(&slot, v)?, p)))
        .collect()
}

pub fn assign_array(name: &str, es: &[Expr], s: &State) -> Result<State, EvalError> {
    let vs = es.iter().map(|e| eval_expr(e, s)).collect::<Result<Vec<_>, _>>()?;
    let mut next = s.clone();
    next.set_array(name, vs)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::rat;
    use crate::lang::parser::{parse_dist, parse_expr};

    #[test]
    fn weighted_support() {
        let s = State::new().with_int("x", 3);
        let d = parse_dist("1/2*<x-1> + 1/2*<x+1>").unwrap();
        let sup = eval_dist(&d, &s).unwrap();
        assert_eq!(sup, vec![(Value::int(2), rat(1, 2)), (Value::int(4), rat(1, 2))]);
    }

    #[test]
    fn duplicate_support_merges() {
        let s = State::new().with_int("x", 0);
        let d = parse_dist("1/3*<x> + 2/3*<0>").unwrap();
        assert_eq!(eval_dist(&d, &s).unwrap(), vec![(Value::int(0), rat(1, 1))]);
    }

    #[test]
    fn mass_must_be_one() {
        let d = parse_dist("1/2*<0> + 1/3*<1>").unwrap();
        assert!(matches!(eval_dist(&d, &State::new()), Err(EvalError::ProbabilityMass(_))));
    }

    #[test]
    fn uniform_range() {
        let d = parse_dist("unif(1, 4)").unwrap();
        let sup = eval_dist(&d, &State::new()).unwrap();
        assert_eq!(sup.len(), 4);
        assert!(sup.iter().all(|(_, p)| *p == rat(1, 4)));
        let bad = parse_dist("unif(3, 1)").unwrap();
        assert!(matches!(eval_dist(&bad, &State::new()), Err(EvalError::EmptyUniformRange { .. })));
    }

    #[test]
    fn floor_division_and_modulo() {
        let s = State::new().with_int("x", -7);
        assert_eq!(eval_expr(&parse_expr("x / 2").unwrap(), &s).unwrap(), Value::int(-4));
        assert_eq!(eval_expr(&parse_expr("x % 3").unwrap(), &s).unwrap(), Value::int(2));
    }

    #[test]
    fn guard_split() {
        let s = State::new().with_int("c", 1);
        let (t, f) = guard_probs(&parse_dist("c = 1").unwrap(), &s).unwrap();
        assert_eq!((t, f), (rat(1, 1), rat(0, 1)));
        let (t, f) = guard_probs(&parse_dist("1/3*<true> + 2/3*<false>").unwrap(), &s).unwrap();
        assert_eq!((t, f), (rat(1, 3), rat(2, 3)));
    }
}
