//! Evaluation of run-time expressions.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use super::ast::{Expr, RtExpr};
use super::eval::{eval_expr, resolve_target, Lookup};
use crate::error::{Error, EvalError};
use crate::invariants::rwalk::rw_coefficient;
use crate::kernel::{Rational, State, Value, XReal};

/// Callback giving the value of the continuation at a state.
pub type ContFn<'c> = dyn FnMut(&State) -> Result<XReal, Error> + 'c;

/// Evaluation context for a run-time expression.
pub struct RtEnv<'a, 'c> {
    state: &'a State,
    n: Option<Value>,
    cont: Option<&'a mut ContFn<'c>>,
    locals: Vec<(String, Value)>,
}

impl<'a, 'c> RtEnv<'a, 'c> {
    pub fn new(state: &'a State) -> Self {
        RtEnv {
            state,
            n: None,
            cont: None,
            locals: Vec::new(),
        }
    }

    pub fn with_n(mut self, n: u64) -> Self {
        self.n = Some(Value::Int(BigInt::from(n)));
        self
    }

    pub fn with_cont(mut self, cont: &'a mut ContFn<'c>) -> Self {
        self.cont = Some(cont);
        self
    }

    pub fn eval(&mut self, e: &RtExpr) -> Result<XReal, Error> {
        eval_in(e, self)
    }
}

impl Lookup for RtEnv<'_, '_> {
    fn scalar(&self, name: &str) -> Option<&Value> {
        if let Some((_, v)) = self.locals.iter().rev().find(|(k, _)| k == name) {
            return Some(v);
        }
        if name == "n" {
            if let Some(v) = &self.n {
                return Some(v);
            }
        }
        self.state.scalar(name)
    }

    fn array(&self, name: &str) -> Option<&[Value]> {
        self.state.array(name)
    }
}

/// Evaluates `f` at `σ`, with `n` bound if given. `cont` is unavailable.
pub fn eval_rt(f: &RtExpr, s: &State, n: Option<u64>) -> Result<XReal, EvalError> {
    let mut env = RtEnv::new(s);
    if let Some(n) = n {
        env = env.with_n(n);
    }
    env.eval(f).map_err(|e| match e {
        Error::Eval(e) => e,
        other => EvalError::Other(other.to_string()),
    })
}

fn int_value(v: Value) -> Result<XReal, EvalError> {
    let n = v.as_int()?;
    XReal::from_rational(Rational::from_integer(n.clone()))
}

fn natural(x: &XReal) -> Result<u64, EvalError> {
    match x {
        XReal::Finite(r) if r.is_integer() => r.to_integer().to_u64().ok_or_else(|| EvalError::NotNatural(r.to_string())),
        other => Err(EvalError::NotNatural(other.to_string())),
    }
}

fn eval_in(e: &RtExpr, env: &mut RtEnv) -> Result<XReal, Error> {
    Ok(match e {
        RtExpr::Const(c) => c.clone(),
        RtExpr::Var(x) => {
            let v = env.scalar(x).cloned().ok_or_else(|| EvalError::UnboundVariable(x.clone()))?;
            int_value(v)?
        }
        RtExpr::Cell(a, i) => {
            let v = eval_expr(&Expr::Cell(a.clone(), Box::new(i.clone())), env)?;
            int_value(v)?
        }
        RtExpr::Omega => match &env.n {
            Some(v) => int_value(v.clone())?,
            None => return Err(EvalError::OmegaUnbound.into()),
        },
        RtExpr::Indicator(b) => {
            if eval_expr(b, env)?.as_bool()? {
                XReal::one()
            } else {
                XReal::zero()
            }
        }
        RtExpr::Add(a, b) => eval_in(a, env)? + eval_in(b, env)?,
        RtExpr::Mul(a, b) => {
            // 0 * anything = 0, so the right factor is not evaluated
            let x = eval_in(a, env)?;
            if x.is_zero() {
                XReal::zero()
            } else {
                x * eval_in(b, env)?
            }
        }
        RtExpr::Monus(a, b) => {
            let x = eval_in(a, env)?;
            let y = eval_in(b, env)?;
            x.monus(&y)?
        }
        RtExpr::Div(a, b) => {
            let x = eval_in(a, env)?;
            let y = eval_in(b, env)?;
            match (x, y) {
                (_, y) if y.is_zero() => return Err(EvalError::DivByZero.into()),
                (XReal::Infinity, XReal::Infinity) => return Err(EvalError::Other("inf / inf".into()).into()),
                (XReal::Infinity, _) => XReal::Infinity,
                (_, XReal::Infinity) => XReal::zero(),
                (XReal::Finite(p), XReal::Finite(q)) => XReal::Finite(crate::kernel::q_div(&p, &q)),
            }
        }
        RtExpr::Pow(a, b) => {
            let base = eval_in(a, env)?;
            let k = natural(&eval_in(b, env)?)?;
            match base {
                _ if k == 0 => XReal::one(),
                XReal::Infinity => XReal::Infinity,
                XReal::Finite(r) => {
                    let k = i32::try_from(k).map_err(|_| EvalError::NotNatural(k.to_string()))?;
                    XReal::Finite(num_traits::Pow::pow(&r, k))
                }
            }
        }
        RtExpr::Min(a, b) => eval_in(a, env)?.min(eval_in(b, env)?),
        RtExpr::Max(a, b) => eval_in(a, env)?.max(eval_in(b, env)?),
        RtExpr::Sum(k, lo, hi, body) => {
            let lo = natural(&eval_in(lo, env)?)?;
            let hi = natural(&eval_in(hi, env)?)?;
            let mut acc = XReal::zero();
            for i in lo..=hi {
                env.locals.push((k.clone(), Value::Int(BigInt::from(i))));
                let v = eval_in(body, env);
                env.locals.pop();
                acc = acc + v?;
                if acc.is_infinite() {
                    break;
                }
            }
            acc
        }
        RtExpr::Geo(r) => match eval_in(r, env)? {
            XReal::Finite(r) if r < Rational::one() => XReal::Finite(Rational::one() / (Rational::one() - r)),
            _ => XReal::Infinity,
        },
        RtExpr::Harmonic(m) => {
            let m = natural(&eval_in(m, env)?)?;
            let mut acc = Rational::zero();
            for k in 1..=m {
                acc += Rational::new(BigInt::one(), BigInt::from(k));
            }
            XReal::Finite(acc)
        }
        RtExpr::RwCoef(n, k) => {
            let n = natural(&eval_in(n, env)?)?;
            let k = natural(&eval_in(k, env)?)?;
            XReal::Finite(rw_coefficient(n as usize, k as usize))
        }
        RtExpr::Cont(subs) => {
            let mut updates = Vec::with_capacity(subs.len());
            for (t, v) in subs {
                let slot = resolve_target(t, env)?;
                let val = eval_expr(v, env)?;
                updates.push((slot, val));
            }
            let mut next = env.state.clone();
            for (slot, val) in updates {
                next.update_in_place(&slot, val)?;
            }
            match env.cont.as_mut() {
                Some(k) => k(&next)?,
                None => return Err(EvalError::UnboundContinuation.into()),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parser::parse_rt;

    fn at(src: &str, s: &State) -> XReal {
        eval_rt(&parse_rt(src).unwrap(), s, None).unwrap()
    }

    #[test]
    fn indicator_arith() {
        let s = State::new().with_int("c", 1);
        assert_eq!(at("1 + [c = 1]*4", &s), XReal::int(5));
        assert_eq!(at("1 + [c = 0]*4", &s), XReal::int(1));
    }

    #[test]
    fn zero_absorbs_infinity() {
        let s = State::new().with_int("x", 0);
        assert_eq!(at("[x > 0]*inf", &s), XReal::zero());
        assert_eq!(at("[x = 0]*inf + 1", &s), XReal::Infinity);
    }

    #[test]
    fn omega_and_powers() {
        let f = parse_rt("1 + [c = 1]*(4 - 3/2^n)").unwrap();
        let s = State::new().with_int("c", 1);
        assert_eq!(eval_rt(&f, &s, Some(2)).unwrap(), XReal::ratio(17, 4));
        assert!(matches!(eval_rt(&f, &s, None), Err(EvalError::OmegaUnbound)));
    }

    #[test]
    fn sums_and_builtins() {
        let s = State::new().with_int("x", 3);
        assert_eq!(at("sum(k, 0, 3, [x > k])", &s), XReal::int(3));
        assert_eq!(at("harmonic(3)", &s), XReal::ratio(11, 6));
        assert_eq!(at("geo(1/2)", &s), XReal::int(2));
        assert_eq!(at("geo(1)", &s), XReal::Infinity);
        assert_eq!(at("min(x, 2) + max(x, 2)", &s), XReal::int(5));
        assert_eq!(at("2 - 5", &s), XReal::zero());
    }

    #[test]
    fn monus_of_infinities_is_an_error() {
        let e = eval_rt(&parse_rt("inf - inf").unwrap(), &State::new(), None);
        assert_eq!(e, Err(EvalError::MonusOfInfinities));
    }

    #[test]
    fn cont_substitution_is_simultaneous() {
        let s = State::new().with_int("i", 1).with_array("cp", vec![Value::int(0), Value::int(0)]);
        let f = parse_rt("cont[cp[i] := 1, i := 2]").unwrap();
        let mut seen = Vec::new();
        let mut k = |t: &State| -> Result<XReal, Error> {
            seen.push(t.clone());
            Ok(XReal::int(7))
        };
        let v = RtEnv::new(&s).with_cont(&mut k).eval(&f).unwrap();
        assert_eq!(v, XReal::int(7));
        assert_eq!(seen[0].to_string(), "{cp=[1,0], i=2}");
    }
}
