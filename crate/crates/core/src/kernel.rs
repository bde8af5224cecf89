//! Value domains: extended non-negative reals, program values and states.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::EvalError;

pub type Rational = BigRational;

/// Non-negative rational or positive infinity.
///
/// The order is total, with `Infinity` above every finite value. Addition and
/// multiplication follow the usual extended-reals rules with `0 * inf = 0`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum XReal {
    Finite(Rational),
    Infinity,
}

impl XReal {
    pub fn zero() -> Self {
        XReal::Finite(Rational::zero())
    }

    pub fn one() -> Self {
        XReal::Finite(Rational::one())
    }

    pub fn int(n: i64) -> Self {
        assert!(n >= 0, "XReal::int of a negative number");
        XReal::Finite(Rational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        let r = Rational::new(BigInt::from(n), BigInt::from(d));
        assert!(!r.is_negative(), "XReal::ratio of a negative number");
        XReal::Finite(r)
    }

    /// Builds a finite value, rejecting negatives.
    pub fn from_rational(r: Rational) -> Result<Self, EvalError> {
        if r.is_negative() {
            Err(EvalError::Negative(r.to_string()))
        } else {
            Ok(XReal::Finite(r))
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, XReal::Finite(r) if r.is_zero())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, XReal::Infinity)
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            XReal::Finite(r) => Some(r),
            XReal::Infinity => None,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// Truncated subtraction `max(a - b, 0)`; `inf - inf` is an error.
    pub fn monus(&self, other: &Self) -> Result<Self, EvalError> {
        match (self, other) {
            (XReal::Infinity, XReal::Infinity) => Err(EvalError::MonusOfInfinities),
            (XReal::Infinity, _) => Ok(XReal::Infinity),
            (_, XReal::Infinity) => Ok(XReal::zero()),
            (XReal::Finite(a), XReal::Finite(b)) => {
                if a > b {
                    Ok(XReal::Finite(q_sub(a, b)))
                } else {
                    Ok(XReal::zero())
                }
            }
        }
    }

    pub fn scale(&self, p: &Rational) -> Self {
        match self {
            XReal::Finite(r) => XReal::Finite(q_mul(r, p)),
            XReal::Infinity if p.is_zero() => XReal::zero(),
            XReal::Infinity => XReal::Infinity,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            XReal::Finite(r) => r.to_f64().unwrap_or(f64::INFINITY),
            XReal::Infinity => f64::INFINITY,
        }
    }

    /// Nearest rational to a non-negative float; non-finite gives infinity.
    pub fn from_f64(x: f64) -> Self {
        if !x.is_finite() {
            return XReal::Infinity;
        }
        Rational::from_float(x.max(0.0)).map(XReal::Finite).unwrap_or(XReal::Infinity)
    }

    /// `|a - b|` as a float, `0` when both are infinite.
    pub fn distance(&self, other: &Self) -> f64 {
        match (self, other) {
            (XReal::Infinity, XReal::Infinity) => 0.0,
            (XReal::Finite(a), XReal::Finite(b)) => (a - b).abs().to_f64().unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        }
    }

    /// Parses `"inf"`, `"p/q"`, or an integer.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s == "inf" || s == "∞" {
            return Some(XReal::Infinity);
        }
        let r: Rational = s.parse().ok()?;
        if r.is_negative() {
            None
        } else {
            Some(XReal::Finite(r))
        }
    }
}

impl Default for XReal {
    fn default() -> Self {
        XReal::zero()
    }
}

impl Ord for XReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (XReal::Infinity, XReal::Infinity) => Ordering::Equal,
            (XReal::Infinity, _) => Ordering::Greater,
            (_, XReal::Infinity) => Ordering::Less,
            (XReal::Finite(a), XReal::Finite(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for XReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for XReal {
    type Output = XReal;
    fn add(self, rhs: XReal) -> XReal {
        &self + &rhs
    }
}

impl<'a> Add<&'a XReal> for &'a XReal {
    type Output = XReal;
    fn add(self, rhs: &XReal) -> XReal {
        match (self, rhs) {
            (XReal::Finite(a), XReal::Finite(b)) => XReal::Finite(q_add(a, b)),
            _ => XReal::Infinity,
        }
    }
}

impl Mul for XReal {
    type Output = XReal;
    fn mul(self, rhs: XReal) -> XReal {
        &self * &rhs
    }
}

impl<'a> Mul<&'a XReal> for &'a XReal {
    type Output = XReal;
    fn mul(self, rhs: &XReal) -> XReal {
        match (self, rhs) {
            (XReal::Finite(a), XReal::Finite(b)) => XReal::Finite(q_mul(a, b)),
            (a, b) if a.is_zero() || b.is_zero() => XReal::zero(),
            _ => XReal::Infinity,
        }
    }
}

impl std::iter::Sum for XReal {
    fn sum<I: Iterator<Item = XReal>>(iter: I) -> XReal {
        iter.fold(XReal::zero(), |a, b| a + b)
    }
}

impl From<Rational> for XReal {
    fn from(r: Rational) -> Self {
        XReal::from_rational(r).expect("negative rational")
    }
}

impl fmt::Display for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XReal::Infinity => write!(f, "inf"),
            XReal::Finite(r) => write!(f, "{}", r),
        }
    }
}

impl fmt::Debug for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl serde::Serialize for XReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// A scalar program value.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
}

impl Value {
    pub fn int(n: i64) -> Self {
        Value::Int(BigInt::from(n))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
        }
    }

    pub fn as_int(&self) -> Result<&BigInt, EvalError> {
        match self {
            Value::Int(n) => Ok(n),
            Value::Bool(_) => Err(EvalError::KindMismatch {
                expected: "int",
                found: "bool",
            }),
        }
    }

    pub fn as_bool(&self) -> Result<bool, EvalError> {
        match self {
            Value::Bool(b) => Ok(*b),
            Value::Int(_) => Err(EvalError::KindMismatch {
                expected: "bool",
                found: "int",
            }),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{}", n),
            Value::Bool(b) => write!(f, "{}", b),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A resolved storage location: a scalar variable or an array cell
/// (1-based index).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    Var(String),
    Cell(String, BigInt),
}

/// Program state: scalar variables and fixed-size arrays.
///
/// Ordered maps keep equality, hashing and printing canonical.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub scalars: BTreeMap<String, Value>,
    pub arrays: BTreeMap<String, Vec<Value>>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn with(mut self, name: &str, v: Value) -> Self {
        self.scalars.insert(name.to_string(), v);
        self
    }

    pub fn with_int(self, name: &str, n: i64) -> Self {
        self.with(name, Value::int(n))
    }

    pub fn with_array(mut self, name: &str, vs: Vec<Value>) -> Self {
        self.arrays.insert(name.to_string(), vs);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.scalars.get(name)
    }

    pub fn lookup(&self, slot: &Slot) -> Result<&Value, EvalError> {
        match slot {
            Slot::Var(x) => self
                .scalars
                .get(x)
                .ok_or_else(|| EvalError::UnboundVariable(x.clone())),
            Slot::Cell(a, i) => {
                let arr = self
                    .arrays
                    .get(a)
                    .ok_or_else(|| EvalError::UnboundVariable(a.clone()))?;
                let idx = cell_index(a, i, arr.len())?;
                Ok(&arr[idx])
            }
        }
    }

    /// `σ[slot/v]`. Fresh scalars may be introduced; the kind of an existing
    /// slot must be preserved.
    pub fn update(&self, slot: &Slot, v: Value) -> Result<State, EvalError> {
        let mut next = self.clone();
        next.update_in_place(slot, v)?;
        Ok(next)
    }

    pub fn update_in_place(&mut self, slot: &Slot, v: Value) -> Result<(), EvalError> {
        match slot {
            Slot::Var(x) => {
                if self.arrays.contains_key(x) {
                    return Err(EvalError::KindMismatch {
                        expected: "array",
                        found: v.kind(),
                    });
                }
                if let Some(old) = self.scalars.get(x) {
                    check_kind(old, &v)?;
                }
                self.scalars.insert(x.clone(), v);
            }
            Slot::Cell(a, i) => {
                let arr = self
                    .arrays
                    .get_mut(a)
                    .ok_or_else(|| EvalError::UnboundVariable(a.clone()))?;
                let idx = cell_index(a, i, arr.len())?;
                check_kind(&arr[idx], &v)?;
                arr[idx] = v;
            }
        }
        Ok(())
    }

    /// Replaces (or creates) a whole array.
    pub fn set_array(&mut self, name: &str, vs: Vec<Value>) -> Result<(), EvalError> {
        if self.scalars.contains_key(name) {
            return Err(EvalError::KindMismatch {
                expected: "scalar",
                found: "array",
            });
        }
        if let Some(old) = self.arrays.get(name) {
            if old.len() != vs.len() {
                return Err(EvalError::ArrayLength {
                    array: name.to_string(),
                    expected: old.len(),
                    found: vs.len(),
                });
            }
            for (o, n) in old.iter().zip(&vs) {
                check_kind(o, n)?;
            }
        }
        self.arrays.insert(name.to_string(), vs);
        Ok(())
    }

    /// Keeps only the named variables and arrays.
    pub fn restrict(&self, keep: &std::collections::BTreeSet<String>) -> State {
        State {
            scalars: self
                .scalars
                .iter()
                .filter(|(k, _)| keep.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            arrays: self
                .arrays
                .iter()
                .filter(|(k, _)| keep.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Parses `{x=1, b=true, cp=[0,1]}` (braces optional, `:` accepted for `=`).
    pub fn parse(s: &str) -> Result<State, String> {
        let mut body = s.trim();
        if let Some(inner) = body.strip_prefix('{').and_then(|b| b.strip_suffix('}')) {
            body = inner;
        }
        let mut st = State::new();
        for part in split_top_level(body) {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (name, val) = part
                .split_once(['=', ':'])
                .ok_or_else(|| format!("expected name=value, got `{part}`"))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(format!("bad variable name `{name}`"));
            }
            let val = val.trim();
            if let Some(items) = val.strip_prefix('[').and_then(|v| v.strip_suffix(']')) {
                let vs = items
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(parse_value)
                    .collect::<Result<Vec<_>, _>>()?;
                st.arrays.insert(name.to_string(), vs);
            } else {
                st.scalars.insert(name.to_string(), parse_value(val)?);
            }
        }
        Ok(st)
    }
}

pub(crate) fn parse_value(s: &str) -> Result<Value, String> {
    match s.trim() {
        "true" => Ok(Value::Bool(true)),
        "false" => Ok(Value::Bool(false)),
        t => t
            .parse::<BigInt>()
            .map(Value::Int)
            .map_err(|_| format!("bad value `{t}`")),
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn check_kind(old: &Value, new: &Value) -> Result<(), EvalError> {
    if old.kind() == new.kind() {
        Ok(())
    } else {
        Err(EvalError::KindMismatch {
            expected: old.kind(),
            found: new.kind(),
        })
    }
}

fn cell_index(array: &str, i: &BigInt, len: usize) -> Result<usize, EvalError> {
    let out = || EvalError::IndexOutOfBounds {
        array: array.to_string(),
        index: i.to_string(),
        len,
    };
    let i = i.to_usize().ok_or_else(out)?;
    if i == 0 || i > len {
        Err(out())
    } else {
        Ok(i - 1)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // scalars and arrays interleaved by name
        let mut items: Vec<(&String, String)> = self
            .scalars
            .iter()
            .map(|(k, v)| (k, v.to_string()))
            .collect();
        for (k, vs) in &self.arrays {
            let inner: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
            items.push((k, format!("[{}]", inner.join(","))));
        }
        items.sort_by(|a, b| a.0.cmp(b.0));
        write!(f, "{{")?;
        for (i, (k, v)) in items.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}={}", k, v)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl serde::Serialize for State {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Rational as `"p/q"` (or `"p"` for integers).
pub fn rational_string(r: &Rational) -> String {
    r.to_string()
}

// num-integer's binary gcd takes time linear in the bit length per step,
// which is ruinous for values like `7 - 5/2^n` with large `n`. Euclid's
// algorithm needs only a handful of divisions there.
fn gcd(a: &BigInt, b: &BigInt) -> BigInt {
    let (mut a, mut b) = (a.abs(), b.abs());
    while !b.is_zero() {
        let r = &a % &b;
        a = std::mem::replace(&mut b, r);
    }
    a
}

fn reduced(n: BigInt, d: BigInt) -> Rational {
    let g = gcd(&n, &d);
    if g.is_one() {
        Rational::new_raw(n, d)
    } else {
        Rational::new_raw(n / &g, d / &g)
    }
}

pub fn q_add(a: &Rational, b: &Rational) -> Rational {
    if a.denom() == b.denom() {
        return reduced(a.numer() + b.numer(), a.denom().clone());
    }
    reduced(a.numer() * b.denom() + b.numer() * a.denom(), a.denom() * b.denom())
}

pub fn q_sub(a: &Rational, b: &Rational) -> Rational {
    if a.denom() == b.denom() {
        return reduced(a.numer() - b.numer(), a.denom().clone());
    }
    reduced(a.numer() * b.denom() - b.numer() * a.denom(), a.denom() * b.denom())
}

pub fn q_mul(a: &Rational, b: &Rational) -> Rational {
    if a.is_zero() || b.is_zero() {
        return Rational::zero();
    }
    reduced(a.numer() * b.numer(), a.denom() * b.denom())
}

/// `a / b` for `b != 0`.
pub fn q_div(a: &Rational, b: &Rational) -> Rational {
    let (n, d) = (a.numer() * b.denom(), a.denom() * b.numer());
    if d.is_negative() {
        reduced(-n, -d)
    } else {
        reduced(n, d)
    }
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_times_infinity_is_zero() {
        assert_eq!(XReal::zero() * XReal::Infinity, XReal::zero());
        assert_eq!(XReal::Infinity * XReal::zero(), XReal::zero());
        assert_eq!(XReal::int(3) * XReal::Infinity, XReal::Infinity);
    }

    #[test]
    fn order_and_add() {
        assert!(XReal::ratio(7, 2) < XReal::int(4));
        assert!(XReal::int(1_000_000) < XReal::Infinity);
        assert_eq!(XReal::ratio(1, 2) + XReal::ratio(1, 3), XReal::ratio(5, 6));
        assert_eq!(XReal::int(2) + XReal::Infinity, XReal::Infinity);
    }

    #[test]
    fn monus_rules() {
        assert_eq!(XReal::int(2).monus(&XReal::int(5)).unwrap(), XReal::zero());
        assert_eq!(XReal::int(5).monus(&XReal::int(2)).unwrap(), XReal::int(3));
        assert_eq!(XReal::Infinity.monus(&XReal::int(2)).unwrap(), XReal::Infinity);
        assert_eq!(XReal::int(2).monus(&XReal::Infinity).unwrap(), XReal::zero());
        assert!(matches!(
            XReal::Infinity.monus(&XReal::Infinity),
            Err(EvalError::MonusOfInfinities)
        ));
    }

    #[test]
    fn update_checks_bounds_and_kinds() {
        let s = State::new().with_int("x", 1).with_array("cp", vec![Value::int(0); 2]);
        let t = s.update(&Slot::Var("x".into()), Value::int(4)).unwrap();
        assert_eq!(t.get("x"), Some(&Value::int(4)));
        assert!(matches!(
            s.update(&Slot::Cell("cp".into(), BigInt::from(3)), Value::int(1)),
            Err(EvalError::IndexOutOfBounds { .. })
        ));
        assert!(matches!(
            s.update(&Slot::Var("x".into()), Value::Bool(true)),
            Err(EvalError::KindMismatch { .. })
        ));
        let u = s.update(&Slot::Cell("cp".into(), BigInt::from(2)), Value::int(1)).unwrap();
        assert_eq!(u.to_string(), "{cp=[0,1], x=1}");
    }

    #[test]
    fn parse_state_roundtrip() {
        let s = State::parse("{x=3, b=true, cp=[0,1,0]}").unwrap();
        assert_eq!(State::parse(&s.to_string()).unwrap(), s);
        assert_eq!(State::parse("c:1").unwrap(), State::new().with_int("c", 1));
    }
}
