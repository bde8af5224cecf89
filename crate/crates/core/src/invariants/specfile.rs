//! Invariant check files (TOML).
//!
//! ```toml
//! program = "corpus:geo"        # or a path relative to this file
//! loop = 0                      # pre-order index among loops (default 0)
//! # loop_path = [1]             # or an explicit AST path
//! f = "0"
//! kind = "omega"                # upper | omega | limit | refine
//! direction = "lower"           # omega, limit and refine; omega also "both"
//! invariant = "1 + [c = 1]*(4 - 3/2^n)"
//! limit = "1 + [c = 1]*4"
//! n_max = 50
//!
//! [domain]
//! c = "0..1"                    # range, int, bool, [v, ...], or "[lo..hi; len]"
//! ```
//!
//! Instead of `[domain]`, `states = ["{c=0}", "{c=1}"]` lists states
//! explicitly. `[params]` passes integer parameters to corpus programs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    check_limit, check_omega_invariant, check_upper_invariant, refine, select_loop, Bound, Component, Direction, OmegaSpec,
    StateDomain, Table, Verdict,
};
use crate::ert::ErtConfig;
use crate::error::Error;
use crate::kernel::{Rational, State, Value};
use crate::lang::{parse_program, parse_rt, Program, RtExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Upper,
    Omega,
    Limit,
    Refine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Directions {
    Lower,
    Upper,
    Both,
}

impl Directions {
    fn list(self) -> Vec<Direction> {
        match self {
            Directions::Lower => vec![Direction::Lower],
            Directions::Upper => vec![Direction::Upper],
            Directions::Both => vec![Direction::Lower, Direction::Upper],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    pub fn to_rational(&self) -> Result<Rational, Error> {
        match self {
            Number::Int(n) => Ok(Rational::from_integer((*n).into())),
            Number::Float(x) => Rational::from_float(*x).ok_or_else(|| Error::Spec(format!("bad number {x}"))),
            Number::Text(s) => parse_rational(s),
        }
    }
}

/// `"p/q"`, an integer, or a decimal such as `1e-12`.
pub fn parse_rational(s: &str) -> Result<Rational, Error> {
    let s = s.trim();
    if let Ok(r) = s.parse::<Rational>() {
        return Ok(r);
    }
    let bad = || Error::Spec(format!("bad number `{s}`"));
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: num_bigint::BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let shift = exp - frac.len() as i32;
    let ten = num_bigint::BigInt::from(10);
    Ok(if shift >= 0 {
        Rational::from_integer(digits * num_traits::pow(ten, shift as usize))
    } else {
        Rational::new(digits, num_traits::pow(ten, (-shift) as usize))
    })
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub program: String,
    #[serde(rename = "loop", default)]
    pub loop_index: usize,
    pub loop_path: Option<Vec<usize>>,
    #[serde(default = "zero_f")]
    pub f: String,
    pub kind: CheckKind,
    pub direction: Option<Directions>,
    pub invariant: String,
    pub limit: Option<String>,
    pub n_max: Option<u64>,
    pub n_probe: Option<u64>,
    pub tol: Option<Number>,
    pub big: Option<Number>,
    pub rounds: Option<usize>,
    #[serde(default)]
    pub params: BTreeMap<String, i64>,
    pub domain: Option<BTreeMap<String, toml::Value>>,
    pub states: Option<Vec<String>>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn zero_f() -> String {
    "0".into()
}

#[derive(Clone, Debug, Serialize)]
pub struct SpecOutcome {
    pub kind: CheckKind,
    /// One verdict per checked direction; empty for refinement.
    pub verdicts: Vec<DirectedVerdict>,
    /// Refinement rounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tables: Option<Vec<Vec<(State, crate::kernel::XReal)>>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectedVerdict {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(flatten)]
    pub verdict: Verdict,
}

impl SpecOutcome {
    pub fn failed(&self) -> bool {
        self.verdicts.iter().any(|v| v.verdict.fails())
    }

    pub fn inconclusive(&self) -> bool {
        !self.failed() && self.verdicts.iter().any(|v| !v.verdict.holds())
    }
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<SpecFile, Error> {
        toml::from_str(text).map_err(|e| Error::Spec(format!("invalid spec file: {e}")))
    }

    pub fn load(path: &Path) -> Result<SpecFile, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?;
        let mut s = SpecFile::parse(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    pub fn program(&self) -> Result<Program, Error> {
        let src = match self.program.strip_prefix("corpus:") {
            Some(name) => crate::corpus::source(name, &self.params)?,
            None => {
                let p = self.base_dir.join(&self.program);
                std::fs::read_to_string(&p).map_err(|e| Error::Spec(format!("{}: {e}", p.display())))?
            }
        };
        Ok(parse_program(&src)?)
    }

    pub fn domain(&self) -> Result<StateDomain, Error> {
        match (&self.domain, &self.states) {
            (Some(_), Some(_)) => Err(Error::Spec("give either [domain] or states, not both".into())),
            (None, None) => Err(Error::Spec("missing [domain] or states".into())),
            (None, Some(states)) => StateDomain::explicit(
                states
                    .iter()
                    .map(|s| State::parse(s).map_err(Error::Spec))
                    .collect::<Result<_, _>>()?,
            ),
            (Some(vars), None) => StateDomain::product(
                vars.iter()
                    .map(|(k, v)| Ok((k.clone(), components(k, v)?)))
                    .collect::<Result<_, Error>>()?,
            ),
        }
    }

    fn rt(&self, s: &str) -> Result<RtExpr, Error> {
        Ok(parse_rt(s)?)
    }

    pub fn run(&self, cfg: &ErtConfig) -> Result<SpecOutcome, Error> {
        let p = self.program()?;
        let d = self.domain()?;
        let w = select_loop(&p, self.loop_index, self.loop_path.as_deref())?;
        let f = self.rt(&self.f)?;
        let inv = self.rt(&self.invariant)?;
        let directions = match (self.kind, self.direction) {
            (CheckKind::Omega, Some(d)) => d.list(),
            (_, Some(Directions::Both)) => return Err(Error::Spec("`both` is only allowed for omega checks".into())),
            (_, Some(d)) => d.list(),
            (CheckKind::Refine, None) => vec![Direction::Upper],
            (_, None) => vec![Direction::Lower],
        };
        let limit = self.limit.as_deref().map(|l| self.rt(l)).transpose()?;
        let mut out = SpecOutcome {
            kind: self.kind,
            verdicts: Vec::new(),
            tables: None,
        };
        let mut push = |direction: Option<Direction>, verdict: Verdict| out.verdicts.push(DirectedVerdict { direction, verdict });
        match self.kind {
            CheckKind::Upper => push(None, check_upper_invariant(w, &f, &Bound::Expr(inv.clone()), &d, cfg)?),
            CheckKind::Omega => {
                for direction in directions {
                    let spec = OmegaSpec {
                        invariant: inv.clone(),
                        direction,
                        limit: limit.clone(),
                    };
                    push(Some(direction), check_omega_invariant(w, &f, &spec, self.n_max.unwrap_or(50), &d, cfg)?);
                }
            }
            CheckKind::Limit => {
                let tol = match &self.tol {
                    Some(t) => t.to_rational()?,
                    None => parse_rational("1e-12")?,
                };
                let big = match &self.big {
                    Some(b) => b.to_rational()?,
                    None => Rational::from_integer(1_000_000.into()),
                };
                let spec = OmegaSpec {
                    invariant: inv.clone(),
                    direction: directions[0],
                    limit: Some(limit.ok_or_else(|| Error::Spec("`limit` is required".into()))?),
                };
                push(Some(directions[0]), check_limit(&spec, &d, self.n_probe.unwrap_or(60), &tol, &big)?);
            }
            CheckKind::Refine => {
                let tables = refine(w, &f, Bound::Expr(inv.clone()), &d, self.rounds.unwrap_or(1), directions[0], cfg)?;
                out.tables = Some(tables.into_iter().map(table_rows).collect());
            }
        }
        Ok(out)
    }
}

fn table_rows(t: Table) -> Vec<(State, crate::kernel::XReal)> {
    t.into_iter().collect()
}

fn scalar(name: &str, v: &toml::Value) -> Result<Value, Error> {
    match v {
        toml::Value::Integer(n) => Ok(Value::int(*n)),
        toml::Value::Boolean(b) => Ok(Value::Bool(*b)),
        other => Err(Error::Spec(format!("`{name}`: unsupported value {other}"))),
    }
}

fn int_range(name: &str, s: &str) -> Result<(i64, i64), Error> {
    let bad = || Error::Spec(format!("`{name}`: bad range `{s}`"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: i64 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if hi < lo {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn components(name: &str, v: &toml::Value) -> Result<Vec<Component>, Error> {
    match v {
        toml::Value::String(s) => {
            let s = s.trim();
            if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                if let Some((range, len)) = inner.split_once(';') {
                    let (lo, hi) = int_range(name, range)?;
                    let len: usize = len
                        .trim()
                        .parse()
                        .map_err(|_| Error::Spec(format!("`{name}`: bad length in `{s}`")))?;
                    return Ok(StateDomain::arrays(lo, hi, len));
                }
                let vals = inner
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<i64>()
                            .map(Value::int)
                            .map_err(|_| Error::Spec(format!("`{name}`: bad array `{s}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                return Ok(vec![Component::Array(vals)]);
            }
            let (lo, hi) = int_range(name, s)?;
            Ok((lo..=hi).map(|x| Component::Scalar(Value::int(x))).collect())
        }
        toml::Value::Array(items) => Ok(vec![Component::Array(
            items.iter().map(|x| scalar(name, x)).collect::<Result<_, _>>()?,
        )]),
        other => Ok(vec![Component::Scalar(scalar(name, other)?)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_omega_file() {
        let s = SpecFile::parse(
            r#"
            program = "corpus:geo"
            f = "0"
            kind = "omega"
            direction = "upper"
            invariant = "1 + [c = 1]*(4 - 3/2^n)"
            limit = "1 + [c = 1]*4"
            n_max = 20
            [domain]
            c = "0..1"
            "#,
        )
        .unwrap();
        let out = s.run(&ErtConfig::default()).unwrap();
        assert!(out.verdicts.iter().all(|v| v.verdict.holds()));
    }

    #[test]
    fn domain_forms() {
        let s = SpecFile::parse(
            r#"
            program = "corpus:geo"
            kind = "upper"
            invariant = "inf"
            [domain]
            a = 3
            b = true
            cp = "[0..1; 2]"
            d = [1, 2]
            "#,
        )
        .unwrap();
        assert_eq!(s.domain().unwrap().len(), 4);
    }

    #[test]
    fn decimal_numbers_are_exact() {
        assert_eq!(parse_rational("1e-12").unwrap(), Rational::new(1.into(), 10u64.pow(12).into()));
        assert_eq!(parse_rational("2.5").unwrap(), crate::kernel::rat(5, 2));
        assert_eq!(parse_rational("3/4").unwrap(), crate::kernel::rat(3, 4));
        assert_eq!(parse_rational("1e6").unwrap(), crate::kernel::rat(1_000_000, 1));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(SpecFile::parse("program = \"x\"\nkind = \"upper\"\ninvariant = \"0\"\nwat = 1").is_err());
    }
}
