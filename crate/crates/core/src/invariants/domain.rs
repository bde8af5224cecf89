//! Finite sets of states over which invariants are checked.

use crate::error::Error;
use crate::kernel::{State, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Component {
    Scalar(Value),
    Array(Vec<Value>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateDomain {
    Explicit(Vec<State>),
    /// Every combination of the listed per-variable values, in
    /// lexicographic order with the first variable slowest.
    Product(Vec<(String, Vec<Component>)>),
}

impl StateDomain {
    pub fn explicit(states: Vec<State>) -> Result<Self, Error> {
        if states.is_empty() {
            return Err(Error::Spec("empty state domain".into()));
        }
        Ok(StateDomain::Explicit(states))
    }

    /// `name ∈ lo..=hi` for each entry.
    pub fn ranges(vars: &[(&str, i64, i64)]) -> Result<Self, Error> {
        let mut out = Vec::new();
        for (name, lo, hi) in vars {
            if hi < lo {
                return Err(Error::Spec(format!("empty range for `{name}`")));
            }
            out.push((name.to_string(), (*lo..=*hi).map(|v| Component::Scalar(Value::int(v))).collect()));
        }
        StateDomain::product(out)
    }

    pub fn product(vars: Vec<(String, Vec<Component>)>) -> Result<Self, Error> {
        if vars.iter().any(|(_, vs)| vs.is_empty()) {
            return Err(Error::Spec("empty state domain".into()));
        }
        Ok(StateDomain::Product(vars))
    }

    /// All arrays of length `len` with entries in `lo..=hi`.
    pub fn arrays(lo: i64, hi: i64, len: usize) -> Vec<Component> {
        let mut out = vec![Vec::new()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<Value>| {
                    (lo..=hi).map(move |v| {
                        let mut next = prefix.clone();
                        next.push(Value::int(v));
                        next
                    })
                })
                .collect();
        }
        out.into_iter().map(Component::Array).collect()
    }

    pub fn len(&self) -> usize {
        match self {
            StateDomain::Explicit(v) => v.len(),
            StateDomain::Product(vars) => vars.iter().map(|(_, vs)| vs.len()).product(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Extends every state of the domain with the bindings of `base` that
    /// it does not mention.
    pub fn states_over(&self, base: &State) -> Vec<State> {
        let mut out: Vec<State> = match self {
            StateDomain::Explicit(v) => v.clone(),
            StateDomain::Product(vars) => {
                let mut acc = vec![State::new()];
                for (name, vs) in vars {
                    acc = acc
                        .into_iter()
                        .flat_map(|s| {
                            vs.iter().map(move |c| match c {
                                Component::Scalar(v) => s.clone().with(name, v.clone()),
                                Component::Array(a) => s.clone().with_array(name, a.clone()),
                            })
                        })
                        .collect();
                }
                acc
            }
        };
        for s in &mut out {
            for (k, v) in &base.scalars {
                s.scalars.entry(k.clone()).or_insert_with(|| v.clone());
            }
            for (k, v) in &base.arrays {
                s.arrays.entry(k.clone()).or_insert_with(|| v.clone());
            }
        }
        out
    }

    pub fn states(&self) -> Vec<State> {
        self.states_over(&State::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_order() {
        let d = StateDomain::ranges(&[("a", 0, 1), ("b", 0, 2)]).unwrap();
        let s = d.states();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], State::new().with_int("a", 0).with_int("b", 0));
        assert_eq!(s[1], State::new().with_int("a", 0).with_int("b", 1));
        assert_eq!(s[5], State::new().with_int("a", 1).with_int("b", 2));
    }

    #[test]
    fn arrays_enumerate() {
        let d = StateDomain::product(vec![("cp".into(), StateDomain::arrays(0, 1, 3))]).unwrap();
        assert_eq!(d.len(), 8);
        assert_eq!(d.states().len(), 8);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(StateDomain::explicit(vec![]).is_err());
        assert!(StateDomain::ranges(&[("a", 1, 0)]).is_err());
    }
}
