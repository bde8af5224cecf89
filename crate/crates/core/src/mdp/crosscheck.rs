//! Comparing the transformer against the operational semantics.

use serde::Serialize;

use super::analysis::{expected_reward, Method, RewardAnalysis, RewardConfig};
use super::build_mdp;
use crate::error::Error;
use crate::ert::{ert_eval, ErtConfig, ErtResult, Kind};
use crate::kernel::{State, XReal};
use crate::lang::{Program, RtExpr};

#[derive(Clone, Debug, Serialize)]
pub struct CrossCheckConfig {
    pub ert: ErtConfig,
    pub reward: RewardConfig,
    pub node_cap: usize,
    /// Allowed gap when the MDP value comes from value iteration.
    pub tol: f64,
    /// Replace every `while` by `while<k>` before both analyses.
    pub bound_loops: Option<u32>,
}

impl Default for CrossCheckConfig {
    fn default() -> Self {
        CrossCheckConfig {
            ert: ErtConfig::default(),
            reward: RewardConfig::default(),
            node_cap: default_node_cap(),
            tol: 1e-9,
            bound_loops: None,
        }
    }
}

/// 200 000, or `ERTKIT_MAX_NODES` when set.
pub fn default_node_cap() -> usize {
    std::env::var("ERTKIT_MAX_NODES")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(200_000)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Agree,
    Disagree,
    /// The transformer result is approximate, so there is nothing to compare.
    Unchecked,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossCheck {
    pub ert: ErtResult,
    pub mdp: RewardAnalysis,
    pub nodes: usize,
    pub transitions: usize,
    pub gap: f64,
    pub verdict: Verdict,
}

/// Exact transformer values must equal the MDP value; lower and upper bounds
/// must sit on the correct side of it. Exact MDP methods are compared
/// exactly, value iteration within `tol`.
pub fn compare(ert: &XReal, kind: &Kind, mdp: &XReal, method: Method, tol: f64) -> Verdict {
    let slack = if method == Method::ValueIteration { tol } else { 0.0 };
    let close = |a: &XReal, b: &XReal| a == b || a.distance(b) <= slack;
    let below = |a: &XReal, b: &XReal| a <= b || a.distance(b) <= slack;
    let ok = match kind {
        Kind::Exact => close(ert, mdp),
        Kind::LowerBound { .. } => below(ert, mdp),
        Kind::UpperBound => below(mdp, ert),
        Kind::Approximate => return Verdict::Unchecked,
    };
    if ok {
        Verdict::Agree
    } else {
        Verdict::Disagree
    }
}

pub fn cross_check(p: &Program, f: &RtExpr, s: &State, cfg: &CrossCheckConfig) -> Result<CrossCheck, Error> {
    let bounded;
    let p = match cfg.bound_loops {
        Some(k) => {
            bounded = p.bound_loops(k);
            &bounded
        }
        None => p,
    };
    let ert = ert_eval(p, f, s, &cfg.ert)?;
    let m = build_mdp(p, f, s, cfg.node_cap)?;
    let mdp = expected_reward(&m, &cfg.reward)?;
    let verdict = compare(&ert.value, &ert.kind, &mdp.value, mdp.method, cfg.tol);
    Ok(CrossCheck {
        gap: ert.value.distance(&mdp.value),
        nodes: m.len(),
        transitions: m.transitions(),
        ert,
        mdp,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_program, parse_rt};

    #[test]
    fn geometric_loop_lower_bound_is_below() {
        let p = parse_program("while (c = 1) { c :~ 1/2*<0> + 1/2*<1> }").unwrap();
        let r = cross_check(&p, &RtExpr::int(0), &State::new().with_int("c", 1), &CrossCheckConfig::default()).unwrap();
        assert_eq!(r.mdp.value, XReal::int(5));
        assert_eq!(r.verdict, Verdict::Agree);
        assert!(r.ert.kind.is_lower());
    }

    #[test]
    fn bounded_rewrite_is_exact() {
        let p = parse_program("while (x > 0) { x :~ 1/2*<x-1> + 1/2*<x+1> }").unwrap();
        let cfg = CrossCheckConfig {
            bound_loops: Some(10),
            ..CrossCheckConfig::default()
        };
        let r = cross_check(&p, &parse_rt("0").unwrap(), &State::new().with_int("x", 1), &cfg).unwrap();
        assert!(r.ert.kind.is_exact());
        assert_eq!(r.ert.value, r.mdp.value);
    }

    #[test]
    fn nondeterminism_and_halt() {
        let p = parse_program("{ x := 1; halt } [] { if (1/2*<true> + 1/2*<false>) { x := 2 } else { skip } }").unwrap();
        let f = parse_rt("x").unwrap();
        let r = cross_check(&p, &f, &State::new().with_int("x", 0), &CrossCheckConfig::default()).unwrap();
        assert_eq!(r.ert.value, XReal::int(3));
        assert_eq!(r.verdict, Verdict::Agree);
    }
}
