//! Maximal expected reward of an MDP until it reaches the sink.

use num_traits::ToPrimitive;
use serde::Serialize;

use super::{Action, Mdp};
use crate::error::Error;
use crate::kernel::XReal;
use crate::linsys::{solve_lfp, Row};

/// Whether every scheduler reaches the sink almost surely.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "result")]
pub enum Qualitative {
    AllReachSink,
    /// Some scheduler keeps the run inside these nodes forever with
    /// positive probability. Each entry is a node and an action whose whole
    /// support stays inside the set.
    SomeSchedulerAvoids { trap: Vec<(usize, Action)> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    /// The sink is avoidable, so the supremum is infinite.
    Qualitative,
    /// A Markov chain, solved exactly.
    Exact,
    /// The maximum of exact solutions over all memoryless schedulers.
    Schedulers,
    /// Exact policy iteration over memoryless schedulers.
    PolicyIteration,
    ValueIteration,
}

/// What to do when there are too many schedulers to enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LargeMdp {
    PolicyIteration,
    ValueIteration,
}

#[derive(Clone, Debug, Serialize)]
pub struct RewardConfig {
    /// Largest number of memoryless schedulers to enumerate exactly.
    pub scheduler_cap: usize,
    pub large: LargeMdp,
    pub vi_tol: f64,
    pub vi_max_iter: u64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            scheduler_cap: 64,
            large: LargeMdp::PolicyIteration,
            vi_tol: 1e-9,
            vi_max_iter: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RewardAnalysis {
    pub value: XReal,
    pub method: Method,
    pub schedulers: Option<usize>,
    /// Last value-iteration update, when that method was used.
    pub residual: Option<f64>,
    /// Rounds of policy or value iteration.
    pub iterations: Option<u64>,
    pub qualitative: Qualitative,
}

/// Greatest set of non-sink nodes in which every node can pick an action
/// that stays inside. Every built node is reachable from the initial node,
/// so a non-empty set means some scheduler never reaches the sink with
/// positive probability.
pub fn qualitative_check(m: &Mdp) -> Qualitative {
    let n = m.len();
    let mut inside: Vec<bool> = (0..n).map(|i| i != m.sink).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            if inside[i] && !m.nodes[i].actions.iter().any(|(_, d)| d.iter().all(|(j, _)| inside[*j])) {
                inside[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let trap: Vec<(usize, Action)> = (0..n)
        .filter(|&i| inside[i])
        .map(|i| {
            let (a, _) = m.nodes[i]
                .actions
                .iter()
                .find(|(_, d)| d.iter().all(|(j, _)| inside[*j]))
                .expect("trap node has a staying action");
            (i, *a)
        })
        .collect();
    if trap.is_empty() {
        Qualitative::AllReachSink
    } else {
        Qualitative::SomeSchedulerAvoids { trap }
    }
}

fn chain_rows(m: &Mdp, choice: &[usize]) -> Vec<Row> {
    m.nodes
        .iter()
        .enumerate()
        .map(|(i, node)| {
            if i == m.sink {
                return Row {
                    constant: XReal::zero(),
                    coeffs: vec![(i, crate::kernel::rat(1, 1))],
                };
            }
            let (_, d) = &node.actions[choice[i]];
            Row {
                constant: node.reward.clone(),
                coeffs: d.clone(),
            }
        })
        .collect()
}

pub fn expected_reward(m: &Mdp, cfg: &RewardConfig) -> Result<RewardAnalysis, Error> {
    let qualitative = qualitative_check(m);
    let mut out = RewardAnalysis {
        value: XReal::Infinity,
        method: Method::Qualitative,
        schedulers: None,
        residual: None,
        iterations: None,
        qualitative: qualitative.clone(),
    };
    if qualitative != Qualitative::AllReachSink {
        return Ok(out);
    }
    let choices: Vec<usize> = (0..m.len()).filter(|&i| m.nodes[i].actions.len() > 1).collect();
    let count = if choices.len() < usize::BITS as usize { 1usize << choices.len() } else { usize::MAX };
    if choices.is_empty() {
        out.value = solve_lfp(&chain_rows(m, &vec![0; m.len()]))?[m.init].clone();
        out.method = Method::Exact;
        out.schedulers = Some(1);
        return Ok(out);
    }
    if count <= cfg.scheduler_cap {
        let mut pick = vec![0usize; m.len()];
        let mut best = XReal::zero();
        for mask in 0..count {
            for (b, &i) in choices.iter().enumerate() {
                pick[i] = (mask >> b) & 1;
            }
            let v = solve_lfp(&chain_rows(m, &pick))?[m.init].clone();
            best = best.max(v);
        }
        out.value = best;
        out.method = Method::Schedulers;
        out.schedulers = Some(count);
        return Ok(out);
    }
    let inf = reaches_infinity(m);
    if inf[m.init] {
        out.method = Method::Exact;
        return Ok(out);
    }
    if cfg.large == LargeMdp::PolicyIteration {
        let (v, rounds) = policy_iteration(m, &choices)?;
        out.value = v;
        out.method = Method::PolicyIteration;
        out.iterations = Some(rounds);
        return Ok(out);
    }
    let (v, residual, iters) = value_iteration(m, cfg);
    out.value = v;
    out.method = Method::ValueIteration;
    out.residual = Some(residual);
    out.iterations = Some(iters);
    Ok(out)
}

/// Nodes from which some path reaches an infinite reward; their maximal
/// value is infinite.
fn reaches_infinity(m: &Mdp) -> Vec<bool> {
    let n = m.len();
    let mut inf: Vec<bool> = m.nodes.iter().map(|x| x.reward.is_infinite()).collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            if !inf[i] && m.nodes[i].actions.iter().any(|(_, d)| d.iter().any(|(j, _)| inf[*j])) {
                inf[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    inf
}

/// Howard's policy iteration: evaluate the current scheduler exactly, then
/// switch every node to a strictly better action, until none exists. Every
/// scheduler reaches the sink almost surely here, so this terminates with
/// the maximum.
fn policy_iteration(m: &Mdp, choices: &[usize]) -> Result<(XReal, u64), Error> {
    let mut pick = vec![0usize; m.len()];
    let mut rounds = 0;
    loop {
        rounds += 1;
        let v = solve_lfp(&chain_rows(m, &pick))?;
        let succ = |d: &[(usize, crate::kernel::Rational)]| {
            d.iter().fold(XReal::zero(), |acc, (j, p)| acc + v[*j].scale(p))
        };
        let mut changed = false;
        for &i in choices {
            let acts = &m.nodes[i].actions;
            let mut best = succ(&acts[pick[i]].1);
            for (a, (_, d)) in acts.iter().enumerate() {
                let here = succ(d);
                if here > best {
                    best = here;
                    pick[i] = a;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok((v[m.init].clone(), rounds));
        }
    }
}

/// Floating-point value iteration. Nodes that can reach an infinite reward
/// are left out, and the initial node is assumed not to be one of them.
fn value_iteration(m: &Mdp, cfg: &RewardConfig) -> (XReal, f64, u64) {
    sweeps(m, cfg, |_| ())
}

/// Gauss-Seidel sweeps from 0; `observe` sees the vector after each sweep.
fn sweeps(m: &Mdp, cfg: &RewardConfig, mut observe: impl FnMut(&[f64])) -> (XReal, f64, u64) {
    let n = m.len();
    let inf = reaches_infinity(m);
    let reward: Vec<f64> = m.nodes.iter().map(|x| x.reward.to_f64()).collect();
    let acts: Vec<Vec<Vec<(usize, f64)>>> = m
        .nodes
        .iter()
        .map(|x| {
            x.actions
                .iter()
                .map(|(_, d)| d.iter().map(|(j, p)| (*j, p.to_f64().unwrap_or(0.0))).collect())
                .collect()
        })
        .collect();
    let mut x = vec![0.0f64; n];
    let mut residual = f64::INFINITY;
    let mut iters = 0;
    while iters < cfg.vi_max_iter && residual > cfg.vi_tol {
        residual = 0.0;
        for i in 0..n {
            if i == m.sink || inf[i] {
                continue;
            }
            let best = acts[i]
                .iter()
                .map(|d| d.iter().map(|(j, p)| p * x[*j]).sum::<f64>())
                .fold(0.0f64, f64::max);
            let v = reward[i] + best;
            residual = residual.max((v - x[i]).abs());
            x[i] = v;
        }
        observe(&x);
        iters += 1;
    }
    (XReal::from_f64(x[m.init]), residual, iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::State;
    use crate::lang::{parse_program, parse_rt, RtExpr};
    use crate::mdp::build_mdp;

    fn value(src: &str, f: &str, s: State) -> RewardAnalysis {
        let m = build_mdp(&parse_program(src).unwrap(), &parse_rt(f).unwrap(), &s, 10_000).unwrap();
        expected_reward(&m, &RewardConfig::default()).unwrap()
    }

    #[test]
    fn truncated_loop() {
        let r = value(
            "if (1/2*<true> + 1/2*<false>) { c := 0 } else { c := 1 }",
            "c",
            State::new(),
        );
        assert_eq!(r.value, XReal::ratio(5, 2));
        assert_eq!(r.method, Method::Exact);
    }

    #[test]
    fn geometric_loop() {
        let src = "while (c = 1) { c :~ 1/2*<0> + 1/2*<1> }";
        assert_eq!(value(src, "0", State::new().with_int("c", 1)).value, XReal::int(5));
        assert_eq!(value(src, "0", State::new().with_int("c", 0)).value, XReal::int(1));
    }

    #[test]
    fn choice_takes_maximum() {
        let r = value("{ skip; skip } [] { skip }", "0", State::new());
        assert_eq!(r.value, XReal::int(2));
        assert_eq!(r.method, Method::Schedulers);
    }

    #[test]
    fn avoidable_sink_is_infinite() {
        let r = value("{ while (true) { skip } } [] { skip }", "0", State::new());
        assert_eq!(r.value, XReal::Infinity);
        assert!(matches!(r.qualitative, Qualitative::SomeSchedulerAvoids { .. }));
    }

    #[test]
    fn halt_earns_nothing_after() {
        let r = value("skip; halt; skip", "5", State::new());
        assert_eq!(r.value, XReal::int(1));
    }

    #[test]
    fn value_iteration_agrees() {
        let p = parse_program("while (c = 1) { { c :~ 1/2*<0> + 1/2*<1> } [] { c :~ 1/3*<0> + 2/3*<1> } }").unwrap();
        let m = build_mdp(&p, &RtExpr::int(0), &State::new().with_int("c", 1), 1000).unwrap();
        let exact = expected_reward(&m, &RewardConfig::default()).unwrap();
        let vi = expected_reward(
            &m,
            &RewardConfig {
                scheduler_cap: 0,
                large: LargeMdp::ValueIteration,
                ..RewardConfig::default()
            },
        )
        .unwrap();
        assert_eq!(exact.value, XReal::int(7));
        assert_eq!(vi.method, Method::ValueIteration);
        assert!(vi.value.distance(&exact.value) < 1e-6);
    }

    #[test]
    fn value_iterates_never_decrease() {
        use crate::gen::{rng, Gen, GenConfig};
        let cfg = RewardConfig {
            vi_max_iter: 200,
            ..RewardConfig::default()
        };
        for case in 0..40 {
            let mut r = rng(7, case);
            let mut g = Gen { rng: &mut r, cfg: GenConfig::default() };
            let p = g.program(3, &[], false);
            let f = g.rt();
            let s = g.state();
            let m = build_mdp(&p, &f, &s, 5000).unwrap();
            let mut prev = vec![0.0; m.len()];
            sweeps(&m, &cfg, |x| {
                for (a, b) in prev.iter().zip(x) {
                    assert!(b >= a, "case {case}: {b} < {a}");
                }
                prev = x.to_vec();
            });
        }
    }

    #[test]
    fn policy_iteration_matches_enumeration() {
        let src = "while (c < 3) { { c :~ 1/2*<c + 1> + 1/2*<c> } [] { c :~ 1/3*<c + 1> + 2/3*<c>; skip } [] { c := c + 1 } }";
        let p = parse_program(src).unwrap();
        let m = build_mdp(&p, &parse_rt("c").unwrap(), &State::new().with_int("c", 0), 1000).unwrap();
        let all = expected_reward(&m, &RewardConfig::default()).unwrap();
        let pi = expected_reward(
            &m,
            &RewardConfig {
                scheduler_cap: 1,
                ..RewardConfig::default()
            },
        )
        .unwrap();
        assert_eq!(all.method, Method::Schedulers);
        assert_eq!(pi.method, Method::PolicyIteration);
        assert_eq!(pi.value, all.value);
        // Best per increment: 3 ticks per attempt, 3 expected attempts.
        // Then the final guard and f = 3.
        assert_eq!(all.value, XReal::int(3 * 9 + 1 + 3));
    }
}
