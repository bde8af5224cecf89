//! Tick count and final-state distribution of loop-free, choice-free code.
//!
//! For such code `ert[C](X)(σ) = ticks(σ) + Σ_τ P(σ → τ) X(τ)`, which lets a
//! loop over finitely many head states be solved as one linear system.

use std::collections::HashMap;

use num_traits::{One, Zero};

use super::compile::{Compiled, Node, NodeId};
use super::ErtConfig;
use crate::error::Error;
use crate::kernel::{Rational, State, XReal};
use crate::lang::eval::{assign_array, assign_outcomes, guard_probs};

pub type Outcomes = (Rational, Vec<(State, Rational)>);

pub fn body_outcomes(prog: &Compiled, id: NodeId, s: &State, cfg: &ErtConfig) -> Result<Outcomes, Error> {
    let one = Rational::one;
    Ok(match prog.node(id) {
        Node::Empty => (Rational::zero(), vec![(s.clone(), one())]),
        Node::Skip => (one(), vec![(s.clone(), one())]),
        Node::Halt => (Rational::zero(), vec![]),
        Node::Assign(t, d) => (one(), assign_outcomes(t, d, s)?),
        Node::AssignArray(a, es) => (one(), vec![(assign_array(a, es, s)?, one())]),
        Node::Seq(a, b) => {
            let (ta, da) = body_outcomes(prog, *a, s, cfg)?;
            let mut ticks = ta;
            let mut acc: HashMap<State, Rational> = HashMap::new();
            let mut order = Vec::new();
            for (mid, p) in da {
                let (tb, db) = body_outcomes(prog, *b, &mid, cfg)?;
                ticks += &p * tb;
                for (end, q) in db {
                    let w = &p * q;
                    match acc.get_mut(&end) {
                        Some(x) => *x += w,
                        None => {
                            order.push(end.clone());
                            acc.insert(end, w);
                        }
                    }
                }
            }
            let out = order
                .into_iter()
                .map(|st| {
                    let w = acc.remove(&st).unwrap();
                    (st, w)
                })
                .collect();
            (ticks, out)
        }
        Node::If(g, a, b) => {
            let (pt, pf) = guard_probs(g, s)?;
            let mut ticks = match cfg.if_tick() {
                XReal::Finite(r) => r,
                XReal::Infinity => unreachable!(),
            };
            let mut out: Vec<(State, Rational)> = Vec::new();
            for (p, branch) in [(pt, *a), (pf, *b)] {
                if p.is_zero() {
                    continue;
                }
                let (t, d) = body_outcomes(prog, branch, s, cfg)?;
                ticks += &p * t;
                for (end, q) in d {
                    let w = &p * q;
                    match out.iter_mut().find(|(st, _)| *st == end) {
                        Some(e) => e.1 += w,
                        None => out.push((end, w)),
                    }
                }
            }
            (ticks, out)
        }
        Node::Choice(..) | Node::While { .. } | Node::Bounded { .. } => {
            return Err(Error::Spec("body_outcomes needs loop-free, choice-free code".into()))
        }
    })
}
