//! The operational MDP of a program and expected rewards on it.
//!
//! Nodes are `⟨term, σ⟩`, `⟨↓, σ⟩` (terminated in `σ`) and a single `Sink`.
//! Rewards: terminated nodes earn `f(σ)`; `skip`, assignments and guard
//! evaluations earn 1; everything else earns 0. A sequence node earns what
//! its first component earns.

pub mod analysis;
pub mod crosscheck;
pub mod export;

use std::collections::{HashMap, VecDeque};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::ert::compile::{Compiled, Node, NodeId};
use crate::ert::engine::Frame;
use crate::error::Error;
use crate::kernel::{Rational, State, XReal};
use crate::lang::eval::{assign_array, assign_outcomes, guard_probs};
use crate::lang::{pretty, eval_rt, Program, RtExpr};

pub use analysis::{expected_reward, qualitative_check, LargeMdp, Method, Qualitative, RewardAnalysis, RewardConfig};
pub use crosscheck::{cross_check, CrossCheck, CrossCheckConfig, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, PartialOrd, Ord)]
pub enum Action {
    L,
    Tau,
    R,
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Action::L => "L",
            Action::Tau => "tau",
            Action::R => "R",
        })
    }
}

/// A program term still to execute.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Prog(Frame),
    /// `if (ξ) { body; W } else { empty }` for the loop `W` at this node.
    Unfold(NodeId),
    /// `↓; C`.
    DownThen(Frame),
    /// `t; C` with `t` not yet terminated.
    Then(Box<Term>, Frame),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Key {
    Exec(Term, State),
    Down(State),
    Sink,
}

#[derive(Clone, Debug)]
pub struct MdpNode {
    pub key: Key,
    pub reward: XReal,
    pub actions: Vec<(Action, Vec<(usize, Rational)>)>,
}

#[derive(Clone, Debug)]
pub struct Mdp {
    pub nodes: Vec<MdpNode>,
    pub init: usize,
    pub sink: usize,
    prog: Compiled,
}

enum Succ {
    Exec(Term, State),
    Down(State),
    Sink,
}

/// `Node(id)` of a bounded loop is the unrolling frame itself.
fn norm(prog: &Compiled, f: Frame) -> Frame {
    match f {
        Frame::Node(id) => match prog.node(id) {
            Node::Bounded { bound, .. } => Frame::Unroll { node: id, fuel: *bound },
            _ => f,
        },
        u => u,
    }
}

fn compose(s: Succ, c: Frame) -> Succ {
    match s {
        Succ::Down(st) => Succ::Exec(Term::DownThen(c), st),
        Succ::Sink => Succ::Sink,
        Succ::Exec(t, st) => Succ::Exec(Term::Then(Box::new(t), c), st),
    }
}

type Step = (XReal, Vec<(Action, Vec<(Succ, Rational)>)>);

fn tau(succ: Vec<(Succ, Rational)>) -> Vec<(Action, Vec<(Succ, Rational)>)> {
    vec![(Action::Tau, succ)]
}

/// Reward and outgoing distributions of an executing node.
fn step(prog: &Compiled, t: &Term, s: &State) -> Result<Step, Error> {
    let one = Rational::one;
    Ok(match t {
        Term::Prog(f) => match norm(prog, *f) {
            Frame::Node(id) => match prog.node(id) {
                Node::Empty => (XReal::zero(), tau(vec![(Succ::Down(s.clone()), one())])),
                Node::Skip => (XReal::one(), tau(vec![(Succ::Down(s.clone()), one())])),
                Node::Halt => (XReal::zero(), tau(vec![(Succ::Sink, one())])),
                Node::Assign(tg, d) => {
                    let out = assign_outcomes(tg, d, s)?.into_iter().map(|(st, p)| (Succ::Down(st), p)).collect();
                    (XReal::one(), tau(out))
                }
                Node::AssignArray(a, es) => (XReal::one(), tau(vec![(Succ::Down(assign_array(a, es, s)?), one())])),
                Node::Seq(a, b) => {
                    let (r, acts) = step(prog, &Term::Prog(Frame::Node(*a)), s)?;
                    let c2 = norm(prog, Frame::Node(*b));
                    let acts = acts
                        .into_iter()
                        .map(|(act, succ)| (act, succ.into_iter().map(|(x, p)| (compose(x, c2), p)).collect()))
                        .collect();
                    (r, acts)
                }
                Node::Choice(a, b) => (
                    XReal::zero(),
                    vec![
                        (Action::L, vec![(Succ::Exec(Term::Prog(norm(prog, Frame::Node(*a))), s.clone()), one())]),
                        (Action::R, vec![(Succ::Exec(Term::Prog(norm(prog, Frame::Node(*b))), s.clone()), one())]),
                    ],
                ),
                Node::If(g, a, b) => {
                    let (pt, pf) = guard_probs(g, s)?;
                    let mut out = Vec::new();
                    if !pt.is_zero() {
                        out.push((Succ::Exec(Term::Prog(norm(prog, Frame::Node(*a))), s.clone()), pt));
                    }
                    if !pf.is_zero() {
                        out.push((Succ::Exec(Term::Prog(norm(prog, Frame::Node(*b))), s.clone()), pf));
                    }
                    (XReal::one(), tau(out))
                }
                Node::While { .. } => (XReal::zero(), tau(vec![(Succ::Exec(Term::Unfold(id), s.clone()), one())])),
                Node::Bounded { .. } => unreachable!("normalised"),
            },
            Frame::Unroll { node, fuel } => {
                let body = match prog.node(node) {
                    Node::Bounded { body, .. } | Node::While { body, .. } => *body,
                    _ => unreachable!(),
                };
                if fuel == 0 {
                    (XReal::zero(), tau(vec![(Succ::Sink, one())]))
                } else {
                    let rest = Frame::Unroll { node, fuel: fuel - 1 };
                    unfold(prog, node, body, rest, s)?
                }
            }
        },
        Term::Unfold(w) => {
            let body = match prog.node(*w) {
                Node::While { body, .. } => *body,
                _ => unreachable!(),
            };
            unfold(prog, *w, body, Frame::Node(*w), s)?
        }
        Term::DownThen(c) => (XReal::zero(), tau(vec![(Succ::Exec(Term::Prog(*c), s.clone()), one())])),
        Term::Then(inner, c) => {
            let (r, acts) = step(prog, inner, s)?;
            let acts = acts
                .into_iter()
                .map(|(act, succ)| (act, succ.into_iter().map(|(x, p)| (compose(x, *c), p)).collect()))
                .collect();
            (r, acts)
        }
    })
}

/// The guard step of `if (ξ) { body; rest } else { empty }`.
fn unfold(prog: &Compiled, w: NodeId, body: NodeId, rest: Frame, s: &State) -> Result<Step, Error> {
    let guard = match prog.node(w) {
        Node::While { guard, .. } | Node::Bounded { guard, .. } => guard,
        _ => unreachable!(),
    };
    let (pt, pf) = guard_probs(guard, s)?;
    let mut out = Vec::new();
    if !pt.is_zero() {
        let t = Term::Then(Box::new(Term::Prog(norm(prog, Frame::Node(body)))), rest);
        out.push((Succ::Exec(t, s.clone()), pt));
    }
    if !pf.is_zero() {
        out.push((Succ::Exec(Term::Prog(Frame::Node(prog.empty)), s.clone()), pf));
    }
    Ok((XReal::one(), tau(out)))
}

/// Reward of a node read off its label alone, as a cross-check on `step`.
pub fn label_reward(mdp: &Mdp, key: &Key, f: &RtExpr) -> Result<XReal, Error> {
    fn term(prog: &Compiled, t: &Term) -> XReal {
        match t {
            Term::Prog(Frame::Unroll { fuel, .. }) => {
                if *fuel == 0 {
                    XReal::zero()
                } else {
                    XReal::one()
                }
            }
            Term::Prog(Frame::Node(id)) => match prog.node(*id) {
                Node::Skip | Node::Assign(..) | Node::AssignArray(..) | Node::If(..) => XReal::one(),
                Node::Seq(a, _) => term(prog, &Term::Prog(Frame::Node(*a))),
                Node::Bounded { bound, .. } => term(prog, &Term::Prog(Frame::Unroll { node: *id, fuel: *bound })),
                Node::Empty | Node::Halt | Node::Choice(..) | Node::While { .. } => XReal::zero(),
            },
            Term::Unfold(_) => XReal::one(),
            Term::DownThen(_) => XReal::zero(),
            Term::Then(t, _) => term(prog, t),
        }
    }
    Ok(match key {
        Key::Sink => XReal::zero(),
        Key::Down(s) => eval_rt(f, s, None)?,
        Key::Exec(t, _) => term(&mdp.prog, t),
    })
}

/// Builds the reachable MDP of `C` from `σ` with terminal reward `f`.
pub fn build_mdp(p: &Program, f: &RtExpr, s: &State, node_cap: usize) -> Result<Mdp, Error> {
    let prog = Compiled::new(p);
    let mut nodes: Vec<MdpNode> = Vec::new();
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut queue = VecDeque::new();

    let mut intern = |key: Key, nodes: &mut Vec<MdpNode>, queue: &mut VecDeque<usize>| -> Result<usize, Error> {
        if let Some(i) = index.get(&key) {
            return Ok(*i);
        }
        if nodes.len() >= node_cap {
            return Err(Error::NodeCapExceeded(node_cap));
        }
        let i = nodes.len();
        index.insert(key.clone(), i);
        nodes.push(MdpNode {
            key,
            reward: XReal::zero(),
            actions: Vec::new(),
        });
        queue.push_back(i);
        Ok(i)
    };

    let init = intern(
        Key::Exec(Term::Prog(norm(&prog, Frame::Node(prog.root))), s.clone()),
        &mut nodes,
        &mut queue,
    )?;
    let sink = intern(Key::Sink, &mut nodes, &mut queue)?;
    while let Some(i) = queue.pop_front() {
        let (reward, acts) = match nodes[i].key.clone() {
            Key::Sink => (XReal::zero(), vec![(Action::Tau, vec![(sink, Rational::one())])]),
            Key::Down(st) => (eval_rt(f, &st, None)?, vec![(Action::Tau, vec![(sink, Rational::one())])]),
            Key::Exec(t, st) => {
                let (r, acts) = step(&prog, &t, &st)?;
                let mut out = Vec::with_capacity(acts.len());
                for (a, succ) in acts {
                    let mut dist: Vec<(usize, Rational)> = Vec::with_capacity(succ.len());
                    for (x, p) in succ {
                        let key = match x {
                            Succ::Exec(t, st) => Key::Exec(t, st),
                            Succ::Down(st) => Key::Down(st),
                            Succ::Sink => Key::Sink,
                        };
                        let j = intern(key, &mut nodes, &mut queue)?;
                        match dist.iter_mut().find(|(k, _)| *k == j) {
                            Some(e) => e.1 += p,
                            None => dist.push((j, p)),
                        }
                    }
                    out.push((a, dist));
                }
                (r, out)
            }
        };
        nodes[i].reward = reward;
        nodes[i].actions = acts;
    }
    Ok(Mdp { nodes, init, sink, prog })
}

impl Mdp {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn transitions(&self) -> usize {
        self.nodes.iter().map(|n| n.actions.iter().map(|(_, d)| d.len()).sum::<usize>()).sum()
    }

    fn term_label(&self, t: &Term) -> String {
        let frame = |f: &Frame| match f {
            Frame::Node(id) => pretty::head(self.prog.source(*id)),
            Frame::Unroll { node, fuel } => match self.prog.source(*node) {
                Program::While(g, ..) | Program::Bounded(_, g, _) => format!("while<{fuel}> ({})", pretty::dist(g)),
                other => pretty::head(other),
            },
        };
        match t {
            Term::Prog(f) => frame(f),
            Term::Unfold(w) => format!("unfold {}", frame(&Frame::Node(*w))),
            Term::DownThen(c) => format!("down; {}", frame(c)),
            Term::Then(t, c) => format!("{}; {}", self.term_label(t), frame(c)),
        }
    }

    pub fn label(&self, i: usize) -> String {
        match &self.nodes[i].key {
            Key::Sink => "sink".to_string(),
            Key::Down(s) => format!("<down, {s}>"),
            Key::Exec(t, s) => format!("<{}, {s}>", self.term_label(t)),
        }
    }
}
