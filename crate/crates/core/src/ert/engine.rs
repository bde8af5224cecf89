//! Memoised evaluation of `E(frame, K, σ) = ert[frame](K)(σ)`, where the
//! continuation `K` is an interned stack of frames over a base run-time.

use std::collections::{BTreeSet, HashMap};

use num_traits::Zero;

use super::compile::{Compiled, Node, NodeId};
use super::solve::body_outcomes;
use super::{ErtConfig, LoopPolicy, Outcome, Prov};
use crate::error::Error;
use crate::kernel::{Rational, State, XReal};
use crate::lang::eval::{assign_array, assign_outcomes, guard_probs};
use crate::lang::{Direction, RtEnv, RtExpr};
use crate::linsys::{solve_lfp, Row};

pub type ContId = u32;
pub const BASE: ContId = 0;

const RED_ZONE: usize = 128 * 1024;
const STACK_CHUNK: usize = 8 * 1024 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    Node(NodeId),
    /// `while^{<fuel}` of the loop at `node`.
    Unroll { node: NodeId, fuel: u32 },
}

pub type BaseFn<'b> = dyn FnMut(&State) -> Result<Outcome, Error> + 'b;

pub enum Base<'b> {
    Rt(&'b RtExpr),
    Fn(&'b mut BaseFn<'b>),
}

struct SolvedLoop {
    live: Option<BTreeSet<String>>,
    values: HashMap<State, Outcome>,
    failed: bool,
}

pub struct Engine<'p, 'b> {
    prog: &'p Compiled,
    cfg: &'p ErtConfig,
    depth: u32,
    base: Base<'b>,
    conts: Vec<(Frame, ContId)>,
    cont_ids: HashMap<(Frame, ContId), ContId>,
    memo: HashMap<(Frame, ContId), HashMap<State, Outcome>>,
    base_memo: HashMap<State, Outcome>,
    cont_reads: HashMap<ContId, Option<BTreeSet<String>>>,
    solved: HashMap<(NodeId, ContId), SolvedLoop>,
    pub evals: u64,
}

impl<'p, 'b> Engine<'p, 'b> {
    pub fn new(prog: &'p Compiled, cfg: &'p ErtConfig, depth: u32, base: Base<'b>) -> Self {
        Engine {
            prog,
            cfg,
            depth,
            base,
            // slot 0 stands for the base and is never read
            conts: vec![(Frame::Node(prog.empty), BASE)],
            cont_ids: HashMap::new(),
            memo: HashMap::new(),
            base_memo: HashMap::new(),
            cont_reads: HashMap::new(),
            solved: HashMap::new(),
            evals: 0,
        }
    }

    pub fn run(&mut self, frame: Frame, s: &State) -> Result<Outcome, Error> {
        self.eval(frame, BASE, s)
    }

    fn push(&mut self, f: Frame, parent: ContId) -> ContId {
        if let Some(id) = self.cont_ids.get(&(f, parent)) {
            return *id;
        }
        let id = self.conts.len() as ContId;
        self.conts.push((f, parent));
        self.cont_ids.insert((f, parent), id);
        id
    }

    fn eval(&mut self, frame: Frame, k: ContId, s: &State) -> Result<Outcome, Error> {
        if let Some(o) = self.memo.get(&(frame, k)).and_then(|m| m.get(s)) {
            return Ok(o.clone());
        }
        self.evals += 1;
        if self.evals > self.cfg.eval_budget {
            return Err(Error::BudgetExceeded(self.cfg.eval_budget));
        }
        let o = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || self.step(frame, k, s))?;
        self.memo.entry((frame, k)).or_default().insert(s.clone(), o.clone());
        Ok(o)
    }

    fn apply(&mut self, k: ContId, s: &State) -> Result<Outcome, Error> {
        if k != BASE {
            let (f, parent) = self.conts[k as usize];
            return self.eval(f, parent, s);
        }
        if let Some(o) = self.base_memo.get(s) {
            return Ok(o.clone());
        }
        let o = match &mut self.base {
            Base::Rt(f) => Outcome::exact(RtEnv::new(s).eval(f)?),
            Base::Fn(f) => f(s)?,
        };
        self.base_memo.insert(s.clone(), o.clone());
        Ok(o)
    }

    fn step(&mut self, frame: Frame, k: ContId, s: &State) -> Result<Outcome, Error> {
        let prog = self.prog;
        let cfg = self.cfg;
        match frame {
            Frame::Node(id) => match prog.node(id) {
                Node::Empty => self.apply(k, s),
                Node::Skip => Ok(self.apply(k, s)?.plus_one()),
                Node::Halt => Ok(Outcome::zero()),
                Node::Assign(t, d) => {
                    let mut acc = Outcome::exact(XReal::one());
                    for (next, p) in assign_outcomes(t, d, s)? {
                        let o = self.apply(k, &next)?;
                        acc.add_scaled(&o, &p);
                    }
                    Ok(acc)
                }
                Node::AssignArray(a, es) => {
                    let next = assign_array(a, es, s)?;
                    Ok(self.apply(k, &next)?.plus_one())
                }
                Node::Seq(a, b) => {
                    let k2 = self.push(Frame::Node(*b), k);
                    self.eval(Frame::Node(*a), k2, s)
                }
                Node::Choice(a, b) => {
                    let l = self.eval(Frame::Node(*a), k, s)?;
                    let r = self.eval(Frame::Node(*b), k, s)?;
                    Ok(Outcome {
                        value: l.value.max(r.value),
                        prov: l.prov.merge(r.prov),
                    })
                }
                Node::If(g, a, b) => {
                    let (pt, pf) = guard_probs(g, s)?;
                    let mut acc = Outcome::exact(cfg.if_tick());
                    if !pt.is_zero() {
                        let o = self.eval(Frame::Node(*a), k, s)?;
                        acc.add_scaled(&o, &pt);
                    }
                    if !pf.is_zero() {
                        let o = self.eval(Frame::Node(*b), k, s)?;
                        acc.add_scaled(&o, &pf);
                    }
                    Ok(acc)
                }
                Node::While { ann, .. } => {
                    if cfg.use_annotations {
                        if let Some(ann) = ann {
                            return self.annotated(ann.direction, &ann.bound, k, s);
                        }
                    }
                    if cfg.loops == LoopPolicy::Solve {
                        if let Some(o) = self.try_solve(id, k, s)? {
                            return Ok(o);
                        }
                    }
                    self.eval(
                        Frame::Unroll {
                            node: id,
                            fuel: self.depth,
                        },
                        k,
                        s,
                    )
                }
                Node::Bounded { bound, .. } => self.eval(Frame::Unroll { node: id, fuel: *bound }, k, s),
            },
            Frame::Unroll { node, fuel } => {
                let (guard, body, auto) = match prog.node(node) {
                    Node::While { guard, body, .. } => (guard, *body, true),
                    Node::Bounded { guard, body, .. } => (guard, *body, false),
                    _ => unreachable!("unroll frame on a non-loop"),
                };
                if fuel == 0 {
                    return Ok(Outcome {
                        value: XReal::zero(),
                        prov: Prov {
                            cutoff: auto,
                            ..Prov::default()
                        },
                    });
                }
                let (pt, pf) = guard_probs(guard, s)?;
                let mut acc = Outcome::exact(XReal::one());
                if !pt.is_zero() {
                    let k2 = self.push(Frame::Unroll { node, fuel: fuel - 1 }, k);
                    let o = self.eval(Frame::Node(body), k2, s)?;
                    acc.add_scaled(&o, &pt);
                }
                if !pf.is_zero() {
                    let o = self.apply(k, s)?;
                    acc.add_scaled(&o, &pf);
                }
                Ok(acc)
            }
        }
    }

    fn annotated(&mut self, dir: Direction, bound: &RtExpr, k: ContId, s: &State) -> Result<Outcome, Error> {
        let mut prov = match dir {
            Direction::Upper => Prov {
                upper: true,
                ..Prov::default()
            },
            Direction::Lower => Prov {
                lower: true,
                ..Prov::default()
            },
            Direction::Exact => Prov::default(),
        };
        prov.annotated = true;
        let mut seen = Prov::default();
        let value = {
            let mut cb = |t: &State| -> Result<XReal, Error> {
                let o = self.apply(k, t)?;
                seen = seen.merge(o.prov);
                Ok(o.value)
            };
            RtEnv::new(s).with_cont(&mut cb).eval(bound)?
        };
        Ok(Outcome {
            value,
            prov: prov.merge(seen),
        })
    }

    /// Names the continuation `k` may read; `None` if unknown.
    fn reads_of_cont(&mut self, k: ContId) -> Option<BTreeSet<String>> {
        if let Some(r) = self.cont_reads.get(&k) {
            return r.clone();
        }
        let r = if k == BASE {
            match &self.base {
                Base::Rt(f) if !f.uses_cont() => {
                    let mut out = BTreeSet::new();
                    f.free_vars(&mut out);
                    Some(out)
                }
                _ => None,
            }
        } else {
            let (f, parent) = self.conts[k as usize];
            let node = match f {
                Frame::Node(id) | Frame::Unroll { node: id, .. } => id,
            };
            self.reads_of_cont(parent).map(|mut out| {
                out.extend(self.prog.info(node).reads.iter().cloned());
                out
            })
        };
        self.cont_reads.insert(k, r.clone());
        r
    }

    /// Names the loop's value at `K` depends on: guard, continuation, and
    /// body reads that flow into them.
    fn live_set(&mut self, id: NodeId, k: ContId) -> Option<BTreeSet<String>> {
        let (guard, body) = match self.prog.node(id) {
            Node::While { guard, body, .. } => (guard, *body),
            _ => return None,
        };
        let mut live = self.reads_of_cont(k)?;
        guard.free_vars(&mut live);
        loop {
            let before = live.len();
            close_live(self.prog, body, &mut live);
            if live.len() == before {
                return Some(live);
            }
        }
    }

    /// Exact value of a loop with a loop-free, choice-free body by solving
    /// the linear system over its (projected) reachable head states.
    fn try_solve(&mut self, id: NodeId, k: ContId, s: &State) -> Result<Option<Outcome>, Error> {
        let prog = self.prog;
        let cfg = self.cfg;
        let (guard, body) = match prog.node(id) {
            Node::While { guard, body, .. } => (guard, *body),
            _ => return Ok(None),
        };
        let info = prog.info(body);
        if !info.loop_free || !info.choice_free {
            return Ok(None);
        }
        if !self.solved.contains_key(&(id, k)) {
            let live = self.live_set(id, k);
            self.solved.insert(
                (id, k),
                SolvedLoop {
                    live,
                    values: HashMap::new(),
                    failed: false,
                },
            );
        }
        let entry = &self.solved[&(id, k)];
        if entry.failed {
            return Ok(None);
        }
        let live = entry.live.clone();
        let project = |t: &State| match &live {
            Some(l) => t.restrict(l),
            None => t.clone(),
        };
        let key = project(s);
        if let Some(o) = entry.values.get(&key) {
            return Ok(Some(o.clone()));
        }

        let mut reps = vec![s.clone()];
        let mut index: HashMap<State, usize> = HashMap::from([(key.clone(), 0)]);
        let mut rows = Vec::new();
        let mut prov = Prov::default();
        let mut i = 0;
        while i < reps.len() {
            let rep = reps[i].clone();
            let (pt, pf) = guard_probs(guard, &rep)?;
            let mut row = Row {
                constant: XReal::one(),
                coeffs: Vec::new(),
            };
            if !pf.is_zero() {
                let o = self.apply(k, &rep)?;
                prov = prov.merge(o.prov);
                row.constant = row.constant + o.value.scale(&pf);
            }
            if !pt.is_zero() {
                let (ticks, outs) = body_outcomes(prog, body, &rep, cfg)?;
                row.constant = row.constant + XReal::Finite(&pt * ticks);
                for (next, q) in outs {
                    let nk = project(&next);
                    let j = match index.get(&nk) {
                        Some(j) => *j,
                        None => {
                            if reps.len() >= cfg.solve_cap {
                                self.solved.get_mut(&(id, k)).unwrap().failed = true;
                                return Ok(None);
                            }
                            index.insert(nk, reps.len());
                            reps.push(next);
                            reps.len() - 1
                        }
                    };
                    row.coeffs.push((j, &pt * q));
                }
            }
            rows.push(row);
            i += 1;
        }
        let values = solve_lfp(&rows)?;
        let entry = self.solved.get_mut(&(id, k)).unwrap();
        for (st, j) in index {
            entry.values.insert(
                st,
                Outcome {
                    value: values[j].clone(),
                    prov,
                },
            );
        }
        Ok(Some(entry.values[&key].clone()))
    }
}

fn close_live(prog: &Compiled, id: NodeId, live: &mut BTreeSet<String>) {
    match prog.node(id) {
        Node::Assign(t, d) => {
            if live.contains(t.name()) {
                d.free_vars(live);
                if let crate::lang::Target::Cell(_, i) = t {
                    i.free_vars(live);
                }
            }
        }
        Node::AssignArray(a, es) => {
            if live.contains(a) {
                es.iter().for_each(|e| e.free_vars(live));
            }
        }
        Node::Seq(a, b) | Node::Choice(a, b) => {
            close_live(prog, *a, live);
            close_live(prog, *b, live);
        }
        Node::If(g, a, b) => {
            g.free_vars(live);
            close_live(prog, *a, live);
            close_live(prog, *b, live);
        }
        Node::While { guard, body, .. } | Node::Bounded { guard, body, .. } => {
            guard.free_vars(live);
            close_live(prog, *body, live);
        }
        Node::Empty | Node::Skip | Node::Halt => {}
    }
}

impl Outcome {
    pub fn zero() -> Self {
        Outcome::exact(XReal::zero())
    }

    pub fn exact(value: XReal) -> Self {
        Outcome {
            value,
            prov: Prov::default(),
        }
    }

    fn plus_one(mut self) -> Self {
        self.value = self.value + XReal::one();
        self
    }

    pub(crate) fn add_scaled(&mut self, o: &Outcome, p: &Rational) {
        self.value = &self.value + &o.value.scale(p);
        self.prov = self.prov.merge(o.prov);
    }
}
