//! Programs flattened into an arena so evaluator frames are small `Copy` ids.

use std::collections::BTreeSet;

use crate::lang::{Annotation, DistExpr, Expr, Program, Target};

pub type NodeId = u32;

#[derive(Clone, Debug)]
pub enum Node {
    Empty,
    Skip,
    Halt,
    Assign(Target, DistExpr),
    AssignArray(String, Vec<Expr>),
    Seq(NodeId, NodeId),
    Choice(NodeId, NodeId),
    If(DistExpr, NodeId, NodeId),
    While {
        guard: DistExpr,
        body: NodeId,
        ann: Option<Annotation>,
    },
    Bounded {
        bound: u32,
        guard: DistExpr,
        body: NodeId,
    },
}

#[derive(Clone, Debug, Default)]
pub struct NodeInfo {
    /// No `while` or bounded loop in the subtree.
    pub loop_free: bool,
    pub choice_free: bool,
    /// Names whose values the subtree may depend on. A cell write counts as
    /// a read of its array.
    pub reads: BTreeSet<String>,
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub nodes: Vec<Node>,
    pub info: Vec<NodeInfo>,
    /// Original subprogram for each node, for labels.
    pub source: Vec<Program>,
    pub root: NodeId,
    pub empty: NodeId,
}

impl Compiled {
    pub fn new(p: &Program) -> Compiled {
        let mut c = Compiled {
            nodes: Vec::new(),
            info: Vec::new(),
            source: Vec::new(),
            root: 0,
            empty: 0,
        };
        c.empty = c.push(Node::Empty, Program::Empty);
        c.root = c.add(p);
        c
    }

    fn push(&mut self, n: Node, src: Program) -> NodeId {
        let id = self.nodes.len() as NodeId;
        let info = self.compute_info(&n);
        self.nodes.push(n);
        self.info.push(info);
        self.source.push(src);
        id
    }

    fn add(&mut self, p: &Program) -> NodeId {
        let node = match p {
            Program::Empty => Node::Empty,
            Program::Skip => Node::Skip,
            Program::Halt => Node::Halt,
            Program::Assign(t, d) => Node::Assign(t.clone(), d.clone()),
            Program::AssignArray(a, es) => Node::AssignArray(a.clone(), es.clone()),
            Program::Seq(a, b) => {
                let (a, b) = (self.add(a), self.add(b));
                Node::Seq(a, b)
            }
            Program::Choice(a, b) => {
                let (a, b) = (self.add(a), self.add(b));
                Node::Choice(a, b)
            }
            Program::If(g, a, b) => {
                let (a, b) = (self.add(a), self.add(b));
                Node::If(g.clone(), a, b)
            }
            Program::While(g, body, ann) => Node::While {
                guard: g.clone(),
                body: self.add(body),
                ann: ann.clone(),
            },
            Program::Bounded(k, g, body) => Node::Bounded {
                bound: *k,
                guard: g.clone(),
                body: self.add(body),
            },
        };
        self.push(node, p.clone())
    }

    fn compute_info(&self, n: &Node) -> NodeInfo {
        let mut reads = BTreeSet::new();
        let kid = |id: &NodeId| &self.info[*id as usize];
        let (loop_free, choice_free) = match n {
            Node::Empty | Node::Skip | Node::Halt => (true, true),
            Node::Assign(t, d) => {
                if let Target::Cell(a, i) = t {
                    reads.insert(a.clone());
                    i.free_vars(&mut reads);
                }
                d.free_vars(&mut reads);
                (true, true)
            }
            Node::AssignArray(_, es) => {
                es.iter().for_each(|e| e.free_vars(&mut reads));
                (true, true)
            }
            Node::Seq(a, b) | Node::Choice(a, b) | Node::If(_, a, b) => {
                if let Node::If(g, ..) = n {
                    g.free_vars(&mut reads);
                }
                reads.extend(kid(a).reads.iter().cloned());
                reads.extend(kid(b).reads.iter().cloned());
                (
                    kid(a).loop_free && kid(b).loop_free,
                    !matches!(n, Node::Choice(..)) && kid(a).choice_free && kid(b).choice_free,
                )
            }
            Node::While { guard, body, ann } => {
                guard.free_vars(&mut reads);
                reads.extend(kid(body).reads.iter().cloned());
                if let Some(a) = ann {
                    a.bound.free_vars(&mut reads);
                }
                (false, kid(body).choice_free)
            }
            Node::Bounded { guard, body, .. } => {
                guard.free_vars(&mut reads);
                reads.extend(kid(body).reads.iter().cloned());
                (false, kid(body).choice_free)
            }
        };
        NodeInfo {
            loop_free,
            choice_free,
            reads,
        }
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn info(&self, id: NodeId) -> &NodeInfo {
        &self.info[id as usize]
    }

    pub fn source(&self, id: NodeId) -> &Program {
        &self.source[id as usize]
    }
}
