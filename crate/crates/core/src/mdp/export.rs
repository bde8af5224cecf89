//! Graphviz and JSON renderings of an MDP.

use std::fmt::Write;

use serde_json::{json, Value as Json};

use super::Mdp;
use crate::kernel::rational_string;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn to_dot(m: &Mdp) -> String {
    let mut out = String::from("digraph mdp {\n  rankdir=TB;\n  node [shape=box, fontname=\"monospace\"];\n");
    for (i, n) in m.nodes.iter().enumerate() {
        let style = if i == m.init {
            ", style=bold"
        } else if i == m.sink {
            ", shape=doublecircle"
        } else {
            ""
        };
        let _ = writeln!(out, "  n{i} [label=\"{}\\nrew {}\"{style}];", escape(&m.label(i)), n.reward);
        for (a, d) in &n.actions {
            for (j, p) in d {
                let _ = writeln!(out, "  n{i} -> n{j} [label=\"{a} {}\"];", rational_string(p));
            }
        }
    }
    out.push_str("}\n");
    out
}

pub fn to_json(m: &Mdp) -> Json {
    let nodes: Vec<Json> = m
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let actions: Vec<Json> = n
                .actions
                .iter()
                .map(|(a, d)| {
                    json!({
                        "action": a.to_string(),
                        "successors": d.iter().map(|(j, p)| json!({"node": j, "p": rational_string(p)})).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json!({"id": i, "label": m.label(i), "reward": n.reward.to_string(), "actions": actions})
        })
        .collect();
    json!({"init": m.init, "sink": m.sink, "nodes": nodes})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::State;
    use crate::lang::{parse_program, RtExpr};
    use crate::mdp::build_mdp;

    #[test]
    fn dot_lists_every_edge() {
        let p = parse_program("x :~ 1/2*<0> + 1/2*<1>").unwrap();
        let m = build_mdp(&p, &RtExpr::int(0), &State::new(), 100).unwrap();
        let dot = to_dot(&m);
        assert_eq!(dot.matches("->").count(), m.transitions());
        let j = to_json(&m);
        assert_eq!(j["nodes"].as_array().unwrap().len(), m.len());
    }
}
