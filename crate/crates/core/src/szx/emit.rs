// SPDX-License-Identifier: Apache-2.0

//! JSON and Graphviz renderings of diagrams.

use serde_json::{json, Map, Value};

use super::graph::{Concrete, Diagram, Family, NodeKind, Stage};

/// Per-stage rendering of sizes, phases, permutations and boxes.
pub trait EmitStage: Stage {
    fn mult_json(m: &Self::Mult) -> Value;
    fn phases_json(p: &Self::Phases) -> Value;
    fn perm_json(p: &Self::Perm) -> Value;
    fn sub_json(s: &Self::Sub) -> Value;
    fn label(kind: &NodeKind<Self>) -> String;
}

impl EmitStage for Family {
    fn mult_json(m: &crate::nat::NatExpr) -> Value {
        match m.as_const() {
            Some(c) => json!(c),
            None => json!(m.to_string()),
        }
    }

    fn phases_json(p: &super::phase::PhaseVec) -> Value {
        json!(p.to_string())
    }

    fn perm_json(p: &super::perm::PermSpec) -> Value {
        match p {
            super::perm::PermSpec::Explicit(v) => json!(v),
            other => json!(other.to_string()),
        }
    }

    fn sub_json(s: &super::graph::FamilyBox) -> Value {
        json!({
            "index": s.index,
            "list": s.list.to_string(),
            "body": to_json(&s.body),
        })
    }

    fn label(kind: &NodeKind<Self>) -> String {
        match kind {
            NodeKind::Spider { phases, .. } => format!("{} {}", kind.name(), phases),
            NodeKind::Box(b) => format!("box {} in {}", b.index, b.list),
            NodeKind::Perm(p) => format!("perm {p}"),
            other => other.name().to_string(),
        }
    }
}

impl EmitStage for Concrete {
    fn mult_json(m: &u64) -> Value {
        json!(m)
    }

    fn phases_json(p: &Vec<super::phase::Phase>) -> Value {
        Value::Array(p.iter().map(|x| json!(x.to_string())).collect())
    }

    fn perm_json(p: &Vec<usize>) -> Value {
        json!(p)
    }

    fn sub_json(s: &std::convert::Infallible) -> Value {
        match *s {}
    }

    fn label(kind: &NodeKind<Self>) -> String {
        match kind {
            NodeKind::Spider { phases, .. } if phases.iter().any(|p| !p.is_zero()) => {
                let ps: Vec<String> = phases.iter().map(|p| p.to_string()).collect();
                format!("{} [{}]", kind.name(), ps.join(","))
            }
            NodeKind::Perm(p) => format!("perm {p:?}"),
            other => other.name().to_string(),
        }
    }
}

/// JSON with keys in sorted order.
pub fn to_json<S: EmitStage>(d: &Diagram<S>) -> Value {
    let nodes: Vec<Value> = d
        .nodes
        .iter()
        .enumerate()
        .map(|(id, kind)| {
            let mut obj = Map::new();
            obj.insert("id".into(), json!(id));
            obj.insert("kind".into(), json!(kind.name()));
            let args = match kind {
                NodeKind::Input { mult } | NodeKind::Output { mult } => {
                    json!({ "mult": S::mult_json(mult) })
                }
                NodeKind::Spider { phases, legs, .. } => {
                    json!({ "legs": legs, "phases": S::phases_json(phases) })
                }
                NodeKind::Gather { parts, .. } => {
                    json!({ "parts": parts.iter().map(S::mult_json).collect::<Vec<_>>() })
                }
                NodeKind::Perm(p) => json!({ "perm": S::perm_json(p) }),
                NodeKind::Box(b) => S::sub_json(b),
                _ => json!({}),
            };
            obj.insert("args".into(), args);
            Value::Object(obj)
        })
        .collect();
    let edges: Vec<Value> = d
        .edges
        .iter()
        .map(|e| {
            json!({
                "src": [e.a.0, e.a.1],
                "dst": [e.b.0, e.b.1],
                "mult": S::mult_json(&e.mult),
            })
        })
        .collect();
    json!({
        "params": d.params,
        "nodes": nodes,
        "edges": edges,
        "inputs": d.inputs,
        "outputs": d.outputs,
    })
}

pub fn to_json_string<S: EmitStage>(d: &Diagram<S>) -> String {
    serde_json::to_string_pretty(&to_json(d)).expect("diagram JSON is serializable")
}

pub fn to_dot<S: EmitStage>(d: &Diagram<S>) -> String {
    let mut out = String::from("graph szx {\n  rankdir=LR;\n");
    for (id, kind) in d.nodes.iter().enumerate() {
        let shape = match kind {
            NodeKind::Spider { .. } => "circle",
            NodeKind::Input { .. } | NodeKind::Output { .. } => "plaintext",
            NodeKind::Hadamard | NodeKind::Box(_) => "box",
            NodeKind::Gather { .. } => "triangle",
            _ => "ellipse",
        };
        let color = match kind {
            NodeKind::Spider {
                color: super::graph::Color::Z,
                ..
            } => ", style=filled, fillcolor=palegreen",
            NodeKind::Spider { .. } => ", style=filled, fillcolor=salmon",
            NodeKind::Hadamard => ", style=filled, fillcolor=yellow",
            _ => "",
        };
        let label = match kind {
            NodeKind::Input { .. } => format!("in{}", d.inputs.iter().position(|&i| i == id).unwrap_or(0)),
            NodeKind::Output { .. } => format!("out{}", d.outputs.iter().position(|&i| i == id).unwrap_or(0)),
            other => S::label(other),
        };
        out.push_str(&format!(
            "  n{id} [label=\"{}\", shape={shape}{color}];\n",
            label.replace('"', "\\\"")
        ));
    }
    for e in &d.edges {
        let m = S::mult_json(&e.mult);
        let m = match m {
            Value::String(s) => s,
            other => other.to_string(),
        };
        out.push_str(&format!(
            "  n{} -- n{} [taillabel=\"{}\", headlabel=\"{}\", label=\"{}\"];\n",
            e.a.0,
            e.b.0,
            e.a.1,
            e.b.1,
            m.replace('"', "\\\"")
        ));
    }
    out.push_str("}\n");
    out
}
