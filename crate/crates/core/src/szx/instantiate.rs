// SPDX-License-Identifier: Apache-2.0

//! Turning a family diagram into a concrete diagram for given parameters.
//!
//! A box over a list is expanded by instantiating its body once per element
//! and merging the copies node by node: multiplicities add up, phase vectors
//! concatenate and permutations become block diagonal. Wires of merged nodes
//! are ordered instance by instance. A gather needs its parts grouped
//! instead, so each merged gather gets a permutation on its combined port.

use std::fmt;

use crate::nat::{NatEnv, NatError, ParamVal};

use super::graph::{Concrete, Diagram, Edge, Family, FamilyBox, NodeKind, PortRef};
use super::perm::{build_sigma_parts, direct_sum};
use super::phase::PhaseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstantiateError {
    Nat(NatError),
    Phase(PhaseError),
    /// Two copies of a box body came out with different shapes.
    NonUniform(String),
}

impl fmt::Display for InstantiateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstantiateError::Nat(e) => write!(f, "{e}"),
            InstantiateError::Phase(e) => write!(f, "{e}"),
            InstantiateError::NonUniform(m) => write!(f, "box instances differ: {m}"),
        }
    }
}

impl std::error::Error for InstantiateError {}

impl From<NatError> for InstantiateError {
    fn from(e: NatError) -> Self {
        InstantiateError::Nat(e)
    }
}

impl From<PhaseError> for InstantiateError {
    fn from(e: PhaseError) -> Self {
        InstantiateError::Phase(e)
    }
}

type Result<T> = std::result::Result<T, InstantiateError>;

pub fn instantiate(d: &Diagram<Family>, env: &NatEnv) -> Result<Diagram<Concrete>> {
    let mut out = Diagram::<Concrete>::new(Vec::new());
    // Where each (family node, port) ended up.
    let mut placed: Vec<Vec<PortRef>> = Vec::with_capacity(d.nodes.len());
    for kind in &d.nodes {
        let ports = kind.ports();
        match kind {
            NodeKind::Box(b) => {
                let merged = instantiate_box(b, env)?;
                let off = out.nodes.len();
                let boundary: Vec<usize> = merged
                    .inputs
                    .iter()
                    .chain(&merged.outputs)
                    .map(|&n| n + off)
                    .collect();
                out.nodes.extend(merged.nodes);
                out.edges.extend(merged.edges.into_iter().map(|e| Edge {
                    a: (e.a.0 + off, e.a.1),
                    b: (e.b.0 + off, e.b.1),
                    mult: e.mult,
                }));
                for &n in &boundary {
                    out.nodes[n] = NodeKind::Wire;
                }
                placed.push(boundary.into_iter().map(|n| (n, 1)).collect());
            }
            other => {
                let id = out.add_node(concrete_node(other, env)?);
                placed.push((0..ports).map(|p| (id, p)).collect());
            }
        }
    }
    for e in &d.edges {
        let mult = e.mult.eval(env)?;
        out.connect(placed[e.a.0][e.a.1], placed[e.b.0][e.b.1], mult);
    }
    out.inputs = d.inputs.iter().map(|&i| placed[i][0].0).collect();
    out.outputs = d.outputs.iter().map(|&i| placed[i][0].0).collect();
    out.splice_wires();
    Ok(out)
}

fn concrete_node(kind: &NodeKind<Family>, env: &NatEnv) -> Result<NodeKind<Concrete>> {
    Ok(match kind {
        NodeKind::Input { mult } => NodeKind::Input {
            mult: mult.eval(env)?,
        },
        NodeKind::Output { mult } => NodeKind::Output {
            mult: mult.eval(env)?,
        },
        NodeKind::Spider {
            color,
            phases,
            legs,
        } => NodeKind::Spider {
            color: *color,
            phases: phases.eval(env)?,
            legs: *legs,
        },
        NodeKind::Hadamard => NodeKind::Hadamard,
        NodeKind::Ground => NodeKind::Ground,
        NodeKind::Cup => NodeKind::Cup,
        NodeKind::Cap => NodeKind::Cap,
        NodeKind::Swap => NodeKind::Swap,
        NodeKind::Wire => NodeKind::Wire,
        NodeKind::Gather { parts, split } => NodeKind::Gather {
            parts: parts.iter().map(|p| p.eval(env)).collect::<std::result::Result<_, _>>()?,
            split: *split,
        },
        NodeKind::Perm(p) => NodeKind::Perm(p.eval(env)?),
        NodeKind::Box(_) => unreachable!("boxes are expanded by the caller"),
    })
}

/// Expands a box into a concrete diagram whose boundary is the box's ports.
pub fn instantiate_box(b: &FamilyBox, env: &NatEnv) -> Result<Diagram<Concrete>> {
    let list = b.list.eval(env)?;
    let mut inner = env.clone();
    if list.is_empty() {
        inner.insert(b.index.clone(), ParamVal::Nat(0));
        let skeleton = instantiate(&b.body, &inner)?;
        return Ok(merge_instances(&[], Some(&skeleton)));
    }
    let mut copies = Vec::with_capacity(list.len());
    for v in list {
        inner.insert(b.index.clone(), ParamVal::Nat(v));
        copies.push(instantiate(&b.body, &inner)?);
    }
    check_uniform(&copies)?;
    Ok(merge_instances(&copies, None))
}

fn check_uniform(copies: &[Diagram<Concrete>]) -> Result<()> {
    let first = &copies[0];
    for (i, c) in copies.iter().enumerate().skip(1) {
        if c.nodes.len() != first.nodes.len() || c.edges.len() != first.edges.len() {
            return Err(InstantiateError::NonUniform(format!(
                "copy {i} has {} nodes and {} edges, copy 0 has {} and {}",
                c.nodes.len(),
                c.edges.len(),
                first.nodes.len(),
                first.edges.len()
            )));
        }
        for (j, (x, y)) in c.nodes.iter().zip(&first.nodes).enumerate() {
            if x.name() != y.name() || x.ports() != y.ports() {
                return Err(InstantiateError::NonUniform(format!(
                    "node {j} is a {} in copy {i} and a {} in copy 0",
                    x.name(),
                    y.name()
                )));
            }
        }
        for (j, (x, y)) in c.edges.iter().zip(&first.edges).enumerate() {
            if x.a != y.a || x.b != y.b {
                return Err(InstantiateError::NonUniform(format!("edge {j} is wired differently")));
            }
        }
    }
    Ok(())
}

/// Node-wise merge of structurally equal copies. With no copies the
/// `skeleton` supplies the shape and every width is zero.
fn merge_instances(
    copies: &[Diagram<Concrete>],
    skeleton: Option<&Diagram<Concrete>>,
) -> Diagram<Concrete> {
    let shape = copies.first().or(skeleton).expect("copies or a skeleton");
    let mut out = Diagram::<Concrete>::new(Vec::new());
    let mut gathers = Vec::new();
    for (id, kind) in shape.nodes.iter().enumerate() {
        let all = || copies.iter().map(move |c| &c.nodes[id]);
        let merged = match kind {
            NodeKind::Input { .. } | NodeKind::Output { .. } => {
                let mult = all()
                    .map(|k| match k {
                        NodeKind::Input { mult } | NodeKind::Output { mult } => *mult,
                        _ => unreachable!(),
                    })
                    .sum();
                if matches!(kind, NodeKind::Input { .. }) {
                    NodeKind::Input { mult }
                } else {
                    NodeKind::Output { mult }
                }
            }
            NodeKind::Spider { color, legs, .. } => NodeKind::Spider {
                color: *color,
                legs: *legs,
                phases: all()
                    .flat_map(|k| match k {
                        NodeKind::Spider { phases, .. } => phases.iter().copied(),
                        _ => unreachable!(),
                    })
                    .collect(),
            },
            NodeKind::Gather { parts, split } => {
                let counts: Vec<Vec<u64>> = all()
                    .map(|k| match k {
                        NodeKind::Gather { parts, .. } => parts.clone(),
                        _ => unreachable!(),
                    })
                    .collect();
                let summed = (0..parts.len())
                    .map(|j| counts.iter().map(|c| c[j]).sum())
                    .collect();
                gathers.push((id, build_sigma_parts(&counts)));
                NodeKind::Gather {
                    parts: summed,
                    split: *split,
                }
            }
            NodeKind::Perm(_) => {
                let blocks: Vec<Vec<usize>> = all()
                    .map(|k| match k {
                        NodeKind::Perm(p) => p.clone(),
                        _ => unreachable!(),
                    })
                    .collect();
                NodeKind::Perm(direct_sum(&blocks))
            }
            other => other.clone(),
        };
        out.nodes.push(merged);
    }
    for (j, e) in shape.edges.iter().enumerate() {
        out.edges.push(Edge {
            a: e.a,
            b: e.b,
            mult: copies.iter().map(|c| c.edges[j].mult).sum(),
        });
    }
    out.inputs = shape.inputs.clone();
    out.outputs = shape.outputs.clone();
    // Interleaved wires arrive on port 0 of the companion, grouped wires
    // leave on port 1 towards the gather.
    let index = out.port_index();
    for (g, sigma) in gathers {
        let total = sigma.len() as u64;
        let p = out.add_node(NodeKind::Perm(sigma));
        if let Some(&e) = index.get(&(g, 0)) {
            let edge = &mut out.edges[e];
            if edge.a == (g, 0) {
                edge.a = (p, 0);
            } else {
                edge.b = (p, 0);
            }
        }
        out.connect((g, 0), (p, 1), total);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nat::{NatExpr, NatListExpr};
    use crate::szx::graph::NodeKind;

    /// A box whose body gathers two inputs of widths `1` and `k`.
    fn gather_box() -> FamilyBox {
        let mut body = Diagram::<Family>::new(vec![]);
        let k = NatExpr::var("k");
        let a = body.add_input(NatExpr::Const(1));
        let b = body.add_input(k.clone());
        let g = body.add_node(NodeKind::Gather {
            parts: vec![NatExpr::Const(1), k.clone()],
            split: false,
        });
        let o = body.add_output(NatExpr::add(NatExpr::Const(1), k.clone()));
        body.connect(a, (g, 1), NatExpr::Const(1));
        body.connect(b, (g, 2), k.clone());
        body.connect((g, 0), o, NatExpr::add(NatExpr::Const(1), k));
        FamilyBox {
            index: "k".into(),
            list: NatListExpr::Var("xs".into()),
            body,
        }
    }

    fn env(xs: Vec<u64>) -> NatEnv {
        let mut e = NatEnv::new();
        e.insert("xs".into(), ParamVal::List(xs));
        e
    }

    #[test]
    fn merged_gather_gets_sigma() {
        let d = instantiate_box(&gather_box(), &env(vec![1, 1])).unwrap();
        d.validate().unwrap();
        let perms: Vec<&Vec<usize>> = d
            .nodes
            .iter()
            .filter_map(|k| match k {
                NodeKind::Perm(p) => Some(p),
                _ => None,
            })
            .collect();
        assert_eq!(perms, vec![&vec![0, 2, 1, 3]]);
        assert_eq!(d.input_mults(), vec![2, 2]);
    }

    #[test]
    fn empty_list_keeps_the_shape() {
        let empty = instantiate_box(&gather_box(), &env(vec![])).unwrap();
        let one = instantiate_box(&gather_box(), &env(vec![3])).unwrap();
        empty.validate().unwrap();
        assert_eq!(empty.node_count(), one.node_count());
        assert!(empty.edges.iter().all(|e| e.mult == 0));
    }

    #[test]
    fn boxes_splice_into_parents() {
        let b = gather_box();
        let mut d = Diagram::<Family>::new(vec!["xs".into()]);
        let ports = b.body.inputs.len() + b.body.outputs.len();
        let mults: Vec<NatExpr> = (0..ports).map(|p| b.port_mult(p)).collect();
        let id = d.add_node(NodeKind::Box(b));
        for (p, m) in mults.iter().enumerate().take(2) {
            let i = d.add_input(m.clone());
            d.connect(i, (id, p), m.clone());
        }
        let o = d.add_output(mults[2].clone());
        d.connect((id, 2), o, mults[2].clone());
        let c = instantiate(&d, &env(vec![0, 2])).unwrap();
        c.validate().unwrap();
        assert_eq!(c.input_mults(), vec![2, 2]);
        assert_eq!(c.output_mults(), vec![4]);
    }
}
