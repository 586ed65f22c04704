// SPDX-License-Identifier: Apache-2.0

//! Scalable ZX diagrams as port graphs.
//!
//! Every node has numbered ports and every port carries one edge. An edge
//! of multiplicity `k` stands for `k` parallel wires. Edges are undirected:
//! a cap is an edge joining two ports that both face the same way.

use std::collections::HashMap;
use std::convert::Infallible;
use std::fmt;

use crate::nat::{NatExpr, NatListExpr};
use crate::typecheck::{nat_equal, Facts};

use super::perm::PermSpec;
use super::phase::{Phase, PhaseVec};

pub type NodeId = usize;
/// `(node, port)`.
pub type PortRef = (NodeId, usize);

/// What varies between symbolic families and concrete instances.
pub trait Stage: Clone + fmt::Debug + PartialEq {
    type Mult: Clone + fmt::Debug + PartialEq;
    type Phases: Clone + fmt::Debug + PartialEq;
    type Perm: Clone + fmt::Debug + PartialEq;
    type Sub: Clone + fmt::Debug + PartialEq;

    fn mult_eq(a: &Self::Mult, b: &Self::Mult) -> bool;
    fn sub_ports(sub: &Self::Sub) -> usize;
    fn sub_node_count(sub: &Self::Sub) -> usize;
}

/// Diagrams whose sizes are expressions over parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Family;

/// Diagrams with every size evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Concrete;

/// A family diagram replicated once per element of `list`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyBox {
    pub index: String,
    pub list: NatListExpr,
    pub body: Diagram<Family>,
}

impl FamilyBox {
    /// Width of boundary `port` summed over the list.
    pub fn port_mult(&self, port: usize) -> NatExpr {
        let body_node = if port < self.body.inputs.len() {
            self.body.inputs[port]
        } else {
            self.body.outputs[port - self.body.inputs.len()]
        };
        let w = match &self.body.nodes[body_node] {
            NodeKind::Input { mult } | NodeKind::Output { mult } => mult.clone(),
            _ => unreachable!("boundary list points at an interior node"),
        };
        NatExpr::sum(self.index.clone(), self.list.clone(), w)
    }
}

impl Stage for Family {
    type Mult = NatExpr;
    type Phases = PhaseVec;
    type Perm = PermSpec;
    type Sub = FamilyBox;

    fn mult_eq(a: &NatExpr, b: &NatExpr) -> bool {
        nat_equal(a, b, &Facts::new())
    }

    fn sub_ports(sub: &FamilyBox) -> usize {
        sub.body.inputs.len() + sub.body.outputs.len()
    }

    fn sub_node_count(sub: &FamilyBox) -> usize {
        1 + sub.body.node_count()
    }
}

impl Stage for Concrete {
    type Mult = u64;
    type Phases = Vec<Phase>;
    type Perm = Vec<usize>;
    type Sub = Infallible;

    fn mult_eq(a: &u64, b: &u64) -> bool {
        a == b
    }

    fn sub_ports(sub: &Infallible) -> usize {
        match *sub {}
    }

    fn sub_node_count(sub: &Infallible) -> usize {
        match *sub {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Color {
    Z,
    X,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind<S: Stage> {
    Input { mult: S::Mult },
    Output { mult: S::Mult },
    /// Scalable spider: every leg has the multiplicity of the phase vector.
    Spider {
        color: Color,
        phases: S::Phases,
        legs: usize,
    },
    Hadamard,
    /// Discards its single leg.
    Ground,
    Cup,
    Cap,
    /// Ports 0 and 1 on one side, 2 and 3 on the other; 0 meets 3, 1 meets 2.
    Swap,
    /// Port 0 is the combined register, ports `1..=parts.len()` the parts in
    /// order. `split` only records the orientation it was built with.
    Gather { parts: Vec<S::Mult>, split: bool },
    /// Wire `i` of port 0 meets wire `perm[i]` of port 1.
    Perm(S::Perm),
    Wire,
    /// Ports are the body inputs followed by the body outputs.
    Box(S::Sub),
}

impl<S: Stage> NodeKind<S> {
    pub fn ports(&self) -> usize {
        match self {
            NodeKind::Input { .. } | NodeKind::Output { .. } | NodeKind::Ground => 1,
            NodeKind::Spider { legs, .. } => *legs,
            NodeKind::Hadamard
            | NodeKind::Cup
            | NodeKind::Cap
            | NodeKind::Perm(_)
            | NodeKind::Wire => 2,
            NodeKind::Swap => 4,
            NodeKind::Gather { parts, .. } => parts.len() + 1,
            NodeKind::Box(sub) => S::sub_ports(sub),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Input { .. } => "input",
            NodeKind::Output { .. } => "output",
            NodeKind::Spider { color: Color::Z, .. } => "z",
            NodeKind::Spider { color: Color::X, .. } => "x",
            NodeKind::Hadamard => "hadamard",
            NodeKind::Ground => "ground",
            NodeKind::Cup => "cup",
            NodeKind::Cap => "cap",
            NodeKind::Swap => "swap",
            NodeKind::Gather { split: false, .. } => "gather",
            NodeKind::Gather { split: true, .. } => "split",
            NodeKind::Perm(_) => "perm",
            NodeKind::Wire => "wire",
            NodeKind::Box(_) => "box",
        }
    }

    fn is_boundary_or_wire(&self) -> bool {
        matches!(
            self,
            NodeKind::Input { .. } | NodeKind::Output { .. } | NodeKind::Wire
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<S: Stage> {
    pub a: PortRef,
    pub b: PortRef,
    pub mult: S::Mult,
}

impl<S: Stage> Edge<S> {
    pub fn other(&self, p: PortRef) -> PortRef {
        if self.a == p {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, node: NodeId) -> bool {
        self.a.0 == node || self.b.0 == node
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagram<S: Stage> {
    pub params: Vec<String>,
    pub nodes: Vec<NodeKind<S>>,
    pub edges: Vec<Edge<S>>,
    pub inputs: Vec<NodeId>,
    pub outputs: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramError(pub String);

impl fmt::Display for DiagramError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DiagramError {}

impl<S: Stage> Default for Diagram<S> {
    fn default() -> Self {
        Diagram {
            params: Vec::new(),
            nodes: Vec::new(),
            edges: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }
}

impl<S: Stage> Diagram<S> {
    pub fn new(params: Vec<String>) -> Self {
        Diagram {
            params,
            ..Diagram::default()
        }
    }

    pub fn add_node(&mut self, kind: NodeKind<S>) -> NodeId {
        self.nodes.push(kind);
        self.nodes.len() - 1
    }

    pub fn add_input(&mut self, mult: S::Mult) -> PortRef {
        let id = self.add_node(NodeKind::Input { mult });
        self.inputs.push(id);
        (id, 0)
    }

    pub fn add_output(&mut self, mult: S::Mult) -> PortRef {
        let id = self.add_node(NodeKind::Output { mult });
        self.outputs.push(id);
        (id, 0)
    }

    pub fn connect(&mut self, a: PortRef, b: PortRef, mult: S::Mult) {
        debug_assert!(a != b, "edge from a port to itself");
        self.edges.push(Edge { a, b, mult });
    }

    pub fn boundary_mult(&self, node: NodeId) -> &S::Mult {
        match &self.nodes[node] {
            NodeKind::Input { mult } | NodeKind::Output { mult } => mult,
            other => panic!("node {node} is a {}, not a boundary", other.name()),
        }
    }

    pub fn input_mults(&self) -> Vec<S::Mult> {
        self.inputs.iter().map(|&n| self.boundary_mult(n).clone()).collect()
    }

    pub fn output_mults(&self) -> Vec<S::Mult> {
        self.outputs.iter().map(|&n| self.boundary_mult(n).clone()).collect()
    }

    /// Generators, not counting wires and boundary nodes. Boxes count one
    /// plus their bodies.
    pub fn node_count(&self) -> usize {
        self.nodes
            .iter()
            .map(|k| match k {
                NodeKind::Box(sub) => S::sub_node_count(sub),
                k if k.is_boundary_or_wire() => 0,
                _ => 1,
            })
            .sum()
    }

    pub fn count_kind(&self, pred: impl Fn(&NodeKind<S>) -> bool) -> usize {
        self.nodes.iter().filter(|k| pred(k)).count()
    }

    /// Index from ports to the edge attached there.
    pub fn port_index(&self) -> HashMap<PortRef, usize> {
        let mut map = HashMap::with_capacity(self.edges.len() * 2);
        for (i, e) in self.edges.iter().enumerate() {
            map.insert(e.a, i);
            map.insert(e.b, i);
        }
        map
    }

    /// Keeps the nodes with `keep[id]`, dropping every edge that touches a
    /// removed node, and renumbers.
    pub fn retain_nodes(&mut self, keep: &[bool]) {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                remap[i] = next;
                next += 1;
            }
        }
        let nodes = std::mem::take(&mut self.nodes);
        self.nodes = nodes
            .into_iter()
            .zip(keep)
            .filter_map(|(n, &k)| k.then_some(n))
            .collect();
        let edges = std::mem::take(&mut self.edges);
        self.edges = edges
            .into_iter()
            .filter(|e| keep[e.a.0] && keep[e.b.0])
            .map(|e| Edge {
                a: (remap[e.a.0], e.a.1),
                b: (remap[e.b.0], e.b.1),
                mult: e.mult,
            })
            .collect();
        self.inputs = self.inputs.iter().map(|&i| remap[i]).collect();
        self.outputs = self.outputs.iter().map(|&i| remap[i]).collect();
    }

    /// Removes every `Wire` node, joining the edges on its two ports. A wire
    /// closed on itself is a loop and is dropped.
    pub fn splice_wires(&mut self) {
        let wires: Vec<NodeId> = (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i], NodeKind::Wire))
            .collect();
        if wires.is_empty() {
            return;
        }
        let mut edges: Vec<Option<Edge<S>>> = std::mem::take(&mut self.edges)
            .into_iter()
            .map(Some)
            .collect();
        let mut index: HashMap<PortRef, usize> = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            let e = e.as_ref().unwrap();
            index.insert(e.a, i);
            index.insert(e.b, i);
        }
        let mut keep = vec![true; self.nodes.len()];
        for w in wires {
            let (Some(&e0), Some(&e1)) = (index.get(&(w, 0)), index.get(&(w, 1))) else {
                continue;
            };
            keep[w] = false;
            index.remove(&(w, 0));
            index.remove(&(w, 1));
            if e0 == e1 {
                edges[e0] = None;
                continue;
            }
            let first = edges[e0].take().unwrap();
            let second = edges[e1].take().unwrap();
            let far0 = first.other((w, 0));
            let far1 = second.other((w, 1));
            let id = edges.len();
            edges.push(Some(Edge {
                a: far0,
                b: far1,
                mult: first.mult,
            }));
            index.insert(far0, id);
            index.insert(far1, id);
        }
        self.edges = edges.into_iter().flatten().collect();
        self.retain_nodes(&keep);
    }

    /// Places `other`'s nodes after ours, returning the id offset.
    fn absorb(&mut self, other: &Diagram<S>) -> usize {
        let off = self.nodes.len();
        self.nodes.extend(other.nodes.iter().cloned());
        self.edges.extend(other.edges.iter().map(|e| Edge {
            a: (e.a.0 + off, e.a.1),
            b: (e.b.0 + off, e.b.1),
            mult: e.mult.clone(),
        }));
        off
    }

    /// Side-by-side composition.
    pub fn tensor(&self, other: &Diagram<S>) -> Diagram<S> {
        let mut out = self.clone();
        let off = out.absorb(other);
        out.inputs.extend(other.inputs.iter().map(|i| i + off));
        out.outputs.extend(other.outputs.iter().map(|i| i + off));
        for p in &other.params {
            if !out.params.contains(p) {
                out.params.push(p.clone());
            }
        }
        out
    }

    /// Sequential composition: our outputs feed `other`'s inputs.
    pub fn compose(&self, other: &Diagram<S>) -> Result<Diagram<S>, DiagramError> {
        if self.outputs.len() != other.inputs.len() {
            return Err(DiagramError(format!(
                "cannot compose {} outputs with {} inputs",
                self.outputs.len(),
                other.inputs.len()
            )));
        }
        for (i, (a, b)) in self.output_mults().iter().zip(other.input_mults()).enumerate() {
            if !S::mult_eq(a, &b) {
                return Err(DiagramError(format!(
                    "boundary {i} widths differ: {a:?} and {b:?}"
                )));
            }
        }
        let mut out = self.clone();
        let off = out.absorb(other);
        for (&o, &i) in self.outputs.iter().zip(&other.inputs) {
            let mult = out.boundary_mult(o).clone();
            out.nodes[o] = NodeKind::Wire;
            out.nodes[i + off] = NodeKind::Wire;
            out.connect((o, 1), (i + off, 1), mult);
        }
        out.outputs = other.outputs.iter().map(|i| i + off).collect();
        for p in &other.params {
            if !out.params.contains(p) {
                out.params.push(p.clone());
            }
        }
        out.splice_wires();
        Ok(out)
    }

    /// The identity on the given boundary widths.
    pub fn identity(mults: &[S::Mult]) -> Diagram<S> {
        let mut d = Diagram::default();
        let ins: Vec<PortRef> = mults.iter().map(|m| d.add_input(m.clone())).collect();
        for (p, m) in ins.into_iter().zip(mults) {
            let o = d.add_output(m.clone());
            d.connect(p, o, m.clone());
        }
        d
    }
}

impl Diagram<Concrete> {
    /// Checks that every port carries exactly one edge of the width its node
    /// expects. Ports of width zero may be left open.
    pub fn validate(&self) -> Result<(), DiagramError> {
        let err = |m: String| Err(DiagramError(m));
        let mut seen: HashMap<PortRef, u64> = HashMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            for p in [e.a, e.b] {
                if p.0 >= self.nodes.len() || p.1 >= self.nodes[p.0].ports() {
                    return err(format!("edge {i} uses missing port {p:?}"));
                }
                if seen.insert(p, e.mult).is_some() {
                    return err(format!("port {p:?} carries two edges"));
                }
            }
        }
        for (id, node) in self.nodes.iter().enumerate() {
            let width = |port: usize| seen.get(&(id, port)).copied();
            let expect = |port: usize, w: u64| -> Result<(), DiagramError> {
                match width(port) {
                    Some(x) if x == w => Ok(()),
                    None if w == 0 => Ok(()),
                    found => Err(DiagramError(format!(
                        "node {id} ({}) port {port}: expected width {w}, found {found:?}",
                        node.name()
                    ))),
                }
            };
            match node {
                NodeKind::Input { mult } | NodeKind::Output { mult } => expect(0, *mult)?,
                NodeKind::Spider { phases, legs, .. } => {
                    for l in 0..*legs {
                        expect(l, phases.len() as u64)?;
                    }
                }
                NodeKind::Hadamard | NodeKind::Cup | NodeKind::Cap | NodeKind::Wire => {
                    let w = width(0).or(width(1)).unwrap_or(0);
                    expect(0, w)?;
                    expect(1, w)?;
                }
                NodeKind::Ground => {
                    if width(0).is_none() {
                        return err(format!("ground {id} is not connected"));
                    }
                }
                NodeKind::Swap => {
                    let w0 = width(0).unwrap_or(0);
                    let w1 = width(1).unwrap_or(0);
                    expect(3, w0)?;
                    expect(2, w1)?;
                }
                NodeKind::Gather { parts, .. } => {
                    expect(0, parts.iter().sum())?;
                    for (j, &p) in parts.iter().enumerate() {
                        expect(j + 1, p)?;
                    }
                }
                NodeKind::Perm(p) => {
                    if !super::perm::is_bijection(p) {
                        return err(format!("perm {id} is not a bijection"));
                    }
                    expect(0, p.len() as u64)?;
                    expect(1, p.len() as u64)?;
                }
                NodeKind::Box(sub) => match *sub {},
            }
        }
        Ok(())
    }

    /// Number of qubit wires on the inputs and the outputs.
    pub fn boundary_widths(&self) -> (u64, u64) {
        (self.input_mults().iter().sum(), self.output_mults().iter().sum())
    }
}
