// SPDX-License-Identifier: Apache-2.0

//! Structural rewriting of concrete diagrams.
//!
//! Every rule here is an identity of the underlying map: zero-width wires
//! and the nodes that only touch them disappear, wires and swaps are
//! spliced out, nested gathers are flattened, a gather meeting a split of
//! the same shape cancels, and permutations fuse or vanish when trivial.

use std::collections::HashMap;

use super::graph::{Concrete, Diagram, Edge, NodeId, NodeKind, PortRef};
use super::perm::{invert, is_identity};

/// Which rules fired, for reporting. Every counted rewrite removes at least
/// one generator (wires aside) or one edge, so the total is bounded by the
/// size of the input.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimplifyStats {
    pub zero_edges: usize,
    pub wires: usize,
    pub swaps: usize,
    pub single_gathers: usize,
    pub gather_fusions: usize,
    pub gather_cancellations: usize,
    pub identity_perms: usize,
    pub perm_fusions: usize,
}

impl SimplifyStats {
    /// Total number of rewrites applied.
    pub fn rewrites(&self) -> usize {
        self.zero_edges
            + self.wires
            + self.swaps
            + self.single_gathers
            + self.gather_fusions
            + self.gather_cancellations
            + self.identity_perms
            + self.perm_fusions
    }
}

pub fn simplify(d: &Diagram<Concrete>) -> Diagram<Concrete> {
    simplify_with_stats(d).0
}

pub fn simplify_with_stats(d: &Diagram<Concrete>) -> (Diagram<Concrete>, SimplifyStats) {
    let mut w = Work::new(d);
    let mut stats = SimplifyStats::default();
    loop {
        let mut changed = false;
        let n = w.swaps();
        stats.swaps += n;
        changed |= n > 0;
        let n = w.zero_edges();
        stats.zero_edges += n;
        changed |= n > 0;
        let n = w.single_gathers();
        stats.single_gathers += n;
        changed |= n > 0;
        let n = w.identity_perms();
        stats.identity_perms += n;
        changed |= n > 0;
        let n = w.wires();
        stats.wires += n;
        changed |= n > 0;
        let n = w.fuse_gathers();
        stats.gather_fusions += n;
        changed |= n > 0;
        let n = w.cancel_gathers() + w.cancel_parts();
        stats.gather_cancellations += n;
        changed |= n > 0;
        let n = w.fuse_perms();
        stats.perm_fusions += n;
        changed |= n > 0;
        if !changed {
            break;
        }
    }
    (w.finish(), stats)
}

struct Work {
    base: Diagram<Concrete>,
    alive: Vec<bool>,
    edges: Vec<Option<Edge<Concrete>>>,
    index: HashMap<PortRef, usize>,
}

impl Work {
    fn new(d: &Diagram<Concrete>) -> Self {
        let mut base = d.clone();
        let edges: Vec<Option<Edge<Concrete>>> =
            std::mem::take(&mut base.edges).into_iter().map(Some).collect();
        let mut index = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            let e = e.as_ref().unwrap();
            index.insert(e.a, i);
            index.insert(e.b, i);
        }
        Work {
            alive: vec![true; base.nodes.len()],
            base,
            edges,
            index,
        }
    }

    fn finish(mut self) -> Diagram<Concrete> {
        self.base.edges = self.edges.into_iter().flatten().collect();
        self.base.retain_nodes(&self.alive);
        self.base
    }

    fn edge_at(&self, p: PortRef) -> Option<usize> {
        self.index.get(&p).copied()
    }

    fn edge(&self, e: usize) -> &Edge<Concrete> {
        self.edges[e].as_ref().expect("live edge")
    }

    fn remove_edge(&mut self, e: usize) -> Edge<Concrete> {
        let edge = self.edges[e].take().expect("live edge");
        self.index.remove(&edge.a);
        self.index.remove(&edge.b);
        edge
    }

    fn add_edge(&mut self, a: PortRef, b: PortRef, mult: u64) {
        let id = self.edges.len();
        self.edges.push(Some(Edge { a, b, mult }));
        self.index.insert(a, id);
        self.index.insert(b, id);
    }

    /// Moves the end of whatever edge sits on `from` to `to`.
    fn repoint(&mut self, from: PortRef, to: PortRef) {
        if let Some(e) = self.index.remove(&from) {
            let edge = self.edges[e].as_mut().unwrap();
            if edge.a == from {
                edge.a = to;
            } else {
                edge.b = to;
            }
            self.index.insert(to, e);
        }
    }

    fn add_node(&mut self, kind: NodeKind<Concrete>) -> NodeId {
        self.base.nodes.push(kind);
        self.alive.push(true);
        self.base.nodes.len() - 1
    }

    fn kill(&mut self, n: NodeId) {
        for p in 0..self.base.nodes[n].ports() {
            if let Some(e) = self.edge_at((n, p)) {
                self.remove_edge(e);
            }
        }
        self.alive[n] = false;
    }

    fn live_nodes(&self) -> Vec<NodeId> {
        (0..self.base.nodes.len()).filter(|&n| self.alive[n]).collect()
    }

    fn has_edges(&self, n: NodeId) -> bool {
        (0..self.base.nodes[n].ports()).any(|p| self.index.contains_key(&(n, p)))
    }

    fn swaps(&mut self) -> usize {
        let mut count = 0;
        for n in self.live_nodes() {
            if !matches!(self.base.nodes[n], NodeKind::Swap) {
                continue;
            }
            let w1 = self.add_node(NodeKind::Wire);
            let w2 = self.add_node(NodeKind::Wire);
            self.repoint((n, 0), (w1, 0));
            self.repoint((n, 3), (w1, 1));
            self.repoint((n, 1), (w2, 0));
            self.repoint((n, 2), (w2, 1));
            self.alive[n] = false;
            count += 1;
        }
        count
    }

    fn zero_edges(&mut self) -> usize {
        let zero: Vec<usize> = (0..self.edges.len())
            .filter(|&e| matches!(&self.edges[e], Some(x) if x.mult == 0))
            .collect();
        for &e in &zero {
            self.remove_edge(e);
        }
        let mut removed = zero.len();
        for n in self.live_nodes() {
            match &self.base.nodes[n] {
                NodeKind::Input { .. } | NodeKind::Output { .. } => {}
                NodeKind::Gather { parts, .. } => {
                    let empty: Vec<usize> = (0..parts.len()).filter(|&j| parts[j] == 0).collect();
                    if empty.len() == parts.len() {
                        self.kill(n);
                        removed += 1;
                        continue;
                    }
                    // Part bookkeeping only: the zero edges were counted above.
                    for &j in empty.iter().rev() {
                        self.remove_gather_part(n, j);
                    }
                }
                NodeKind::Spider { phases, .. } if phases.is_empty() => {
                    self.kill(n);
                    removed += 1;
                }
                NodeKind::Spider { .. } => {}
                NodeKind::Perm(p) if p.is_empty() => {
                    self.kill(n);
                    removed += 1;
                }
                NodeKind::Wire if !self.has_edges(n) => self.kill(n),
                NodeKind::Hadamard | NodeKind::Ground | NodeKind::Cup | NodeKind::Cap
                    if !self.has_edges(n) =>
                {
                    self.kill(n);
                    removed += 1;
                }
                _ => {}
            }
        }
        removed
    }

    /// Drops part `j` of a gather, renumbering the later ports.
    fn remove_gather_part(&mut self, g: NodeId, j: usize) {
        let old = match &mut self.base.nodes[g] {
            NodeKind::Gather { parts, .. } => {
                let old = parts.len();
                parts.remove(j);
                old
            }
            _ => unreachable!(),
        };
        if let Some(e) = self.edge_at((g, j + 1)) {
            self.remove_edge(e);
        }
        for p in j + 2..=old {
            self.repoint((g, p), (g, p - 1));
        }
    }

    fn single_gathers(&mut self) -> usize {
        let mut count = 0;
        for n in self.live_nodes() {
            if let NodeKind::Gather { parts, .. } = &self.base.nodes[n] {
                if parts.len() == 1 {
                    self.base.nodes[n] = NodeKind::Wire;
                    count += 1;
                }
            }
        }
        count
    }

    fn identity_perms(&mut self) -> usize {
        let mut count = 0;
        for n in self.live_nodes() {
            if let NodeKind::Perm(p) = &self.base.nodes[n] {
                if is_identity(p) {
                    self.base.nodes[n] = NodeKind::Wire;
                    count += 1;
                }
            }
        }
        count
    }

    fn wires(&mut self) -> usize {
        let mut count = 0;
        for n in self.live_nodes() {
            // Cups and caps are wires bent around: only the connectivity counts.
            if !matches!(self.base.nodes[n], NodeKind::Wire | NodeKind::Cup | NodeKind::Cap) {
                continue;
            }
            match (self.edge_at((n, 0)), self.edge_at((n, 1))) {
                (Some(e0), Some(e1)) if e0 == e1 => {
                    self.remove_edge(e0);
                }
                (Some(e0), Some(e1)) => {
                    let first = self.remove_edge(e0);
                    let second = self.remove_edge(e1);
                    self.add_edge(first.other((n, 0)), second.other((n, 1)), first.mult);
                }
                _ => continue,
            }
            self.alive[n] = false;
            count += 1;
        }
        count
    }

    fn is_gather(&self, n: NodeId) -> bool {
        self.alive[n] && matches!(self.base.nodes[n], NodeKind::Gather { .. })
    }

    fn parts(&self, n: NodeId) -> Vec<u64> {
        match &self.base.nodes[n] {
            NodeKind::Gather { parts, .. } => parts.clone(),
            _ => unreachable!(),
        }
    }

    /// A part of one gather bundled by another gather is replaced by the
    /// inner gather's parts.
    fn fuse_gathers(&mut self) -> usize {
        let mut count = 0;
        for outer in self.live_nodes() {
            if !self.is_gather(outer) {
                continue;
            }
            let mut j = 0;
            while j < self.parts(outer).len() {
                let port = (outer, j + 1);
                let Some(e) = self.edge_at(port) else {
                    j += 1;
                    continue;
                };
                let (inner, inner_port) = self.edge(e).other(port);
                if inner == outer
                    || inner_port != 0
                    || !self.is_gather(inner)
                    || self.parts(inner).is_empty()
                {
                    j += 1;
                    continue;
                }
                self.remove_edge(e);
                let inner_parts = self.parts(inner);
                let outer_len = self.parts(outer).len();
                let r = inner_parts.len();
                // Shift the outer ports after `j` up to make room.
                for p in (j + 2..=outer_len).rev() {
                    self.repoint((outer, p), (outer, p + r - 1));
                }
                for (t, _) in inner_parts.iter().enumerate() {
                    self.repoint((inner, t + 1), (outer, j + 1 + t));
                }
                if let NodeKind::Gather { parts, .. } = &mut self.base.nodes[outer] {
                    parts.splice(j..=j, inner_parts);
                }
                self.alive[inner] = false;
                count += 1;
            }
        }
        count
    }

    /// Two gathers of the same shape joined on their combined ports.
    fn cancel_gathers(&mut self) -> usize {
        let mut count = 0;
        for g in self.live_nodes() {
            if !self.is_gather(g) {
                continue;
            }
            let Some(e) = self.edge_at((g, 0)) else {
                continue;
            };
            let (h, hp) = self.edge(e).other((g, 0));
            if h == g || hp != 0 || !self.is_gather(h) || self.parts(g) != self.parts(h) {
                continue;
            }
            self.remove_edge(e);
            for j in 0..self.parts(g).len() {
                let w = self.add_node(NodeKind::Wire);
                self.repoint((g, j + 1), (w, 0));
                self.repoint((h, j + 1), (w, 1));
            }
            self.alive[g] = false;
            self.alive[h] = false;
            count += 1;
        }
        count
    }

    /// Two gathers whose parts are joined in order, part `j` to part `j`,
    /// become a wire between their combined ports.
    fn cancel_parts(&mut self) -> usize {
        let mut count = 0;
        for g in self.live_nodes() {
            if !self.is_gather(g) || self.parts(g).is_empty() {
                continue;
            }
            let n = self.parts(g).len();
            let Some(e) = self.edge_at((g, 1)) else {
                continue;
            };
            let (h, hp) = self.edge(e).other((g, 1));
            if h == g || hp != 1 || !self.is_gather(h) || self.parts(h).len() != n {
                continue;
            }
            let joined: Option<Vec<usize>> = (1..=n)
                .map(|j| {
                    let e = self.edge_at((g, j))?;
                    (self.edge(e).other((g, j)) == (h, j)).then_some(e)
                })
                .collect();
            let Some(joined) = joined else {
                continue;
            };
            // A combined port looping back would leave a closed wire.
            if self
                .edge_at((g, 0))
                .is_some_and(|e| self.edge(e).other((g, 0)).0 == h)
            {
                continue;
            }
            for e in joined {
                self.remove_edge(e);
            }
            let w = self.add_node(NodeKind::Wire);
            self.repoint((g, 0), (w, 0));
            self.repoint((h, 0), (w, 1));
            self.alive[g] = false;
            self.alive[h] = false;
            count += 1;
        }
        count
    }

    fn perm(&self, n: NodeId) -> Option<&Vec<usize>> {
        match &self.base.nodes[n] {
            NodeKind::Perm(p) if self.alive[n] => Some(p),
            _ => None,
        }
    }

    /// Two permutations joined port to port become one.
    fn fuse_perms(&mut self) -> usize {
        let mut count = 0;
        for first in self.live_nodes() {
            if !self.alive[first] || self.perm(first).is_none() {
                continue;
            }
            for near in [1usize, 0] {
                let Some(e) = self.edge_at((first, near)) else {
                    continue;
                };
                let (second, second_near) = self.edge(e).other((first, near));
                if second == first || self.perm(second).is_none() {
                    continue;
                }
                let far = 1 - near;
                let second_far = 1 - second_near;
                // Read both maps from the far port of `first` towards the far
                // port of `second`.
                let p1 = self.perm(first).unwrap();
                let into = if near == 1 { p1.clone() } else { invert(p1) };
                let p2 = self.perm(second).unwrap();
                let out = if second_near == 0 { p2.clone() } else { invert(p2) };
                let fused: Vec<usize> = into.iter().map(|&x| out[x]).collect();
                self.remove_edge(e);
                let n = self.add_node(NodeKind::Perm(fused));
                self.repoint((first, far), (n, 0));
                self.repoint((second, second_far), (n, 1));
                self.alive[first] = false;
                self.alive[second] = false;
                count += 1;
                break;
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gather_split_cancel() {
        let mut d = Diagram::<Concrete>::default();
        let a = d.add_input(1);
        let b = d.add_input(2);
        let g = d.add_node(NodeKind::Gather {
            parts: vec![1, 2],
            split: false,
        });
        let s = d.add_node(NodeKind::Gather {
            parts: vec![1, 2],
            split: true,
        });
        let x = d.add_output(1);
        let y = d.add_output(2);
        d.connect(a, (g, 1), 1);
        d.connect(b, (g, 2), 2);
        d.connect((g, 0), (s, 0), 3);
        d.connect((s, 1), x, 1);
        d.connect((s, 2), y, 2);
        let out = simplify(&d);
        out.validate().unwrap();
        assert_eq!(out.node_count(), 0);
        assert_eq!(out.edges.len(), 2);
    }

    #[test]
    fn perms_fuse_to_nothing() {
        let mut d = Diagram::<Concrete>::default();
        let i = d.add_input(3);
        let p = d.add_node(NodeKind::Perm(vec![1, 2, 0]));
        let q = d.add_node(NodeKind::Perm(vec![1, 2, 0]));
        let o = d.add_output(3);
        d.connect(i, (p, 0), 3);
        d.connect((p, 1), (q, 1), 3);
        d.connect((q, 0), o, 3);
        let out = simplify(&d);
        assert_eq!(out.node_count(), 0);
    }

    #[test]
    fn zero_parts_disappear() {
        let mut d = Diagram::<Concrete>::default();
        let a = d.add_input(0);
        let b = d.add_input(2);
        let g = d.add_node(NodeKind::Gather {
            parts: vec![0, 2],
            split: false,
        });
        let h = d.add_node(NodeKind::Hadamard);
        let o = d.add_output(2);
        d.connect(a, (g, 1), 0);
        d.connect(b, (g, 2), 2);
        d.connect((g, 0), (h, 0), 2);
        d.connect((h, 1), o, 2);
        let out = simplify(&d);
        out.validate().unwrap();
        assert_eq!(out.node_count(), 1);
    }
}
