// SPDX-License-Identifier: Apache-2.0

//! Completely positive maps on qubits and the reading of concrete diagrams
//! as such maps.
//!
//! A diagram is read through its doubled tensor network: every spider and
//! Hadamard appears once as drawn and once conjugated, and a ground joins a
//! wire to its conjugate copy. The result `S` acts on density matrices by
//! `ρ'[o, o'] = Σ S[(o, o'), (i, i')] ρ[i, i']`, with the first qubit most
//! significant.

use num_complex::Complex64;

use crate::szx::{Color, Concrete, Diagram, NodeKind};

use super::tensor::{contract_network, Tensor};
use super::OracleError;

#[derive(Debug, Clone, PartialEq)]
pub struct CpMap {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, `4^outputs` rows and `4^inputs` columns.
    pub data: Vec<Complex64>,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl CpMap {
    pub fn rows(&self) -> usize {
        1 << (2 * self.outputs)
    }

    pub fn cols(&self) -> usize {
        1 << (2 * self.inputs)
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols() + col]
    }

    pub fn identity(n: usize) -> CpMap {
        let dim = 1 << (2 * n);
        let mut data = vec![zero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        CpMap {
            inputs: n,
            outputs: n,
            data,
        }
    }

    /// Applies the map to a density matrix on `inputs` qubits.
    pub fn apply(&self, rho: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(rho.len(), self.cols());
        (0..self.rows())
            .map(|r| (0..self.cols()).map(|c| self.get(r, c) * rho[c]).sum())
            .collect()
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &CpMap) -> CpMap {
        assert_eq!(self.outputs, then.inputs);
        let mut data = vec![zero(); then.rows() * self.cols()];
        for r in 0..then.rows() {
            for k in 0..self.rows() {
                let a = then.get(r, k);
                if a == zero() {
                    continue;
                }
                for c in 0..self.cols() {
                    data[r * self.cols() + c] += a * self.get(k, c);
                }
            }
        }
        CpMap {
            inputs: self.inputs,
            outputs: then.outputs,
            data,
        }
    }

    /// `self ⊗ other`, with the qubits of `self` first.
    pub fn tensor(&self, other: &CpMap) -> CpMap {
        let (oa, ob) = (1usize << self.outputs, 1usize << other.outputs);
        let (ia, ib) = (1usize << self.inputs, 1usize << other.inputs);
        let out = CpMap {
            inputs: self.inputs + other.inputs,
            outputs: self.outputs + other.outputs,
            data: Vec::new(),
        };
        let (rows, cols) = (out.rows(), out.cols());
        let mut data = vec![zero(); rows * cols];
        // Pairs (x, x') of `self` and (y, y') of `other` meet at
        // (x·|y| + y, x'·|y| + y').
        let join = |a: usize, da: usize, b: usize, db: usize| {
            let (x, x2) = (a / da, a % da);
            let (y, y2) = (b / db, b % db);
            (x * db + y) * (da * db) + (x2 * db + y2)
        };
        for ra in 0..self.rows() {
            for rb in 0..other.rows() {
                let row = join(ra, oa, rb, ob);
                for ca in 0..self.cols() {
                    let a = self.get(ra, ca);
                    if a == zero() {
                        continue;
                    }
                    for cb in 0..other.cols() {
                        data[row * cols + join(ca, ia, cb, ib)] = a * other.get(rb, cb);
                    }
                }
            }
        }
        CpMap { data, ..out }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

fn frobenius(m: &CpMap) -> f64 {
    m.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius distance between the two maps after scaling each to unit norm,
/// so maps that differ by a positive scalar are at distance zero. A zero map
/// is at distance 0 from another zero map and 1 from anything else; maps of
/// different shapes are at infinite distance.
pub fn cpm_distance_mod_scalar(a: &CpMap, b: &CpMap) -> f64 {
    if a.inputs != b.inputs || a.outputs != b.outputs {
        return f64::INFINITY;
    }
    let (na, nb) = (frobenius(a), frobenius(b));
    if na < 1e-300 || nb < 1e-300 {
        return if na < 1e-300 && nb < 1e-300 { 0.0 } else { 1.0 };
    }
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x / na - y / nb).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Whether the maps agree up to a positive scalar, within `tol`.
pub fn cpm_equal_mod_scalar(a: &CpMap, b: &CpMap, tol: f64) -> bool {
    cpm_distance_mod_scalar(a, b) <= tol
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

enum Local {
    Spider {
        color: Color,
        phase: Complex64,
        legs: Vec<usize>,
    },
    Hadamard(usize, usize),
}

/// Reads a concrete diagram as a completely positive map.
pub fn interpret(d: &Diagram<Concrete>, max_qubits: usize) -> Result<CpMap, OracleError> {
    d.validate()
        .map_err(|e| OracleError::Invalid(e.to_string()))?;
    let (n_in, n_out) = d.boundary_widths();
    let (n_in, n_out) = (n_in as usize, n_out as usize);
    if n_in + n_out > max_qubits {
        return Err(OracleError::TooManyQubits {
            qubits: n_in + n_out,
            limit: max_qubits,
        });
    }
    let index = d.port_index();
    let mut base = Vec::with_capacity(d.edges.len());
    let mut total = 0usize;
    for e in &d.edges {
        base.push(total);
        total += e.mult as usize;
    }
    // Wire `t` on a port, as a variable of the undoubled network.
    let var = |node: usize, port: usize, t: usize| -> usize { base[index[&(node, port)]] + t };
    let width = |node: usize, port: usize| -> usize {
        index.get(&(node, port)).map_or(0, |&e| d.edges[e].mult as usize)
    };
    let mut uf = UnionFind((0..2 * total).collect());
    let join = |uf: &mut UnionFind, a: usize, b: usize| {
        uf.union(a, b);
        uf.union(a + total, b + total);
    };
    let mut locals = Vec::new();
    for (id, node) in d.nodes.iter().enumerate() {
        match node {
            NodeKind::Input { .. } | NodeKind::Output { .. } => {}
            NodeKind::Wire | NodeKind::Cup | NodeKind::Cap => {
                for t in 0..width(id, 0) {
                    join(&mut uf, var(id, 0, t), var(id, 1, t));
                }
            }
            NodeKind::Swap => {
                for t in 0..width(id, 0) {
                    join(&mut uf, var(id, 0, t), var(id, 3, t));
                }
                for t in 0..width(id, 1) {
                    join(&mut uf, var(id, 1, t), var(id, 2, t));
                }
            }
            NodeKind::Gather { parts, .. } => {
                let mut t = 0;
                for (j, &p) in parts.iter().enumerate() {
                    for s in 0..p as usize {
                        join(&mut uf, var(id, 0, t), var(id, j + 1, s));
                        t += 1;
                    }
                }
            }
            NodeKind::Perm(p) => {
                for (i, &x) in p.iter().enumerate() {
                    join(&mut uf, var(id, 0, i), var(id, 1, x));
                }
            }
            NodeKind::Ground => {
                for t in 0..width(id, 0) {
                    let v = var(id, 0, t);
                    uf.union(v, v + total);
                }
            }
            NodeKind::Hadamard => {
                for t in 0..width(id, 0) {
                    locals.push(Local::Hadamard(var(id, 0, t), var(id, 1, t)));
                }
            }
            NodeKind::Spider {
                color,
                phases,
                legs,
            } => {
                for (j, p) in phases.iter().enumerate() {
                    locals.push(Local::Spider {
                        color: *color,
                        phase: Complex64::from_polar(1.0, p.radians()),
                        legs: (0..*legs).map(|l| var(id, l, j)).collect(),
                    });
                }
            }
            NodeKind::Box(b) => match *b {},
        }
    }
    let mut tensors = Vec::with_capacity(2 * locals.len());
    for copy in [0, total] {
        for l in &locals {
            let conj = copy != 0;
            tensors.push(match l {
                Local::Spider { color, phase, legs } => {
                    let phase = if conj { phase.conj() } else { *phase };
                    let legs: Vec<usize> = legs.iter().map(|&v| uf.find(v + copy)).collect();
                    spider_tensor(*color, phase, &legs)
                }
                Local::Hadamard(a, b) => {
                    let legs = [uf.find(a + copy), uf.find(b + copy)];
                    let h = std::f64::consts::FRAC_1_SQRT_2;
                    Tensor::from_fn(&legs, |bits| {
                        let s = if bits[0] == 1 && bits[1] == 1 { -h } else { h };
                        Complex64::new(s, 0.0)
                    })
                }
            });
        }
    }
    let boundary = |uf: &mut UnionFind, nodes: &[usize], copy: usize| -> Vec<usize> {
        let mut out = Vec::new();
        for &n in nodes {
            for t in 0..width(n, 0) {
                out.push(uf.find(var(n, 0, t) + copy));
            }
        }
        out
    };
    // Open positions: o, o', i, i'.
    let mut open = boundary(&mut uf, &d.outputs, 0);
    open.extend(boundary(&mut uf, &d.outputs, total));
    open.extend(boundary(&mut uf, &d.inputs, 0));
    open.extend(boundary(&mut uf, &d.inputs, total));
    let mut distinct = open.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let t = contract_network(tensors, &distinct).map_err(OracleError::Contraction)?;
    let positions = open.len();
    let cols = 1usize << (2 * n_in);
    let rows = 1usize << (2 * n_out);
    let mut data = vec![zero(); rows * cols];
    let mut value: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    'assign: for bits in 0..(1usize << positions) {
        value.clear();
        for (k, &class) in open.iter().enumerate() {
            let b = (bits >> (positions - 1 - k)) & 1;
            if let Some(&prev) = value.get(&class) {
                if prev != b {
                    continue 'assign;
                }
            } else {
                value.insert(class, b);
            }
        }
        // Bits are laid out as (o, o', i, i'), matching row-major (row, col).
        data[bits] = t.at(|v| value[&v]);
    }
    Ok(CpMap {
        inputs: n_in,
        outputs: n_out,
        data,
    })
}

fn spider_tensor(color: Color, phase: Complex64, legs: &[usize]) -> Tensor {
    let one = Complex64::new(1.0, 0.0);
    match color {
        Color::Z => Tensor::from_fn(legs, |bits| {
            if bits.iter().all(|&b| b == 0) {
                one
            } else if bits.iter().all(|&b| b == 1) {
                phase
            } else {
                zero()
            }
        }),
        Color::X => Tensor::from_fn(legs, |bits| {
            let parity = bits.iter().filter(|&&b| b == 1).count() % 2;
            if parity == 0 {
                one + phase
            } else {
                one - phase
            }
        }),
    }
}
