// SPDX-License-Identifier: Apache-2.0

//! Dense tensors over qubit-valued variables and greedy contraction.

use num_complex::Complex64;

/// Variables are listed most significant first.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub vars: Vec<usize>,
    pub data: Vec<Complex64>,
}

/// Contractions wider than this many variables are refused.
pub const MAX_WIDTH: usize = 26;

impl Tensor {
    pub fn scalar(c: Complex64) -> Self {
        Tensor {
            vars: vec![],
            data: vec![c],
        }
    }

    /// Builds a tensor over `legs` (possibly repeating) from `f` evaluated on
    /// leg assignments. Repeated variables keep only agreeing assignments.
    pub fn from_fn(legs: &[usize], f: impl Fn(&[u8]) -> Complex64) -> Self {
        let mut vars: Vec<usize> = Vec::new();
        for &l in legs {
            if !vars.contains(&l) {
                vars.push(l);
            }
        }
        let pos: Vec<usize> = legs
            .iter()
            .map(|l| vars.iter().position(|v| v == l).unwrap())
            .collect();
        let mut data = vec![Complex64::new(0.0, 0.0); 1 << vars.len()];
        let mut bits = vec![0u8; legs.len()];
        for (idx, slot) in data.iter_mut().enumerate() {
            for (b, &p) in bits.iter_mut().zip(&pos) {
                *b = ((idx >> (vars.len() - 1 - p)) & 1) as u8;
            }
            *slot = f(&bits);
        }
        Tensor { vars, data }
    }

    fn bit(&self, idx: usize, k: usize) -> usize {
        (idx >> (self.vars.len() - 1 - k)) & 1
    }

    /// Sums out the given variables.
    pub fn sum_out(&self, drop: &[usize]) -> Tensor {
        let keep: Vec<usize> = (0..self.vars.len())
            .filter(|&k| !drop.contains(&self.vars[k]))
            .collect();
        if keep.len() == self.vars.len() {
            return self.clone();
        }
        let mut data = vec![Complex64::new(0.0, 0.0); 1 << keep.len()];
        for (idx, v) in self.data.iter().enumerate() {
            let mut out = 0;
            for &k in &keep {
                out = (out << 1) | self.bit(idx, k);
            }
            data[out] += v;
        }
        Tensor {
            vars: keep.iter().map(|&k| self.vars[k]).collect(),
            data,
        }
    }

    /// Product of two tensors, summing the variables in `drop`.
    pub fn contract(&self, other: &Tensor, drop: &[usize]) -> Result<Tensor, String> {
        let mut all = self.vars.clone();
        for v in &other.vars {
            if !all.contains(v) {
                all.push(*v);
            }
        }
        if all.len() > MAX_WIDTH {
            return Err(format!(
                "tensor network too wide to contract ({} wires at once)",
                all.len()
            ));
        }
        let a_pos: Vec<usize> = self
            .vars
            .iter()
            .map(|v| all.iter().position(|x| x == v).unwrap())
            .collect();
        let b_pos: Vec<usize> = other
            .vars
            .iter()
            .map(|v| all.iter().position(|x| x == v).unwrap())
            .collect();
        let keep: Vec<usize> = (0..all.len()).filter(|&k| !drop.contains(&all[k])).collect();
        let n = all.len();
        let mut data = vec![Complex64::new(0.0, 0.0); 1 << keep.len()];
        let gather = |idx: usize, pos: &[usize]| {
            pos.iter()
                .fold(0usize, |acc, &p| (acc << 1) | ((idx >> (n - 1 - p)) & 1))
        };
        for idx in 0..(1usize << n) {
            let a = self.data[gather(idx, &a_pos)];
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let b = other.data[gather(idx, &b_pos)];
            data[gather(idx, &keep)] += a * b;
        }
        Ok(Tensor {
            vars: keep.iter().map(|&k| all[k]).collect(),
            data,
        })
    }

    /// Value at an assignment of `vars` given as a lookup.
    pub fn at(&self, value_of: impl Fn(usize) -> usize) -> Complex64 {
        let idx = self
            .vars
            .iter()
            .fold(0usize, |acc, &v| (acc << 1) | value_of(v));
        self.data[idx]
    }
}

/// Contracts a whole network, leaving only the `open` variables.
pub fn contract_network(mut tensors: Vec<Tensor>, open: &[usize]) -> Result<Tensor, String> {
    let count_uses = |ts: &[Tensor], v: usize| ts.iter().filter(|t| t.vars.contains(&v)).count();
    // Variables private to one tensor can be summed right away.
    for i in 0..tensors.len() {
        let private: Vec<usize> = tensors[i]
            .vars
            .iter()
            .copied()
            .filter(|&v| !open.contains(&v) && count_uses(&tensors, v) == 1)
            .collect();
        if !private.is_empty() {
            tensors[i] = tensors[i].sum_out(&private);
        }
    }
    while tensors.len() > 1 {
        let mut best: Option<(usize, usize, usize)> = None;
        for i in 0..tensors.len() {
            for j in i + 1..tensors.len() {
                let shared = tensors[i].vars.iter().any(|v| tensors[j].vars.contains(v));
                let mut union = tensors[i].vars.len();
                union += tensors[j]
                    .vars
                    .iter()
                    .filter(|v| !tensors[i].vars.contains(v))
                    .count();
                let cost = if shared { union } else { union + 64 };
                if best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, i, j));
                }
            }
        }
        let (_, i, j) = best.unwrap();
        let b = tensors.swap_remove(j);
        let a = tensors.swap_remove(i);
        let drop: Vec<usize> = a
            .vars
            .iter()
            .chain(&b.vars)
            .copied()
            .filter(|&v| !open.contains(&v) && count_uses(&tensors, v) == 0)
            .collect();
        tensors.push(a.contract(&b, &drop)?);
    }
    let t = tensors
        .pop()
        .unwrap_or_else(|| Tensor::scalar(Complex64::new(1.0, 0.0)));
    let rest: Vec<usize> = t.vars.iter().copied().filter(|v| !open.contains(v)).collect();
    Ok(t.sum_out(&rest))
}
